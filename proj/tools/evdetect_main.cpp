// evdetect command-line front end.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "evdetect/pipeline.hpp"
#include "evdetect/plot.hpp"

using namespace evdetect;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool mock = false;
};

PipelineConfig make_config(const Globals& g) {
  PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.seed) cfg.seed = *g.seed;
  if (g.mock) cfg.provider.mode = ProviderMode::mock;
  return cfg;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << bytes;
}

std::vector<int> labels_for(const std::vector<std::string>& ids, const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error("cannot open " + csv_path);
  std::map<std::string, int> by_id;
  for (auto& [id, label] : read_assignments_csv(in)) by_id[id] = label;
  std::vector<int> labels;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw PreconditionError("assignments: no row for document \"" + id + "\"");
    labels.push_back(it->second);
  }
  return labels;
}

// The clustering.json "extras" payload when it has the wanted type, else the document itself.
json extras_or_self(const json& doc, const std::string& type) {
  if (doc.is_object() && doc.contains("extras")) {
    const auto& ex = doc["extras"];
    if (!ex.is_object() || ex.value("type", "") != type)
      throw PreconditionError("artifact carries no " + type + " (clustering algorithm " + doc.value("algorithm", "?") + ")");
    return ex;
  }
  return doc;
}

std::string plot_artifact(const std::string& kind, const std::string& input, const std::string& labels_csv) {
  if (kind == "scatter") {
    const EmbeddingMatrix m = read_embedding_matrix(input);
    if (labels_csv.empty()) throw PreconditionError("scatter needs --labels assignments.csv");
    Matrix Y = m.values;
    if (Y.cols() > 2) Y = pca_transform(pca_fit(Y, 2), Y);
    if (Y.cols() < 2) throw PreconditionError("scatter needs at least 2 columns");
    return svg_scatter(Y, labels_for(m.doc_ids, labels_csv), m.backend + " / " + m.model_id);
  }
  const json doc = read_json(input);
  if (kind == "elbow") {
    const json c = extras_or_self(doc, "wss_curve");
    const json& d = c.contains("data") ? c["data"] : c;
    if (!d.is_object() || !d.contains("wss")) throw PreconditionError("elbow plot needs a WSS curve");
    WssCurve curve{d.at("ks").get<std::vector<int>>(), d.at("wss").get<std::vector<double>>(), d.at("chosen_k").get<int>(),
                   d.value("flat", false)};
    return svg_elbow(curve, "WSS by k");
  }
  if (kind == "dendrogram") {
    const json c = extras_or_self(doc, "merge_table");
    const json& d = c.is_object() ? c.at("data") : c;
    if (!d.is_array() || (!d.empty() && !d[0].is_array())) throw PreconditionError("dendrogram needs a merge table");
    MergeTable t;
    for (const auto& r : d) t.rows.push_back({r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<double>(), r.at(3).get<int>()});
    return svg_dendrogram(t, "dendrogram");
  }
  if (kind == "condensed") {
    const json c = extras_or_self(doc, "condensed_tree");
    const json& d = c.is_object() ? c.at("data") : c;
    if (!d.is_array() || (!d.empty() && !d[0].is_object())) throw PreconditionError("condensed plot needs a condensed tree");
    CondensedTree t;
    int root = std::numeric_limits<int>::max();
    for (const auto& r : d) {
      t.rows.push_back({r.at("parent").get<int>(), r.at("child").get<int>(), r.at("lambda").get<double>(), r.at("child_size").get<int>()});
      root = std::min(root, t.rows.back().parent);
    }
    t.n_points = c.is_object() ? c.value("n_points", root) : root;
    if (c.is_object() && c.contains("selected")) t.selected = c["selected"].get<std::vector<int>>();
    return svg_condensed(t, "condensed tree");
  }
  if (kind == "bars") {
    if (doc.is_object() && doc.contains("cells")) {
      std::vector<std::string> series;
      std::vector<BarGroup> groups;
      for (const auto& cell : doc["cells"]) {
        const auto backend = cell.at("backend").get<std::string>();
        const auto algorithm = cell.at("algorithm").get<std::string>();
        if (std::find(series.begin(), series.end(), algorithm) == series.end()) series.push_back(algorithm);
        auto g = std::find_if(groups.begin(), groups.end(), [&](const BarGroup& b) { return b.name == backend; });
        if (g == groups.end()) {
          groups.push_back({backend, {}, {}});
          g = groups.end() - 1;
        }
        g->values.push_back(cell["csai_mean"].is_number() ? cell["csai_mean"].get<double>() : std::nan(""));
        g->highlighted.push_back(cell.value("best", false));
      }
      return svg_bars(groups, series, "CSAI by embedding and algorithm", "CSAI");
    }
    if (doc.is_object() && doc.contains("per_partition_csai")) {
      std::vector<BarGroup> groups;
      const auto values = doc["per_partition_csai"].get<std::vector<double>>();
      for (std::size_t j = 0; j < values.size(); ++j) groups.push_back({"P" + std::to_string(j + 1), {values[j]}, {}});
      return svg_bars(groups, {doc.value("backend", std::string("csai"))}, "CSAI per partition", "CSAI");
    }
    throw PreconditionError("bars plot needs compare.json or csai_report.json");
  }
  throw PreconditionError("unknown plot kind \"" + kind + "\" (scatter, elbow, bars, dendrogram, condensed)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"News event detection: embeddings, clustering, CSAI stability and event reports"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "INI configuration file");
  app.add_option("--out-dir", g.out_dir, "output directory (overrides [run] out_dir)");
  auto* seed_opt = app.add_option("--seed", seed_value, "pipeline seed (overrides [run] seed)");
  app.add_flag("--mock", g.mock, "force the deterministic mock provider");

  auto* run = app.add_subcommand("run", "full pipeline");
  auto* ingest = app.add_subcommand("ingest", "load and normalize the corpus");
  auto* embed = app.add_subcommand("embed", "write embeddings.embmat");
  std::string input, output, kind, labels_csv;
  auto* reduce = app.add_subcommand("reduce", "apply the configured reduction to an EMBMAT01 file");
  reduce->add_option("--input", input, "EMBMAT01 file")->required();
  reduce->add_option("--output", output, "output file (default <out-dir>/reduced.embmat)");
  auto* cluster = app.add_subcommand("cluster", "cluster an EMBMAT01 file");
  cluster->add_option("--input", input, "EMBMAT01 file")->required();
  auto* validate = app.add_subcommand("validate", "CSAI stability profile of an EMBMAT01 file");
  validate->add_option("--input", input, "EMBMAT01 file")->required();
  auto* compare = app.add_subcommand("compare", "CSAI grid over embedding backends and algorithms");
  auto* report = app.add_subcommand("report", "event report from assignments");
  report->add_option("--assignments", labels_csv, "assignments CSV")->required();
  report->add_option("--input", input, "EMBMAT01 file used to pick representatives (default: re-embed)");
  auto* plot = app.add_subcommand("plot", "render an artifact as SVG");
  plot->add_option("--kind", kind, "scatter | elbow | bars | dendrogram | condensed")->required();
  plot->add_option("--input", input, "artifact: EMBMAT01, clustering.json, compare.json, csai_report.json")->required();
  plot->add_option("--labels", labels_csv, "assignments CSV (scatter)");
  plot->add_option("--output", output, "SVG path")->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed_value;

  try {
    if (*plot) {
      write_file(output, plot_artifact(kind, input, labels_csv));
      return 0;
    }
    const PipelineConfig cfg = make_config(g);
    if (*run) {
      const RunResult r = run_pipeline(cfg);
      if (r.exit_code != 0) {
        std::cerr << "evdetect: stage " << r.failed_stage.value_or("?") << " failed: " << r.error << '\n';
        return r.exit_code;
      }
      std::cout << "run complete: " << (cfg.out_dir / "manifest.json").string() << '\n';
      return 0;
    }
    if (*compare) {
      const CompareResult r = compare_embeddings(cfg);
      std::cout << compare_csv(r.cells);
      return r.exit_code;
    }
    if (*ingest || *embed || *report) cfg.validate();
    ArtifactWriter out(cfg.out_dir);
    if (*ingest) {
      const LoadedCorpus loaded = load_and_preprocess(cfg);
      std::string lines;
      std::size_t degenerate = 0;
      for (const auto& d : loaded.corpus.documents) {
        lines += json{{"id", d.id}, {"tokens", d.tokens}, {"degenerate", d.degenerate}}.dump() + "\n";
        degenerate += d.degenerate;
      }
      out.write("corpus_clean.jsonl", lines);
      std::cout << loaded.corpus.documents.size() << " documents, " << degenerate << " degenerate, "
                << loaded.skipped_rows << " rows skipped\n";
      return 0;
    }
    if (*embed) {
      const LoadedCorpus loaded = load_and_preprocess(cfg);
      ProviderClient client(cfg.provider);
      const BackendEmbedding e = embed_corpus(cfg, cfg.backend, loaded.corpus, client);
      std::filesystem::create_directories(cfg.out_dir);
      write_embedding_matrix(out.path("embeddings.embmat"), e.matrix);
      std::cout << e.matrix.n() << " x " << e.matrix.F() << " " << e.matrix.backend << " embeddings\n";
      return 0;
    }
    if (*reduce) {
      const EmbeddingMatrix reduced = reduce_embeddings(cfg, read_embedding_matrix(input));
      const std::filesystem::path path = output.empty() ? out.path("reduced.embmat") : std::filesystem::path(output);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      write_embedding_matrix(path, reduced);
      return 0;
    }
    if (*cluster) {
      const EmbeddingMatrix m = read_embedding_matrix(input);
      ClusterSpec spec = cfg.cluster;
      spec.seed = stage_seed(cfg, "cluster");
      const ClusteringResult r = fit_clusters(spec, m.values);
      out.write("clustering.json", to_json(r).dump(2) + "\n");
      out.write("assignments.csv", assignments_csv(m.doc_ids, r.labels));
      std::cout << r.algorithm << ": " << r.k << " clusters\n";
      return 0;
    }
    if (*validate) {
      const EmbeddingMatrix m = read_embedding_matrix(input);
      ClusterSpec spec = cfg.cluster;
      spec.seed = stage_seed(cfg, "cluster");
      const std::uint64_t pseed = cfg.validation_seed ? *cfg.validation_seed : stage_seed(cfg, "partition");
      const PartitionPlan plan = split_partitions(m.doc_ids, cfg.partitions, cfg.val_fraction, pseed);
      const StabilityProfile p = stability_profile(m, spec, plan);
      json pj = to_json(p);
      pj["algorithm"] = to_string(spec.algorithm);
      pj["backend"] = m.backend;
      out.write("csai_report.json", pj.dump(2) + "\n");
      std::cout << "CSAI mean " << p.mean << " stddev " << p.stddev << '\n';
      return 0;
    }
    if (*report) {
      const LoadedCorpus loaded = load_and_preprocess(cfg);
      ProviderClient client(cfg.provider);
      BackendEmbedding e = embed_corpus(cfg, cfg.backend, loaded.corpus, client);
      Matrix X = e.matrix.values;
      if (!input.empty()) X = read_embedding_matrix(input).select(loaded.corpus.ids()).values;
      std::vector<std::string> texts;
      for (const auto& d : loaded.documents) texts.push_back(d.raw_text);
      TextEmbedder iptc = e.embedder;
      if (cfg.iptc_embedder == "wordvec") {
        auto table = load_wordvec_table(cfg);
        iptc = [table](const std::vector<std::string>& t) { return make_wordvec_embedder(*table)(t); };
      }
      const EventReport events =
          detect_events(loaded.corpus, texts, X, labels_for(loaded.corpus.ids(), labels_csv), client, iptc, cfg.postdetect);
      out.write("events.json", to_json(events).dump(2) + "\n");
      out.write("events.txt", format_event_table(events));
      std::cout << format_event_table(events);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "evdetect: config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "evdetect: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
