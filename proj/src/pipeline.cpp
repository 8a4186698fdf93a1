#include "evdetect/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "evdetect/plot.hpp"

namespace evdetect {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Hashing and artifacts

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("sha256: cannot read " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return sha256_hex(bytes);
}

void ArtifactWriter::write(const std::string& relative, const std::string& bytes) {
  const auto p = path(relative);
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << bytes;
  out.close();
  if (!out) throw Error("write failed for " + p.string());
  record(relative);
}

void ArtifactWriter::record(const std::string& relative) {
  if (std::find(artifacts_.begin(), artifacts_.end(), relative) == artifacts_.end()) artifacts_.push_back(relative);
}

void ArtifactWriter::write_manifest(const std::string& status, const std::optional<std::string>& failed_stage,
                                    const std::vector<std::string>& stages, const json& extra) const {
  std::vector<std::string> sorted = artifacts_;
  std::sort(sorted.begin(), sorted.end());
  json arts = json::array();
  for (const auto& rel : sorted) {
    const auto p = path(rel);
    if (!std::filesystem::exists(p)) continue;
    arts.push_back({{"path", rel}, {"sha256", sha256_file(p)}, {"bytes", std::filesystem::file_size(p)}});
  }
  json manifest = {{"status", status},
                   {"failed_stage", failed_stage ? json(*failed_stage) : json(nullptr)},
                   {"stages", stages},
                   {"artifacts", arts}};
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) manifest[k] = v;
  std::filesystem::create_directories(out_dir_);
  std::ofstream out(path("manifest.json"), std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
}

std::string assignments_csv(const std::vector<std::string>& doc_ids, const std::vector<int>& labels) {
  if (doc_ids.size() != labels.size()) throw PreconditionError("assignments: ids and labels differ in length");
  std::string out = "doc_id,cluster\n";
  for (std::size_t i = 0; i < doc_ids.size(); ++i) {
    const auto& id = doc_ids[i];
    if (id.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : id) {
        if (c == '"') quoted += "\"\"";
        else quoted.push_back(c);
      }
      out += quoted + "\"";
    } else {
      out += id;
    }
    out += "," + std::to_string(labels[i]) + "\n";
  }
  return out;
}

std::vector<std::pair<std::string, int>> read_assignments_csv(std::istream& in) {
  std::vector<std::pair<std::string, int>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != "doc_id,cluster") throw ParseError("assignments: expected header doc_id,cluster");
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ParseError("assignments line " + std::to_string(lineno) + ": missing comma");
    std::string id = line.substr(0, comma);
    if (id.size() >= 2 && id.front() == '"' && id.back() == '"') {
      std::string unq;
      for (std::size_t i = 1; i + 1 < id.size(); ++i) {
        unq.push_back(id[i]);
        if (id[i] == '"' && id[i + 1] == '"') ++i;
      }
      id = unq;
    }
    try {
      out.emplace_back(id, std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ParseError("assignments line " + std::to_string(lineno) + ": bad cluster id");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

LoadedCorpus load_and_preprocess(const PipelineConfig& cfg) {
  LoadedCorpus out;
  std::ifstream in(cfg.corpus_path, std::ios::binary);
  if (!in) throw Error("cannot open corpus " + cfg.corpus_path.string());
  if (cfg.corpus_format == "gkg") {
    std::unordered_map<std::string, std::string> lookup;
    if (cfg.url_text_path) {
      std::ifstream lk(*cfg.url_text_path, std::ios::binary);
      if (!lk) throw Error("cannot open url_text " + cfg.url_text_path->string());
      lookup = load_url_text_lookup(lk);
    }
    auto parsed = parse_gkg(in, cfg.gkg_columns, cfg.gkg_strict, cfg.url_text_path ? &lookup : nullptr);
    out.documents = std::move(parsed.documents);
    out.skipped_rows = parsed.skipped;
  } else {
    out.documents = load_corpus(in);
  }
  if (out.documents.empty()) throw PreconditionError("corpus " + cfg.corpus_path.filename().string() + " has no documents");
  out.corpus = preprocess_all(out.documents, cfg.preprocess, cfg.corpus_path.filename().string());
  return out;
}

std::shared_ptr<const WordVectorTable> load_wordvec_table(const PipelineConfig& cfg) {
  if (!cfg.wordvec_path) throw ConfigError("[embedding] wordvec_path is required for word vectors");
  std::ifstream in(*cfg.wordvec_path);
  if (!in) throw ConfigError("cannot open word vectors " + cfg.wordvec_path->string());
  return std::make_shared<const WordVectorTable>(load_word_vectors(in));
}

BackendEmbedding embed_corpus(const PipelineConfig& cfg, const std::string& backend, const Corpus& corpus,
                              ProviderClient& client) {
  BackendEmbedding out;
  std::string model_id;
  if (backend == "tfidf") {
    auto model = std::make_shared<const TfidfModel>(fit_tfidf(corpus, cfg.tfidf_min_df, cfg.tfidf_max_vocab));
    out.embedder = [model](const std::vector<std::string>& texts) { return make_tfidf_embedder(*model)(texts); };
    model_id = "tfidf";
    if (cfg.embedding_mode == "doc") out.matrix = tfidf_transform(*model, corpus);
  } else if (backend == "wordvec") {
    auto table = load_wordvec_table(cfg);
    out.embedder = [table](const std::vector<std::string>& texts) { return make_wordvec_embedder(*table)(texts); };
    model_id = cfg.wordvec_path->filename().string();
    if (cfg.embedding_mode == "doc") out.matrix = average_word_embedding(*table, corpus, model_id);
  } else if (backend == "provider") {
    out.embedder = make_provider_embedder(client, client.config().embed_model);
    model_id = client.config().embed_model;
    if (cfg.embedding_mode == "doc") out.matrix = provider_embed(client, corpus, model_id);
  } else {
    throw ConfigError("unknown embedding backend \"" + backend + "\"");
  }
  if (cfg.embedding_mode == "keyword-mean") {
    KeywordOptions kw = cfg.keywords;
    kw.stopwords = &cfg.preprocess.stopwords;
    out.matrix = keyword_mean_embedding(corpus, out.embedder, kw, backend, model_id);
  }
  out.matrix.backend = backend;
  out.matrix.check();
  return out;
}

EmbeddingMatrix reduce_embeddings(const PipelineConfig& cfg, const EmbeddingMatrix& m) {
  if (cfg.reduction == ReductionMethod::none) return m;
  EmbeddingMatrix out;
  out.doc_ids = m.doc_ids;
  out.degenerate = m.degenerate;
  out.backend = m.backend;
  if (cfg.reduction == ReductionMethod::pca) {
    const int d = std::min<int>(cfg.pca_components, static_cast<int>(std::min(m.n(), m.F())));
    out.values = pca_transform(pca_fit(m.values, d), m.values);
    out.model_id = m.model_id + "+pca" + std::to_string(d);
  } else {
    UmapParams p = cfg.umap;
    p.seed = stage_seed(cfg, "umap");
    out.values = umap_fit_transform(m.values, p);
    out.model_id = m.model_id + "+umap" + std::to_string(p.n_components);
  }
  return out;
}

namespace {

PartitionPlan make_plan(const PipelineConfig& cfg, const Corpus& corpus) {
  const std::uint64_t seed = cfg.validation_seed ? *cfg.validation_seed : stage_seed(cfg, "partition");
  return split_partitions(corpus, cfg.partitions, cfg.val_fraction, seed);
}

ClusterSpec seeded_spec(const PipelineConfig& cfg) {
  ClusterSpec spec = cfg.cluster;
  spec.seed = stage_seed(cfg, "cluster");
  return spec;
}

ProviderConfig seeded_provider(const PipelineConfig& cfg) {
  ProviderConfig p = cfg.provider;
  p.jitter_seed = stage_seed(cfg, "provider-jitter");
  return p;
}

Matrix plane_of(const Matrix& X) {
  if (X.cols() == 2) return X;
  if (X.cols() == 1) {
    Matrix Y = Matrix::Zero(X.rows(), 2);
    Y.col(0) = X.col(0);
    return Y;
  }
  const int d = static_cast<int>(std::min<Eigen::Index>(2, X.rows()));
  Matrix Y = pca_transform(pca_fit(X, d), X);
  if (Y.cols() < 2) {
    Matrix Z = Matrix::Zero(X.rows(), 2);
    Z.leftCols(Y.cols()) = Y;
    return Z;
  }
  return Y;
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg) {
  RunResult result;
  cfg.validate();  // missing inputs fail before any stage runs
  ArtifactWriter out(cfg.out_dir);
  std::string stage = "setup";
  try {
    std::filesystem::create_directories(cfg.out_dir);
    ProviderClient client(seeded_provider(cfg));

    stage = "ingest";
    LoadedCorpus loaded = load_and_preprocess(cfg);
    result.stages.push_back(stage);
    stage = "preprocess";
    std::size_t degenerate = 0;
    for (const auto& d : loaded.corpus.documents) degenerate += d.degenerate ? 1 : 0;
    result.stages.push_back(stage);

    stage = "embed";
    BackendEmbedding emb = embed_corpus(cfg, cfg.backend, loaded.corpus, client);
    write_embedding_matrix(out.path("embeddings.embmat"), emb.matrix);
    out.record("embeddings.embmat");
    out.record("embeddings.embmat.json");
    result.stages.push_back(stage);

    stage = "reduce";
    const EmbeddingMatrix reduced = reduce_embeddings(cfg, emb.matrix);
    if (cfg.reduction != ReductionMethod::none) {
      write_embedding_matrix(out.path("reduced.embmat"), reduced);
      out.record("reduced.embmat");
      out.record("reduced.embmat.json");
    }
    result.stages.push_back(stage);

    stage = "cluster";
    const ClusterSpec spec = seeded_spec(cfg);
    const ClusteringResult clustering = fit_clusters(spec, reduced.values);
    json cj = to_json(clustering);
    try {
      cj["silhouette"] = silhouette(reduced.values, clustering.labels);
      const double ch = calinski_harabasz(reduced.values, clustering.labels);
      cj["calinski_harabasz"] = std::isfinite(ch) ? json(ch) : json("inf");
    } catch (const PreconditionError&) {
      cj["silhouette"] = nullptr;
      cj["calinski_harabasz"] = nullptr;
    }
    out.write("clustering.json", cj.dump(2) + "\n");
    out.write("assignments.csv", assignments_csv(reduced.doc_ids, clustering.labels));
    result.stages.push_back(stage);

    stage = "validate";
    const PartitionPlan plan = make_plan(cfg, loaded.corpus);
    const StabilityProfile profile = stability_profile(reduced, spec, plan);
    json pj = to_json(profile);
    pj["algorithm"] = to_string(spec.algorithm);
    pj["backend"] = cfg.backend;
    out.write("csai_report.json", pj.dump(2) + "\n");
    result.stages.push_back(stage);

    stage = "postdetect";
    std::vector<std::string> texts;
    for (const auto& d : loaded.documents) texts.push_back(d.raw_text);
    TextEmbedder iptc_embedder = emb.embedder;
    if (cfg.iptc_embedder == "wordvec") {
      auto table = load_wordvec_table(cfg);
      iptc_embedder = [table](const std::vector<std::string>& t) { return make_wordvec_embedder(*table)(t); };
    }
    PostdetectOptions post = cfg.postdetect;
    const EventReport events = detect_events(loaded.corpus, texts, reduced.values, clustering.labels, client,
                                             iptc_embedder, post);
    out.write("events.json", to_json(events).dump(2) + "\n");
    out.write("events.txt", format_event_table(events));
    result.stages.push_back(stage);

    stage = "plots";
    out.write("plots/scatter.svg", svg_scatter(plane_of(reduced.values), clustering.labels,
                                               to_string(spec.algorithm) + " on " + cfg.backend));
    if (const auto* curve = std::get_if<WssCurve>(&clustering.extras))
      out.write("plots/elbow.svg", svg_elbow(*curve, "WSS by k"));
    if (const auto* table = std::get_if<MergeTable>(&clustering.extras))
      out.write("plots/dendrogram.svg", svg_dendrogram(*table, "dendrogram (" + to_string(spec.linkage) + ")"));
    if (const auto* tree = std::get_if<CondensedTree>(&clustering.extras))
      out.write("plots/condensed.svg", svg_condensed(*tree, "condensed tree"));
    std::vector<BarGroup> bars;
    for (std::size_t j = 0; j < profile.per_partition_csai.size(); ++j)
      bars.push_back({"P" + std::to_string(j + 1), {profile.per_partition_csai[j]}, {}});
    out.write("plots/csai_partitions.svg", svg_bars(bars, {cfg.backend}, "CSAI per partition", "CSAI"));
    result.stages.push_back(stage);

    json extra = {{"seed", cfg.seed},
                  {"documents", loaded.corpus.documents.size()},
                  {"degenerate_documents", degenerate},
                  {"skipped_rows", loaded.skipped_rows},
                  {"clusters", clustering.k},
                  {"csai", profile.mean}};
    out.write_manifest("ok", std::nullopt, result.stages, extra);
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.failed_stage = stage;
    result.error = e.what();
    out.write_manifest("failed", stage, result.stages, {{"error", e.what()}});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Embedding x algorithm comparison

void flag_best(std::vector<CompareCell>& cells) {
  std::map<std::string, std::vector<CompareCell*>> by_backend;
  for (auto& c : cells) {
    c.best = false;
    by_backend[c.backend].push_back(&c);
  }
  for (auto& [backend, group] : by_backend) {
    if (group.size() < 2) continue;
    CompareCell* best = nullptr;
    for (auto* c : group) {
      if (!c->error.empty() || !std::isfinite(c->csai_mean)) continue;
      if (!best || c->csai_mean < best->csai_mean) best = c;
    }
    if (best) best->best = true;
  }
}

std::string compare_csv(const std::vector<CompareCell>& cells) {
  std::string out = "backend,algorithm,csai_mean,csai_stddev,best,error\n";
  char buf[64];
  for (const auto& c : cells) {
    out += c.backend + "," + c.algorithm + ",";
    if (c.error.empty()) {
      std::snprintf(buf, sizeof buf, "%.12g,%.12g", c.csai_mean, c.csai_stddev);
      out += buf;
    } else {
      out += ",";
    }
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += std::string(",") + (c.best ? "1" : "0") + "," + err + "\n";
  }
  return out;
}

CompareResult compare_embeddings(const PipelineConfig& cfg) {
  if (cfg.compare_backends.empty() || cfg.compare_algorithms.empty())
    throw ConfigError("[compare] needs at least one backend and one algorithm");
  for (const auto& a : cfg.compare_algorithms) parse_algorithm(a);
  cfg.validate();
  CompareResult result;
  ArtifactWriter out(cfg.out_dir);
  ProviderClient client(seeded_provider(cfg));
  const LoadedCorpus loaded = load_and_preprocess(cfg);
  const PartitionPlan plan = make_plan(cfg, loaded.corpus);
  for (const auto& backend : cfg.compare_backends) {
    std::optional<EmbeddingMatrix> reduced;
    std::string backend_error;
    try {
      reduced = reduce_embeddings(cfg, embed_corpus(cfg, backend, loaded.corpus, client).matrix);
    } catch (const std::exception& e) {
      backend_error = e.what();
    }
    for (const auto& algorithm : cfg.compare_algorithms) {
      CompareCell cell;
      cell.backend = backend;
      cell.algorithm = algorithm;
      if (!reduced) {
        cell.error = backend_error;
      } else {
        ClusterSpec spec = seeded_spec(cfg);
        spec.algorithm = parse_algorithm(algorithm);
        try {
          const StabilityProfile profile = stability_profile(*reduced, spec, plan);
          cell.csai_mean = profile.mean;
          cell.csai_stddev = profile.stddev;
          cell.per_partition = profile.per_partition_csai;
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
      }
      if (!cell.error.empty()) {
        result.exit_code = 1;
        cell.csai_mean = cell.csai_stddev = std::numeric_limits<double>::quiet_NaN();
      }
      result.cells.push_back(std::move(cell));
    }
  }
  flag_best(result.cells);

  out.write("compare_grid.csv", compare_csv(result.cells));
  json cells = json::array();
  for (const auto& c : result.cells) {
    cells.push_back({{"backend", c.backend},
                     {"algorithm", c.algorithm},
                     {"csai_mean", c.error.empty() ? json(c.csai_mean) : json(nullptr)},
                     {"csai_stddev", c.error.empty() ? json(c.csai_stddev) : json(nullptr)},
                     {"per_partition_csai", c.per_partition},
                     {"best", c.best},
                     {"error", c.error}});
  }
  out.write("compare.json", json{{"cells", cells}, {"partitions", plan.K}, {"seed", cfg.seed}}.dump(2) + "\n");
  std::vector<BarGroup> groups;
  for (const auto& backend : cfg.compare_backends) {
    BarGroup g{backend, {}, {}};
    for (const auto& c : result.cells) {
      if (c.backend != backend) continue;
      g.values.push_back(c.csai_mean);
      g.highlighted.push_back(c.best);
    }
    groups.push_back(std::move(g));
  }
  out.write("compare_bars.svg", svg_bars(groups, cfg.compare_algorithms, "CSAI by embedding and algorithm", "CSAI"));
  out.write_manifest(result.exit_code == 0 ? "ok" : "failed", std::nullopt, {"compare"},
                     {{"seed", cfg.seed}, {"cells", result.cells.size()}});
  return result;
}

}  // namespace evdetect
