#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "evdetect/pipeline.hpp"
#include "evdetect/plot.hpp"
#include "fixtures.hpp"
#include "json.hpp"

using namespace evdetect;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = EVDETECT_SOURCE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "evdetect_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PipelineConfig example_config(const std::string& name) {
  PipelineConfig cfg = load_config(kSource / "configs" / "example.ini");
  cfg.provider.mode = ProviderMode::mock;
  cfg.out_dir = scratch(name);
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + EVDETECT_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config: sections, relative paths and unknown keys") {
  std::istringstream in("[run]\nseed = 7\n[corpus]\npath = data/x.jsonl\n[cluster]\nalgorithm = hdbscan\nmin_cluster_size = 4\n");
  const auto cfg = parse_config(in, "/base");
  CHECK(cfg.seed == 7);
  CHECK(cfg.corpus_path == fs::path("/base/data/x.jsonl"));
  CHECK(cfg.cluster.algorithm == Algorithm::hdbscan);
  CHECK(cfg.cluster.hdbscan.min_cluster_size == 4);
  std::istringstream bad_key("[run]\nsede = 7\n");
  CHECK_THROWS_AS(parse_config(bad_key), ConfigError);
  std::istringstream bad_section("[nope]\nx = 1\n");
  CHECK_THROWS_AS(parse_config(bad_section), ConfigError);
  std::istringstream bad_value("[cluster]\nalgorithm = dbscan\n");
  CHECK_THROWS_AS(parse_config(bad_value), ConfigError);
}

TEST_CASE("config: validation catches missing files") {
  std::istringstream in("[corpus]\npath = /definitely/missing.jsonl\n");
  const auto cfg = parse_config(in);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("stage seeds derive from the single config seed") {
  PipelineConfig a, b;
  b.seed = 43;
  CHECK(stage_seed(a, "cluster") == derive_seed(42, "cluster"));
  CHECK(stage_seed(a, "cluster") != stage_seed(a, "umap"));
  CHECK(stage_seed(a, "cluster") != stage_seed(b, "cluster"));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("assignments CSV round trip with quoting") {
  const std::string csv = assignments_csv({"a", "b,c", "q\"d"}, {0, -1, 2});
  std::istringstream in(csv);
  const auto rows = read_assignments_csv(in);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].first == "b,c");
  CHECK(rows[1].second == -1);
  CHECK(rows[2].first == "q\"d");
}

TEST_CASE("run: all artifact kinds, verified hashes, repeatable manifest") {
  const PipelineConfig cfg = example_config("run_a");
  const RunResult r = run_pipeline(cfg);
  REQUIRE_MESSAGE(r.exit_code == 0, r.error);
  for (const char* f : {"embeddings.embmat", "assignments.csv", "csai_report.json", "events.json", "events.txt",
                        "plots/scatter.svg", "manifest.json"})
    CHECK_MESSAGE(fs::exists(cfg.out_dir / f), f);
  const auto manifest = nlohmann::json::parse(fixtures::slurp((cfg.out_dir / "manifest.json").string()));
  CHECK(manifest["status"] == "ok");
  for (const auto& a : manifest["artifacts"]) {
    const std::string path = a["path"];
    CHECK(sha256_file(cfg.out_dir / path) == a["sha256"].get<std::string>());
    if (path.ends_with(".svg")) CHECK(fixtures::svg_well_formed(fixtures::slurp((cfg.out_dir / path).string())));
  }
  PipelineConfig again = cfg;
  again.out_dir = scratch("run_b");
  REQUIRE(run_pipeline(again).exit_code == 0);
  CHECK(fixtures::slurp((cfg.out_dir / "manifest.json").string()) ==
        fixtures::slurp((again.out_dir / "manifest.json").string()));
}

TEST_CASE("run: missing corpus is a config error raised before any stage") {
  PipelineConfig cfg = example_config("run_missing");
  cfg.corpus_path = "/definitely/missing.jsonl";
  CHECK_THROWS_AS(run_pipeline(cfg), ConfigError);
  CHECK_FALSE(fs::exists(cfg.out_dir / "manifest.json"));
  CHECK_FALSE(fs::exists(cfg.out_dir / "embeddings.embmat"));
}

TEST_CASE("run: a failing stage keeps earlier artifacts") {
  PipelineConfig cfg = example_config("run_fail_cluster");
  cfg.cluster.k = 1000;  // more clusters than training rows
  const RunResult r = run_pipeline(cfg);
  CHECK(r.exit_code != 0);
  CHECK(r.failed_stage == std::optional<std::string>("cluster"));
  CHECK(fs::exists(cfg.out_dir / "embeddings.embmat"));
}

TEST_CASE("compare: grid shape, flags and equivalence with direct profiles") {
  PipelineConfig cfg = example_config("compare_2x2");
  cfg.compare_backends = {"tfidf", "provider"};
  cfg.compare_algorithms = {"kmeans", "agglomerative"};
  const CompareResult r = compare_embeddings(cfg);
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.cells.size() == 4);
  int flagged = 0;
  for (const auto& c : r.cells) flagged += c.best;
  CHECK(flagged == 2);
  const std::string svg = fixtures::slurp((cfg.out_dir / "compare_bars.svg").string());
  CHECK(fixtures::svg_well_formed(svg));

  // cell (tfidf, kmeans) recomputed directly
  const LoadedCorpus lc = load_and_preprocess(cfg);
  ProviderClient client(cfg.provider);
  const EmbeddingMatrix reduced = reduce_embeddings(cfg, embed_corpus(cfg, "tfidf", lc.corpus, client).matrix);
  const PartitionPlan plan =
      split_partitions(lc.corpus, cfg.partitions, cfg.val_fraction, cfg.validation_seed.value_or(stage_seed(cfg, "partition")));
  ClusterSpec spec = cfg.cluster;
  spec.algorithm = Algorithm::kmeans;
  spec.seed = stage_seed(cfg, "cluster");
  const auto prof = stability_profile(reduced, spec, plan);
  CHECK(r.cells[0].csai_mean == prof.mean);
  CHECK(r.cells[0].per_partition == prof.per_partition_csai);

  PipelineConfig single = cfg;
  single.out_dir = scratch("compare_1x1");
  single.compare_backends = {"tfidf"};
  single.compare_algorithms = {"kmeans"};
  const auto one = compare_embeddings(single);
  REQUIRE(one.cells.size() == 1);
  CHECK_FALSE(one.cells[0].best);
}

TEST_CASE("plots: deterministic, one marker per point, noise gray") {
  Matrix Y(3, 2);
  Y << 0, 0, 1, 1, 2, 0;
  const std::string a = svg_scatter(Y, {0, 1, -1});
  CHECK(a == svg_scatter(Y, {0, 1, -1}));
  std::size_t circles = 0;
  for (std::size_t p = a.find("<circle"); p != std::string::npos; p = a.find("<circle", p + 1)) ++circles;
  CHECK(circles == 3);
  CHECK(a.find(kNoiseColor) != std::string::npos);
  CHECK(fixtures::svg_well_formed(a));
  WssCurve c;
  c.ks = {1, 2, 3};
  c.wss = {10, 2, 1};
  c.chosen_k = 2;
  const std::string e = svg_elbow(c);
  CHECK(e.find("<polyline") != std::string::npos);
  CHECK(fixtures::svg_well_formed(e));
  CHECK(cluster_palette().size() == 20);
}

TEST_CASE("cli binary: run, subcommands and exit codes") {
  const fs::path out = scratch("cli");
  const std::string base = "--config \"" + (kSource / "configs" / "example.ini").string() + "\" --mock --out-dir \"" + out.string() + "\"";
  CHECK(run_cli(base + " run") == 0);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(run_cli(base + " ingest") == 0);
  CHECK(fs::exists(out / "corpus_clean.jsonl"));
  CHECK(run_cli(base + " cluster --input \"" + (out / "reduced.embmat").string() + "\"") == 0);
  CHECK(run_cli(base + " validate --input \"" + (out / "reduced.embmat").string() + "\"") == 0);
  CHECK(run_cli(base + " report --assignments \"" + (out / "assignments.csv").string() + "\"") == 0);
  CHECK(run_cli(base + " plot --kind scatter --input \"" + (out / "reduced.embmat").string() + "\" --labels \"" +
                (out / "assignments.csv").string() + "\" --output \"" + (out / "again.svg").string() + "\"") == 0);
  CHECK(run_cli(base + " plot --kind scatter --input \"" + (out / "reduced.embmat").string() + "\" --labels \"" +
                (out / "assignments.csv").string() + "\" --output \"" + (out / "again2.svg").string() + "\"") == 0);
  const std::string svg = fixtures::slurp((out / "again.svg").string());
  CHECK(svg == fixtures::slurp((out / "again2.svg").string()));
  std::size_t circles = 0;
  for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
  CHECK(circles == 200);
  CHECK(run_cli(base + " plot --kind elbow --input \"" + (out / "csai_report.json").string() + "\" --output \"" +
                (out / "x.svg").string() + "\"") != 0);
  CHECK(run_cli("--config /definitely/missing.ini run") == 2);
  const fs::path bad_ini = out / "bad.ini";
  std::ofstream(bad_ini) << "[corpus]\npath = /definitely/missing.jsonl\n";
  CHECK(run_cli("--config \"" + bad_ini.string() + "\" --out-dir \"" + out.string() + "/bad\" run") == 2);
  CHECK(run_cli(base + " frobnicate") != 0);
}
