#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evdetect/cluster.hpp"
#include "evdetect/corpus.hpp"
#include "evdetect/dimred.hpp"
#include "evdetect/embed.hpp"
#include "evdetect/llm_client.hpp"
#include "evdetect/postdetect.hpp"
#include "evdetect/validate.hpp"
#include "json.hpp"

namespace evdetect {

enum class ReductionMethod { none, pca, umap };

struct PipelineConfig {
  // [corpus]
  std::filesystem::path corpus_path;
  std::string corpus_format = "jsonl";  // jsonl | gkg
  std::optional<std::filesystem::path> url_text_path;
  bool gkg_strict = false;
  GkgColumnMap gkg_columns;
  // [preprocess]
  PreprocessOptions preprocess;
  std::optional<std::filesystem::path> stopwords_path;
  // [embedding]
  std::string backend = "tfidf";  // tfidf | wordvec | provider
  std::optional<std::filesystem::path> wordvec_path;
  std::string embedding_mode = "doc";  // doc | keyword-mean
  int tfidf_min_df = 1;
  int tfidf_max_vocab = 0;
  KeywordOptions keywords;
  // [reduction]
  ReductionMethod reduction = ReductionMethod::none;
  int pca_components = 10;
  UmapParams umap;
  // [cluster]
  ClusterSpec cluster;
  // [validation]
  int partitions = 5;
  double val_fraction = 0.2;
  std::optional<std::uint64_t> validation_seed;
  // [provider]
  ProviderConfig provider;
  // [postdetect]
  PostdetectOptions postdetect;
  std::string iptc_embedder = "backend";  // backend | wordvec
  // [compare]
  std::vector<std::string> compare_backends{"tfidf", "wordvec", "provider"};
  std::vector<std::string> compare_algorithms{"kmeans", "pam", "agglomerative", "gmm", "hdbscan"};
  // [run]
  std::uint64_t seed = 42;
  std::filesystem::path out_dir = "out";
  std::filesystem::path config_dir = ".";  // relative paths resolve against this

  /// Throws ConfigError on inconsistent settings or missing input files.
  void validate() const;
};

/// Flat INI file: [section] headers and key = value lines. Unknown sections or
/// keys are errors. Relative paths resolve against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = ".");

/// Per-stage seeds, all derived from the single config seed.
std::uint64_t stage_seed(const PipelineConfig& cfg, const std::string& stage);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view data);

struct LoadedCorpus {
  std::vector<Document> documents;
  Corpus corpus;
  std::size_t skipped_rows = 0;
};

LoadedCorpus load_and_preprocess(const PipelineConfig& cfg);

struct BackendEmbedding {
  EmbeddingMatrix matrix;
  TextEmbedder embedder;  // embeds new texts the same way (owns its model)
};

/// Embeds the corpus with the named backend (tfidf | wordvec | provider) in
/// the configured mode (doc | keyword-mean).
BackendEmbedding embed_corpus(const PipelineConfig& cfg, const std::string& backend, const Corpus& corpus,
                              ProviderClient& client);

/// Word vectors from cfg.wordvec_path; ConfigError when unset.
std::shared_ptr<const WordVectorTable> load_wordvec_table(const PipelineConfig& cfg);

/// Applies the configured reduction; returns the input when none.
EmbeddingMatrix reduce_embeddings(const PipelineConfig& cfg, const EmbeddingMatrix& m);

/// Writes the bytes, records the artifact, creating parent directories.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path out_dir) : out_dir_(std::move(out_dir)) {}
  std::filesystem::path path(const std::string& relative) const { return out_dir_ / relative; }
  void write(const std::string& relative, const std::string& bytes);
  void record(const std::string& relative);  // file written by someone else
  const std::vector<std::string>& artifacts() const { return artifacts_; }
  /// manifest.json: status, failed stage, completed stages, artifacts with sha256.
  void write_manifest(const std::string& status, const std::optional<std::string>& failed_stage,
                      const std::vector<std::string>& stages, const nlohmann::json& extra = {}) const;

 private:
  std::filesystem::path out_dir_;
  std::vector<std::string> artifacts_;
};

std::string assignments_csv(const std::vector<std::string>& doc_ids, const std::vector<int>& labels);
/// Parses "doc_id,cluster" CSV.
std::vector<std::pair<std::string, int>> read_assignments_csv(std::istream& in);

struct RunResult {
  int exit_code = 0;
  std::optional<std::string> failed_stage;
  std::string error;
  std::vector<std::string> stages;
};

/// ingest -> preprocess -> embed -> reduce -> cluster -> validate -> postdetect -> plots.
RunResult run_pipeline(const PipelineConfig& cfg);

struct CompareCell {
  std::string backend;
  std::string algorithm;
  double csai_mean = 0.0;
  double csai_stddev = 0.0;
  std::vector<double> per_partition;
  bool best = false;  // lowest mean within its backend (only with >= 2 algorithms)
  std::string error;  // non-empty when the cell failed
};

struct CompareResult {
  std::vector<CompareCell> cells;  // backend-major, in config order
  int exit_code = 0;
};

/// Backends x algorithms, each scored by stability_profile on the same plan.
/// Writes compare_grid.csv, compare_bars.svg and manifest.json.
CompareResult compare_embeddings(const PipelineConfig& cfg);

/// Marks, per backend, the algorithm with the lowest mean CSAI.
void flag_best(std::vector<CompareCell>& cells);

std::string compare_csv(const std::vector<CompareCell>& cells);

}  // namespace evdetect
