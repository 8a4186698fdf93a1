#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "evdetect/common.hpp"
#include "evdetect/corpus.hpp"

namespace evdetect {

class ProviderClient;

/// Document vectors, one row per document in corpus order.
struct EmbeddingMatrix {
  Matrix values;
  std::vector<std::string> doc_ids;
  std::string backend;
  std::string model_id;
  std::vector<bool> degenerate;  // zero rows produced from all-OOV/empty docs

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index F() const { return values.cols(); }

  /// Throws PreconditionError when ids/flags are misaligned or values non-finite.
  void check() const;
  /// Rows for the given ids, in the given order.
  EmbeddingMatrix select(const std::vector<std::string>& ids) const;
};

// ---------------------------------------------------------------------------
// EMBMAT01 binary format: magic "EMBMAT01", u32 LE n, u32 LE F, n*F float32 LE
// row-major. Sidecar "<path>.json" holds {backend, model_id, doc_ids}.

void write_embedding_matrix(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_embedding_matrix(const std::filesystem::path& path);
void write_embmat_binary(std::ostream& out, const Matrix& values);
Matrix read_embmat_binary(std::istream& in);

// ---------------------------------------------------------------------------
// TF-IDF

struct TfidfModel {
  std::unordered_map<std::string, int> vocabulary;  // term -> column
  std::vector<std::string> terms;                   // column -> term
  std::vector<double> idf;
  std::vector<int> doc_freq;
  int n_docs = 0;
};

/// Vocabulary: terms with doc_freq >= min_df, truncated to the max_vocab
/// highest-doc_freq terms (ties lexicographic; max_vocab <= 0 keeps all).
/// Columns are assigned in lexicographic term order.
/// idf[t] = ln((1 + n_docs) / (1 + doc_freq[t])) + 1.
TfidfModel fit_tfidf(const Corpus& corpus, int min_df = 1, int max_vocab = 0);

/// Entry = count(t, d) * idf[t]; out-of-vocabulary tokens ignored.
EmbeddingMatrix tfidf_transform(const TfidfModel& model, const Corpus& corpus,
                                bool l2_normalize = true);
Vector tfidf_vector(const TfidfModel& model, const std::vector<std::string>& tokens,
                    bool l2_normalize = true);

// ---------------------------------------------------------------------------
// Word vectors

struct WordVectorTable {
  int dim = 0;
  std::unordered_map<std::string, Vector> vectors;
  std::size_t duplicate_warnings = 0;  // later duplicates replace earlier ones
};

/// "token v1 ... vD" per line; D inferred from the first line.
WordVectorTable load_word_vectors(std::istream& in);

/// Mean of in-vocabulary token vectors; zero vector (and *degenerate = true)
/// when no token is known.
Vector average_vector(const WordVectorTable& table, const std::vector<std::string>& tokens,
                      bool* degenerate = nullptr);
EmbeddingMatrix average_word_embedding(const WordVectorTable& table, const Corpus& corpus,
                                       const std::string& model_id = "wordvec");

// ---------------------------------------------------------------------------
// Provider embeddings

/// One vector per text through the client's cache and batching.
EmbeddingMatrix provider_embed(ProviderClient& client, const std::vector<std::string>& texts,
                               const std::string& model_id);
/// Embeds each document's normalized text; rows carry the document ids.
EmbeddingMatrix provider_embed(ProviderClient& client, const Corpus& corpus,
                               const std::string& model_id);

// ---------------------------------------------------------------------------
// Keywords

struct Keyword {
  std::string text;
  double score = 0.0;  // cosine similarity to the document vector

  bool operator==(const Keyword&) const = default;
};

/// Embeds a batch of texts (documents or phrases), one vector per input.
using TextEmbedder = std::function<std::vector<Vector>(const std::vector<std::string>&)>;

TextEmbedder make_tfidf_embedder(const TfidfModel& model);
TextEmbedder make_wordvec_embedder(const WordVectorTable& table);
TextEmbedder make_provider_embedder(ProviderClient& client, const std::string& model_id);

struct KeywordOptions {
  int top_n = 5;
  int ngram_max = 2;        // 1 or 2
  double diversity = 0.3;   // MMR trade-off lambda = 1 - diversity
  const std::unordered_set<std::string>* stopwords = &default_stopwords();
};

struct KeywordExtraction {
  std::vector<Keyword> keywords;  // sorted by score desc, ties lexicographic
  bool no_candidates = false;
};

double cosine_similarity(const Vector& a, const Vector& b);

/// Candidate 1..ngram_max-grams over the token stream, excluding n-grams that
/// start or end with a stopword, scored by cosine to the document vector and
/// selected by maximal marginal relevance.
KeywordExtraction extract_keywords(const CleanDocument& doc, const TextEmbedder& embedder,
                                   const KeywordOptions& opts = {});

/// Document vectors as the mean of their keyword vectors ("keyword-mean" mode).
/// Documents without candidates fall back to the document vector.
EmbeddingMatrix keyword_mean_embedding(const Corpus& corpus, const TextEmbedder& embedder,
                                       const KeywordOptions& opts, std::string backend,
                                       std::string model_id);

struct RefineResult {
  std::vector<Keyword> keywords;
  std::size_t warnings = 0;
};

/// Placeholders {excerpt}, {keywords} and {count} are substituted. An empty
/// template selects the bundled one.
std::string render_refine_prompt(const std::vector<Keyword>& keywords, const std::string& excerpt,
                                 std::string_view prompt_template = {});

/// Best-effort LLM refinement. The reply is read as one keyword per line
/// (bullets and numbering stripped). A reply line keeps the score of the input
/// keyword with the same text, else the best score among input keywords that
/// contain it or are contained in it, else 0. At most as many keywords come
/// back as went in. A mock reply echoes the input.
/// Unparseable replies and provider failures return the input with a warning.
RefineResult refine_keywords(ProviderClient& client, const std::vector<Keyword>& keywords,
                             const std::string& doc_excerpt, std::string_view prompt_template = {});

}  // namespace evdetect
