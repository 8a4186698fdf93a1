#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace evdetect {

struct Document {
  std::string id;
  std::optional<std::string> url;
  std::optional<std::string> published_at;  // ISO-8601, e.g. 2024-01-01T00:00:00
  std::optional<std::string> source;
  std::string raw_text;
};

struct CleanDocument {
  std::string id;
  std::string text;  // space-join of tokens
  std::vector<std::string> tokens;
  bool degenerate = false;  // every token was stripped
};

struct Corpus {
  std::vector<CleanDocument> documents;
  std::string provenance;

  std::vector<std::string> ids() const;
};

// ---------------------------------------------------------------------------
// GKG ingestion

/// Column indices into a GKG row. Defaults follow the GKG 2.1 layout:
/// 0 GKGRECORDID, 1 V2.1DATE, 3 V2SOURCECOMMONNAME, 4 V2DOCUMENTIDENTIFIER,
/// 7 V1THEMES, 11 V1PERSONS, 13 V1ORGANIZATIONS, 23 V2.1ALLNAMES.
struct GkgColumnMap {
  int id = 0;
  int url = 4;
  int date = 1;    // -1 disables
  int source = 3;  // -1 disables
  std::vector<int> text_fields{7, 11, 13, 23};
};

struct GkgParseResult {
  std::vector<Document> documents;
  std::size_t rows = 0;
  std::size_t skipped = 0;
};

/// Parses a tab-delimited GKG export. A row is malformed when it lacks the id,
/// url or date columns, has an empty id or url, an unparseable date, or repeats
/// an id. With strict=true the first malformed row throws ParseError naming
/// its 1-based row number; otherwise it is skipped and counted.
///
/// Text comes from `url_text` when the url is present there; otherwise it is
/// the mapped text-bearing fields joined with spaces, and failing that the
/// url path.
GkgParseResult parse_gkg(std::istream& in, const GkgColumnMap& columns, bool strict,
                         const std::unordered_map<std::string, std::string>* url_text = nullptr);

/// JSONL of {"url": ..., "text": ...}.
std::unordered_map<std::string, std::string> load_url_text_lookup(std::istream& in);

/// JSONL corpus, one object per line with required string keys id and text;
/// optional url, date, source. Blank lines are ignored but still counted.
std::vector<Document> load_corpus(std::istream& in);

// ---------------------------------------------------------------------------
// Normalization

/// The bundled English stopword list.
const std::unordered_set<std::string>& default_stopwords();

/// One word per line; '#' starts a comment.
std::unordered_set<std::string> load_stopwords(std::istream& in);

struct PreprocessOptions {
  bool lowercase = true;
  bool strip_urls = true;
  bool strip_digits = true;
  bool strip_symbols = true;
  std::unordered_set<std::string> stopwords = default_stopwords();
  std::size_t min_token_length = 2;
};

/// strip URLs -> lowercase -> strip digits -> non-alphanumeric to space ->
/// whitespace tokenize -> drop stopwords -> drop tokens shorter than
/// min_token_length. Non-ASCII bytes count as symbols.
CleanDocument preprocess(const Document& doc, const PreprocessOptions& opts = {});

Corpus preprocess_all(const std::vector<Document>& docs, const PreprocessOptions& opts,
                      std::string provenance);

// ---------------------------------------------------------------------------
// Partitioning

struct PartitionPlan {
  std::uint64_t seed = 0;
  std::vector<std::string> validation_ids;
  std::vector<std::vector<std::string>> train_subsets;
  int K = 0;
};

/// Shuffles ids with Fisher-Yates driven by Rng(seed), takes the first
/// round(n * val_fraction) as validation and deals the rest into K contiguous
/// chunks whose sizes differ by at most one. Within each list ids keep corpus
/// order.
PartitionPlan split_partitions(const std::vector<std::string>& ids, int K,
                               double val_fraction, std::uint64_t seed);

inline PartitionPlan split_partitions(const Corpus& corpus, int K, double val_fraction,
                                      std::uint64_t seed) {
  return split_partitions(corpus.ids(), K, val_fraction, seed);
}

}  // namespace evdetect
