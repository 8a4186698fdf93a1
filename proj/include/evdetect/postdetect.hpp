#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evdetect/common.hpp"
#include "evdetect/corpus.hpp"
#include "evdetect/embed.hpp"
#include "json.hpp"

namespace evdetect {

class ProviderClient;

struct IptcTopic {
  std::string code;
  std::string label;
};

struct IptcTaxonomy {
  std::vector<IptcTopic> topics;
  std::map<std::string, std::string> aliases;  // normalized alias -> label

  bool contains(const std::string& label) const;
  /// Case- and punctuation-insensitive match of free text against labels,
  /// then aliases, then labels or aliases contained in the text (longest first).
  std::optional<std::string> match(std::string_view reply) const;
};

/// The 17 top-level IPTC Media Topics and alias table bundled with the library.
const IptcTaxonomy& default_taxonomy();
IptcTaxonomy load_taxonomy(const nlohmann::json& topics, const nlohmann::json& aliases);

/// Lowercase, non-alphanumerics to single spaces, trimmed.
std::string normalize_label(std::string_view text);

/// Class-based TF-IDF. Returns one list per cluster id 0..k-1 where k is the
/// largest label + 1.
std::vector<std::vector<Keyword>> label_clusters(const Corpus& corpus, const std::vector<int>& labels,
                                                 int top_n = 5);

/// Up to count row indices of cluster c nearest its centroid, nearest first.
std::vector<int> representative_rows(const Matrix& X, const std::vector<int>& labels, int cluster,
                                     int count = 3);

struct SummaryResult {
  std::string text;
  bool fallback = false;
};

std::string render_summary_prompt(const std::vector<std::string>& documents, int word_limit,
                                  std::string_view prompt_template = {});

/// First word_limit whitespace-separated words, joined by single spaces.
std::string trim_words(std::string_view text, int word_limit);

/// Provider failures and empty replies give the top 3 keywords joined by ", ".
SummaryResult summarize_cluster(ProviderClient& client, const std::vector<std::string>& representative_docs,
                                const std::vector<Keyword>& keywords, int word_limit = 10,
                                std::string_view prompt_template = {});

enum class IptcMode { deterministic, provider };

IptcMode parse_iptc_mode(const std::string& name);

struct IptcAssignment {
  std::string label;
  bool fallback = false;  // provider mode only: reply did not match, cosine used
};

/// Highest cosine between the joined keywords and each taxonomy label's
/// embedding; ties go to the earlier taxonomy entry.
std::string assign_iptc_deterministic(const std::vector<Keyword>& keywords, const TextEmbedder& embedder,
                                      const IptcTaxonomy& taxonomy = default_taxonomy());

IptcAssignment assign_iptc(const std::vector<Keyword>& keywords, IptcMode mode, const TextEmbedder& embedder,
                           ProviderClient* client, const IptcTaxonomy& taxonomy = default_taxonomy(),
                           std::string_view prompt_template = {});

struct EventCluster {
  int cluster_id = 0;
  std::vector<Keyword> keywords;
  std::string summary;
  bool summary_fallback = false;
  std::string iptc_topic;
  int size = 0;
  std::vector<std::string> member_ids;
  std::vector<std::string> representative_doc_ids;
};

struct EventReport {
  std::vector<EventCluster> clusters;  // size descending, then cluster id
  int noise_count = 0;
};

/// Per-cluster inputs are indexed by cluster id and must all have k entries,
/// k = largest label + 1.
EventReport build_event_report(const std::vector<std::string>& doc_ids, const std::vector<int>& labels,
                               const std::vector<std::vector<Keyword>>& keywords,
                               const std::vector<SummaryResult>& summaries,
                               const std::vector<std::string>& topics,
                               const std::vector<std::vector<std::string>>& representative_ids = {});

nlohmann::json to_json(const EventReport& report);

/// Aligned-column table: cluster, size, topic, keywords, summary.
std::string format_event_table(const EventReport& report);

struct PostdetectOptions {
  int top_n = 5;
  int word_limit = 10;
  int representatives = 3;
  IptcMode iptc_mode = IptcMode::deterministic;
  std::string summary_template;  // empty: bundled
  std::string iptc_template;     // empty: bundled
};

/// label_clusters, summarize_cluster and assign_iptc for every cluster.
/// texts are the documents shown to the summarizer, aligned with corpus rows.
EventReport detect_events(const Corpus& corpus, const std::vector<std::string>& texts, const Matrix& X,
                          const std::vector<int>& labels, ProviderClient& client, const TextEmbedder& embedder,
                          const PostdetectOptions& opts = {});

}  // namespace evdetect
