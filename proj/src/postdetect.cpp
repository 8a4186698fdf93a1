#include "evdetect/postdetect.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "evdetect/assets.hpp"
#include "evdetect/llm_client.hpp"

namespace evdetect {

using nlohmann::json;

std::string normalize_label(std::string_view text) {
  std::string out;
  bool space = false;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      if (space && !out.empty()) out.push_back(' ');
      out.push_back(static_cast<char>(std::tolower(ch)));
      space = false;
    } else {
      space = true;
    }
  }
  return out;
}

bool IptcTaxonomy::contains(const std::string& label) const {
  return std::any_of(topics.begin(), topics.end(), [&](const IptcTopic& t) { return t.label == label; });
}

std::optional<std::string> IptcTaxonomy::match(std::string_view reply) const {
  const std::string norm = normalize_label(reply);
  if (norm.empty()) return std::nullopt;
  for (const auto& t : topics)
    if (normalize_label(t.label) == norm) return t.label;
  if (auto it = aliases.find(norm); it != aliases.end()) return it->second;

  // Containment on word boundaries, longest candidate first.
  std::vector<std::pair<std::string, std::string>> candidates;
  for (const auto& t : topics) candidates.emplace_back(normalize_label(t.label), t.label);
  for (const auto& [alias, label] : aliases) candidates.emplace_back(alias, label);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  const std::string padded = " " + norm + " ";
  for (const auto& [needle, label] : candidates) {
    if (padded.find(" " + needle + " ") != std::string::npos) return label;
  }
  return std::nullopt;
}

IptcTaxonomy load_taxonomy(const json& topics, const json& aliases) {
  IptcTaxonomy tax;
  for (const auto& t : topics) {
    IptcTopic topic{t.at("code").get<std::string>(), t.at("label").get<std::string>()};
    if (tax.contains(topic.label)) throw ParseError("taxonomy: duplicate label \"" + topic.label + "\"");
    tax.topics.push_back(std::move(topic));
  }
  for (const auto& [alias, label] : aliases.items()) {
    const auto target = label.get<std::string>();
    if (!tax.contains(target))
      throw ParseError("taxonomy: alias \"" + alias + "\" points at unknown label \"" + target + "\"");
    tax.aliases[normalize_label(alias)] = target;
  }
  return tax;
}

const IptcTaxonomy& default_taxonomy() {
  static const IptcTaxonomy tax =
      load_taxonomy(json::parse(assets::iptc_taxonomy()), json::parse(assets::iptc_aliases()));
  return tax;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<Keyword>> label_clusters(const Corpus& corpus, const std::vector<int>& labels, int top_n) {
  if (labels.size() != corpus.documents.size())
    throw PreconditionError("label_clusters: " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(corpus.documents.size()) + " documents");
  if (top_n < 1) throw PreconditionError("label_clusters: top_n must be >= 1");
  const int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  if (k < 1) throw PreconditionError("label_clusters: no non-noise cluster");

  std::vector<std::map<std::string, double>> tf(static_cast<std::size_t>(k));
  for (std::size_t d = 0; d < labels.size(); ++d) {
    if (labels[d] < 0) continue;
    for (const auto& tok : corpus.documents[d].tokens) tf[static_cast<std::size_t>(labels[d])][tok] += 1.0;
  }
  std::unordered_map<std::string, int> df;
  for (const auto& counts : tf)
    for (const auto& [term, c] : counts) ++df[term];

  std::vector<std::vector<Keyword>> out(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    std::vector<Keyword> scored;
    for (const auto& [term, count] : tf[static_cast<std::size_t>(c)])
      scored.push_back({term, count * std::log(1.0 + static_cast<double>(k) / df[term])});
    // map order is lexicographic, so a stable sort keeps ties lexicographic
    std::stable_sort(scored.begin(), scored.end(), [](const Keyword& a, const Keyword& b) { return a.score > b.score; });
    if (static_cast<int>(scored.size()) > top_n) scored.resize(static_cast<std::size_t>(top_n));
    out[static_cast<std::size_t>(c)] = std::move(scored);
  }
  return out;
}

std::vector<int> representative_rows(const Matrix& X, const std::vector<int>& labels, int cluster, int count) {
  std::vector<int> members;
  Eigen::RowVectorXd centroid = Eigen::RowVectorXd::Zero(X.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != cluster) continue;
    members.push_back(static_cast<int>(i));
    centroid += X.row(static_cast<Eigen::Index>(i));
  }
  if (members.empty()) return members;
  centroid /= static_cast<double>(members.size());
  std::vector<double> dist(labels.size());
  for (int m : members) dist[static_cast<std::size_t>(m)] = (X.row(m) - centroid).squaredNorm();
  std::stable_sort(members.begin(), members.end(),
                   [&](int a, int b) { return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)]; });
  if (static_cast<int>(members.size()) > count) members.resize(static_cast<std::size_t>(count));
  return members;
}

// ---------------------------------------------------------------------------

std::string render_summary_prompt(const std::vector<std::string>& documents, int word_limit,
                                  std::string_view prompt_template) {
  std::string docs;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    docs += "Article " + std::to_string(i + 1) + ": " + documents[i];
    if (i + 1 < documents.size()) docs += "\n\n";
  }
  const std::string_view tpl = prompt_template.empty() ? assets::prompt_summarize() : prompt_template;
  return fill_template(std::string(tpl), {{"word_limit", std::to_string(word_limit)}, {"documents", docs}});
}

std::string trim_words(std::string_view text, int word_limit) {
  std::istringstream in{std::string(text)};
  std::string word, out;
  int n = 0;
  while (n < word_limit && in >> word) {
    if (!out.empty()) out.push_back(' ');
    out += word;
    ++n;
  }
  return out;
}

namespace {

std::string keyword_fallback(const std::vector<Keyword>& keywords) {
  std::string out;
  for (std::size_t i = 0; i < keywords.size() && i < 3; ++i) {
    if (i) out += ", ";
    out += keywords[i].text;
  }
  return out;
}

}  // namespace

SummaryResult summarize_cluster(ProviderClient& client, const std::vector<std::string>& representative_docs,
                                const std::vector<Keyword>& keywords, int word_limit,
                                std::string_view prompt_template) {
  if (representative_docs.empty()) throw PreconditionError("summarize_cluster: no representative documents");
  if (word_limit < 1) throw PreconditionError("summarize_cluster: word_limit must be >= 1");
  try {
    const std::string reply =
        client.chat_complete(render_summary_prompt(representative_docs, word_limit, prompt_template),
                             std::max(16, 4 * word_limit));
    std::string text = trim_words(reply, word_limit);
    if (!text.empty()) return {std::move(text), false};
  } catch (const Error&) {
  }
  return {keyword_fallback(keywords), true};
}

// ---------------------------------------------------------------------------

IptcMode parse_iptc_mode(const std::string& name) {
  if (name == "deterministic") return IptcMode::deterministic;
  if (name == "provider") return IptcMode::provider;
  throw ConfigError("unknown iptc mode \"" + name + "\" (expected deterministic or provider)");
}

std::string assign_iptc_deterministic(const std::vector<Keyword>& keywords, const TextEmbedder& embedder,
                                      const IptcTaxonomy& taxonomy) {
  if (keywords.empty()) throw PreconditionError("assign_iptc: empty keyword list");
  if (taxonomy.topics.empty()) throw PreconditionError("assign_iptc: empty taxonomy");
  std::vector<std::string> texts;
  std::string joined;
  for (const auto& kw : keywords) {
    if (!joined.empty()) joined.push_back(' ');
    joined += kw.text;
  }
  texts.push_back(joined);
  for (const auto& t : taxonomy.topics) texts.push_back(normalize_label(t.label));
  const std::vector<Vector> vecs = embedder(texts);
  std::size_t best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < taxonomy.topics.size(); ++i) {
    const double sim = cosine_similarity(vecs[0], vecs[i + 1]);
    if (sim > best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return taxonomy.topics[best].label;
}

IptcAssignment assign_iptc(const std::vector<Keyword>& keywords, IptcMode mode, const TextEmbedder& embedder,
                           ProviderClient* client, const IptcTaxonomy& taxonomy, std::string_view prompt_template) {
  if (keywords.empty()) throw PreconditionError("assign_iptc: empty keyword list");
  if (mode == IptcMode::provider && client) {
    std::string kws, topics;
    for (const auto& kw : keywords) kws += (kws.empty() ? "" : ", ") + kw.text;
    for (const auto& t : taxonomy.topics) topics += "- " + t.label + "\n";
    const std::string_view tpl = prompt_template.empty() ? assets::prompt_iptc() : prompt_template;
    try {
      const std::string reply = client->chat_complete(fill_template(std::string(tpl), {{"keywords", kws}, {"topics", topics}}));
      if (auto label = taxonomy.match(reply)) return {*label, false};
    } catch (const Error&) {
    }
    return {assign_iptc_deterministic(keywords, embedder, taxonomy), true};
  }
  return {assign_iptc_deterministic(keywords, embedder, taxonomy), false};
}

// ---------------------------------------------------------------------------

EventReport build_event_report(const std::vector<std::string>& doc_ids, const std::vector<int>& labels,
                               const std::vector<std::vector<Keyword>>& keywords,
                               const std::vector<SummaryResult>& summaries, const std::vector<std::string>& topics,
                               const std::vector<std::vector<std::string>>& representative_ids) {
  if (doc_ids.size() != labels.size())
    throw PreconditionError("build_event_report: " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(doc_ids.size()) + " documents");
  const int k = labels.empty() ? 0 : std::max(0, *std::max_element(labels.begin(), labels.end()) + 1);
  const auto uk = static_cast<std::size_t>(k);
  if (keywords.size() != uk || summaries.size() != uk || topics.size() != uk ||
      (!representative_ids.empty() && representative_ids.size() != uk))
    throw PreconditionError("build_event_report: per-cluster inputs are not aligned with " + std::to_string(k) +
                            " cluster ids");
  EventReport report;
  std::vector<EventCluster> clusters(uk);
  for (int c = 0; c < k; ++c) {
    auto& ev = clusters[static_cast<std::size_t>(c)];
    ev.cluster_id = c;
    ev.keywords = keywords[static_cast<std::size_t>(c)];
    ev.summary = summaries[static_cast<std::size_t>(c)].text;
    ev.summary_fallback = summaries[static_cast<std::size_t>(c)].fallback;
    ev.iptc_topic = topics[static_cast<std::size_t>(c)];
    if (!representative_ids.empty()) ev.representative_doc_ids = representative_ids[static_cast<std::size_t>(c)];
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      ++report.noise_count;
      continue;
    }
    clusters[static_cast<std::size_t>(labels[i])].member_ids.push_back(doc_ids[i]);
  }
  for (auto& ev : clusters) {
    ev.size = static_cast<int>(ev.member_ids.size());
    if (ev.size == 0) throw PreconditionError("build_event_report: cluster " + std::to_string(ev.cluster_id) + " has no members");
  }
  std::stable_sort(clusters.begin(), clusters.end(), [](const EventCluster& a, const EventCluster& b) { return a.size > b.size; });
  report.clusters = std::move(clusters);
  return report;
}

json to_json(const EventReport& report) {
  json clusters = json::array();
  for (const auto& ev : report.clusters) {
    json kws = json::array();
    for (const auto& kw : ev.keywords) kws.push_back({{"text", kw.text}, {"score", kw.score}});
    clusters.push_back({{"cluster_id", ev.cluster_id},
                        {"size", ev.size},
                        {"keywords", kws},
                        {"summary", ev.summary},
                        {"summary_fallback", ev.summary_fallback},
                        {"iptc_topic", ev.iptc_topic},
                        {"member_ids", ev.member_ids},
                        {"representative_doc_ids", ev.representative_doc_ids}});
  }
  return {{"clusters", clusters}, {"noise_count", report.noise_count}};
}

std::string format_event_table(const EventReport& report) {
  std::vector<std::array<std::string, 5>> rows;
  rows.push_back({"Cluster", "Size", "Topic", "Keywords", "Summary"});
  for (const auto& ev : report.clusters) {
    std::string kws;
    for (const auto& kw : ev.keywords) kws += (kws.empty() ? "" : ", ") + kw.text;
    rows.push_back({std::to_string(ev.cluster_id), std::to_string(ev.size), ev.iptc_topic, kws,
                    ev.summary + (ev.summary_fallback ? " [fallback]" : "")});
  }
  std::array<std::size_t, 5> width{};
  for (const auto& r : rows)
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < 5; ++c) {
      if (c + 1 < 5) out << std::left << std::setw(static_cast<int>(width[c] + 2)) << rows[i][c];
      else out << rows[i][c];
    }
    out << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < 5; ++c) total += width[c] + (c + 1 < 5 ? 2 : 0);
      out << std::string(total, '-') << '\n';
    }
  }
  out << "noise: " << report.noise_count << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

EventReport detect_events(const Corpus& corpus, const std::vector<std::string>& texts, const Matrix& X,
                          const std::vector<int>& labels, ProviderClient& client, const TextEmbedder& embedder,
                          const PostdetectOptions& opts) {
  if (texts.size() != corpus.documents.size() || static_cast<std::size_t>(X.rows()) != corpus.documents.size())
    throw PreconditionError("detect_events: texts, embeddings and corpus are not aligned");
  const std::vector<std::string> ids = corpus.ids();
  const int k = labels.empty() ? 0 : std::max(0, *std::max_element(labels.begin(), labels.end()) + 1);
  std::vector<std::vector<Keyword>> keywords;
  if (k > 0) keywords = label_clusters(corpus, labels, opts.top_n);
  std::vector<SummaryResult> summaries;
  std::vector<std::string> topics;
  std::vector<std::vector<std::string>> reps;
  for (int c = 0; c < k; ++c) {
    const auto rows = representative_rows(X, labels, c, opts.representatives);
    std::vector<std::string> docs, rep_ids;
    for (int r : rows) {
      docs.push_back(texts[static_cast<std::size_t>(r)]);
      rep_ids.push_back(ids[static_cast<std::size_t>(r)]);
    }
    const auto& kws = keywords[static_cast<std::size_t>(c)];
    summaries.push_back(summarize_cluster(client, docs, kws, opts.word_limit, opts.summary_template));
    if (kws.empty()) {
      // Every member was degenerate; fall back to the first taxonomy entry.
      topics.push_back(default_taxonomy().topics.front().label);
    } else {
      topics.push_back(assign_iptc(kws, opts.iptc_mode, embedder, &client, default_taxonomy(), opts.iptc_template).label);
    }
    reps.push_back(std::move(rep_ids));
  }
  return build_event_report(ids, labels, keywords, summaries, topics, reps);
}

}  // namespace evdetect
