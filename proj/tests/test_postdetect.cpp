#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "evdetect/llm_client.hpp"
#include "evdetect/postdetect.hpp"
#include "fake_transport.hpp"

using namespace evdetect;

namespace {

Corpus corpus_of(const std::vector<std::string>& texts) {
  Corpus c;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    CleanDocument d;
    d.id = "d" + std::to_string(i);
    d.text = texts[i];
    d.tokens = split_words(texts[i]);
    c.documents.push_back(d);
  }
  return c;
}

std::vector<std::string> texts_of(const std::vector<Keyword>& kws) {
  std::vector<std::string> out;
  for (const auto& k : kws) out.push_back(k.text);
  return out;
}

WordVectorTable bundled_wordvec() {
  std::ifstream in(std::string(EVDETECT_SOURCE_DIR) + "/data/wordvec/synthetic_50d.txt");
  return load_word_vectors(in);
}

std::vector<Keyword> kws(std::initializer_list<const char*> words) {
  std::vector<Keyword> out;
  double s = 1.0;
  for (const char* w : words) out.push_back({w, s -= 0.1});
  return out;
}

}  // namespace

TEST_CASE("taxonomy: 17 topics, aliases and matching") {
  const auto& tax = default_taxonomy();
  CHECK(tax.topics.size() == 17);
  CHECK(tax.contains("sport"));
  CHECK(tax.match("Sports!!") == std::optional<std::string>("sport"));
  CHECK(tax.match("ECONOMY, business and finance") == std::optional<std::string>("economy, business and finance"));
  CHECK(tax.match("Technology/Science") == std::optional<std::string>("science and technology"));
  CHECK_FALSE(tax.match("gibberish words").has_value());
  CHECK(normalize_label("  Science & Technology!! ") == "science technology");
}

TEST_CASE("label_clusters: tie rule and shared-term penalty") {
  const Corpus c = corpus_of({"oil prices surge", "oil prices surge", "vote ballot surge", "vote ballot"});
  const auto kw = label_clusters(c, {0, 0, 1, 1}, 3);
  REQUIRE(kw.size() == 2);
  // "surge" appears in both clusters, so it ranks below the exclusive terms.
  CHECK(texts_of(kw[0]) == std::vector<std::string>{"oil", "prices", "surge"});
  CHECK(kw[0][0].score == kw[0][1].score);
  CHECK(kw[0][2].score < kw[0][1].score);
  CHECK(texts_of(kw[1])[0] == "ballot");
}

TEST_CASE("label_clusters: disjoint vocabularies stay separate; permutation invariant") {
  const Corpus c = corpus_of({"apple banana", "banana cherry", "xray yankee", "yankee zulu zulu"});
  const auto a = label_clusters(c, {0, 0, 1, 1}, 5);
  const std::set<std::string> left{"apple", "banana", "cherry"}, right{"xray", "yankee", "zulu"};
  for (const auto& k : a[0]) CHECK(left.count(k.text) == 1);
  for (const auto& k : a[1]) CHECK(right.count(k.text) == 1);
  const Corpus swapped = corpus_of({"banana cherry", "apple banana", "yankee zulu zulu", "xray yankee"});
  CHECK(label_clusters(swapped, {0, 0, 1, 1}, 5) == a);
  CHECK_THROWS_AS(label_clusters(c, {-1, -1, -1, -1}, 5), PreconditionError);
}

TEST_CASE("representative rows are nearest the centroid") {
  Matrix X(5, 1);
  X << 0, 1, 2, 10, 3;
  CHECK(representative_rows(X, {0, 0, 0, 1, 0}, 0, 3) == std::vector<int>{1, 2, 0});
  CHECK(representative_rows(X, {0, 0, 0, 1, 0}, 1, 3) == std::vector<int>{3});
}

TEST_CASE("summaries: mock, fallback, trimming") {
  const auto keywords = kws({"oil", "prices", "surge", "barrel"});
  ProviderClient mock{ProviderConfig{}};
  const auto s = summarize_cluster(mock, {"doc one", "doc two"}, keywords);
  CHECK(is_mock_reply(s.text));
  CHECK_FALSE(s.fallback);

  ProviderConfig cfg;
  cfg.max_retries = 0;
  auto down = std::make_shared<fixtures::ScriptedTransport>();
  down->queue(503);
  ProviderClient failing(cfg, down);
  const auto f = summarize_cluster(failing, {"doc"}, keywords);
  CHECK(f.text == "oil, prices, surge");
  CHECK(f.fallback);

  auto verbose = std::make_shared<fixtures::ScriptedTransport>();
  std::string long_reply;
  for (int i = 0; i < 25; ++i) long_reply += "w" + std::to_string(i) + " ";
  verbose->queue_completion(long_reply);
  ProviderClient chatty(cfg, verbose);
  const auto t = summarize_cluster(chatty, {"doc"}, keywords);
  CHECK(split_words(t.text).size() == 10);
  CHECK(trim_words("  a  b   c ", 2) == "a b");
  CHECK(render_summary_prompt({"x"}, 10).find("10") != std::string::npos);
}

TEST_CASE("iptc: deterministic mode with the bundled word vectors") {
  const auto table = bundled_wordvec();
  const auto embedder = make_wordvec_embedder(table);
  CHECK(assign_iptc_deterministic(kws({"xbox", "microsoft", "gaming"}), embedder) == "science and technology");
  CHECK(assign_iptc_deterministic(kws({"freshwater", "irrigation"}), embedder) == "environment");
  CHECK(assign_iptc_deterministic(kws({"striker", "league"}), embedder) == "sport");
  // pure function of its inputs
  CHECK(assign_iptc_deterministic(kws({"virus", "vaccine"}), embedder) ==
        assign_iptc_deterministic(kws({"virus", "vaccine"}), embedder));
}

TEST_CASE("iptc: provider reply matching and fallback") {
  const auto table = bundled_wordvec();
  const auto embedder = make_wordvec_embedder(table);
  ProviderConfig cfg;
  auto transport = std::make_shared<fixtures::ScriptedTransport>();
  transport->queue_completion("Sports!!");
  transport->queue_completion("no idea");
  ProviderClient client(cfg, transport);
  const auto a = assign_iptc(kws({"match", "goal"}), IptcMode::provider, embedder, &client);
  CHECK(a.label == "sport");
  CHECK_FALSE(a.fallback);
  const auto b = assign_iptc(kws({"oil", "barrel"}), IptcMode::provider, embedder, &client);
  CHECK(b.fallback);
  CHECK(default_taxonomy().contains(b.label));
  CHECK(parse_iptc_mode("provider") == IptcMode::provider);
  CHECK_THROWS_AS(parse_iptc_mode("llm"), ConfigError);
}

TEST_CASE("event report: ordering, noise and alignment") {
  std::vector<int> labels;
  for (int i = 0; i < 5; ++i) labels.push_back(0);
  for (int i = 0; i < 9; ++i) labels.push_back(1);
  for (int i = 0; i < 2; ++i) labels.push_back(2);
  labels.push_back(-1);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < labels.size(); ++i) ids.push_back("d" + std::to_string(i));
  const std::vector<std::vector<Keyword>> k3(3, kws({"a"}));
  const std::vector<SummaryResult> s3(3, SummaryResult{"summary", false});
  const std::vector<std::string> t3(3, "health");
  const auto r = build_event_report(ids, labels, k3, s3, t3);
  REQUIRE(r.clusters.size() == 3);
  CHECK(r.clusters[0].size == 9);
  CHECK(r.clusters[1].size == 5);
  CHECK(r.clusters[2].size == 2);
  CHECK(r.noise_count == 1);
  const std::string table = format_event_table(r);
  CHECK(table.find("noise: 1") != std::string::npos);

  const auto empty = build_event_report({"x", "y"}, {-1, -1}, {}, {}, {});
  CHECK(empty.clusters.empty());
  CHECK(empty.noise_count == 2);
  CHECK_THROWS_AS(build_event_report(ids, labels, std::vector<std::vector<Keyword>>(4, kws({"a"})), s3, t3),
                  PreconditionError);
}

TEST_CASE("detect_events: every cluster fully described with the mock provider") {
  const Corpus c = corpus_of({"oil prices barrel", "oil crude prices", "vote ballot election", "ballot voters election"});
  Matrix X(4, 2);
  X << 0, 0, 0, 1, 10, 0, 10, 1;
  const auto table = bundled_wordvec();
  ProviderClient mock{ProviderConfig{}};
  std::vector<std::string> texts;
  for (const auto& d : c.documents) texts.push_back(d.text);
  const auto report = detect_events(c, texts, X, {0, 0, 1, 1}, mock, make_wordvec_embedder(table));
  REQUIRE(report.clusters.size() == 2);
  for (const auto& ev : report.clusters) {
    CHECK_FALSE(ev.keywords.empty());
    CHECK(split_words(ev.summary).size() <= 10);
    CHECK(default_taxonomy().contains(ev.iptc_topic));
  }
  const auto j = to_json(report);
  CHECK(j["clusters"].size() == 2);
}
