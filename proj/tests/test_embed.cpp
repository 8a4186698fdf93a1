#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>

#include "doctest.h"
#include "evdetect/embed.hpp"
#include "evdetect/llm_client.hpp"
#include "fake_transport.hpp"

using namespace evdetect;

namespace {

Corpus two_docs() {
  Corpus c;
  c.documents.push_back({"d1", "a b", {"a", "b"}, false});
  c.documents.push_back({"d2", "a c", {"a", "c"}, false});
  return c;
}

CleanDocument doc_of(const std::string& id, std::vector<std::string> tokens) {
  CleanDocument d;
  d.id = id;
  d.tokens = std::move(tokens);
  for (const auto& t : d.tokens) d.text += (d.text.empty() ? "" : " ") + t;
  return d;
}

}  // namespace

TEST_CASE("tfidf: smooth idf on the two-document example") {
  const TfidfModel m = fit_tfidf(two_docs(), 1);
  REQUIRE(m.terms == std::vector<std::string>{"a", "b", "c"});
  CHECK(m.idf[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.idf[1] == doctest::Approx(std::log(1.5) + 1.0).epsilon(1e-12));
  CHECK(m.idf[1] == doctest::Approx(1.405465).epsilon(1e-6));
  CHECK(m.doc_freq == std::vector<int>{2, 1, 1});
}

TEST_CASE("tfidf: normalized and raw rows") {
  const Corpus c = two_docs();
  const TfidfModel m = fit_tfidf(c, 1);
  const Matrix norm = tfidf_transform(m, c).values;
  CHECK(norm(0, 0) == doctest::Approx(0.5798).epsilon(1e-4));
  CHECK(norm(0, 1) == doctest::Approx(0.8148).epsilon(1e-4));
  CHECK(norm(0, 2) == 0.0);
  const Matrix raw = tfidf_transform(m, c, false).values;
  CHECK(raw(1, 0) == doctest::Approx(1.0));
  CHECK(raw(1, 1) == 0.0);
  CHECK(raw(1, 2) == doctest::Approx(1.405465).epsilon(1e-6));
}

TEST_CASE("tfidf: min_df too large and max_vocab tie rule") {
  CHECK_THROWS_AS(fit_tfidf(two_docs(), 3), PreconditionError);
  const TfidfModel m = fit_tfidf(two_docs(), 1, 1);
  CHECK(m.terms == std::vector<std::string>{"a"});
}

TEST_CASE("tfidf: all-OOV document gives a flagged zero row") {
  const TfidfModel m = fit_tfidf(two_docs(), 1);
  Corpus c;
  c.documents.push_back(doc_of("z", {"z", "z"}));
  const auto e = tfidf_transform(m, c);
  CHECK(e.values.row(0).isZero());
  CHECK(e.degenerate[0]);
}

TEST_CASE("word vectors: loading, mismatch and duplicates") {
  std::istringstream ok("a 1 0 0\nb 0 1 0\n");
  const auto t = load_word_vectors(ok);
  CHECK(t.dim == 3);
  CHECK(t.vectors.size() == 2);
  std::istringstream bad("a 1 0 0\nb 0 1 0 4\n");
  CHECK_THROWS_AS(load_word_vectors(bad), ParseError);
  std::istringstream dup("a 1 0\na 0 1\n");
  const auto d = load_word_vectors(dup);
  CHECK(d.duplicate_warnings == 1);
  CHECK(d.vectors.at("a")(1) == 1.0);
}

TEST_CASE("average word embedding: mean, OOV skipped, all-OOV flagged") {
  std::istringstream in("a 1 0\nb 0 1\n");
  const auto t = load_word_vectors(in);
  CHECK(average_vector(t, {"a", "b"}).isApprox(Vector::Constant(2, 0.5)));
  CHECK(average_vector(t, {"a", "zz"}) == Vector::Unit(2, 0));
  bool degenerate = false;
  CHECK(average_vector(t, {"zz"}, &degenerate).isZero());
  CHECK(degenerate);
}

TEST_CASE("EMBMAT01 round trip keeps float32 values and sidecar") {
  EmbeddingMatrix m;
  m.values = Matrix(2, 3);
  m.values << 1.5, -2.25, 0.0, 3.0, 4.0, 1e-3;
  m.doc_ids = {"x", "y"};
  m.backend = "tfidf";
  m.model_id = "tfidf-test";
  m.degenerate = {false, true};
  const auto path = std::filesystem::temp_directory_path() / "evdetect_test_roundtrip.embmat";
  write_embedding_matrix(path, m);
  const auto back = read_embedding_matrix(path);
  CHECK(back.doc_ids == m.doc_ids);
  CHECK(back.backend == "tfidf");
  CHECK(back.values.rows() == 2);
  CHECK(back.values(1, 2) == doctest::Approx(1e-3).epsilon(1e-6));
  std::istringstream junk("NOTEMBED....");
  CHECK_THROWS_AS(read_embmat_binary(junk), ParseError);
}

TEST_CASE("provider embedding: batched, cached, order preserved") {
  const auto dir = std::filesystem::temp_directory_path() / "evdetect_test_embed_cache";
  std::filesystem::remove_all(dir);
  ProviderConfig cfg;
  cfg.cache_dir = dir;
  cfg.mock_dim = 8;
  auto transport = std::make_shared<fixtures::ScriptedTransport>();
  ProviderClient client(cfg, transport);
  const std::vector<std::string> texts{"one", "two", "three"};
  const auto first = provider_embed(client, texts, "m");
  CHECK(transport->calls.size() == 1);
  CHECK(client.stats().cache_writes == 3);
  CHECK(first.values.row(0).transpose().isApprox(mock_embed("one", 8, "m")));
  const auto second = provider_embed(client, texts, "m");
  CHECK(transport->calls.size() == 1);
  CHECK(client.stats().cache_hits == 3);
  CHECK(second.values == first.values);
}

TEST_CASE("provider embedding: exhausted retries carry status and attempts") {
  ProviderConfig cfg;
  cfg.max_retries = 2;
  auto transport = std::make_shared<fixtures::ScriptedTransport>();
  for (int i = 0; i < 3; ++i) transport->queue(429);
  ProviderClient client(cfg, transport);
  client.set_sleeper([](double) {});
  try {
    provider_embed(client, std::vector<std::string>{"x"}, "m");
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.status() == 429);
    CHECK(e.attempts() == 3);
  }
}

TEST_CASE("keywords: the bigram nearest the document ranks first") {
  std::istringstream in("solar 1 0 0\npanels 0 1 0\nweather 0 0 1\n");
  const auto table = load_word_vectors(in);
  const auto embedder = make_wordvec_embedder(table);
  KeywordOptions o;
  o.stopwords = nullptr;
  const auto kw = extract_keywords(doc_of("d", {"solar", "panels", "weather", "solar", "panels"}), embedder, o);
  REQUIRE(!kw.keywords.empty());
  CHECK(kw.keywords[0].text == "solar panels");
}

TEST_CASE("keywords: diversity 0 reduces to plain top-n; large top_n returns everything sorted") {
  std::istringstream in("alpha 1 0.2 0\nbeta 0.9 0.1 0.3\ngamma 0 1 0\ndelta 0.2 0.3 1\neps 0.5 0.5 0.5\n");
  const auto table = load_word_vectors(in);
  const auto embedder = make_wordvec_embedder(table);
  const auto doc = doc_of("d", {"alpha", "beta", "gamma", "delta", "eps", "alpha"});
  KeywordOptions all;
  all.top_n = 100;
  all.diversity = 0.0;
  all.stopwords = nullptr;
  const auto everything = extract_keywords(doc, embedder, all).keywords;
  for (std::size_t i = 1; i < everything.size(); ++i) CHECK(everything[i - 1].score >= everything[i].score);
  KeywordOptions three = all;
  three.top_n = 3;
  const auto top = extract_keywords(doc, embedder, three).keywords;
  REQUIRE(top.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(top[i] == everything[i]);
}

TEST_CASE("keywords: no candidates when every token is a stopword") {
  std::istringstream in("the 1 0\n");
  const auto table = load_word_vectors(in);
  const auto r = extract_keywords(doc_of("d", {"the", "and"}), make_wordvec_embedder(table));
  CHECK(r.keywords.empty());
  CHECK(r.no_candidates);
}

TEST_CASE("refine: mock echoes, replies carry scores, failures keep the input") {
  const std::vector<Keyword> input{{"oil prices", 0.9}, {"surge", 0.5}};
  ProviderConfig cfg;
  {
    ProviderClient mock(cfg);
    const auto r = refine_keywords(mock, input, "excerpt");
    CHECK(r.keywords == input);
  }
  {
    auto transport = std::make_shared<fixtures::ScriptedTransport>();
    transport->queue_completion("1. oil\n- prices\nbanana\nextra line");
    ProviderClient client(cfg, transport);
    const std::vector<Keyword> three{{"oil prices", 0.9}, {"surge", 0.5}, {"markets", 0.4}};
    const auto r = refine_keywords(client, three, "excerpt");
    // capped at the input keyword count
    REQUIRE(r.keywords.size() == 3);
    CHECK(r.keywords[0].text == "oil");
    CHECK(r.keywords[0].score == doctest::Approx(0.9));
    CHECK(r.keywords[1].text == "prices");
    CHECK(r.keywords[2].score == 0.0);
  }
  {
    cfg.max_retries = 1;
    auto transport = std::make_shared<fixtures::ScriptedTransport>();
    transport->queue(500);
    transport->queue(500);
    ProviderClient client(cfg, transport);
    client.set_sleeper([](double) {});
    const auto r = refine_keywords(client, input, "excerpt");
    CHECK(r.keywords == input);
    CHECK(r.warnings == 1);
  }
}
