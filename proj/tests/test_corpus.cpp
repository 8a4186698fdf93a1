#include <set>
#include <sstream>

#include "doctest.h"
#include "evdetect/common.hpp"
#include "evdetect/corpus.hpp"

using namespace evdetect;

namespace {

std::string gkg_row(const std::vector<std::string>& cols) {
  std::string row;
  for (std::size_t i = 0; i < cols.size(); ++i) row += (i ? "\t" : "") + cols[i];
  return row;
}

std::vector<std::string> full_row(const std::string& id, const std::string& date, const std::string& url) {
  std::vector<std::string> cols(27);
  cols[0] = id;
  cols[1] = date;
  cols[2] = "1";
  cols[3] = "example.com";
  cols[4] = url;
  cols[7] = "ECON_OIL;TAX_FNCACT";
  cols[11] = "john doe";
  return cols;
}

}  // namespace

TEST_CASE("gkg: well-formed row under the default column map") {
  std::istringstream in(gkg_row(full_row("R1", "20240101000000", "http://e.x/a")) + "\n");
  const auto r = parse_gkg(in, {}, true);
  REQUIRE(r.documents.size() == 1);
  CHECK(r.documents[0].id == "R1");
  CHECK(r.documents[0].url == "http://e.x/a");
  CHECK(r.documents[0].published_at == "2024-01-01T00:00:00");
  CHECK(r.documents[0].source == "example.com");
  CHECK(r.skipped == 0);
}

TEST_CASE("gkg: empty stream") {
  std::istringstream in("");
  const auto r = parse_gkg(in, {}, true);
  CHECK(r.documents.empty());
  CHECK(r.skipped == 0);
}

TEST_CASE("gkg: short row is fatal in strict mode and skipped otherwise") {
  const std::string text = "a\tb\tc\n" + gkg_row(full_row("R2", "20240102000000", "http://e.x/b")) + "\n";
  std::istringstream strict_in(text);
  try {
    parse_gkg(strict_in, {}, true);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  std::istringstream lax_in(text);
  const auto r = parse_gkg(lax_in, {}, false);
  CHECK(r.documents.size() == 1);
  CHECK(r.skipped == 1);
}

TEST_CASE("gkg: bad date and duplicate id are malformed") {
  const std::string text = gkg_row(full_row("R1", "2024-13-99", "http://e.x/a")) + "\n" +
                           gkg_row(full_row("R2", "20240101000000", "http://e.x/b")) + "\n" +
                           gkg_row(full_row("R2", "20240101000000", "http://e.x/c")) + "\n";
  std::istringstream in(text);
  const auto r = parse_gkg(in, {}, false);
  CHECK(r.documents.size() == 1);
  CHECK(r.skipped == 2);
}

TEST_CASE("gkg: text comes from the url lookup when present") {
  std::istringstream lookup_in(R"({"url": "http://e.x/a", "text": "Full article body"})" "\n");
  const auto lookup = load_url_text_lookup(lookup_in);
  std::istringstream in(gkg_row(full_row("R1", "20240101000000", "http://e.x/a")) + "\n" +
                        gkg_row(full_row("R2", "20240101000000", "http://e.x/b")) + "\n");
  const auto r = parse_gkg(in, {}, true, &lookup);
  REQUIRE(r.documents.size() == 2);
  CHECK(r.documents[0].raw_text == "Full article body");
  CHECK(r.documents[1].raw_text.find("john doe") != std::string::npos);
}

TEST_CASE("jsonl: valid lines in file order") {
  std::istringstream in(R"({"id": "a", "text": "first"})" "\n" R"({"id": "b", "text": "second", "source": "x"})" "\n");
  const auto docs = load_corpus(in);
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].id == "a");
  CHECK(docs[1].source == "x");
}

TEST_CASE("jsonl: missing text names the line") {
  std::istringstream in(R"({"id": "a", "text": "first"})" "\n" R"({"id": "b"})" "\n");
  CHECK_THROWS_WITH_AS(load_corpus(in), "line 2: missing field text", ParseError);
}

TEST_CASE("jsonl: duplicate id names both lines") {
  std::istringstream in(R"({"id": "a", "text": "x"})" "\n" R"({"id": "b", "text": "y"})" "\n" R"({"id": "a", "text": "z"})" "\n");
  try {
    load_corpus(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find('1') != std::string::npos);
    CHECK(what.find('3') != std::string::npos);
  }
}

TEST_CASE("preprocess: fixed rule order with bundled stopwords") {
  Document d;
  d.id = "x";
  d.raw_text = "Breaking: Oil prices SURGE 5% \xE2\x80\x94 https://a.b";
  CHECK(preprocess(d).tokens == std::vector<std::string>{"breaking", "oil", "prices", "surge"});
}

TEST_CASE("preprocess: empty stopword list keeps short words") {
  Document d;
  d.raw_text = "AAA";
  PreprocessOptions o;
  o.stopwords.clear();
  CHECK(preprocess(d, o).tokens == std::vector<std::string>{"aaa"});
}

TEST_CASE("preprocess: everything stripped is degenerate, not an error") {
  Document d;
  d.raw_text = "123 !!";
  const auto c = preprocess(d);
  CHECK(c.tokens.empty());
  CHECK(c.degenerate);
}

TEST_CASE("stopwords loader skips comments") {
  std::istringstream in("# header\nfoo\n  bar  \n\n");
  const auto s = load_stopwords(in);
  CHECK(s.size() == 2);
  CHECK(s.count("bar") == 1);
}

TEST_CASE("split_partitions: sizes, disjointness and determinism") {
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back("d" + std::to_string(i));
  const auto p = split_partitions(ids, 5, 0.2, 17);
  CHECK(p.validation_ids.size() == 20);
  REQUIRE(p.train_subsets.size() == 5);
  std::set<std::string> seen(p.validation_ids.begin(), p.validation_ids.end());
  for (const auto& s : p.train_subsets) {
    CHECK(s.size() == 16);
    for (const auto& id : s) CHECK(seen.insert(id).second);
  }
  CHECK(seen.size() == 100);
  const auto q = split_partitions(ids, 5, 0.2, 17);
  CHECK(q.validation_ids == p.validation_ids);
  CHECK(q.train_subsets == p.train_subsets);
  CHECK(split_partitions(ids, 5, 0.2, 18).validation_ids != p.validation_ids);
}

TEST_CASE("split_partitions: uneven chunks differ by at most one") {
  std::vector<std::string> ids;
  for (int i = 0; i < 23; ++i) ids.push_back(std::to_string(i));
  const auto p = split_partitions(ids, 4, 0.2, 1);
  std::size_t lo = 100, hi = 0;
  for (const auto& s : p.train_subsets) lo = std::min(lo, s.size()), hi = std::max(hi, s.size());
  CHECK(hi - lo <= 1);
}

TEST_CASE("split_partitions: K larger than the training set") {
  CHECK_THROWS_AS(split_partitions(std::vector<std::string>{"a", "b", "c", "d"}, 5, 0.2, 0), PreconditionError);
}
