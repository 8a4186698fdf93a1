#include "evdetect/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include "json.hpp"
#include <numeric>
#include <regex>
#include <sstream>

#include "evdetect/assets.hpp"
#include "evdetect/common.hpp"
#include "evdetect/rng.hpp"

namespace evdetect {

using nlohmann::json;

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(documents.size());
  for (const auto& d : documents) out.push_back(d.id);
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

bool all_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

// GKG dates are YYYYMMDDHHMMSS.
std::optional<std::string> gkg_date_to_iso(std::string_view raw) {
  if (raw.size() != 14 || !all_digits(raw)) return std::nullopt;
  auto num = [&](std::size_t pos, std::size_t len) {
    return std::stoi(std::string(raw.substr(pos, len)));
  };
  const int month = num(4, 2), day = num(6, 2), hour = num(8, 2), minute = num(10, 2),
            second = num(12, 2);
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 ||
      second > 60) {
    return std::nullopt;
  }
  std::string iso;
  iso.reserve(19);
  iso.append(raw.substr(0, 4)).push_back('-');
  iso.append(raw.substr(4, 2)).push_back('-');
  iso.append(raw.substr(6, 2)).push_back('T');
  iso.append(raw.substr(8, 2)).push_back(':');
  iso.append(raw.substr(10, 2)).push_back(':');
  iso.append(raw.substr(12, 2));
  return iso;
}

std::string url_path_text(const std::string& url) {
  auto scheme = url.find("://");
  auto start = scheme == std::string::npos ? 0 : scheme + 3;
  auto slash = url.find('/', start);
  if (slash == std::string::npos) return {};
  std::string path = url.substr(slash + 1);
  for (char& c : path) {
    if (!std::isalnum(static_cast<unsigned char>(c))) c = ' ';
  }
  return path;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

GkgParseResult parse_gkg(std::istream& in, const GkgColumnMap& columns, bool strict,
                         const std::unordered_map<std::string, std::string>* url_text) {
  GkgParseResult result;
  std::unordered_set<std::string> seen;
  const int required = std::max({columns.id, columns.url, columns.date});
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    ++result.rows;
    const auto fields = split_tabs(line);

    std::string problem;
    std::optional<std::string> date;
    if (static_cast<int>(fields.size()) <= required) {
      problem = "expected at least " + std::to_string(required + 1) + " fields, got " +
                std::to_string(fields.size());
    } else if (fields[columns.id].empty()) {
      problem = "empty record id";
    } else if (fields[columns.url].empty()) {
      problem = "empty document url";
    } else if (seen.count(fields[columns.id])) {
      problem = "duplicate record id \"" + fields[columns.id] + "\"";
    } else if (columns.date >= 0) {
      date = gkg_date_to_iso(fields[columns.date]);
      if (!date) problem = "bad date \"" + fields[columns.date] + "\"";
    }

    Document doc;
    if (problem.empty()) {
      doc.id = fields[columns.id];
      doc.url = fields[columns.url];
      doc.published_at = date;
      if (columns.source >= 0 && columns.source < static_cast<int>(fields.size()) &&
          !fields[columns.source].empty()) {
        doc.source = fields[columns.source];
      }
      if (url_text) {
        if (auto it = url_text->find(*doc.url); it != url_text->end()) doc.raw_text = it->second;
      }
      if (doc.raw_text.empty()) {
        for (int col : columns.text_fields) {
          if (col < 0 || col >= static_cast<int>(fields.size()) || fields[col].empty()) continue;
          if (!doc.raw_text.empty()) doc.raw_text.push_back(' ');
          doc.raw_text += fields[col];
        }
      }
      if (blank(doc.raw_text)) doc.raw_text = url_path_text(*doc.url);
      if (blank(doc.raw_text)) problem = "no text for url " + *doc.url;
    }

    if (!problem.empty()) {
      if (strict) throw ParseError("gkg row " + std::to_string(row) + ": " + problem);
      ++result.skipped;
      continue;
    }
    seen.insert(doc.id);
    result.documents.push_back(std::move(doc));
  }
  return result;
}

std::unordered_map<std::string, std::string> load_url_text_lookup(std::istream& in) {
  std::unordered_map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("url") || !obj["url"].is_string())
      throw ParseError("line " + std::to_string(lineno) + ": missing field url");
    if (!obj.contains("text") || !obj["text"].is_string())
      throw ParseError("line " + std::to_string(lineno) + ": missing field text");
    out[obj["url"].get<std::string>()] = obj["text"].get<std::string>();
  }
  return out;
}

std::vector<Document> load_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const std::string where = "line " + std::to_string(lineno);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
    for (const char* key : {"id", "text"}) {
      if (!obj.contains(key) || !obj[key].is_string())
        throw ParseError(where + ": missing field " + key);
    }
    Document doc;
    doc.id = obj["id"].get<std::string>();
    doc.raw_text = obj["text"].get<std::string>();
    if (doc.id.empty()) throw ParseError(where + ": empty id");
    if (blank(doc.raw_text)) throw ParseError(where + ": empty text");
    auto optional_string = [&](const char* key) -> std::optional<std::string> {
      if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
      if (!obj[key].is_string()) throw ParseError(where + ": field " + key + " must be a string");
      return obj[key].get<std::string>();
    };
    doc.url = optional_string("url");
    doc.published_at = optional_string("date");
    doc.source = optional_string("source");

    auto [it, inserted] = first_line.emplace(doc.id, lineno);
    if (!inserted) {
      throw ParseError("duplicate id \"" + doc.id + "\" on lines " + std::to_string(it->second) +
                       " and " + std::to_string(lineno));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::unordered_set<std::string> load_stopwords(std::istream& in) {
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string w;
    while (words >> w) {
      std::transform(w.begin(), w.end(), w.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      out.insert(w);
    }
  }
  return out;
}

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = [] {
    std::istringstream in{std::string(assets::stopwords_en())};
    return load_stopwords(in);
  }();
  return words;
}

CleanDocument preprocess(const Document& doc, const PreprocessOptions& opts) {
  if (blank(doc.raw_text)) throw PreconditionError("document " + doc.id + " has empty text");
  static const std::regex kUrl(R"((https?://|www\.)[^\s]+)", std::regex::icase);

  std::string text = opts.strip_urls ? std::regex_replace(doc.raw_text, kUrl, " ") : doc.raw_text;
  if (opts.lowercase) {
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  }
  if (opts.strip_digits) {
    std::erase_if(text, [](unsigned char c) { return std::isdigit(c); });
  }
  if (opts.strip_symbols) {
    for (char& c : text) {
      const auto u = static_cast<unsigned char>(c);
      if (u >= 0x80 || !std::isalnum(u)) c = ' ';
    }
  }

  CleanDocument out;
  out.id = doc.id;
  std::istringstream words(text);
  std::string w;
  while (words >> w) {
    if (w.size() < opts.min_token_length) continue;
    if (opts.stopwords.count(w)) continue;
    out.tokens.push_back(w);
  }
  for (const auto& t : out.tokens) {
    if (!out.text.empty()) out.text.push_back(' ');
    out.text += t;
  }
  out.degenerate = out.tokens.empty();
  return out;
}

Corpus preprocess_all(const std::vector<Document>& docs, const PreprocessOptions& opts,
                      std::string provenance) {
  Corpus corpus;
  corpus.provenance = std::move(provenance);
  corpus.documents.reserve(docs.size());
  for (const auto& d : docs) corpus.documents.push_back(preprocess(d, opts));
  return corpus;
}

PartitionPlan split_partitions(const std::vector<std::string>& ids, int K, double val_fraction,
                               std::uint64_t seed) {
  if (K < 1) throw PreconditionError("K must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw PreconditionError("val_fraction must lie in (0, 1)");
  {
    std::unordered_set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size()) throw PreconditionError("corpus ids are not unique");
  }
  const std::size_t n = ids.size();
  const auto n_val = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(static_cast<double>(n) * val_fraction)));
  if (n_val >= n || n - n_val < static_cast<std::size_t>(K)) {
    throw PreconditionError("cannot split " + std::to_string(n) + " documents into " +
                            std::to_string(K) + " training subsets plus " +
                            std::to_string(n_val) + " validation documents");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }

  PartitionPlan plan;
  plan.seed = seed;
  plan.K = K;
  auto take = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(idx.begin(), idx.end());
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(ids[i]);
    return out;
  };
  plan.validation_ids = take(0, n_val);
  const std::size_t n_train = n - n_val;
  const std::size_t base = n_train / K, extra = n_train % K;
  std::size_t cursor = n_val;
  for (int j = 0; j < K; ++j) {
    const std::size_t size = base + (static_cast<std::size_t>(j) < extra ? 1 : 0);
    plan.train_subsets.push_back(take(cursor, cursor + size));
    cursor += size;
  }
  return plan;
}

}  // namespace evdetect
