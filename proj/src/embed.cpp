#include "evdetect/embed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "evdetect/assets.hpp"
#include "evdetect/llm_client.hpp"
#include "json.hpp"

namespace evdetect {

using nlohmann::json;

void EmbeddingMatrix::check() const {
  if (doc_ids.size() != static_cast<std::size_t>(values.rows()))
    throw PreconditionError("embedding matrix has " + std::to_string(values.rows()) +
                            " rows but " + std::to_string(doc_ids.size()) + " ids");
  if (!degenerate.empty() && degenerate.size() != doc_ids.size())
    throw PreconditionError("embedding matrix degenerate flags misaligned");
  if (!values.allFinite()) throw PreconditionError("embedding matrix has non-finite values");
}

EmbeddingMatrix EmbeddingMatrix::select(const std::vector<std::string>& ids) const {
  std::unordered_map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < doc_ids.size(); ++i) row_of.emplace(doc_ids[i], static_cast<Eigen::Index>(i));
  EmbeddingMatrix out;
  out.backend = backend;
  out.model_id = model_id;
  out.values.resize(static_cast<Eigen::Index>(ids.size()), values.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto it = row_of.find(ids[r]);
    if (it == row_of.end()) throw PreconditionError("unknown document id " + ids[r]);
    out.values.row(static_cast<Eigen::Index>(r)) = values.row(it->second);
    out.degenerate.push_back(degenerate.empty() ? false
                                                : degenerate[static_cast<std::size_t>(it->second)]);
  }
  out.doc_ids = ids;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<char, 8> kMagic{'E', 'M', 'B', 'M', 'A', 'T', '0', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw ParseError("EMBMAT01: truncated header");
  return static_cast<std::uint32_t>(bytes[0]) | static_cast<std::uint32_t>(bytes[1]) << 8 |
         static_cast<std::uint32_t>(bytes[2]) << 16 | static_cast<std::uint32_t>(bytes[3]) << 24;
}

}  // namespace

void write_embmat_binary(std::ostream& out, const Matrix& values) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(values.rows()));
  put_u32(out, static_cast<std::uint32_t>(values.cols()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const auto f = static_cast<float>(values(i, j));
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  }
}

Matrix read_embmat_binary(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw ParseError("not an EMBMAT01 file (bad magic)");
  const auto n = get_u32(in);
  const auto F = get_u32(in);
  Matrix values(n, F);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < F; ++j) {
      std::uint32_t bits;
      try {
        bits = get_u32(in);
      } catch (const ParseError&) {
        throw ParseError("EMBMAT01: truncated data at row " + std::to_string(i));
      }
      float f;
      std::memcpy(&f, &bits, sizeof f);
      values(i, j) = f;
    }
  }
  return values;
}

void write_embedding_matrix(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  m.check();
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    write_embmat_binary(out, m.values);
  }
  std::ofstream side(path.string() + ".json", std::ios::trunc);
  if (!side) throw Error("cannot write " + path.string() + ".json");
  side << json{{"backend", m.backend}, {"model_id", m.model_id}, {"doc_ids", m.doc_ids}}.dump(2)
       << '\n';
}

EmbeddingMatrix read_embedding_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  EmbeddingMatrix m;
  m.values = read_embmat_binary(in);
  std::ifstream side(path.string() + ".json");
  if (!side) throw ParseError("missing sidecar " + path.string() + ".json");
  json meta;
  try {
    side >> meta;
    m.backend = meta.at("backend").get<std::string>();
    m.model_id = meta.at("model_id").get<std::string>();
    m.doc_ids = meta.at("doc_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError("bad sidecar " + path.string() + ".json: " + e.what());
  }
  if (m.doc_ids.size() != static_cast<std::size_t>(m.values.rows()))
    throw ParseError("sidecar lists " + std::to_string(m.doc_ids.size()) + " ids for " +
                     std::to_string(m.values.rows()) + " rows");
  for (Eigen::Index i = 0; i < m.values.rows(); ++i)
    m.degenerate.push_back(m.values.row(i).isZero(0.0));
  return m;
}

// ---------------------------------------------------------------------------

TfidfModel fit_tfidf(const Corpus& corpus, int min_df, int max_vocab) {
  if (corpus.documents.empty()) throw PreconditionError("fit_tfidf: empty corpus");
  std::map<std::string, int> df;
  for (const auto& doc : corpus.documents) {
    std::vector<std::string> unique = doc.tokens;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (const auto& t : unique) ++df[t];
  }
  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [term, count] : df) {
    if (count >= min_df) kept.emplace_back(term, count);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (max_vocab > 0 && kept.size() > static_cast<std::size_t>(max_vocab)) kept.resize(max_vocab);
  if (kept.empty()) throw PreconditionError("fit_tfidf: empty vocabulary (min_df too large?)");
  std::sort(kept.begin(), kept.end());

  TfidfModel model;
  model.n_docs = static_cast<int>(corpus.documents.size());
  for (const auto& [term, count] : kept) {
    model.vocabulary.emplace(term, static_cast<int>(model.terms.size()));
    model.terms.push_back(term);
    model.doc_freq.push_back(count);
    model.idf.push_back(std::log((1.0 + model.n_docs) / (1.0 + count)) + 1.0);
  }
  return model;
}

Vector tfidf_vector(const TfidfModel& model, const std::vector<std::string>& tokens,
                    bool l2_normalize) {
  Vector row = Vector::Zero(static_cast<Eigen::Index>(model.terms.size()));
  for (const auto& t : tokens) {
    if (auto it = model.vocabulary.find(t); it != model.vocabulary.end()) row[it->second] += 1.0;
  }
  for (Eigen::Index j = 0; j < row.size(); ++j) row[j] *= model.idf[static_cast<std::size_t>(j)];
  if (l2_normalize) {
    const double norm = row.norm();
    if (norm > 0.0) row /= norm;
  }
  return row;
}

EmbeddingMatrix tfidf_transform(const TfidfModel& model, const Corpus& corpus, bool l2_normalize) {
  EmbeddingMatrix out;
  out.backend = "tfidf";
  out.model_id = "tfidf-v" + std::to_string(model.terms.size());
  out.values.resize(static_cast<Eigen::Index>(corpus.documents.size()),
                    static_cast<Eigen::Index>(model.terms.size()));
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const auto& doc = corpus.documents[i];
    const Vector row = tfidf_vector(model, doc.tokens, l2_normalize);
    out.values.row(static_cast<Eigen::Index>(i)) = row.transpose();
    out.doc_ids.push_back(doc.id);
    out.degenerate.push_back(row.isZero(0.0));
  }
  return out;
}

// ---------------------------------------------------------------------------

WordVectorTable load_word_vectors(std::istream& in) {
  WordVectorTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto words = split_words(line);
    if (words.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    const int dim = static_cast<int>(words.size()) - 1;
    if (dim < 1) throw ParseError(where + ": token without vector values");
    if (table.dim == 0) table.dim = dim;
    if (dim != table.dim)
      throw ParseError(where + ": expected " + std::to_string(table.dim) + " values, got " +
                       std::to_string(dim));
    Vector v(dim);
    for (int k = 0; k < dim; ++k) {
      const std::string& s = words[static_cast<std::size_t>(k) + 1];
      std::size_t used = 0;
      double value;
      try {
        value = std::stod(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != s.size() || !std::isfinite(value))
        throw ParseError(where + ": bad value \"" + s + "\"");
      v[k] = value;
    }
    auto [it, inserted] = table.vectors.insert_or_assign(words.front(), std::move(v));
    if (!inserted) ++table.duplicate_warnings;
  }
  if (table.dim == 0) throw ParseError("word vector file is empty");
  return table;
}

Vector average_vector(const WordVectorTable& table, const std::vector<std::string>& tokens,
                      bool* degenerate) {
  Vector sum = Vector::Zero(table.dim);
  int known = 0;
  for (const auto& t : tokens) {
    if (auto it = table.vectors.find(t); it != table.vectors.end()) {
      sum += it->second;
      ++known;
    }
  }
  if (degenerate) *degenerate = known == 0;
  if (known > 0) sum /= known;
  return sum;
}

EmbeddingMatrix average_word_embedding(const WordVectorTable& table, const Corpus& corpus,
                                       const std::string& model_id) {
  EmbeddingMatrix out;
  out.backend = "wordvec";
  out.model_id = model_id;
  out.values.resize(static_cast<Eigen::Index>(corpus.documents.size()), table.dim);
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    bool degenerate = false;
    out.values.row(static_cast<Eigen::Index>(i)) =
        average_vector(table, corpus.documents[i].tokens, &degenerate).transpose();
    out.doc_ids.push_back(corpus.documents[i].id);
    out.degenerate.push_back(degenerate);
  }
  return out;
}

// ---------------------------------------------------------------------------

EmbeddingMatrix provider_embed(ProviderClient& client, const std::vector<std::string>& texts,
                               const std::string& model_id) {
  if (texts.empty()) throw PreconditionError("provider_embed: no texts");
  const auto vectors = client.embed(texts, model_id);
  EmbeddingMatrix out;
  out.backend = "provider";
  out.model_id = model_id.empty() ? client.config().embed_model : model_id;
  const auto dim = vectors.front().size();
  out.values.resize(static_cast<Eigen::Index>(texts.size()), dim);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim) throw TransportError("provider returned ragged vectors", 200, 1);
    out.values.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
    out.doc_ids.push_back(std::to_string(i));
    out.degenerate.push_back(false);
  }
  return out;
}

EmbeddingMatrix provider_embed(ProviderClient& client, const Corpus& corpus,
                               const std::string& model_id) {
  std::vector<std::string> texts;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    if (corpus.documents[i].degenerate) continue;
    texts.push_back(corpus.documents[i].text);
    rows.push_back(i);
  }
  if (texts.empty()) throw PreconditionError("provider_embed: every document is degenerate");
  const EmbeddingMatrix dense = provider_embed(client, texts, model_id);
  EmbeddingMatrix out;
  out.backend = dense.backend;
  out.model_id = dense.model_id;
  out.values = Matrix::Zero(static_cast<Eigen::Index>(corpus.documents.size()), dense.F());
  out.degenerate.assign(corpus.documents.size(), true);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.values.row(static_cast<Eigen::Index>(rows[r])) = dense.values.row(static_cast<Eigen::Index>(r));
    out.degenerate[rows[r]] = false;
  }
  out.doc_ids = corpus.ids();
  return out;
}

// ---------------------------------------------------------------------------

TextEmbedder make_tfidf_embedder(const TfidfModel& model) {
  return [&model](const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(tfidf_vector(model, split_words(t), true));
    return out;
  };
}

TextEmbedder make_wordvec_embedder(const WordVectorTable& table) {
  return [&table](const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(average_vector(table, split_words(t)));
    return out;
  };
}

TextEmbedder make_provider_embedder(ProviderClient& client, const std::string& model_id) {
  return [&client, model_id](const std::vector<std::string>& texts) {
    return client.embed(texts, model_id);
  };
}

double cosine_similarity(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

KeywordExtraction extract_keywords(const CleanDocument& doc, const TextEmbedder& embedder,
                                   const KeywordOptions& opts) {
  if (doc.tokens.empty()) throw PreconditionError("extract_keywords: document has no tokens");
  if (opts.ngram_max < 1 || opts.ngram_max > 2)
    throw PreconditionError("extract_keywords: ngram_max must be 1 or 2");
  if (opts.diversity < 0.0 || opts.diversity > 1.0)
    throw PreconditionError("extract_keywords: diversity must lie in [0, 1]");

  auto is_stop = [&](const std::string& t) { return opts.stopwords && opts.stopwords->count(t); };
  std::vector<std::string> candidates;
  {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      for (int len = 1; len <= opts.ngram_max && i + static_cast<std::size_t>(len) <= doc.tokens.size(); ++len) {
        const auto& first = doc.tokens[i];
        const auto& last = doc.tokens[i + static_cast<std::size_t>(len) - 1];
        if (is_stop(first) || is_stop(last)) continue;
        std::string phrase = first;
        if (len == 2) phrase += " " + last;
        if (seen.insert(phrase).second) candidates.push_back(std::move(phrase));
      }
    }
  }
  KeywordExtraction result;
  if (candidates.empty() || opts.top_n <= 0) {
    result.no_candidates = candidates.empty();
    return result;
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<std::string> batch{doc.text};
  batch.insert(batch.end(), candidates.begin(), candidates.end());
  const auto vectors = embedder(batch);
  if (vectors.size() != batch.size()) throw Error("extract_keywords: embedder returned wrong count");
  const Vector& doc_vec = vectors.front();

  const std::size_t m = candidates.size();
  std::vector<double> relevance(m);
  for (std::size_t c = 0; c < m; ++c) relevance[c] = cosine_similarity(vectors[c + 1], doc_vec);

  // Candidates are sorted lexicographically, so strict '>' keeps the
  // lexicographically first among equal values.
  const double lambda = 1.0 - opts.diversity;
  const std::size_t want = std::min<std::size_t>(m, static_cast<std::size_t>(opts.top_n));
  std::vector<std::size_t> chosen;
  std::vector<bool> taken(m, false);
  std::vector<double> max_sim(m, -std::numeric_limits<double>::infinity());
  while (chosen.size() < want) {
    std::size_t best = m;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
      if (taken[c]) continue;
      const double redundancy = chosen.empty() ? 0.0 : max_sim[c];
      const double value = chosen.empty() ? relevance[c]
                                          : lambda * relevance[c] - (1.0 - lambda) * redundancy;
      if (best == m || value > best_value) {
        best = c;
        best_value = value;
      }
    }
    taken[best] = true;
    chosen.push_back(best);
    for (std::size_t c = 0; c < m; ++c) {
      if (!taken[c]) max_sim[c] = std::max(max_sim[c], cosine_similarity(vectors[c + 1], vectors[best + 1]));
    }
  }
  for (auto c : chosen) result.keywords.push_back({candidates[c], relevance[c]});
  std::stable_sort(result.keywords.begin(), result.keywords.end(),
                   [](const Keyword& a, const Keyword& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.text < b.text;
                   });
  return result;
}

EmbeddingMatrix keyword_mean_embedding(const Corpus& corpus, const TextEmbedder& embedder,
                                       const KeywordOptions& opts, std::string backend,
                                       std::string model_id) {
  EmbeddingMatrix out;
  out.backend = std::move(backend);
  out.model_id = std::move(model_id);
  std::vector<Vector> rows;
  for (const auto& doc : corpus.documents) {
    out.doc_ids.push_back(doc.id);
    if (doc.degenerate) {
      rows.emplace_back();
      out.degenerate.push_back(true);
      continue;
    }
    const auto extraction = extract_keywords(doc, embedder, opts);
    std::vector<std::string> phrases;
    for (const auto& k : extraction.keywords) phrases.push_back(k.text);
    if (phrases.empty()) phrases.push_back(doc.text);
    const auto vectors = embedder(phrases);
    Vector mean = Vector::Zero(vectors.front().size());
    for (const auto& v : vectors) mean += v;
    mean /= static_cast<double>(vectors.size());
    out.degenerate.push_back(mean.isZero(0.0));
    rows.push_back(std::move(mean));
  }
  Eigen::Index dim = 0;
  for (const auto& r : rows) dim = std::max(dim, r.size());
  out.values = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() == dim) out.values.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string render_refine_prompt(const std::vector<Keyword>& keywords, const std::string& excerpt,
                                 std::string_view prompt_template) {
  std::string list;
  for (const auto& k : keywords) list += "- " + k.text + "\n";
  const std::string_view tpl = prompt_template.empty() ? assets::prompt_refine_keywords() : prompt_template;
  return fill_template(tpl, {{"excerpt", excerpt},
                             {"keywords", list},
                             {"count", std::to_string(keywords.size())}});
}

namespace {

std::string normalize_reply_line(std::string line) {
  auto first = line.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  line.erase(0, first);
  // Bullets and "1." / "2)" numbering.
  while (!line.empty() && (line[0] == '-' || line[0] == '*' || line[0] == ' ')) line.erase(0, 1);
  std::size_t digits = 0;
  while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
  if (digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')'))
    line.erase(0, digits + 1);
  std::string out;
  for (unsigned char c : line) {
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (!out.empty() && out.back() != ' ') {
      out.push_back(' ');
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace

RefineResult refine_keywords(ProviderClient& client, const std::vector<Keyword>& keywords,
                             const std::string& doc_excerpt, std::string_view prompt_template) {
  if (keywords.empty()) throw PreconditionError("refine_keywords: empty keyword list");
  RefineResult result{keywords, 0};
  std::string reply;
  try {
    reply = client.chat_complete(render_refine_prompt(keywords, doc_excerpt, prompt_template), 64, 0.0);
  } catch (const Error&) {
    result.warnings = 1;
    return result;
  }
  if (is_mock_reply(reply)) return result;

  std::vector<Keyword> refined;
  std::unordered_set<std::string> seen;
  std::istringstream lines(reply);
  std::string line;
  while (std::getline(lines, line)) {
    std::string text = normalize_reply_line(line);
    if (text.empty() || !seen.insert(text).second) continue;
    double score = 0.0;
    bool exact = false;
    bool related = false;
    for (const auto& k : keywords) {
      if (k.text == text) {
        score = k.score;
        exact = true;
        break;
      }
    }
    if (!exact) {
      for (const auto& k : keywords) {
        if (k.text.find(text) != std::string::npos || text.find(k.text) != std::string::npos) {
          score = related ? std::max(score, k.score) : k.score;
          related = true;
        }
      }
    }
    refined.push_back({text, score});
    if (refined.size() == keywords.size()) break;
  }
  if (refined.empty()) {
    result.warnings = 1;
    return result;
  }
  result.keywords = std::move(refined);
  return result;
}

}  // namespace evdetect
