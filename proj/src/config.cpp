// INI configuration for the pipeline runner.
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "evdetect/pipeline.hpp"

namespace evdetect {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : value + ",") {
    if (c == ',') {
      if (auto t = trim(cur); !t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

struct Field {
  std::string section, key;
  std::string where() const { return "[" + section + "] " + key; }

  long long as_int(const std::string& v) const {
    long long out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError(where() + ": expected an integer, got \"" + v + "\"");
    return out;
  }
  std::uint64_t as_u64(const std::string& v) const {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError(where() + ": expected an unsigned integer, got \"" + v + "\"");
    return out;
  }
  double as_double(const std::string& v) const {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(where() + ": expected a number, got \"" + v + "\"");
  }
  bool as_bool(const std::string& v) const {
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError(where() + ": expected true or false, got \"" + v + "\"");
  }
};

using Setter = std::function<void(PipelineConfig&, const Field&, const std::string&)>;

std::filesystem::path resolve(const PipelineConfig& cfg, const std::string& v) {
  std::filesystem::path p(v);
  return p.is_absolute() ? p : cfg.config_dir / p;
}

std::string read_text_file(const std::filesystem::path& path, const Field& f) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(f.where() + ": cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> s = {
      {"run",
       {{"seed", [](auto& c, auto& f, auto& v) { c.seed = f.as_u64(v); }},
        {"out_dir", [](auto& c, auto&, auto& v) { c.out_dir = v; }}}},
      {"corpus",
       {{"path", [](auto& c, auto&, auto& v) { c.corpus_path = resolve(c, v); }},
        {"format", [](auto& c, auto&, auto& v) { c.corpus_format = v; }},
        {"url_text", [](auto& c, auto&, auto& v) { c.url_text_path = resolve(c, v); }},
        {"strict", [](auto& c, auto& f, auto& v) { c.gkg_strict = f.as_bool(v); }},
        {"gkg_id", [](auto& c, auto& f, auto& v) { c.gkg_columns.id = static_cast<int>(f.as_int(v)); }},
        {"gkg_url", [](auto& c, auto& f, auto& v) { c.gkg_columns.url = static_cast<int>(f.as_int(v)); }},
        {"gkg_date", [](auto& c, auto& f, auto& v) { c.gkg_columns.date = static_cast<int>(f.as_int(v)); }},
        {"gkg_source", [](auto& c, auto& f, auto& v) { c.gkg_columns.source = static_cast<int>(f.as_int(v)); }},
        {"gkg_text_fields", [](auto& c, auto& f, auto& v) {
           c.gkg_columns.text_fields.clear();
           for (const auto& item : split_list(v)) c.gkg_columns.text_fields.push_back(static_cast<int>(f.as_int(item)));
         }}}},
      {"preprocess",
       {{"lowercase", [](auto& c, auto& f, auto& v) { c.preprocess.lowercase = f.as_bool(v); }},
        {"strip_urls", [](auto& c, auto& f, auto& v) { c.preprocess.strip_urls = f.as_bool(v); }},
        {"strip_digits", [](auto& c, auto& f, auto& v) { c.preprocess.strip_digits = f.as_bool(v); }},
        {"strip_symbols", [](auto& c, auto& f, auto& v) { c.preprocess.strip_symbols = f.as_bool(v); }},
        {"min_token_length", [](auto& c, auto& f, auto& v) { c.preprocess.min_token_length = static_cast<std::size_t>(f.as_int(v)); }},
        {"stopwords", [](auto& c, auto& f, auto& v) {
           if (v == "none") {
             c.preprocess.stopwords.clear();
             c.stopwords_path.reset();
             return;
           }
           c.stopwords_path = resolve(c, v);
           std::ifstream in(*c.stopwords_path);
           if (!in) throw ConfigError(f.where() + ": cannot read " + c.stopwords_path->string());
           c.preprocess.stopwords = load_stopwords(in);
         }}}},
      {"embedding",
       {{"backend", [](auto& c, auto&, auto& v) { c.backend = v; }},
        {"wordvec_path", [](auto& c, auto&, auto& v) { c.wordvec_path = resolve(c, v); }},
        {"mode", [](auto& c, auto&, auto& v) { c.embedding_mode = v; }},
        {"tfidf_min_df", [](auto& c, auto& f, auto& v) { c.tfidf_min_df = static_cast<int>(f.as_int(v)); }},
        {"tfidf_max_vocab", [](auto& c, auto& f, auto& v) { c.tfidf_max_vocab = static_cast<int>(f.as_int(v)); }},
        {"keywords_top_n", [](auto& c, auto& f, auto& v) { c.keywords.top_n = static_cast<int>(f.as_int(v)); }},
        {"ngram_max", [](auto& c, auto& f, auto& v) { c.keywords.ngram_max = static_cast<int>(f.as_int(v)); }},
        {"diversity", [](auto& c, auto& f, auto& v) { c.keywords.diversity = f.as_double(v); }}}},
      {"reduction",
       {{"method", [](auto& c, auto& f, auto& v) {
           if (v == "none") c.reduction = ReductionMethod::none;
           else if (v == "pca") c.reduction = ReductionMethod::pca;
           else if (v == "umap") c.reduction = ReductionMethod::umap;
           else throw ConfigError(f.where() + ": expected none, pca or umap, got \"" + v + "\"");
         }},
        {"pca_components", [](auto& c, auto& f, auto& v) { c.pca_components = static_cast<int>(f.as_int(v)); }},
        {"umap_n_neighbors", [](auto& c, auto& f, auto& v) { c.umap.n_neighbors = static_cast<int>(f.as_int(v)); }},
        {"umap_min_dist", [](auto& c, auto& f, auto& v) { c.umap.min_dist = f.as_double(v); }},
        {"umap_spread", [](auto& c, auto& f, auto& v) { c.umap.spread = f.as_double(v); }},
        {"umap_n_components", [](auto& c, auto& f, auto& v) { c.umap.n_components = static_cast<int>(f.as_int(v)); }},
        {"umap_n_epochs", [](auto& c, auto& f, auto& v) { c.umap.n_epochs = static_cast<int>(f.as_int(v)); }},
        {"umap_negative_sample_rate", [](auto& c, auto& f, auto& v) { c.umap.negative_sample_rate = static_cast<int>(f.as_int(v)); }}}},
      {"cluster",
       {{"algorithm", [](auto& c, auto&, auto& v) { c.cluster.algorithm = parse_algorithm(v); }},
        {"k", [](auto& c, auto& f, auto& v) { c.cluster.k = static_cast<int>(f.as_int(v)); }},
        {"auto_k", [](auto& c, auto& f, auto& v) { c.cluster.auto_k = f.as_bool(v); }},
        {"k_min", [](auto& c, auto& f, auto& v) { c.cluster.k_min = static_cast<int>(f.as_int(v)); }},
        {"k_max", [](auto& c, auto& f, auto& v) { c.cluster.k_max = static_cast<int>(f.as_int(v)); }},
        {"linkage", [](auto& c, auto&, auto& v) { c.cluster.linkage = parse_linkage(v); }},
        {"distance_threshold", [](auto& c, auto& f, auto& v) { c.cluster.distance_threshold = f.as_double(v); }},
        {"min_cluster_size", [](auto& c, auto& f, auto& v) { c.cluster.hdbscan.min_cluster_size = static_cast<int>(f.as_int(v)); }},
        {"min_samples", [](auto& c, auto& f, auto& v) { c.cluster.hdbscan.min_samples = static_cast<int>(f.as_int(v)); }},
        {"kmeans_restarts", [](auto& c, auto& f, auto& v) { c.cluster.kmeans.restarts = static_cast<int>(f.as_int(v)); }},
        {"kmeans_max_iter", [](auto& c, auto& f, auto& v) { c.cluster.kmeans.max_iter = static_cast<int>(f.as_int(v)); }},
        {"kmeans_tol", [](auto& c, auto& f, auto& v) { c.cluster.kmeans.tol = f.as_double(v); }},
        {"gmm_reg", [](auto& c, auto& f, auto& v) { c.cluster.gmm.reg = f.as_double(v); }},
        {"gmm_tol", [](auto& c, auto& f, auto& v) { c.cluster.gmm.tol = f.as_double(v); }},
        {"gmm_max_iter", [](auto& c, auto& f, auto& v) { c.cluster.gmm.max_iter = static_cast<int>(f.as_int(v)); }},
        {"gmm_restarts", [](auto& c, auto& f, auto& v) { c.cluster.gmm.restarts = static_cast<int>(f.as_int(v)); }}}},
      {"validation",
       {{"partitions", [](auto& c, auto& f, auto& v) { c.partitions = static_cast<int>(f.as_int(v)); }},
        {"val_fraction", [](auto& c, auto& f, auto& v) { c.val_fraction = f.as_double(v); }},
        {"seed", [](auto& c, auto& f, auto& v) { c.validation_seed = f.as_u64(v); }}}},
      {"provider",
       {{"mode", [](auto& c, auto& f, auto& v) {
           if (v == "mock") c.provider.mode = ProviderMode::mock;
           else if (v == "live") c.provider.mode = ProviderMode::live;
           else throw ConfigError(f.where() + ": expected mock or live, got \"" + v + "\"");
         }},
        {"base_url", [](auto& c, auto&, auto& v) { c.provider.base_url = v; }},
        {"embed_model", [](auto& c, auto&, auto& v) { c.provider.embed_model = v; }},
        {"chat_model", [](auto& c, auto&, auto& v) { c.provider.chat_model = v; }},
        {"api_key_env", [](auto& c, auto&, auto& v) { c.provider.api_key_env = v; }},
        {"timeout_seconds", [](auto& c, auto& f, auto& v) { c.provider.timeout_seconds = f.as_double(v); }},
        {"max_retries", [](auto& c, auto& f, auto& v) { c.provider.max_retries = static_cast<int>(f.as_int(v)); }},
        {"batch_size", [](auto& c, auto& f, auto& v) { c.provider.batch_size = static_cast<int>(f.as_int(v)); }},
        {"mock_dim", [](auto& c, auto& f, auto& v) { c.provider.mock_dim = static_cast<int>(f.as_int(v)); }},
        {"max_in_flight", [](auto& c, auto& f, auto& v) { c.provider.max_in_flight = static_cast<int>(f.as_int(v)); }},
        {"backoff_base_seconds", [](auto& c, auto& f, auto& v) { c.provider.backoff_base_seconds = f.as_double(v); }},
        {"backoff_factor", [](auto& c, auto& f, auto& v) { c.provider.backoff_factor = f.as_double(v); }},
        {"cache_dir", [](auto& c, auto&, auto& v) { c.provider.cache_dir = resolve(c, v); }}}},
      {"postdetect",
       {{"top_n", [](auto& c, auto& f, auto& v) { c.postdetect.top_n = static_cast<int>(f.as_int(v)); }},
        {"word_limit", [](auto& c, auto& f, auto& v) { c.postdetect.word_limit = static_cast<int>(f.as_int(v)); }},
        {"representatives", [](auto& c, auto& f, auto& v) { c.postdetect.representatives = static_cast<int>(f.as_int(v)); }},
        {"iptc_mode", [](auto& c, auto&, auto& v) { c.postdetect.iptc_mode = parse_iptc_mode(v); }},
        {"iptc_embedder", [](auto& c, auto& f, auto& v) {
           if (v != "backend" && v != "wordvec") throw ConfigError(f.where() + ": expected backend or wordvec");
           c.iptc_embedder = v;
         }},
        {"summary_prompt", [](auto& c, auto& f, auto& v) { c.postdetect.summary_template = read_text_file(resolve(c, v), f); }},
        {"iptc_prompt", [](auto& c, auto& f, auto& v) { c.postdetect.iptc_template = read_text_file(resolve(c, v), f); }}}},
      {"compare",
       {{"backends", [](auto& c, auto&, auto& v) { c.compare_backends = split_list(v); }},
        {"algorithms", [](auto& c, auto&, auto& v) { c.compare_algorithms = split_list(v); }}}},
  };
  return s;
}

}  // namespace

PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  cfg.config_dir = base_dir;
  const auto& sch = schema();
  for (const auto& [section, body] : tree) {
    const auto sec = sch.find(section);
    if (sec == sch.end()) {
      if (body.empty()) throw ConfigError("config: key \"" + section + "\" outside any section");
      throw ConfigError("config: unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end()) throw ConfigError("config: unknown key [" + section + "] " + key);
      setter->second(cfg, Field{section, key}, trim(node.get_value<std::string>()));
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  auto dir = path.parent_path();
  if (dir.empty()) dir = ".";
  return parse_config(in, dir);
}

void PipelineConfig::validate() const {
  if (corpus_path.empty()) throw ConfigError("[corpus] path is required");
  if (!std::filesystem::exists(corpus_path)) throw ConfigError("[corpus] path does not exist: " + corpus_path.string());
  if (corpus_format != "jsonl" && corpus_format != "gkg")
    throw ConfigError("[corpus] format must be jsonl or gkg, got \"" + corpus_format + "\"");
  if (url_text_path && !std::filesystem::exists(*url_text_path))
    throw ConfigError("[corpus] url_text does not exist: " + url_text_path->string());
  if (backend != "tfidf" && backend != "wordvec" && backend != "provider")
    throw ConfigError("[embedding] backend must be tfidf, wordvec or provider, got \"" + backend + "\"");
  if (embedding_mode != "doc" && embedding_mode != "keyword-mean")
    throw ConfigError("[embedding] mode must be doc or keyword-mean, got \"" + embedding_mode + "\"");
  const bool needs_wordvec = backend == "wordvec" || iptc_embedder == "wordvec";
  if (needs_wordvec && !wordvec_path) throw ConfigError("[embedding] wordvec_path is required for word vectors");
  if (wordvec_path && !std::filesystem::exists(*wordvec_path))
    throw ConfigError("[embedding] wordvec_path does not exist: " + wordvec_path->string());
  if (reduction == ReductionMethod::pca && pca_components < 1) throw ConfigError("[reduction] pca_components must be >= 1");
  if (reduction == ReductionMethod::umap && (umap.n_components < 1 || umap.n_neighbors < 2))
    throw ConfigError("[reduction] umap_n_components must be >= 1 and umap_n_neighbors >= 2");
  if (cluster.k < 1) throw ConfigError("[cluster] k must be >= 1");
  if (partitions < 2) throw ConfigError("[validation] partitions must be >= 2");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("[validation] val_fraction must lie in (0, 1)");
  if (postdetect.word_limit < 1 || postdetect.top_n < 1) throw ConfigError("[postdetect] word_limit and top_n must be >= 1");
  provider.validate();
}

std::uint64_t stage_seed(const PipelineConfig& cfg, const std::string& stage) { return derive_seed(cfg.seed, stage); }

}  // namespace evdetect
