// Python module _evdetect. Matrices convert through pybind11's Eigen caster;
// structured results cross as JSON text and are decoded on the Python side.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>

#include "evdetect/cluster.hpp"
#include "evdetect/corpus.hpp"
#include "evdetect/dimred.hpp"
#include "evdetect/embed.hpp"
#include "evdetect/pipeline.hpp"
#include "evdetect/validate.hpp"

namespace py = pybind11;
using namespace evdetect;

namespace {

Corpus corpus_from_texts(const std::vector<std::string>& texts, const PreprocessOptions& opts) {
  std::vector<Document> docs;
  docs.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Document d;
    d.id = std::to_string(i);
    d.raw_text = texts[i];
    docs.push_back(std::move(d));
  }
  return preprocess_all(docs, opts, "python");
}

std::string dump(const nlohmann::json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(_evdetect, m) {
  m.doc() = "News event detection core";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  // Subclasses registered after the base so they map to their own types.
  py::register_exception<ConfigError>(m, "ConfigError", m.attr("Error").ptr());
  py::register_exception<ParseError>(m, "ParseError", m.attr("Error").ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", m.attr("Error").ptr());
  py::register_exception<NumericalError>(m, "NumericalError", m.attr("Error").ptr());

  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stage"));

  m.def(
      "preprocess",
      [](const std::string& text, bool lowercase, bool strip_urls, bool strip_digits,
         bool strip_symbols, std::size_t min_token_length) {
        PreprocessOptions o;
        o.lowercase = lowercase;
        o.strip_urls = strip_urls;
        o.strip_digits = strip_digits;
        o.strip_symbols = strip_symbols;
        o.min_token_length = min_token_length;
        Document d;
        d.raw_text = text;
        return preprocess(d, o).tokens;
      },
      py::arg("text"), py::arg("lowercase") = true, py::arg("strip_urls") = true,
      py::arg("strip_digits") = true, py::arg("strip_symbols") = true,
      py::arg("min_token_length") = 2);

  m.def(
      "tfidf",
      [](const std::vector<std::string>& texts, int min_df, int max_vocab, bool l2_normalize) {
        const Corpus c = corpus_from_texts(texts, {});
        const TfidfModel model = fit_tfidf(c, min_df, max_vocab);
        Matrix values = tfidf_transform(model, c, l2_normalize).values;
        return py::make_tuple(values, model.terms, model.idf);
      },
      py::arg("texts"), py::arg("min_df") = 1, py::arg("max_vocab") = 0,
      py::arg("l2_normalize") = true);

  m.def(
      "pca",
      [](const Matrix& X, int d) {
        const PcaModel model = pca_fit(X, d);
        Matrix Z = pca_transform(model, X);
        return py::make_tuple(Z, Matrix(model.components), Vector(model.explained_variance),
                              Vector(model.mean));
      },
      py::arg("X"), py::arg("d"));

  m.def(
      "umap",
      [](const Matrix& X, int n_neighbors, double min_dist, int n_components, int n_epochs,
         std::uint64_t seed) {
        UmapParams p;
        p.n_neighbors = n_neighbors;
        p.min_dist = min_dist;
        p.n_components = n_components;
        p.n_epochs = n_epochs;
        p.seed = seed;
        return umap_fit_transform(X, p);
      },
      py::arg("X"), py::arg("n_neighbors") = 15, py::arg("min_dist") = 0.1,
      py::arg("n_components") = 2, py::arg("n_epochs") = 200, py::arg("seed") = 42);

  m.def(
      "kmeans",
      [](const Matrix& X, int k, std::uint64_t seed, int restarts) {
        KmeansOptions o;
        o.restarts = restarts;
        return dump(to_json(kmeans(X, k, seed, o)));
      },
      py::arg("X"), py::arg("k"), py::arg("seed") = 0, py::arg("restarts") = 10);

  m.def(
      "pam", [](const Matrix& X, int k, std::uint64_t seed) { return dump(to_json(pam(X, k, seed))); },
      py::arg("X"), py::arg("k"), py::arg("seed") = 0);

  m.def(
      "agglomerative",
      [](const Matrix& X, const std::string& linkage, std::optional<int> k,
         std::optional<double> distance_threshold) {
        return dump(to_json(agglomerative(X, parse_linkage(linkage), AggloCut{k, distance_threshold})));
      },
      py::arg("X"), py::arg("linkage") = "ward", py::arg("k") = py::none(),
      py::arg("distance_threshold") = py::none());

  m.def(
      "gmm",
      [](const Matrix& X, int k, std::uint64_t seed, double reg, int restarts) {
        GmmOptions o;
        o.reg = reg;
        o.restarts = restarts;
        return dump(to_json(gmm_em(X, k, seed, o)));
      },
      py::arg("X"), py::arg("k"), py::arg("seed") = 0, py::arg("reg") = 1e-6, py::arg("restarts") = 5);

  m.def(
      "hdbscan",
      [](const Matrix& X, int min_cluster_size, int min_samples) {
        return dump(to_json(hdbscan(X, HdbscanOptions{min_cluster_size, min_samples})));
      },
      py::arg("X"), py::arg("min_cluster_size") = 15, py::arg("min_samples") = 0);

  m.def(
      "elbow",
      [](const Matrix& X, int k_min, int k_max, std::uint64_t seed) {
        return dump(to_json(elbow_select_k(X, k_min, k_max, seed)));
      },
      py::arg("X"), py::arg("k_min") = 1, py::arg("k_max") = 12, py::arg("seed") = 0);

  m.def(
      "csai",
      [](const std::vector<Matrix>& trainings, const std::vector<Matrix>& representatives,
         const std::vector<std::vector<int>>& labels, const Matrix& validation) {
        if (trainings.size() != representatives.size() || trainings.size() != labels.size())
          throw PreconditionError("csai: trainings, representatives and labels differ in length");
        CsaiInputs in;
        in.validation = validation;
        for (std::size_t j = 0; j < trainings.size(); ++j) {
          ClusteringResult r;
          r.algorithm = "given";
          r.labels = labels[j];
          r.representatives = representatives[j];
          r.k = static_cast<int>(representatives[j].rows());
          in.partitions.push_back({trainings[j], std::move(r)});
        }
        return dump(to_json(csai(in)));
      },
      py::arg("trainings"), py::arg("representatives"), py::arg("labels"), py::arg("validation"));

  m.def("silhouette", &silhouette, py::arg("X"), py::arg("labels"));
  m.def("calinski_harabasz", &calinski_harabasz, py::arg("X"), py::arg("labels"));

  m.def(
      "split_partitions",
      [](const std::vector<std::string>& ids, int K, double val_fraction, std::uint64_t seed) {
        const PartitionPlan p = split_partitions(ids, K, val_fraction, seed);
        return py::make_tuple(p.validation_ids, p.train_subsets);
      },
      py::arg("ids"), py::arg("K"), py::arg("val_fraction") = 0.2, py::arg("seed") = 0);

  m.def(
      "run_pipeline",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out_dir,
         bool mock) {
        PipelineConfig cfg = load_config(config);
        if (out_dir) cfg.out_dir = *out_dir;
        if (mock) cfg.provider.mode = ProviderMode::mock;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(cfg);
        }
        nlohmann::json j{{"exit_code", r.exit_code}, {"error", r.error}, {"stages", r.stages}};
        j["failed_stage"] = r.failed_stage ? nlohmann::json(*r.failed_stage) : nlohmann::json();
        return dump(j);
      },
      py::arg("config"), py::arg("out_dir") = py::none(), py::arg("mock") = false);

  m.def(
      "compare",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out_dir,
         bool mock) {
        PipelineConfig cfg = load_config(config);
        if (out_dir) cfg.out_dir = *out_dir;
        if (mock) cfg.provider.mode = ProviderMode::mock;
        CompareResult r;
        {
          py::gil_scoped_release release;
          r = compare_embeddings(cfg);
        }
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : r.cells) {
          nlohmann::json per = nlohmann::json::array();
          for (double v : c.per_partition) per.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json());
          cells.push_back({{"backend", c.backend},
                           {"algorithm", c.algorithm},
                           {"csai_mean", std::isfinite(c.csai_mean) ? nlohmann::json(c.csai_mean) : nlohmann::json()},
                           {"csai_stddev", std::isfinite(c.csai_stddev) ? nlohmann::json(c.csai_stddev) : nlohmann::json()},
                           {"per_partition", per},
                           {"best", c.best},
                           {"error", c.error}});
        }
        return dump({{"exit_code", r.exit_code}, {"cells", cells}});
      },
      py::arg("config"), py::arg("out_dir") = py::none(), py::arg("mock") = false);
}
