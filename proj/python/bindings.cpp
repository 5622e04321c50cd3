#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "grtm/corpus.hpp"
#include "grtm/error.hpp"
#include "grtm/gibbs.hpp"
#include "grtm/predict.hpp"
#include "grtm/samplers.hpp"
#include "grtm/serialize.hpp"
#include "grtm/synthetic.hpp"

namespace py = pybind11;
using namespace grtm;

namespace {

Corpus make_corpus(const std::vector<std::vector<WordId>>& docs, const std::vector<std::pair<DocIndex, DocIndex>>& links,
                   int vocab_size, bool directed) {
  Corpus c;
  c.vocab_size = vocab_size;
  c.directed = directed;
  for (std::size_t i = 0; i < docs.size(); ++i) c.docs.push_back(Document{"d" + std::to_string(i), docs[i], {}});
  for (auto [a, b] : links) {
    if (!directed && a > b) std::swap(a, b);
    c.links.push_back(Link{a, b});
  }
  std::sort(c.links.begin(), c.links.end());
  c.links.erase(std::unique(c.links.begin(), c.links.end()), c.links.end());
  c.validate();
  return c;
}

Corpus synthetic(const std::string& kind, std::uint64_t seed, bool binary) {
  SyntheticSpec spec = kind == "two-community" ? two_community_spec(seed)
                       : kind == "asymmetric"  ? asymmetric_blocks_spec(seed)
                       : kind == "imbalanced"  ? imbalanced_spec(seed)
                       : kind == "cora-scale"  ? cora_scale_spec(seed)
                                               : throw ArgumentError("unknown synthetic kind '" + kind + "'");
  spec.binary = binary;
  return generate_synthetic(spec).corpus;
}

py::dict metrics_dict(const FoldMetrics& m) {
  py::dict d;
  d["fold"] = m.fold;
  d["link_rank"] = m.link_rank;
  d["word_rank"] = m.word_rank;
  d["auc"] = m.auc;
  d["link_rank_links"] = m.link_rank_links;
  d["link_rank_skipped"] = m.link_rank_skipped;
  d["word_rank_docs"] = m.word_rank_docs;
  d["word_rank_skipped"] = m.word_rank_skipped;
  return d;
}

}  // namespace

PYBIND11_MODULE(_grtm, m) {
  m.doc() = "Generalized relational topic models with collapsed Gibbs sampling";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());

  py::enum_<Loss>(m, "Loss").value("logistic", Loss::logistic).value("hinge", Loss::hinge);
  py::enum_<LinkOrientation>(m, "LinkOrientation")
      .value("test_to_train", LinkOrientation::test_to_train)
      .value("train_to_test", LinkOrientation::train_to_test)
      .value("either", LinkOrientation::either);

  py::class_<Corpus>(m, "Corpus")
      .def(py::init(&make_corpus), py::arg("docs"), py::arg("links"), py::arg("vocab_size"),
           py::arg("directed") = true)
      .def_property_readonly("num_docs", &Corpus::num_docs)
      .def_property_readonly("num_tokens", &Corpus::num_tokens)
      .def_readonly("vocab_size", &Corpus::vocab_size)
      .def_readonly("directed", &Corpus::directed)
      .def_property_readonly("links",
                             [](const Corpus& c) {
                               std::vector<std::pair<DocIndex, DocIndex>> out;
                               for (const auto& l : c.links) out.emplace_back(l.citing, l.cited);
                               return out;
                             })
      .def("tokens", [](const Corpus& c, std::size_t i) { return c.docs.at(i).tokens; })
      .def("external_id", [](const Corpus& c, std::size_t i) { return c.docs.at(i).external_id; })
      .def("label", [](const Corpus& c, std::size_t i) { return c.docs.at(i).label; })
      .def("has_link", &Corpus::has_link);

  m.def(
      "load_linqs",
      [](const std::vector<std::string>& content, const std::vector<std::string>& cites, bool directed) {
        return load_linqs(content, cites, directed);
      },
      py::arg("content"), py::arg("cites"), py::arg("directed") = true);
  m.def("synthetic", &synthetic, py::arg("kind"), py::arg("seed") = 1, py::arg("binary") = false,
        "Synthetic network: 'two-community', 'asymmetric', 'imbalanced' or 'cora-scale'");

  py::class_<Hyperparams>(m, "Hyperparams")
      .def(py::init(&Hyperparams::symmetric), py::arg("num_topics"), py::arg("vocab_size"), py::arg("alpha") = 5.0,
           py::arg("beta") = 0.01)
      .def_readwrite("num_topics", &Hyperparams::num_topics)
      .def_readwrite("alpha", &Hyperparams::alpha)
      .def_readwrite("beta", &Hyperparams::beta)
      .def_readwrite("nu2", &Hyperparams::nu2)
      .def_readwrite("c_pos", &Hyperparams::c_pos)
      .def_readwrite("c_neg", &Hyperparams::c_neg)
      .def_readwrite("ell", &Hyperparams::ell)
      .def_readwrite("loss", &Hyperparams::loss)
      .def_readwrite("full_matrix", &Hyperparams::full_matrix)
      .def_readwrite("burn_in", &Hyperparams::burn_in)
      .def_readwrite("seed", &Hyperparams::seed)
      .def("validate", &Hyperparams::validate);

  py::class_<FoldSplit>(m, "FoldSplit")
      .def_readonly("train_docs", &FoldSplit::train_docs)
      .def_readonly("test_docs", &FoldSplit::test_docs)
      .def_readonly("fold_index", &FoldSplit::fold_index);
  m.def("split_folds", &split_folds, py::arg("corpus"), py::arg("n_folds"), py::arg("seed"));

  py::class_<TrainPairSet>(m, "TrainPairSet")
      .def_property_readonly("pairs",
                             [](const TrainPairSet& s) {
                               std::vector<std::tuple<DocIndex, DocIndex, int, double>> out;
                               for (const auto& p : s.pairs) out.emplace_back(p.i, p.j, p.y, p.c);
                               return out;
                             })
      .def_readonly("num_positive", &TrainPairSet::num_positive)
      .def_readonly("num_negative", &TrainPairSet::num_negative)
      .def_readonly("warnings", &TrainPairSet::warnings)
      .def("__len__", &TrainPairSet::size);
  m.def(
      "build_train_pairs",
      [](const Corpus& c, const std::vector<DocIndex>& train_docs, double neg_ratio, double c_pos, double c_neg,
         std::uint64_t seed) { return build_train_pairs(c, train_docs, neg_ratio, c_pos, c_neg, seed); },
      py::arg("corpus"), py::arg("train_docs"), py::arg("neg_ratio"), py::arg("c_pos") = 4.0, py::arg("c_neg") = 1.0,
      py::arg("seed") = 0);

  py::class_<TrainingSet>(m, "TrainingSet")
      .def_readonly("corpus", &TrainingSet::corpus)
      .def_readonly("pairs", &TrainingSet::pairs)
      .def_readonly("doc_ids", &TrainingSet::doc_ids);
  m.def(
      "make_training_set",
      [](const Corpus& c, const std::vector<DocIndex>& train_docs, const TrainPairSet& pairs) {
        return make_training_set(c, train_docs, pairs);
      },
      py::arg("corpus"), py::arg("train_docs"), py::arg("pairs"));

  py::class_<PosteriorEstimate>(m, "Posterior")
      .def_readonly("num_topics", &PosteriorEstimate::num_topics)
      .def_readonly("full_matrix", &PosteriorEstimate::full_matrix)
      .def_readonly("phi", &PosteriorEstimate::phi)
      .def_readonly("eta", &PosteriorEstimate::eta)
      .def_readonly("hyperparams", &PosteriorEstimate::hyperparams)
      .def_readwrite("train_docs", &PosteriorEstimate::train_docs)
      .def_readonly("train_zbar", &PosteriorEstimate::train_zbar)
      .def_property_readonly("weight_matrix", &PosteriorEstimate::weight_matrix);

  py::class_<TimingReport>(m, "TimingReport")
      .def_readonly("z_seconds", &TimingReport::z_seconds)
      .def_readonly("lambda_seconds", &TimingReport::lambda_seconds)
      .def_readonly("eta_seconds", &TimingReport::eta_seconds)
      .def_readonly("total_seconds", &TimingReport::total_seconds)
      .def_readonly("iterations", &TimingReport::iterations);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("posterior", &TrainResult::posterior)
      .def_readonly("timing", &TrainResult::timing)
      .def_readonly("iterations_done", &TrainResult::iterations_done)
      .def_readonly("numerical_warnings", &TrainResult::numerical_warnings);

  m.def(
      "train",
      [](const Corpus& c, const TrainPairSet& pairs, const Hyperparams& hp, bool approx, int samples,
         std::uint64_t rng_seed) {
        TrainConfig cfg;
        cfg.hyperparams = hp;
        cfg.approx_z = approx;
        cfg.post_burn_in_samples = samples;
        cfg.checkpoint_every = 0;
        Rng rng(rng_seed);
        py::gil_scoped_release release;
        return train(c, pairs, cfg, rng);
      },
      py::arg("corpus"), py::arg("pairs"), py::arg("hyperparams"), py::arg("approx") = false, py::arg("samples") = 1,
      py::arg("rng_seed") = 0, "Runs burn_in + samples - 1 Gibbs iterations on a training corpus");

  m.def(
      "evaluate_fold",
      [](const Corpus& c, const FoldSplit& fold, const PosteriorEstimate& model, LinkOrientation orientation,
         std::uint64_t seed, int word_burn_in, int word_samples) {
        TestInferenceConfig cfg;
        cfg.word_pred_burn_in = word_burn_in;
        cfg.word_pred_samples = word_samples;
        FoldMetrics out;
        {
          py::gil_scoped_release release;
          out = evaluate_fold(c, fold, model, cfg, orientation, seed);
        }
        return metrics_dict(out);
      },
      py::arg("corpus"), py::arg("fold"), py::arg("model"), py::arg("orientation") = LinkOrientation::test_to_train,
      py::arg("seed") = 0, py::arg("word_burn_in") = 50, py::arg("word_samples") = 50);

  m.def(
      "suggest_links",
      [](const std::vector<WordId>& tokens, const PosteriorEstimate& model, std::size_t top_k, bool directed,
         LinkOrientation orientation, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<std::pair<DocIndex, double>> out;
        for (const auto& s : suggest_links(tokens, model, top_k, TestInferenceConfig{}, directed, orientation, rng)) {
          out.emplace_back(s.doc, s.score);
        }
        return out;
      },
      py::arg("tokens"), py::arg("model"), py::arg("top_k") = 10, py::arg("directed") = true,
      py::arg("orientation") = LinkOrientation::test_to_train, py::arg("seed") = 0);

  m.def(
      "predict_link",
      [](const Eigen::VectorXd& zi, const Eigen::VectorXd& zj, const Eigen::MatrixXd& u) {
        const auto p = predict_link(zi, zj, u);
        return std::make_pair(p.score, p.label);
      },
      py::arg("zbar_i"), py::arg("zbar_j"), py::arg("weight_matrix"), "Returns (omega, label)");

  m.def(
      "auc", [](const std::vector<double>& s, const std::vector<int>& y) { return auc(s, y); }, py::arg("scores"),
      py::arg("labels"));

  m.def(
      "sample_polya_gamma",
      [](double b, double c, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        Eigen::VectorXd out(static_cast<Eigen::Index>(n));
        for (auto& x : out) x = sample_polya_gamma(b, c, rng);
        return out;
      },
      py::arg("b"), py::arg("c"), py::arg("n"), py::arg("seed") = 0);
  m.def(
      "sample_inverse_gaussian",
      [](double mean, double shape, std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        Eigen::VectorXd out(static_cast<Eigen::Index>(n));
        for (auto& x : out) x = sample_inverse_gaussian(mean, shape, rng);
        return out;
      },
      py::arg("mean"), py::arg("shape"), py::arg("n"), py::arg("seed") = 0);

  m.def(
      "load_model_posterior", [](const std::string& path) { return load_model(path).posterior; }, py::arg("path"),
      "Reads the posterior estimate from a model file written by `grtm train`");
}
