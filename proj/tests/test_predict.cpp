#include <doctest.h>

#include <cmath>
#include <numeric>

#include "grtm/error.hpp"
#include "grtm/gibbs.hpp"
#include "grtm/predict.hpp"
#include "grtm/synthetic.hpp"
#include "oracles.hpp"

using namespace grtm;

namespace {

std::vector<double> v(std::initializer_list<double> xs) { return xs; }

PosteriorEstimate tiny_model(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& u,
                             const Eigen::MatrixXd& train_zbar, std::vector<DocIndex> train_docs) {
  PosteriorEstimate m;
  m.num_topics = static_cast<int>(phi.rows());
  m.vocab_size = static_cast<int>(phi.cols());
  m.full_matrix = true;
  m.phi = phi;
  m.eta.resize(u.size());
  for (int k = 0; k < u.rows(); ++k) {
    for (int l = 0; l < u.cols(); ++l) m.eta[k * u.cols() + l] = u(k, l);
  }
  m.hyperparams = Hyperparams::symmetric(m.num_topics, m.vocab_size, 1.0, 0.01);
  m.train_docs = std::move(train_docs);
  m.train_zbar = train_zbar;
  return m;
}

// Fits a model on one fold of a synthetic corpus, indices mapped back to the
// full corpus.
PosteriorEstimate fit_fold(const Corpus& c, const FoldSplit& fold, int burn_in, std::uint64_t seed) {
  const auto pairs = build_train_pairs(c, fold.train_docs, 0.01, 4.0, 1.0, seed);
  const auto ts = make_training_set(c, fold.train_docs, pairs);
  TrainConfig cfg;
  cfg.hyperparams = Hyperparams::symmetric(2, c.vocab_size);
  cfg.hyperparams.burn_in = burn_in;
  cfg.record_timing = false;
  cfg.checkpoint_every = 0;
  Rng rng(seed);
  auto post = train(ts.corpus, ts.pairs, cfg, rng).posterior;
  for (auto& d : post.train_docs) d = ts.doc_ids[static_cast<std::size_t>(d)];
  return post;
}

}  // namespace

TEST_CASE("degenerate topics pin the token") {
  Eigen::MatrixXd phi(2, 2);
  phi << 1.0, 0.0, 0.0, 1.0;
  const std::vector<WordId> doc{0};
  TestInferenceConfig cfg;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    const auto t = infer_test_topics(doc, phi, {1.0, 1.0}, cfg, rng);
    CHECK(t.z == std::vector<int>{0});
    CHECK(t.zbar == Eigen::Vector2d(1.0, 0.0));
  }
}

TEST_CASE("uniform topics give uniform long-run proportions") {
  const Eigen::MatrixXd phi = Eigen::MatrixXd::Constant(4, 5, 0.2);
  const std::vector<WordId> doc{0, 1, 2, 3, 4, 0, 1};
  Rng rng(1);
  TestDocSampler s(doc, phi, std::vector<double>(4, 1.0), rng);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(4);
  const int sweeps = 20000;
  for (int i = 0; i < sweeps; ++i) {
    s.sweep(rng);
    acc += s.zbar();
  }
  acc /= sweeps;
  for (int k = 0; k < 4; ++k) CHECK(std::abs(acc[k] - 0.25) < 0.02);
}

TEST_CASE("test-document marginals match enumeration over 2^5 assignments") {
  Eigen::MatrixXd phi(2, 3);
  phi << 0.7, 0.2, 0.1, 0.1, 0.3, 0.6;
  const std::vector<WordId> doc{0, 2, 1, 2, 0};
  const std::vector<double> alpha{0.5, 0.8};
  std::vector<std::vector<double>> want(5, std::vector<double>(2, 0.0));
  double norm = 0.0;
  for (int code = 0; code < 32; ++code) {
    std::vector<int> counts(2, 0);
    double p = 1.0;
    for (int n = 0; n < 5; ++n) {
      const int k = (code >> n) & 1;
      ++counts[static_cast<std::size_t>(k)];
      p *= phi(k, doc[static_cast<std::size_t>(n)]);
    }
    p *= std::tgamma(counts[0] + alpha[0]) * std::tgamma(counts[1] + alpha[1]);
    norm += p;
    for (int n = 0; n < 5; ++n) want[static_cast<std::size_t>(n)][static_cast<std::size_t>((code >> n) & 1)] += p;
  }
  Rng rng(2);
  TestDocSampler s(doc, phi, alpha, rng);
  std::vector<double> freq(5, 0.0);
  const int sweeps = 100000;
  for (int i = 0; i < sweeps; ++i) {
    s.sweep(rng);
    for (std::size_t n = 0; n < 5; ++n) freq[n] += s.z()[n] == 0 ? 1.0 : 0.0;
  }
  for (std::size_t n = 0; n < 5; ++n) CHECK(std::abs(freq[n] / sweeps - want[n][0] / norm) < 0.02);
}

TEST_CASE("test inference is deterministic and validates input") {
  Eigen::MatrixXd phi(2, 3);
  phi << 0.7, 0.2, 0.1, 0.1, 0.3, 0.6;
  const std::vector<WordId> doc{0, 2, 1};
  TestInferenceConfig cfg;
  Rng a(3), b(3);
  const auto ta = infer_test_topics(doc, phi, {1.0, 1.0}, cfg, a);
  const auto tb = infer_test_topics(doc, phi, {1.0, 1.0}, cfg, b);
  CHECK(ta.z == tb.z);
  CHECK(ta.iterations == tb.iterations);
  CHECK(ta.iterations <= cfg.max_iters);
  Rng r(4);
  CHECK_THROWS_AS(infer_test_topics(std::vector<WordId>{}, phi, {1.0, 1.0}, cfg, r), ArgumentError);
  CHECK_THROWS_AS(infer_test_topics(std::vector<WordId>{3}, phi, {1.0, 1.0}, cfg, r), ArgumentError);
  cfg.rel_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

TEST_CASE("predict_link examples") {
  const Eigen::Vector2d e1(1, 0);
  const auto p = predict_link(e1, e1, Eigen::Matrix2d::Identity());
  CHECK(p.score == 1.0);
  CHECK(p.label == 1);
  const auto z = predict_link(e1, e1, Eigen::Matrix2d::Zero());
  CHECK(z.score == 0.0);
  CHECK(z.label == 0);
}

TEST_CASE("sigma of the score gives the same ranking") {
  Rng rng(5);
  std::vector<double> s(50), sig(50);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal() * 3;
    sig[i] = 1.0 / (1.0 + std::exp(-s[i]));
  }
  CHECK(average_ranks(s) == average_ranks(sig));
}

TEST_CASE("ranking examples") {
  const auto s = v({0.8, 0.1, 0.5, 0.3});
  const std::vector<std::size_t> targets{0, 2};
  CHECK(mean_rank_of(s, targets) == 1.5);
  const auto tied = v({0.2, 0.2, 0.2, 0.2});
  const std::vector<std::size_t> one{1};
  CHECK(mean_rank_of(tied, one) == 2.5);
  CHECK(average_ranks(v({3.0, 1.0, 3.0})) == v({1.5, 3.0, 1.5}));
}

TEST_CASE("word ranking examples") {
  const auto p = v({0.5, 0.3, 0.2});
  CHECK(average_ranks(p)[1] == 2.0);
  const auto uniform = std::vector<double>(7, 1.0 / 7);
  for (double r : average_ranks(uniform)) CHECK(r == 4.0);
}

TEST_CASE("AUC examples") {
  CHECK(auc(v({0.9, 0.6, 0.4}), std::vector<int>{1, 0, 1}) == 0.5);
  CHECK(auc(v({0.9, 0.8, 0.1, 0.0}), std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(auc(v({0.3, 0.3, 0.3}), std::vector<int>{1, 0, 0}) == 0.5);
  CHECK_THROWS_AS(auc(v({0.3, 0.4}), std::vector<int>{1, 1}), ArgumentError);
}

TEST_CASE("AUC agrees with pair counting and is invariant to increasing maps") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(40), t(40), u(40);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::round(rng.normal() * 4) / 4;  // some ties
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.uniform_index(2));
      t[i] = 1.0 / (1.0 + std::exp(-s[i]));
      u[i] = 3.0 * s[i] - 7.0;
    }
    const double a = auc(s, y);
    CHECK(a == doctest::Approx(oracle::auc_pairs(s, y)).epsilon(1e-12));
    CHECK(auc(t, y) == a);
    CHECK(auc(u, y) == a);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("random scorer has expected link rank (T + 1) / 2") {
  const std::size_t t_docs = 30;
  Rng rng(7);
  double total = 0.0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<double> s(t_docs);
    for (auto& x : s) x = rng.uniform();
    const std::vector<std::size_t> target{rng.uniform_index(t_docs)};
    const double r = mean_rank_of(s, target);
    CHECK(r >= 1.0);
    CHECK(r <= static_cast<double>(t_docs));
    total += r;
  }
  CHECK(std::abs(total / trials - 15.5) / 15.5 < 0.05);
}

TEST_CASE("link rank pools over links and respects orientation") {
  // Docs 0..3 train, 4 test. Test doc cites 0 and 2, is cited by 3.
  Corpus c;
  c.vocab_size = 2;
  for (int i = 0; i < 5; ++i) c.docs.push_back(Document{"d" + std::to_string(i), {0, 1}, {}});
  c.links = {{3, 4}, {4, 0}, {4, 2}};
  c.validate();
  Eigen::MatrixXd train_zbar(4, 2);
  train_zbar << 1, 0, 0, 1, 0.8, 0.2, 0.5, 0.5;
  Eigen::Matrix2d u;
  u << 2, -1, -1, 0;
  const auto m = tiny_model(Eigen::MatrixXd::Constant(2, 2, 0.5), u, train_zbar, {0, 1, 2, 3});
  const std::vector<DocIndex> test{4};
  const std::vector<Eigen::VectorXd> tz{Eigen::Vector2d(1, 0)};
  // Scores test->train: zbar_test^T U zbar_j = 2 z0 - z1: (2, -1, 1.4, 0.5).
  const auto r = link_rank(c, test, tz, m, LinkOrientation::test_to_train);
  CHECK(r.value == 1.5);
  CHECK(r.count == 2);
  const auto perfect = (1.0 + 2.0) / 2.0;
  CHECK(r.value == perfect);
  // train->test: zbar_j^T U zbar_test = 2 z0 - z1 as well (symmetric U); only doc 3 counts.
  const auto back = link_rank(c, test, tz, m, LinkOrientation::train_to_test);
  CHECK(back.count == 1);
  CHECK(back.value == 3.0);
  const auto either = link_rank(c, test, tz, m, LinkOrientation::either);
  CHECK(either.count == 3);
  CHECK(either.value == doctest::Approx((1.0 + 2.0 + 3.0) / 3.0));

  Corpus lonely = c;
  lonely.links.clear();
  const auto none = link_rank(lonely, test, tz, m, LinkOrientation::test_to_train);
  CHECK(none.skipped == 1);
  CHECK(std::isnan(none.value));
}

TEST_CASE("word rank beats the uniform baseline on a synthetic corpus") {
  const auto sc = generate_synthetic(two_community_spec(3));
  const Corpus& c = sc.corpus;
  const auto folds = split_folds(c, 5, 3);
  const auto model = fit_fold(c, folds[0], 60, 3);
  TestInferenceConfig cfg;
  cfg.word_pred_burn_in = 20;
  cfg.word_pred_samples = 20;
  const auto wr = word_rank(c, folds[0].test_docs, model, cfg, 11);
  CHECK(wr.count > 0);
  CHECK(wr.value >= 1.0);
  CHECK(wr.value <= c.vocab_size);
  CHECK(wr.value < (c.vocab_size + 1) / 2.0);
  const auto again = word_rank(c, folds[0].test_docs, model, cfg, 11);
  CHECK(again.value == wr.value);
}

TEST_CASE("suggestions are ordered and complete") {
  const auto sc = generate_synthetic(two_community_spec(4));
  const Corpus& c = sc.corpus;
  const auto folds = split_folds(c, 5, 4);
  const auto model = fit_fold(c, folds[1], 100, 4);
  TestInferenceConfig cfg;
  const auto& tokens = c.docs[static_cast<std::size_t>(folds[1].test_docs[0])].tokens;
  Rng rng(5);
  const auto all = suggest_links(tokens, model, 1000, cfg, c.directed, LinkOrientation::test_to_train, rng);
  REQUIRE(all.size() == model.train_docs.size());
  std::vector<DocIndex> ids;
  for (std::size_t r = 0; r < all.size(); ++r) {
    ids.push_back(all[r].doc);
    if (r > 0) CHECK(all[r].score <= all[r - 1].score);
  }
  std::sort(ids.begin(), ids.end());
  CHECK(ids == model.train_docs);

  // Queries from each community mostly pull in their own community.
  std::size_t same = 0, total = 0;
  for (DocIndex d : folds[1].test_docs) {
    Rng r(static_cast<std::uint64_t>(d));
    const auto top = suggest_links(c.docs[static_cast<std::size_t>(d)].tokens, model, 10, cfg, c.directed,
                                   LinkOrientation::test_to_train, r);
    CHECK(top.size() == 10);
    for (const auto& s : top) {
      same += sc.community[static_cast<std::size_t>(s.doc)] == sc.community[static_cast<std::size_t>(d)] ? 1 : 0;
      ++total;
    }
  }
  CHECK(static_cast<double>(same) / static_cast<double>(total) >= 0.8);
  Rng r(6);
  CHECK_THROWS_AS(suggest_links(tokens, model, 0, cfg, true, LinkOrientation::test_to_train, r), ArgumentError);
}

TEST_CASE("fold evaluation gives metrics in range and is deterministic") {
  const auto sc = generate_synthetic(two_community_spec(5));
  const Corpus& c = sc.corpus;
  const auto folds = split_folds(c, 5, 5);
  const auto model = fit_fold(c, folds[2], 60, 5);
  TestInferenceConfig cfg;
  cfg.word_pred_burn_in = 10;
  cfg.word_pred_samples = 10;
  const auto a = evaluate_fold(c, folds[2], model, cfg, LinkOrientation::test_to_train, 9);
  const auto b = evaluate_fold(c, folds[2], model, cfg, LinkOrientation::test_to_train, 9);
  CHECK(a.auc == b.auc);
  CHECK(a.link_rank == b.link_rank);
  CHECK(a.word_rank == b.word_rank);
  CHECK(a.auc >= 0.0);
  CHECK(a.auc <= 1.0);
  CHECK(a.link_rank >= 1.0);
  CHECK(a.link_rank <= static_cast<double>(model.train_docs.size()));
  CHECK(a.link_rank_links > 0);
}

TEST_CASE("summary uses the sample standard deviation") {
  const auto s = summarize(v({1.0, 2.0, 3.0}));
  CHECK(s.mean == 2.0);
  CHECK(s.std == 1.0);
  CHECK(summarize(v({4.0})).std == 0.0);
  EvalReport r;
  r.folds = {FoldMetrics{0, 2.0, 3.0, 0.5}, FoldMetrics{1, 4.0, 5.0, 0.7}};
  CHECK(r.link_rank().mean == 3.0);
  CHECK(r.auc().mean == doctest::Approx(0.6));
}

TEST_CASE("orientation names round trip") {
  for (auto o : {LinkOrientation::test_to_train, LinkOrientation::train_to_test, LinkOrientation::either}) {
    CHECK(parse_orientation(to_string(o)) == o);
  }
  CHECK_THROWS_AS(parse_orientation("sideways"), ArgumentError);
}
