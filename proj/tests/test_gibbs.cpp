#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "grtm/error.hpp"
#include "grtm/gibbs.hpp"
#include "grtm/synthetic.hpp"
#include "oracles.hpp"

using namespace grtm;

namespace {

Corpus make_corpus(const std::vector<std::vector<WordId>>& docs, int vocab, std::vector<Link> links = {}) {
  Corpus c;
  c.vocab_size = vocab;
  for (std::size_t i = 0; i < docs.size(); ++i) c.docs.push_back(Document{"d" + std::to_string(i), docs[i], {}});
  std::sort(links.begin(), links.end());
  c.links = std::move(links);
  c.validate();
  return c;
}

TrainPairSet make_pairs(std::vector<TrainPair> ps) {
  TrainPairSet out;
  for (const auto& p : ps) (p.y == 1 ? out.num_positive : out.num_negative)++;
  out.pairs = std::move(ps);
  return out;
}

std::vector<std::vector<int>> to_int(const std::vector<std::vector<WordId>>& docs) {
  std::vector<std::vector<int>> out;
  for (const auto& d : docs) out.emplace_back(d.begin(), d.end());
  return out;
}

// Brute-force conditional of one token: full joint for each candidate topic.
// The hinge factor uses the unexpanded form -(lambda + c zeta)^2 / (2 lambda).
std::vector<double> oracle_conditional(const GibbsChain& chain, DocIndex i, std::size_t n) {
  const auto& s = chain.state();
  const auto& hp = chain.hyperparams();
  const auto& corpus = chain.corpus();
  const auto& pairs = chain.pairs();
  std::vector<std::vector<WordId>> docs;
  for (const auto& d : corpus.docs) docs.push_back(d.tokens);
  auto z = s.z;
  std::vector<double> logp(static_cast<std::size_t>(hp.num_topics));
  for (int k = 0; k < hp.num_topics; ++k) {
    z[static_cast<std::size_t>(i)][n] = k;
    double lp = oracle::lda_log_joint(to_int(docs), z, hp.num_topics, corpus.vocab_size, hp.alpha[0], hp.beta[0]);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto& pr = pairs.pairs[p];
      const double w = oracle::omega_of(s.eta, oracle::zbar_of(z[static_cast<std::size_t>(pr.i)], hp.num_topics),
                                        oracle::zbar_of(z[static_cast<std::size_t>(pr.j)], hp.num_topics),
                                        hp.full_matrix);
      const double lambda = s.lambda[p];
      if (hp.loss == Loss::logistic) {
        lp += pr.c * (pr.y - 0.5) * w - 0.5 * lambda * w * w;
      } else {
        const double zeta = hp.ell - (2.0 * pr.y - 1.0) * w;
        lp -= (lambda + pr.c * zeta) * (lambda + pr.c * zeta) / (2.0 * lambda);
      }
    }
    logp[static_cast<std::size_t>(k)] = lp;
  }
  const double top = *std::max_element(logp.begin(), logp.end());
  double total = 0.0;
  for (double& l : logp) total += (l = std::exp(l - top));
  for (double& l : logp) l /= total;
  return logp;
}

struct Linked {
  Corpus corpus;
  TrainPairSet pairs;
};

Linked linked_fixture() {
  Linked f;
  f.corpus = make_corpus({{0, 1, 2, 1}, {2, 2, 0}, {1, 3}, {3, 0, 3, 2, 1}}, 4, {{0, 1}, {2, 0}, {3, 1}});
  f.pairs = make_pairs({{0, 1, 1, 4.0}, {2, 0, 1, 4.0}, {3, 1, 1, 4.0}, {1, 2, 0, 1.0}, {3, 0, 0, 1.0}});
  return f;
}

Hyperparams hyper(int k, int v, Loss loss, bool full) {
  auto hp = Hyperparams::symmetric(k, v, 0.7, 0.3);
  hp.loss = loss;
  hp.full_matrix = full;
  hp.ell = 1.5;
  return hp;
}

}  // namespace

TEST_CASE("logistic eta conditional: K=1, one positive pair gives N(0.25, 0.5)") {
  const Corpus c = make_corpus({{0}, {0}}, 1);
  const auto pairs = make_pairs({{0, 1, 1, 1.0}});
  auto hp = hyper(1, 1, Loss::logistic, true);
  hp.nu2 = 1.0;
  Rng rng(1);
  GibbsChain chain(c, pairs, hp, rng);
  chain.set_lambda({1.0});
  const auto g = chain.eta_conditional();
  CHECK(g.precision(0, 0) == doctest::Approx(2.0));
  CHECK(g.linear_term[0] == doctest::Approx(0.5));
  CHECK(precision_gaussian_mean(g)[0] == doctest::Approx(0.25));
}

TEST_CASE("hinge eta conditional: K=1, one positive pair gives N(1.0, 0.5)") {
  const Corpus c = make_corpus({{0}, {0}}, 1);
  auto hp = hyper(1, 1, Loss::hinge, true);
  hp.ell = 1.0;
  Rng rng(2);
  const auto pos = make_pairs({{0, 1, 1, 1.0}});
  GibbsChain chain(c, pos, hp, rng);
  chain.set_lambda({1.0});
  const auto g = chain.eta_conditional();
  CHECK(g.precision(0, 0) == doctest::Approx(2.0));
  CHECK(precision_gaussian_mean(g)[0] == doctest::Approx(1.0));

  const auto neg = make_pairs({{0, 1, 0, 1.0}});
  GibbsChain flipped(c, neg, hp, rng);
  flipped.set_lambda({1.0});
  const auto gf = flipped.eta_conditional();
  CHECK(gf.precision(0, 0) == doctest::Approx(2.0));
  CHECK(precision_gaussian_mean(gf)[0] == doctest::Approx(-1.0));
}

TEST_CASE("empty pair set: eta is drawn from the prior") {
  const Corpus c = make_corpus({{0, 1}, {1}}, 2);
  const TrainPairSet none;
  auto hp = hyper(2, 2, Loss::logistic, true);
  Rng rng(3);
  GibbsChain chain(c, none, hp, rng);
  const auto g = chain.eta_conditional();
  CHECK(g.precision.isApprox(Eigen::MatrixXd::Identity(4, 4)));
  CHECK(g.linear_term.isZero());
  const int n = 100000;
  Eigen::MatrixXd xs(n, 4);
  for (int s = 0; s < n; ++s) {
    chain.sample_eta(rng);
    xs.row(s) = chain.state().eta.transpose();
  }
  const Eigen::MatrixXd centered = xs.rowwise() - xs.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
  CHECK((cov - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 0.03);
  CHECK(xs.colwise().mean().cwiseAbs().maxCoeff() < 4.0 / std::sqrt(n));
}

TEST_CASE("eta conditional matches a naive sum of outer products") {
  const auto f = linked_fixture();
  for (Loss loss : {Loss::logistic, Loss::hinge}) {
    for (bool full : {true, false}) {
      auto hp = hyper(3, 4, loss, full);
      hp.nu2 = 2.0;
      Rng rng(4);
      GibbsChain chain(f.corpus, f.pairs, hp, rng);
      chain.set_lambda({0.3, 1.2, 0.7, 2.0, 0.9});
      const int k = 3, d = hp.eta_dim();
      Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(d, d) / hp.nu2;
      Eigen::VectorXd lin = Eigen::VectorXd::Zero(d);
      for (std::size_t p = 0; p < f.pairs.size(); ++p) {
        const auto& pr = f.pairs.pairs[p];
        const auto zi = zbar(chain.state(), pr.i), zj = zbar(chain.state(), pr.j);
        Eigen::VectorXd x(d);
        for (int a = 0; a < k; ++a) {
          if (full) {
            for (int b = 0; b < k; ++b) x[a * k + b] = zi[a] * zj[b];
          } else {
            x[a] = zi[a] * zj[a];
          }
        }
        const double lambda = chain.state().lambda[p];
        const double yt = 2.0 * pr.y - 1.0;
        const double q = loss == Loss::logistic ? lambda : pr.c * pr.c / lambda;
        const double l = loss == Loss::logistic ? pr.c * (pr.y - 0.5) : pr.c * yt * (lambda + pr.c * hp.ell) / lambda;
        prec += q * x * x.transpose();
        lin += l * x;
      }
      const auto g = chain.eta_conditional();
      CHECK((g.precision - prec).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((g.linear_term - lin).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(g.precision == g.precision.transpose());
      // Data part of the precision is positive semidefinite.
      const Eigen::MatrixXd data = g.precision - Eigen::MatrixXd::Identity(d, d) / hp.nu2;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(data);
      CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
  }
}

TEST_CASE("precision minus the prior is PSD on random pair sets") {
  const Corpus c = generate_synthetic(asymmetric_blocks_spec(4)).corpus;
  std::vector<DocIndex> all(c.num_docs());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<DocIndex>(i);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto pairs = build_train_pairs(c, all, 0.02, 4.0, 1.0, seed);
    auto hp = hyper(4, c.vocab_size, seed % 2 ? Loss::hinge : Loss::logistic, true);
    Rng rng(seed);
    GibbsChain chain(c, pairs, hp, rng);
    chain.iterate(ZMode::exact, rng);
    const auto g = chain.eta_conditional();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.precision - Eigen::MatrixXd::Identity(16, 16) / hp.nu2);
    CHECK(es.eigenvalues().minCoeff() > -1e-9);
  }
}

TEST_CASE("token conditional matches the brute-force joint") {
  const auto f = linked_fixture();
  for (Loss loss : {Loss::logistic, Loss::hinge}) {
    for (bool full : {true, false}) {
      const auto hp = hyper(3, 4, loss, full);
      Rng rng(5);
      GibbsChain chain(f.corpus, f.pairs, hp, rng);
      for (int it = 0; it < 3; ++it) {
        chain.iterate(ZMode::exact, rng);
        for (DocIndex i = 0; i < 4; ++i) {
          for (std::size_t n = 0; n < f.corpus.docs[static_cast<std::size_t>(i)].size(); ++n) {
            const auto got = chain.token_conditional(i, n, ZMode::exact);
            const auto want = oracle_conditional(chain, i, n);
            double sum = 0.0;
            for (std::size_t k = 0; k < got.size(); ++k) {
              CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-9));
              sum += got[k];
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("without links the conditional is the collapsed LDA conditional") {
  const auto docs = std::vector<std::vector<WordId>>{{0, 1, 1}, {2, 0}, {1}};
  const Corpus c = make_corpus(docs, 3);
  const TrainPairSet none;
  const auto hp = hyper(2, 3, Loss::logistic, true);
  Rng rng(6);
  GibbsChain chain(c, none, hp, rng);
  for (DocIndex i = 0; i < 3; ++i) {
    for (std::size_t n = 0; n < docs[static_cast<std::size_t>(i)].size(); ++n) {
      const auto& s = chain.state();
      const WordId t = docs[static_cast<std::size_t>(i)][n];
      const int cur = s.z[static_cast<std::size_t>(i)][n];
      std::vector<double> w(2);
      double total = 0.0;
      for (int k = 0; k < 2; ++k) {
        const int own = k == cur ? 1 : 0;
        w[static_cast<std::size_t>(k)] = (s.topic_word_at(k, t) - own + 0.3) * (s.doc_topic_at(i, k) - own + 0.7) /
                                         (s.topic_total[static_cast<std::size_t>(k)] - own + 0.9);
        total += w[static_cast<std::size_t>(k)];
      }
      const auto exact = chain.token_conditional(i, n, ZMode::exact);
      const auto approx = chain.token_conditional(i, n, ZMode::approx);
      for (int k = 0; k < 2; ++k) {
        CHECK(exact[static_cast<std::size_t>(k)] == doctest::Approx(w[static_cast<std::size_t>(k)] / total));
        CHECK(approx[static_cast<std::size_t>(k)] == exact[static_cast<std::size_t>(k)]);
      }
    }
  }
}

TEST_CASE("a lone one-token document has a uniform conditional") {
  const Corpus c = make_corpus({{0}}, 3);
  const TrainPairSet none;
  Rng rng(7);
  GibbsChain chain(c, none, Hyperparams::symmetric(4, 3), rng);
  for (double p : chain.token_conditional(0, 0, ZMode::exact)) CHECK(p == doctest::Approx(0.25));
}

TEST_CASE("approx mode equals exact mode for documents without neighbours") {
  const auto f = linked_fixture();
  // Add an isolated document.
  Corpus c = f.corpus;
  c.docs.push_back(Document{"iso", {0, 3, 3}, {}});
  const auto hp = hyper(3, 4, Loss::logistic, true);
  Rng rng(8);
  GibbsChain chain(c, f.pairs, hp, rng);
  Rng ra(99), rb(99);
  GibbsChain a = chain, b = chain;
  a.sample_z_document(4, ZMode::exact, ra);
  b.sample_z_document(4, ZMode::approx, rb);
  CHECK(a.state().z == b.state().z);
  CHECK(a.state().topic_word == b.state().topic_word);
}

TEST_CASE("approx link factor uses the document's proportions at entry") {
  const auto f = linked_fixture();
  for (Loss loss : {Loss::logistic, Loss::hinge}) {
    const auto hp = hyper(3, 4, loss, true);
    Rng rng(9);
    GibbsChain chain(f.corpus, f.pairs, hp, rng);
    chain.iterate(ZMode::exact, rng);
    const auto& s = chain.state();
    const auto& cache = chain.cache();
    const Eigen::MatrixXd u = weight_matrix(s.eta, 3, true);
    for (DocIndex i = 0; i < 4; ++i) {
      const auto& tokens = f.corpus.docs[static_cast<std::size_t>(i)].tokens;
      const double n_i = static_cast<double>(tokens.size());
      for (std::size_t n = 0; n < tokens.size(); ++n) {
        // omega_k = omega (1 - 1/N) + v[k] / N with v = U zbar_j or U^T zbar_j.
        std::vector<double> logw(3);
        const int cur = s.z[static_cast<std::size_t>(i)][n];
        for (int k = 0; k < 3; ++k) {
          const int own = k == cur ? 1 : 0;
          double lw = std::log((s.topic_word_at(k, tokens[n]) - own + 0.3) * (s.doc_topic_at(i, k) - own + 0.7) /
                               (s.topic_total[static_cast<std::size_t>(k)] - own + 0.3 * 4));
          for (std::size_t p = 0; p < f.pairs.size(); ++p) {
            const auto& pr = f.pairs.pairs[p];
            Eigen::VectorXd v;
            if (pr.i == i) v = u * zbar(s, pr.j);
            else if (pr.j == i) v = u.transpose() * zbar(s, pr.i);
            else continue;
            const double w = cache.omega[p] * (1.0 - 1.0 / n_i) + v[k] / n_i;
            lw += cache.link_lin[p] * w - 0.5 * cache.link_quad[p] * w * w;
          }
          logw[static_cast<std::size_t>(k)] = lw;
        }
        const double top = *std::max_element(logw.begin(), logw.end());
        double total = 0.0;
        for (double& l : logw) total += (l = std::exp(l - top));
        const auto got = chain.token_conditional(i, n, ZMode::approx);
        for (std::size_t k = 0; k < 3; ++k) CHECK(got[k] == doctest::Approx(logw[k] / total).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("LDA marginals match enumeration (no links)") {
  const std::vector<std::vector<WordId>> docs{{0, 1, 2}, {1, 1}, {2, 0, 2}};
  const Corpus c = make_corpus(docs, 3);
  const TrainPairSet none;
  auto hp = Hyperparams::symmetric(2, 3, 0.5, 0.5);
  const auto want = oracle::enumerate_marginals(to_int(docs), 2, 3, 0.5, 0.5);
  Rng rng(10);
  GibbsChain chain(c, none, hp, rng);
  std::vector<std::vector<double>> freq(3, std::vector<double>(3, 0.0));
  const int sweeps = 40000;
  for (int s = 0; s < sweeps; ++s) {
    chain.sample_z_sweep(ZMode::exact, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t n = 0; n < docs[i].size(); ++n) freq[i][n] += chain.state().z[i][n] == 0 ? 1.0 : 0.0;
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t n = 0; n < docs[i].size(); ++n) CHECK(std::abs(freq[i][n] / sweeps - want[i][n][0]) < 0.02);
  }
}

TEST_CASE("linked marginals match enumeration at fixed eta and lambda") {
  const std::vector<std::vector<WordId>> docs{{0, 1, 2}, {1, 1}, {2, 0, 2}};
  const Corpus c = make_corpus(docs, 3, {{0, 1}, {2, 1}});
  const auto pairs = make_pairs({{0, 1, 1, 4.0}, {2, 1, 1, 4.0}, {0, 2, 0, 1.0}});
  for (Loss loss : {Loss::logistic, Loss::hinge}) {
    auto hp = Hyperparams::symmetric(2, 3, 0.5, 0.5);
    hp.loss = loss;
    Rng rng(11);
    GibbsChain chain(c, pairs, hp, rng);
    Eigen::VectorXd eta(4);
    eta << 2.0, -1.5, 0.5, -2.5;
    chain.set_eta(eta);
    chain.set_lambda({0.8, 1.3, 0.6});
    std::vector<oracle::TinyPair> tp;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      tp.push_back({pairs.pairs[p].i, pairs.pairs[p].j, chain.cache().link_lin[p], chain.cache().link_quad[p]});
    }
    const auto want = oracle::enumerate_marginals(to_int(docs), 2, 3, 0.5, 0.5, tp, eta, true);
    std::vector<std::vector<double>> freq(3, std::vector<double>(3, 0.0));
    const int sweeps = 40000;
    for (int s = 0; s < sweeps; ++s) {
      chain.sample_z_sweep(ZMode::exact, rng);
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t n = 0; n < docs[i].size(); ++n) freq[i][n] += chain.state().z[i][n] == 0 ? 1.0 : 0.0;
      }
    }
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t n = 0; n < docs[i].size(); ++n) CHECK(std::abs(freq[i][n] / sweeps - want[i][n][0]) < 0.02);
    }
    CHECK(max_omega_drift(chain.cache(), pairs, chain.state()) < 1e-9);
  }
}

TEST_CASE("logistic lambda draws: PG(1, 0) and PG(1, 2) means") {
  const Corpus c = make_corpus({{0}, {0}}, 1);
  const auto pairs = make_pairs({{0, 1, 1, 1.0}});
  auto hp = hyper(1, 1, Loss::logistic, true);
  for (double w : {0.0, 2.0}) {
    Rng rng(12);
    GibbsChain chain(c, pairs, hp, rng);
    chain.set_eta(Eigen::VectorXd::Constant(1, w));  // zbar = 1, so omega = eta
    CHECK(chain.cache().omega[0] == w);
    std::vector<double> xs;
    for (int s = 0; s < 100000; ++s) {
      chain.sample_lambda(rng);
      REQUIRE(chain.state().lambda[0] > 0.0);
      xs.push_back(chain.state().lambda[0]);
    }
    const auto m = oracle::moments(xs);
    const double want = w == 0.0 ? 0.25 : std::tanh(1.0) / 4.0;
    CHECK(std::abs(m.mean - want) < 4 * m.se);
  }
}

TEST_CASE("hinge lambda draws: c=2, zeta=0.5 and zeta=0") {
  const Corpus c = make_corpus({{0}, {0}}, 1);
  const auto pairs = make_pairs({{0, 1, 1, 2.0}});
  auto hp = hyper(1, 1, Loss::hinge, true);
  hp.ell = 1.0;
  Rng rng(13);
  GibbsChain chain(c, pairs, hp, rng);
  chain.set_eta(Eigen::VectorXd::Constant(1, 0.5));  // zeta = 1 - 0.5
  std::vector<double> inv;
  for (int s = 0; s < 100000; ++s) {
    chain.sample_lambda(rng);
    inv.push_back(1.0 / chain.state().lambda[0]);
  }
  const auto m = oracle::moments(inv);
  CHECK(std::abs(m.mean - 1.0) < 4 * m.se);
  chain.set_eta(Eigen::VectorXd::Constant(1, 1.0));  // zeta = 0
  for (int s = 0; s < 1000; ++s) {
    chain.sample_lambda(rng);
    REQUIRE(std::isfinite(chain.state().lambda[0]));
    REQUIRE(chain.state().lambda[0] > 0.0);
  }
}

TEST_CASE("alternating lambda and eta draws target the one-pair posterior") {
  const Corpus c = make_corpus({{0}, {0}}, 1);
  const auto pairs = make_pairs({{0, 1, 1, 2.0}});
  for (Loss loss : {Loss::logistic, Loss::hinge}) {
    auto hp = hyper(1, 1, loss, true);
    hp.nu2 = 1.0;
    hp.ell = 1.0;
    const double cc = 2.0;
    auto log_post = [&](double x) {
      const double lp = -0.5 * x * x;
      if (loss == Loss::logistic) return lp + cc * x - cc * std::log1p(std::exp(x));  // sigma(x)^c
      return lp - 2.0 * cc * std::max(0.0, hp.ell - x);
    };
    const double want = oracle::quadrature_mean(log_post, -10.0, 10.0);
    Rng rng(14);
    GibbsChain chain(c, pairs, hp, rng);
    double sum = 0.0;
    const int n = 60000;
    for (int s = 0; s < n; ++s) {
      chain.sample_lambda(rng);
      chain.sample_eta(rng);
      sum += chain.state().eta[0];
    }
    CHECK(std::abs(sum / n - want) < 0.02);
  }
}

TEST_CASE("invariants hold after every sweep") {
  const Corpus c = generate_synthetic(asymmetric_blocks_spec(5)).corpus;
  std::vector<DocIndex> all(c.num_docs());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<DocIndex>(i);
  const auto pairs = build_train_pairs(c, all, 0.05, 4.0, 1.0, 5);
  for (Loss loss : {Loss::logistic, Loss::hinge}) {
    for (bool full : {true, false}) {
      for (ZMode mode : {ZMode::exact, ZMode::approx}) {
        auto hp = hyper(4, c.vocab_size, loss, full);
        Rng rng(15);
        GibbsChain chain(c, pairs, hp, rng);
        for (int it = 0; it < 5; ++it) {
          chain.iterate(mode, rng);
          CHECK_NOTHROW(chain.state().check_consistency(c));
          CHECK(max_omega_drift(chain.cache(), pairs, chain.state()) < 1e-9);
          for (double l : chain.state().lambda) REQUIRE(l > 0.0);
        }
      }
    }
  }
}

TEST_CASE("diagonal conditionals equal full-mode ones with a diagonal U") {
  const auto f = linked_fixture();
  for (Loss loss : {Loss::logistic, Loss::hinge}) {
    Rng rng(16);
    GibbsChain full(f.corpus, f.pairs, hyper(3, 4, loss, true), rng);
    full.iterate(ZMode::exact, rng);
    const Eigen::Vector3d d(1.5, -0.7, 2.2);
    Eigen::VectorXd embedded = Eigen::VectorXd::Zero(9);
    for (int k = 0; k < 3; ++k) embedded[k * 3 + k] = d[k];
    full.set_eta(embedded);
    SamplerState s = full.state();
    s.eta = d;
    GibbsChain diag(f.corpus, f.pairs, hyper(3, 4, loss, false), s);
    for (std::size_t p = 0; p < f.pairs.size(); ++p) CHECK(diag.cache().omega[p] == doctest::Approx(full.cache().omega[p]));
    for (DocIndex i = 0; i < 4; ++i) {
      for (std::size_t n = 0; n < f.corpus.docs[static_cast<std::size_t>(i)].size(); ++n) {
        const auto a = full.token_conditional(i, n, ZMode::exact);
        const auto b = diag.token_conditional(i, n, ZMode::exact);
        for (std::size_t k = 0; k < 3; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("state must match the hyperparameters") {
  const auto f = linked_fixture();
  Rng rng(17);
  GibbsChain full(f.corpus, f.pairs, hyper(3, 4, Loss::logistic, true), rng);
  CHECK_THROWS_AS(GibbsChain(f.corpus, f.pairs, hyper(3, 4, Loss::logistic, false), full.state()), IntegrityError);
  CHECK_THROWS_AS(GibbsChain(f.corpus, f.pairs, hyper(2, 4, Loss::logistic, true), full.state()), IntegrityError);
}

namespace {

TrainConfig base_config(const Corpus& c, int burn_in) {
  TrainConfig cfg;
  cfg.hyperparams = Hyperparams::symmetric(3, c.vocab_size);
  cfg.hyperparams.burn_in = burn_in;
  cfg.record_timing = false;
  cfg.checkpoint_every = 0;
  return cfg;
}

}  // namespace

TEST_CASE("burn-in 0 returns the initial state") {
  const Corpus c = generate_synthetic(two_community_spec(6)).corpus;
  const TrainPairSet none;
  auto cfg = base_config(c, 0);
  Rng rng(18), again(18);
  const auto result = train(c, none, cfg, rng);
  const auto init = init_state(c, none, cfg.hyperparams, again);
  CHECK(result.iterations_done == 0);
  CHECK(result.posterior.topic_word == init.topic_word);
  CHECK(result.posterior.phi.isApprox(estimate_phi(init, cfg.hyperparams), 0.0));
  CHECK(result.posterior.eta == init.eta);
}

TEST_CASE("training is deterministic and resumes bit-identically") {
  const Corpus c = generate_synthetic(two_community_spec(7)).corpus;
  std::vector<DocIndex> all(c.num_docs());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<DocIndex>(i);
  const auto pairs = build_train_pairs(c, all, 0.05, 4.0, 1.0, 7);
  const auto dir = std::filesystem::temp_directory_path() / "grtm_test_gibbs";
  std::filesystem::create_directories(dir);
  for (Loss loss : {Loss::logistic, Loss::hinge}) {
    for (int samples : {1, 4}) {
      auto cfg = base_config(c, 12);
      cfg.hyperparams.loss = loss;
      cfg.post_burn_in_samples = samples;
      Rng r1(20), r2(20);
      const auto a = train(c, pairs, cfg, r1);
      const auto b = train(c, pairs, cfg, r2);
      CHECK(a.posterior.eta == b.posterior.eta);
      CHECK(a.posterior.phi == b.posterior.phi);
      CHECK(a.iterations_done == 12 + samples - 1);

      auto staged = cfg;
      staged.checkpoint_path = (dir / "cp.json").string();
      staged.checkpoint_every = 5;
      staged.resume = true;
      std::filesystem::remove(staged.checkpoint_path);
      staged.stop_after = 7;
      Rng r3(20);
      const auto part = train(c, pairs, staged, r3);
      CHECK_FALSE(part.completed);
      CHECK(part.iterations_done == 7);
      staged.stop_after = -1;
      Rng r4(12345);  // state comes from the checkpoint
      const auto rest = train(c, pairs, staged, r4);
      CHECK(rest.completed);
      CHECK(rest.iterations_done == a.iterations_done);
      CHECK(rest.posterior.eta == a.posterior.eta);
      CHECK(rest.posterior.phi == a.posterior.phi);
      CHECK(rest.posterior.train_zbar == a.posterior.train_zbar);
      CHECK(rest.posterior.topic_word == a.posterior.topic_word);
    }
  }

  // A checkpoint from another configuration is rejected.
  auto cfg = base_config(c, 10);
  cfg.checkpoint_path = (dir / "cp.json").string();
  cfg.resume = true;
  cfg.stop_after = 3;
  std::filesystem::remove(cfg.checkpoint_path);
  Rng r5(1);
  train(c, pairs, cfg, r5);
  cfg.hyperparams.c_pos = 2.0;
  cfg.stop_after = -1;
  CHECK_THROWS_AS(train(c, pairs, cfg, r5), IntegrityError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("timing shares sum to at most 100 percent") {
  const Corpus c = generate_synthetic(two_community_spec(8)).corpus;
  std::vector<DocIndex> all(c.num_docs());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<DocIndex>(i);
  const auto pairs = build_train_pairs(c, all, 0.05, 4.0, 1.0, 8);
  auto cfg = base_config(c, 10);
  cfg.record_timing = true;
  cfg.check_invariants = true;
  Rng rng(21);
  const auto r = train(c, pairs, cfg, rng);
  const auto& t = r.timing;
  CHECK(t.iterations == 10);
  CHECK(t.z_seconds > 0.0);
  CHECK(t.percent(t.z_seconds) + t.percent(t.eta_seconds) + t.percent(t.lambda_seconds) <= 100.0 + 1e-9);
}

TEST_CASE("invalid training configuration") {
  const Corpus c = make_corpus({{0}, {0}}, 1);
  const TrainPairSet none;
  auto cfg = base_config(c, 1);
  cfg.post_burn_in_samples = 0;
  Rng rng(22);
  CHECK_THROWS_AS(train(c, none, cfg, rng), ArgumentError);
  const auto self = make_pairs({{1, 1, 1, 1.0}});
  CHECK_THROWS_AS(GibbsChain(c, self, Hyperparams::symmetric(2, 1), rng), ArgumentError);
}
