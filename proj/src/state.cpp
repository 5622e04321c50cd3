#include "grtm/state.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grtm/error.hpp"

namespace grtm {

std::string to_string(Loss loss) { return loss == Loss::logistic ? "logistic" : "hinge"; }

Loss parse_loss(const std::string& s) {
  if (s == "logistic") return Loss::logistic;
  if (s == "hinge") return Loss::hinge;
  throw ArgumentError("unknown loss '" + s + "' (expected logistic or hinge)");
}

Hyperparams Hyperparams::symmetric(int num_topics, int vocab_size, double alpha, double beta) {
  Hyperparams hp;
  hp.num_topics = num_topics;
  hp.alpha.assign(static_cast<std::size_t>(std::max(num_topics, 0)), alpha);
  hp.beta.assign(static_cast<std::size_t>(std::max(vocab_size, 0)), beta);
  return hp;
}

double Hyperparams::alpha_sum() const { return std::accumulate(alpha.begin(), alpha.end(), 0.0); }
double Hyperparams::beta_sum() const { return std::accumulate(beta.begin(), beta.end(), 0.0); }

void Hyperparams::validate(int vocab_size) const {
  if (num_topics < 1) throw ArgumentError("K must be at least 1");
  if (alpha.size() != static_cast<std::size_t>(num_topics)) {
    throw ArgumentError("alpha must have K = " + std::to_string(num_topics) + " entries");
  }
  if (beta.size() != static_cast<std::size_t>(vocab_size)) {
    throw ArgumentError("beta must have V = " + std::to_string(vocab_size) + " entries");
  }
  for (double a : alpha) {
    if (!(a > 0.0)) throw ArgumentError("alpha entries must be positive");
  }
  for (double b : beta) {
    if (!(b > 0.0)) throw ArgumentError("beta entries must be positive");
  }
  if (!(nu2 > 0.0)) throw ArgumentError("nu2 must be positive");
  if (!(c_pos > 0.0)) throw ArgumentError("c_pos must be positive");
  if (!(c_neg > 0.0)) throw ArgumentError("c_neg must be positive");
  if (loss == Loss::hinge && !(ell >= 1.0)) throw ArgumentError("ell must be >= 1 for the hinge loss");
  if (burn_in < 0) throw ArgumentError("burn-in must be non-negative");
}

void SamplerState::check_consistency(const Corpus& corpus) const {
  const auto k_count = static_cast<std::size_t>(num_topics);
  std::vector<int> tw(topic_word.size(), 0), dt(doc_topic.size(), 0), tt(k_count, 0);
  if (z.size() != corpus.num_docs()) throw IntegrityError("state: z has wrong document count");
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto& tokens = corpus.docs[i].tokens;
    if (z[i].size() != tokens.size()) throw IntegrityError("state: z length differs from N_i");
    for (std::size_t n = 0; n < tokens.size(); ++n) {
      const int k = z[i][n];
      if (k < 0 || k >= num_topics) throw IntegrityError("state: topic id out of range");
      ++tw[static_cast<std::size_t>(k) * vocab_size + tokens[n]];
      ++dt[i * k_count + static_cast<std::size_t>(k)];
      ++tt[static_cast<std::size_t>(k)];
    }
  }
  if (tw != topic_word) throw IntegrityError("state: topic-word counts disagree with z");
  if (dt != doc_topic) throw IntegrityError("state: doc-topic counts disagree with z");
  if (tt != topic_total) throw IntegrityError("state: topic totals disagree with z");
  for (double l : lambda) {
    if (!(l > 0.0) || !std::isfinite(l)) throw IntegrityError("state: lambda must be positive");
  }
}

SamplerState init_state(const Corpus& corpus, const TrainPairSet& pairs, const Hyperparams& hp,
                        Rng& rng) {
  hp.validate(corpus.vocab_size);
  SamplerState s;
  s.num_topics = hp.num_topics;
  s.vocab_size = corpus.vocab_size;
  const auto k_count = static_cast<std::size_t>(hp.num_topics);
  s.topic_word.assign(k_count * static_cast<std::size_t>(corpus.vocab_size), 0);
  s.doc_topic.assign(corpus.num_docs() * k_count, 0);
  s.topic_total.assign(k_count, 0);
  s.z.resize(corpus.num_docs());
  for (std::size_t i = 0; i < corpus.num_docs(); ++i) {
    const auto& tokens = corpus.docs[i].tokens;
    s.z[i].resize(tokens.size());
    for (std::size_t n = 0; n < tokens.size(); ++n) {
      const int k = static_cast<int>(rng.uniform_index(k_count));
      s.z[i][n] = k;
      ++s.topic_word_at(k, tokens[n]);
      ++s.doc_topic_at(static_cast<DocIndex>(i), k);
      ++s.topic_total[static_cast<std::size_t>(k)];
    }
  }
  s.lambda.assign(pairs.size(), 1.0);
  s.eta.resize(hp.eta_dim());
  const double sd = std::sqrt(hp.nu2);
  for (Eigen::Index m = 0; m < s.eta.size(); ++m) s.eta[m] = sd * rng.normal();
  return s;
}

Eigen::VectorXd zbar(const SamplerState& state, DocIndex i) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(state.num_topics);
  int total = 0;
  for (int k = 0; k < state.num_topics; ++k) total += state.doc_topic_at(i, k);
  if (total == 0) return out;
  for (int k = 0; k < state.num_topics; ++k) {
    out[k] = static_cast<double>(state.doc_topic_at(i, k)) / total;
  }
  return out;
}

double discriminant(const Eigen::VectorXd& eta, const Eigen::VectorXd& zbar_i,
                    const Eigen::VectorXd& zbar_j, bool full_matrix) {
  const Eigen::Index k = zbar_i.size();
  if (zbar_j.size() != k) throw ArgumentError("discriminant: zbar sizes differ");
  if (full_matrix) {
    if (eta.size() != k * k) throw ArgumentError("discriminant: eta must have K^2 entries");
    double omega = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) {
      if (zbar_i[a] == 0.0) continue;
      double row = 0.0;
      for (Eigen::Index b = 0; b < k; ++b) row += eta[a * k + b] * zbar_j[b];
      omega += zbar_i[a] * row;
    }
    return omega;
  }
  if (eta.size() != k) throw ArgumentError("discriminant: eta must have K entries");
  return (eta.array() * zbar_i.array() * zbar_j.array()).sum();
}

Eigen::MatrixXd weight_matrix(const Eigen::VectorXd& eta, int num_topics, bool full_matrix) {
  if (full_matrix) {
    Eigen::MatrixXd u(num_topics, num_topics);
    for (int a = 0; a < num_topics; ++a) {
      for (int b = 0; b < num_topics; ++b) u(a, b) = eta[a * num_topics + b];
    }
    return u;
  }
  return eta.asDiagonal();
}

PairCache build_pair_cache(const Corpus& corpus, const TrainPairSet& pairs,
                           const SamplerState& state, const Hyperparams& hp) {
  PairCache cache;
  cache.num_topics = state.num_topics;
  cache.full_matrix = hp.full_matrix;
  const std::size_t n_pairs = pairs.size();
  cache.omega.assign(n_pairs, 0.0);
  cache.kappa.resize(n_pairs);
  cache.ytilde.resize(n_pairs);
  cache.link_lin.resize(n_pairs);
  cache.link_quad.resize(n_pairs);
  cache.out_pairs.assign(corpus.num_docs(), {});
  cache.in_pairs.assign(corpus.num_docs(), {});
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const auto& pr = pairs.pairs[p];
    cache.kappa[p] = pr.c * (pr.y - 0.5);
    cache.ytilde[p] = 2.0 * pr.y - 1.0;
    cache.out_pairs[static_cast<std::size_t>(pr.i)].push_back(static_cast<std::int32_t>(p));
    cache.in_pairs[static_cast<std::size_t>(pr.j)].push_back(static_cast<std::int32_t>(p));
  }
  refresh_discriminants(cache, corpus, pairs, state);
  refresh_link_coefficients(cache, pairs, state, hp);
  return cache;
}

void refresh_discriminants(PairCache& cache, const Corpus& corpus, const TrainPairSet& pairs,
                           const SamplerState& state) {
  const int k_count = state.num_topics;
  const std::size_t n_docs = corpus.num_docs();
  cache.zbar.assign(n_docs * static_cast<std::size_t>(k_count), 0.0);
  for (std::size_t i = 0; i < n_docs; ++i) {
    const auto n = corpus.docs[i].tokens.size();
    if (n == 0) continue;
    double* row = cache.zbar_row(static_cast<DocIndex>(i));
    for (int k = 0; k < k_count; ++k) {
      row[k] = static_cast<double>(state.doc_topic_at(static_cast<DocIndex>(i), k)) /
               static_cast<double>(n);
    }
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> zb(cache.zbar.data(), static_cast<Eigen::Index>(n_docs), k_count);
  cache.g.resize(cache.zbar.size());
  cache.h.resize(cache.zbar.size());
  Eigen::Map<RowMajor> g(cache.g.data(), static_cast<Eigen::Index>(n_docs), k_count);
  Eigen::Map<RowMajor> h(cache.h.data(), static_cast<Eigen::Index>(n_docs), k_count);
  if (cache.full_matrix) {
    const Eigen::MatrixXd u = weight_matrix(state.eta, k_count, true);
    g.noalias() = zb * u.transpose();
    h.noalias() = zb * u;
  } else {
    g = zb * state.eta.asDiagonal();
    h = g;
  }
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pr = pairs.pairs[p];
    const double* zi = cache.zbar_row(pr.i);
    const double* gj = cache.g_row(pr.j);
    double omega = 0.0;
    for (int k = 0; k < k_count; ++k) omega += zi[k] * gj[k];
    cache.omega[p] = omega;
  }
}

void refresh_link_coefficients(PairCache& cache, const TrainPairSet& pairs,
                               const SamplerState& state, const Hyperparams& hp) {
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const double lambda = state.lambda[p];
    const double c = pairs.pairs[p].c;
    if (hp.loss == Loss::logistic) {
      cache.link_lin[p] = cache.kappa[p];
      cache.link_quad[p] = lambda;
    } else {
      cache.link_lin[p] = c * cache.ytilde[p] * (lambda + c * hp.ell) / lambda;
      cache.link_quad[p] = c * c / lambda;
    }
  }
}

double max_omega_drift(const PairCache& cache, const TrainPairSet& pairs,
                       const SamplerState& state) {
  double worst = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pr = pairs.pairs[p];
    const double fresh = discriminant(state.eta, zbar(state, pr.i), zbar(state, pr.j), cache.full_matrix);
    worst = std::max(worst, std::abs(fresh - cache.omega[p]));
  }
  return worst;
}

Eigen::MatrixXd estimate_phi(const SamplerState& state, const Hyperparams& hp) {
  Eigen::MatrixXd phi(state.num_topics, state.vocab_size);
  const double beta_sum = hp.beta_sum();
  for (int k = 0; k < state.num_topics; ++k) {
    const double denom = state.topic_total[static_cast<std::size_t>(k)] + beta_sum;
    for (int t = 0; t < state.vocab_size; ++t) {
      phi(k, t) = (state.topic_word_at(k, t) + hp.beta[static_cast<std::size_t>(t)]) / denom;
    }
  }
  return phi;
}

}  // namespace grtm
