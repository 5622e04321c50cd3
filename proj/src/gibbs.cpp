#include "grtm/gibbs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>

#include "grtm/error.hpp"
#include "grtm/hash.hpp"
#include "grtm/serialize.hpp"

namespace grtm {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::vector<int>> nonzero_topics(const PairCache& cache, std::size_t n_docs) {
  std::vector<std::vector<int>> nz(n_docs);
  for (std::size_t i = 0; i < n_docs; ++i) {
    const double* z = cache.zbar_row(static_cast<DocIndex>(i));
    for (int k = 0; k < cache.num_topics; ++k) {
      if (z[k] != 0.0) nz[i].push_back(k);
    }
  }
  return nz;
}

// Gaussian with precision I/nu2 + sum_p quad_p x_p x_p^T and linear term
// sum_p lin_p x_p, where x_p is the pair feature vector.
PrecisionGaussian build_eta_conditional(const TrainPairSet& pairs, const PairCache& cache,
                                        const Hyperparams& hp, const std::vector<double>& quad,
                                        const std::vector<double>& lin) {
  const int k_count = cache.num_topics;
  const int d = hp.eta_dim();
  PrecisionGaussian g;
  g.precision = Eigen::MatrixXd::Identity(d, d) / hp.nu2;
  g.linear_term = Eigen::VectorXd::Zero(d);
  const std::size_t n_docs = cache.out_pairs.size();
  const auto nz = nonzero_topics(cache, n_docs);

  if (hp.full_matrix) {
    // Pairs sharing a citing document share the z_i z_i^T Kronecker factor.
    Eigen::MatrixXd m(k_count, k_count);
    Eigen::VectorXd r(k_count);
    for (std::size_t i = 0; i < n_docs; ++i) {
      if (cache.out_pairs[i].empty() || nz[i].empty()) continue;
      m.setZero();
      r.setZero();
      for (std::int32_t p : cache.out_pairs[i]) {
        const auto j = static_cast<std::size_t>(pairs.pairs[static_cast<std::size_t>(p)].j);
        const double* zj = cache.zbar_row(static_cast<DocIndex>(j));
        for (int a : nz[j]) {
          r[a] += lin[static_cast<std::size_t>(p)] * zj[a];
          for (int b : nz[j]) m(a, b) += quad[static_cast<std::size_t>(p)] * (zj[a] * zj[b]);
        }
      }
      const double* zi = cache.zbar_row(static_cast<DocIndex>(i));
      for (int k : nz[i]) {
        g.linear_term.segment(k * k_count, k_count) += zi[k] * r;
        for (int l : nz[i]) {
          g.precision.block(k * k_count, l * k_count, k_count, k_count) += (zi[k] * zi[l]) * m;
        }
      }
    }
    return g;
  }

  std::vector<int> idx;
  std::vector<double> x;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pr = pairs.pairs[p];
    const double* zi = cache.zbar_row(pr.i);
    const double* zj = cache.zbar_row(pr.j);
    idx.clear();
    x.clear();
    for (int a : nz[static_cast<std::size_t>(pr.i)]) {
      if (zj[a] == 0.0) continue;
      idx.push_back(a);
      x.push_back(zi[a] * zj[a]);
    }
    for (std::size_t u = 0; u < idx.size(); ++u) {
      g.linear_term[idx[u]] += lin[p] * x[u];
      for (std::size_t v = 0; v < idx.size(); ++v) {
        g.precision(idx[u], idx[v]) += quad[p] * (x[u] * x[v]);
      }
    }
  }
  return g;
}

void check_pairs(const Corpus& corpus, const TrainPairSet& pairs) {
  const auto n = static_cast<DocIndex>(corpus.num_docs());
  for (const auto& p : pairs.pairs) {
    if (p.i < 0 || p.j < 0 || p.i >= n || p.j >= n || p.i == p.j) {
      throw ArgumentError("training pair (" + std::to_string(p.i) + ", " + std::to_string(p.j) +
                          ") is not a pair of distinct training documents");
    }
    if (!(p.c > 0.0)) throw ArgumentError("training pair with non-positive c");
  }
}

}  // namespace

PrecisionGaussian eta_conditional_logistic(const TrainPairSet& pairs, const SamplerState& state,
                                           const PairCache& cache, const Hyperparams& hp) {
  std::vector<double> quad(pairs.size()), lin(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pr = pairs.pairs[p];
    quad[p] = state.lambda[p];
    lin[p] = pr.c * (pr.y - 0.5);
  }
  return build_eta_conditional(pairs, cache, hp, quad, lin);
}

PrecisionGaussian eta_conditional_hinge(const TrainPairSet& pairs, const SamplerState& state,
                                        const PairCache& cache, const Hyperparams& hp) {
  std::vector<double> quad(pairs.size()), lin(pairs.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pr = pairs.pairs[p];
    const double lambda = state.lambda[p];
    const double yt = 2.0 * pr.y - 1.0;
    quad[p] = pr.c * pr.c / lambda;
    lin[p] = pr.c * yt * (lambda + pr.c * hp.ell) / lambda;
  }
  return build_eta_conditional(pairs, cache, hp, quad, lin);
}

void sample_lambda_logistic(SamplerState& state, const PairCache& cache,
                            const TrainPairSet& pairs, Rng& rng) {
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    state.lambda[p] = sample_polya_gamma(pairs.pairs[p].c, cache.omega[p], rng);
  }
}

void sample_lambda_hinge(SamplerState& state, const PairCache& cache, const TrainPairSet& pairs,
                         const Hyperparams& hp, Rng& rng) {
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    state.lambda[p] = sample_hinge_lambda(pairs.pairs[p].c, cache.zeta(p, hp.ell), rng);
  }
}

GibbsChain::GibbsChain(const Corpus& corpus, const TrainPairSet& pairs, const Hyperparams& hp,
                       Rng& rng)
    : corpus_(&corpus), pairs_(&pairs), hp_(hp) {
  hp_.validate(corpus.vocab_size);
  check_pairs(corpus, pairs);
  state_ = init_state(corpus, pairs, hp_, rng);
  cache_ = build_pair_cache(corpus, pairs, state_, hp_);
  beta_sum_ = hp_.beta_sum();
}

GibbsChain::GibbsChain(const Corpus& corpus, const TrainPairSet& pairs, const Hyperparams& hp,
                       SamplerState state)
    : corpus_(&corpus), pairs_(&pairs), hp_(hp), state_(std::move(state)) {
  hp_.validate(corpus.vocab_size);
  check_pairs(corpus, pairs);
  if (state_.num_topics != hp_.num_topics || state_.vocab_size != corpus.vocab_size ||
      state_.eta.size() != hp_.eta_dim() || state_.lambda.size() != pairs.size()) {
    throw IntegrityError("sampler state does not match the corpus, pairs or hyperparameters");
  }
  state_.check_consistency(corpus);
  cache_ = build_pair_cache(corpus, pairs, state_, hp_);
  beta_sum_ = hp_.beta_sum();
}

PrecisionGaussian GibbsChain::eta_conditional() const {
  return hp_.loss == Loss::logistic ? eta_conditional_logistic(*pairs_, state_, cache_, hp_)
                                    : eta_conditional_hinge(*pairs_, state_, cache_, hp_);
}

void GibbsChain::sample_eta(Rng& rng) {
  refresh_discriminants(cache_, *corpus_, *pairs_, state_);
  state_.eta = sample_precision_gaussian(eta_conditional(), rng);
  refresh_discriminants(cache_, *corpus_, *pairs_, state_);
}

void GibbsChain::sample_lambda(Rng& rng) {
  if (hp_.loss == Loss::logistic) {
    sample_lambda_logistic(state_, cache_, *pairs_, rng);
  } else {
    sample_lambda_hinge(state_, cache_, *pairs_, hp_, rng);
  }
  refresh_link_coefficients(cache_, *pairs_, state_, hp_);
}

void GibbsChain::set_eta(const Eigen::VectorXd& eta) {
  if (eta.size() != hp_.eta_dim()) throw ArgumentError("set_eta: wrong length");
  state_.eta = eta;
  refresh_discriminants(cache_, *corpus_, *pairs_, state_);
}

void GibbsChain::set_lambda(const std::vector<double>& lambda) {
  if (lambda.size() != pairs_->size()) throw ArgumentError("set_lambda: wrong length");
  state_.lambda = lambda;
  refresh_link_coefficients(cache_, *pairs_, state_, hp_);
}

void GibbsChain::collect_neighbors(DocIndex i, std::vector<Neighbor>& out) const {
  out.clear();
  for (std::int32_t p : cache_.out_pairs[static_cast<std::size_t>(i)]) {
    out.push_back({p, cache_.g_row(pairs_->pairs[static_cast<std::size_t>(p)].j)});
  }
  for (std::int32_t p : cache_.in_pairs[static_cast<std::size_t>(i)]) {
    out.push_back({p, cache_.h_row(pairs_->pairs[static_cast<std::size_t>(p)].i)});
  }
}

// link[k] = sum_p lin_p w_k - quad_p w_k^2 / 2 with w_k = base_p + v_p[k] / N,
// dropping terms constant in k. base_p = omega_p * base_scale.
void GibbsChain::token_link_terms(const std::vector<Neighbor>& nbrs, double inv_n,
                                  double* link) const {
  const int k_count = hp_.num_topics;
  std::fill(link, link + k_count, 0.0);
  for (const auto& nb : nbrs) {
    const auto p = static_cast<std::size_t>(nb.pair);
    const double q = cache_.link_quad[p];
    const double a = cache_.link_lin[p] - q * cache_.omega[p];
    for (int k = 0; k < k_count; ++k) {
      const double d = nb.v[k] * inv_n;
      link[k] += d * (a - 0.5 * q * d);
    }
  }
}

void GibbsChain::approx_link_terms(const std::vector<Neighbor>& nbrs, double inv_n,
                                   double* link) const {
  const int k_count = hp_.num_topics;
  std::fill(link, link + k_count, 0.0);
  for (const auto& nb : nbrs) {
    const auto p = static_cast<std::size_t>(nb.pair);
    const double q = cache_.link_quad[p];
    const double a = cache_.link_lin[p] - q * cache_.omega[p] * (1.0 - inv_n);
    for (int k = 0; k < k_count; ++k) {
      const double d = nb.v[k] * inv_n;
      link[k] += d * (a - 0.5 * q * d);
    }
  }
}

double GibbsChain::topic_weights(DocIndex i, WordId t, const double* link) {
  const int k_count = hp_.num_topics;
  double* w = weight_buf_.data();
  const double beta_t = hp_.beta[static_cast<std::size_t>(t)];
  auto lda = [&](int k) {
    return (state_.topic_word_at(k, t) + beta_t) *
           (state_.doc_topic_at(i, k) + hp_.alpha[static_cast<std::size_t>(k)]) /
           (state_.topic_total[static_cast<std::size_t>(k)] + beta_sum_);
  };
  const double top = *std::max_element(link, link + k_count);
  double total = 0.0;
  for (int k = 0; k < k_count; ++k) {
    w[k] = lda(k) * std::exp(link[k] - top);
    total += w[k];
  }
  if (total > 0.0 && std::isfinite(total)) return total;

  ++numerical_warnings_;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < k_count; ++k) {
    w[k] = std::log(lda(k)) + link[k];
    if (std::isnan(w[k])) w[k] = -std::numeric_limits<double>::infinity();
    best = std::max(best, w[k]);
  }
  if (!std::isfinite(best)) throw NumericalError("z conditional has no finite weight");
  total = 0.0;
  for (int k = 0; k < k_count; ++k) {
    w[k] = std::exp(w[k] - best);
    total += w[k];
  }
  return total;
}

int GibbsChain::draw_topic(DocIndex i, WordId t, const double* link, Rng& rng) {
  const double total = topic_weights(i, t, link);
  const double* w = weight_buf_.data();
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int last = 0;
  for (int k = 0; k < hp_.num_topics; ++k) {
    if (w[k] <= 0.0) continue;
    acc += w[k];
    last = k;
    if (u < acc) return k;
  }
  return last;
}

void GibbsChain::move_token_mass(DocIndex i, int from, int to, double inv_n) {
  const int k_count = hp_.num_topics;
  double* zb = cache_.zbar_row(i);
  zb[from] = state_.doc_topic_at(i, from) * inv_n;
  zb[to] = state_.doc_topic_at(i, to) * inv_n;
  double* g = cache_.g_row(i);
  double* h = cache_.h_row(i);
  const auto& eta = state_.eta;
  if (cache_.full_matrix) {
    for (int a = 0; a < k_count; ++a) {
      g[a] += (eta[a * k_count + to] - eta[a * k_count + from]) * inv_n;
      h[a] += (eta[to * k_count + a] - eta[from * k_count + a]) * inv_n;
    }
  } else {
    g[from] = eta[from] * zb[from];
    g[to] = eta[to] * zb[to];
    h[from] = g[from];
    h[to] = g[to];
  }
}

void GibbsChain::sample_z_document(DocIndex i, ZMode mode, Rng& rng) {
  const auto& tokens = corpus_->docs[static_cast<std::size_t>(i)].tokens;
  if (tokens.empty()) return;
  const int k_count = hp_.num_topics;
  link_buf_.resize(static_cast<std::size_t>(k_count));
  weight_buf_.resize(static_cast<std::size_t>(k_count));
  collect_neighbors(i, nbrs_);
  const double inv_n = 1.0 / static_cast<double>(tokens.size());
  const bool exact = mode == ZMode::exact;
  if (!exact) approx_link_terms(nbrs_, inv_n, link_buf_.data());

  auto& zi = state_.z[static_cast<std::size_t>(i)];
  for (std::size_t n = 0; n < tokens.size(); ++n) {
    const WordId t = tokens[n];
    const int old_k = zi[n];
    --state_.topic_word_at(old_k, t);
    --state_.doc_topic_at(i, old_k);
    --state_.topic_total[static_cast<std::size_t>(old_k)];
    if (exact && !nbrs_.empty()) {
      for (const auto& nb : nbrs_) cache_.omega[static_cast<std::size_t>(nb.pair)] -= nb.v[old_k] * inv_n;
      token_link_terms(nbrs_, inv_n, link_buf_.data());
    } else if (exact) {
      std::fill(link_buf_.begin(), link_buf_.end(), 0.0);
    }
    const int new_k = draw_topic(i, t, link_buf_.data(), rng);
    zi[n] = new_k;
    ++state_.topic_word_at(new_k, t);
    ++state_.doc_topic_at(i, new_k);
    ++state_.topic_total[static_cast<std::size_t>(new_k)];
    if (exact) {
      for (const auto& nb : nbrs_) cache_.omega[static_cast<std::size_t>(nb.pair)] += nb.v[new_k] * inv_n;
    }
    if (new_k != old_k) move_token_mass(i, old_k, new_k, inv_n);
  }

  const double* zb = cache_.zbar_row(i);
  for (const auto& nb : nbrs_) {
    double omega = 0.0;
    for (int k = 0; k < k_count; ++k) omega += zb[k] * nb.v[k];
    cache_.omega[static_cast<std::size_t>(nb.pair)] = omega;
  }
}

void GibbsChain::sample_z_sweep(ZMode mode, Rng& rng) {
  const auto n_docs = static_cast<DocIndex>(corpus_->num_docs());
  for (DocIndex i = 0; i < n_docs; ++i) sample_z_document(i, mode, rng);
}

void GibbsChain::iterate(ZMode mode, Rng& rng, TimingReport* timing) {
  if (timing == nullptr) {
    sample_eta(rng);
    sample_z_sweep(mode, rng);
    sample_lambda(rng);
    return;
  }
  auto t0 = Clock::now();
  sample_eta(rng);
  timing->eta_seconds += seconds_since(t0);
  t0 = Clock::now();
  sample_z_sweep(mode, rng);
  timing->z_seconds += seconds_since(t0);
  t0 = Clock::now();
  sample_lambda(rng);
  timing->lambda_seconds += seconds_since(t0);
  ++timing->iterations;
}

std::vector<double> GibbsChain::token_conditional(DocIndex i, std::size_t n, ZMode mode) const {
  const auto& tokens = corpus_->docs.at(static_cast<std::size_t>(i)).tokens;
  if (n >= tokens.size()) throw ArgumentError("token_conditional: token index out of range");
  GibbsChain c = *this;
  const int k_count = hp_.num_topics;
  c.link_buf_.assign(static_cast<std::size_t>(k_count), 0.0);
  c.weight_buf_.assign(static_cast<std::size_t>(k_count), 0.0);
  c.collect_neighbors(i, c.nbrs_);
  const double inv_n = 1.0 / static_cast<double>(tokens.size());
  const WordId t = tokens[n];
  const int old_k = c.state_.z[static_cast<std::size_t>(i)][n];
  if (mode == ZMode::approx) c.approx_link_terms(c.nbrs_, inv_n, c.link_buf_.data());
  --c.state_.topic_word_at(old_k, t);
  --c.state_.doc_topic_at(i, old_k);
  --c.state_.topic_total[static_cast<std::size_t>(old_k)];
  if (mode == ZMode::exact) {
    for (const auto& nb : c.nbrs_) c.cache_.omega[static_cast<std::size_t>(nb.pair)] -= nb.v[old_k] * inv_n;
    c.token_link_terms(c.nbrs_, inv_n, c.link_buf_.data());
  }
  const double total = c.topic_weights(i, t, c.link_buf_.data());
  std::vector<double> out(c.weight_buf_.begin(), c.weight_buf_.end());
  for (double& w : out) w /= total;
  return out;
}

std::uint64_t run_fingerprint(const Corpus& corpus, const TrainPairSet& pairs,
                              const TrainConfig& config) {
  Hasher h;
  h.value(corpus_fingerprint(corpus));
  h.value(pairs.pairs.size());
  for (const auto& p : pairs.pairs) h.value(p.i).value(p.j).value(p.y).value(p.c);
  const auto& hp = config.hyperparams;
  h.value(hp.num_topics).value(hp.nu2).value(hp.c_pos).value(hp.c_neg).value(hp.ell);
  h.value(static_cast<int>(hp.loss)).value(hp.full_matrix).value(hp.burn_in).value(hp.seed);
  h.bytes(hp.alpha.data(), hp.alpha.size() * sizeof(double));
  h.bytes(hp.beta.data(), hp.beta.size() * sizeof(double));
  h.value(config.approx_z).value(config.post_burn_in_samples);
  return h.digest();
}

namespace {

Eigen::MatrixXd zbar_matrix(const SamplerState& state) {
  const auto n_docs = static_cast<Eigen::Index>(state.z.size());
  Eigen::MatrixXd out(n_docs, state.num_topics);
  for (Eigen::Index i = 0; i < n_docs; ++i) out.row(i) = zbar(state, static_cast<DocIndex>(i)).transpose();
  return out;
}

void accumulate(Checkpoint& acc, const SamplerState& state, const Hyperparams& hp) {
  if (acc.samples == 0) {
    acc.eta_sum = state.eta;
    acc.phi_sum = estimate_phi(state, hp);
    acc.zbar_sum = zbar_matrix(state);
  } else {
    acc.eta_sum += state.eta;
    acc.phi_sum += estimate_phi(state, hp);
    acc.zbar_sum += zbar_matrix(state);
  }
  ++acc.samples;
}

void write_checkpoint(const std::string& path, Checkpoint cp, const SamplerState& state,
                      const Rng& rng, const TimingReport& timing) {
  cp.state = state;
  cp.rng_state = rng.state();
  cp.timing = timing;
  save_checkpoint(path, cp);
}

}  // namespace

TrainResult train(const Corpus& corpus, const TrainPairSet& pairs, const TrainConfig& config,
                  Rng& rng) {
  const Hyperparams& hp = config.hyperparams;
  hp.validate(corpus.vocab_size);
  if (config.post_burn_in_samples < 1) throw ArgumentError("post-burn-in samples must be >= 1");
  if (config.checkpoint_every < 0) throw ArgumentError("checkpoint interval must be >= 0");
  const int samples_wanted = config.post_burn_in_samples;
  const int total_iters = hp.burn_in + samples_wanted - 1;
  const ZMode mode = config.approx_z ? ZMode::approx : ZMode::exact;
  const std::uint64_t fingerprint = run_fingerprint(corpus, pairs, config);
  const bool checkpointing = !config.checkpoint_path.empty();

  Checkpoint acc;
  acc.run_fingerprint = fingerprint;
  TimingReport timing;
  int done = 0;
  std::optional<GibbsChain> chain;
  if (config.resume && checkpointing && std::filesystem::exists(config.checkpoint_path)) {
    Checkpoint cp = load_checkpoint(config.checkpoint_path);
    if (cp.run_fingerprint != fingerprint) {
      throw IntegrityError("checkpoint " + config.checkpoint_path +
                           " was written for a different corpus or configuration");
    }
    rng.set_state(cp.rng_state);
    chain.emplace(corpus, pairs, hp, std::move(cp.state));
    done = cp.iteration;
    timing = cp.timing;
    acc.samples = cp.samples;
    acc.eta_sum = std::move(cp.eta_sum);
    acc.phi_sum = std::move(cp.phi_sum);
    acc.zbar_sum = std::move(cp.zbar_sum);
  } else {
    chain.emplace(corpus, pairs, hp, rng);
    if (samples_wanted > 1 && hp.burn_in == 0) accumulate(acc, chain->state(), hp);
  }

  TrainResult result;
  const auto run_start = Clock::now();
  const double prior_total = timing.total_seconds;
  while (done < total_iters) {
    chain->iterate(mode, rng, config.record_timing ? &timing : nullptr);
    ++done;
    if (config.check_invariants) {
      chain->state().check_consistency(corpus);
      const double drift = max_omega_drift(chain->cache(), pairs, chain->state());
      if (drift > 1e-9) throw IntegrityError("cached discriminants drifted by " + std::to_string(drift));
    }
    if (samples_wanted > 1 && done >= hp.burn_in) accumulate(acc, chain->state(), hp);
    if (config.record_timing) timing.total_seconds = prior_total + seconds_since(run_start);
    const bool stop_now = config.stop_after >= 0 && done >= config.stop_after && done < total_iters;
    if (checkpointing && ((config.checkpoint_every > 0 && done % config.checkpoint_every == 0) || stop_now)) {
      acc.iteration = done;
      write_checkpoint(config.checkpoint_path, acc, chain->state(), rng, timing);
    }
    if (stop_now) {
      result.completed = false;
      break;
    }
  }

  const SamplerState& s = chain->state();
  auto& post = result.posterior;
  post.num_topics = hp.num_topics;
  post.vocab_size = corpus.vocab_size;
  post.full_matrix = hp.full_matrix;
  post.hyperparams = hp;
  post.topic_word = s.topic_word;
  post.train_docs.resize(corpus.num_docs());
  for (std::size_t i = 0; i < corpus.num_docs(); ++i) post.train_docs[i] = static_cast<DocIndex>(i);
  if (samples_wanted > 1 && acc.samples > 0) {
    const double inv = 1.0 / acc.samples;
    post.eta = acc.eta_sum * inv;
    post.phi = acc.phi_sum * inv;
    post.train_zbar = acc.zbar_sum * inv;
  } else {
    post.eta = s.eta;
    post.phi = estimate_phi(s, hp);
    post.train_zbar = zbar_matrix(s);
  }
  if (config.record_timing) timing.total_seconds = prior_total + seconds_since(run_start);
  result.timing = timing;
  result.iterations_done = done;
  result.numerical_warnings = chain->numerical_warnings();
  return result;
}

}  // namespace grtm
