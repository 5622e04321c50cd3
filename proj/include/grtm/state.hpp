#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grtm/corpus.hpp"
#include "grtm/rng.hpp"

namespace grtm {

enum class Loss { logistic, hinge };

std::string to_string(Loss loss);
Loss parse_loss(const std::string& s);

struct Hyperparams {
  int num_topics = 10;
  std::vector<double> alpha;  // length K
  std::vector<double> beta;   // length V
  double nu2 = 1.0;
  double c_pos = 4.0;
  double c_neg = 1.0;
  double ell = 1.0;
  Loss loss = Loss::logistic;
  bool full_matrix = true;
  int burn_in = 400;
  std::uint64_t seed = 0;

  // Symmetric priors: alpha_k = alpha, beta_t = beta.
  static Hyperparams symmetric(int num_topics, int vocab_size, double alpha = 5.0,
                               double beta = 0.01);

  // Length of eta: K^2 with a full weight matrix, K with a diagonal one.
  int eta_dim() const { return full_matrix ? num_topics * num_topics : num_topics; }
  double alpha_sum() const;
  double beta_sum() const;

  // Throws ArgumentError naming the first violated constraint.
  void validate(int vocab_size) const;
};

// Collapsed chain state: topic assignments, count tables, eta = vec(U)
// (row-major, eta[k * K + l] = U(k, l)) and one augmentation variable per
// training pair.
struct SamplerState {
  int num_topics = 0;
  int vocab_size = 0;
  std::vector<std::vector<int>> z;
  std::vector<int> topic_word;   // K x V, [k * V + t]
  std::vector<int> doc_topic;    // D x K, [i * K + k]
  std::vector<int> topic_total;  // K
  Eigen::VectorXd eta;
  std::vector<double> lambda;

  int& topic_word_at(int k, WordId t) { return topic_word[static_cast<std::size_t>(k) * vocab_size + t]; }
  int topic_word_at(int k, WordId t) const { return topic_word[static_cast<std::size_t>(k) * vocab_size + t]; }
  int& doc_topic_at(DocIndex i, int k) { return doc_topic[static_cast<std::size_t>(i) * num_topics + k]; }
  int doc_topic_at(DocIndex i, int k) const { return doc_topic[static_cast<std::size_t>(i) * num_topics + k]; }

  // Recomputes every count table from z and compares; throws IntegrityError
  // on mismatch or non-positive lambda.
  void check_consistency(const Corpus& corpus) const;
};

// Uniform random topics, counts built from them, lambda = 1, eta drawn from
// the N(0, nu2 I) prior.
SamplerState init_state(const Corpus& corpus, const TrainPairSet& pairs, const Hyperparams& hp,
                        Rng& rng);

// Average topic assignment C_i / N_i; the zero vector for empty documents.
Eigen::VectorXd zbar(const SamplerState& state, DocIndex i);

// omega = zbar_i^T U zbar_j (full) or sum_k eta_k zbar_i[k] zbar_j[k].
double discriminant(const Eigen::VectorXd& eta, const Eigen::VectorXd& zbar_i,
                    const Eigen::VectorXd& zbar_j, bool full_matrix);

// K x K weight matrix from eta (diagonal matrix in diagonal mode).
Eigen::MatrixXd weight_matrix(const Eigen::VectorXd& eta, int num_topics, bool full_matrix);

// Per-pair quantities shared by the eta, Z and lambda updates.
//
// Every link log-factor is quadratic in omega:
//   log psi(omega) = link_lin * omega - link_quad * omega^2 / 2 + const
// with (link_lin, link_quad) = (kappa, lambda) for the logistic loss and
// (c y~ (lambda + c ell) / lambda, c^2 / lambda) for the hinge loss. The same
// coefficients are the data terms of the eta conditional.
struct PairCache {
  int num_topics = 0;
  bool full_matrix = true;
  std::vector<double> zbar;       // D x K
  std::vector<double> g;          // D x K, U zbar_j
  std::vector<double> h;          // D x K, U^T zbar_j
  std::vector<double> omega;      // per pair
  std::vector<double> kappa;      // per pair, c (y - 1/2)
  std::vector<double> ytilde;     // per pair, 2y - 1
  std::vector<double> link_lin;   // per pair
  std::vector<double> link_quad;  // per pair
  std::vector<std::vector<std::int32_t>> out_pairs;  // pairs (i, *)
  std::vector<std::vector<std::int32_t>> in_pairs;   // pairs (*, i)

  const double* zbar_row(DocIndex i) const { return zbar.data() + static_cast<std::size_t>(i) * num_topics; }
  double* zbar_row(DocIndex i) { return zbar.data() + static_cast<std::size_t>(i) * num_topics; }
  const double* g_row(DocIndex i) const { return g.data() + static_cast<std::size_t>(i) * num_topics; }
  double* g_row(DocIndex i) { return g.data() + static_cast<std::size_t>(i) * num_topics; }
  const double* h_row(DocIndex i) const { return h.data() + static_cast<std::size_t>(i) * num_topics; }
  double* h_row(DocIndex i) { return h.data() + static_cast<std::size_t>(i) * num_topics; }

  double zeta(std::size_t p, double ell) const { return ell - ytilde[p] * omega[p]; }
};

PairCache build_pair_cache(const Corpus& corpus, const TrainPairSet& pairs,
                           const SamplerState& state, const Hyperparams& hp);

// zbar, g, h and omega from the current counts and eta.
void refresh_discriminants(PairCache& cache, const Corpus& corpus, const TrainPairSet& pairs,
                           const SamplerState& state);

// link_lin / link_quad from the current lambda.
void refresh_link_coefficients(PairCache& cache, const TrainPairSet& pairs,
                               const SamplerState& state, const Hyperparams& hp);

// Largest |cached omega - recomputed omega| over all pairs.
double max_omega_drift(const PairCache& cache, const TrainPairSet& pairs,
                       const SamplerState& state);

struct PosteriorEstimate {
  int num_topics = 0;
  int vocab_size = 0;
  bool full_matrix = true;
  Eigen::MatrixXd phi;  // K x V, rows sum to 1
  Eigen::VectorXd eta;  // the classifier U-hat, vec(U)
  Hyperparams hyperparams;
  std::vector<int> topic_word;  // counts behind phi (last sample)
  // Training documents and their topic representation, used to score links.
  std::vector<DocIndex> train_docs;
  Eigen::MatrixXd train_zbar;  // T x K

  Eigen::MatrixXd weight_matrix() const { return grtm::weight_matrix(eta, num_topics, full_matrix); }
};

// phi_kt proportional to C_k^t + beta_t.
Eigen::MatrixXd estimate_phi(const SamplerState& state, const Hyperparams& hp);

}  // namespace grtm
