#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grtm/corpus.hpp"
#include "grtm/rng.hpp"
#include "grtm/samplers.hpp"
#include "grtm/state.hpp"

namespace grtm {

// exact: link factors re-evaluated for every token.
// approx: link factors evaluated once per document from its topic
// proportions at document entry and reused for all of its tokens.
enum class ZMode { exact, approx };

struct TimingReport {
  double z_seconds = 0.0;
  double lambda_seconds = 0.0;
  double eta_seconds = 0.0;
  double total_seconds = 0.0;
  int iterations = 0;

  double percent(double part) const { return total_seconds > 0.0 ? 100.0 * part / total_seconds : 0.0; }
};

struct TrainConfig {
  Hyperparams hyperparams;
  bool approx_z = false;
  bool record_timing = true;
  // Iterations averaged into the estimate; 1 keeps the last sample only.
  int post_burn_in_samples = 1;
  // Checkpoint cadence in iterations; 0 disables periodic checkpoints.
  int checkpoint_every = 50;
  std::string checkpoint_path;
  // Continue from checkpoint_path when the file exists.
  bool resume = false;
  // Stop once this many iterations are done (after writing a checkpoint).
  int stop_after = -1;
  // Verify count tables against z after every sweep.
  bool check_invariants = false;
};

struct TrainResult {
  PosteriorEstimate posterior;
  TimingReport timing;
  int iterations_done = 0;
  bool completed = true;
  std::size_t numerical_warnings = 0;
};

// Information-form conditional of eta given Z and lambda.
// logistic: precision = I/nu2 + sum lambda_ij zbar_ij zbar_ij^T,
//           linear    = sum kappa_ij zbar_ij
// hinge:    precision = I/nu2 + sum c_ij^2 zbar_ij zbar_ij^T / lambda_ij,
//           linear    = sum c_ij y~_ij (lambda_ij + c_ij ell) / lambda_ij zbar_ij
// zbar_ij = vec(zbar_i zbar_j^T) with a full weight matrix, zbar_i o zbar_j
// with a diagonal one. `cache` must hold zbar for the current counts.
PrecisionGaussian eta_conditional_logistic(const TrainPairSet& pairs, const SamplerState& state,
                                           const PairCache& cache, const Hyperparams& hp);
PrecisionGaussian eta_conditional_hinge(const TrainPairSet& pairs, const SamplerState& state,
                                        const PairCache& cache, const Hyperparams& hp);

// lambda_ij ~ PG(c_ij, omega_ij).
void sample_lambda_logistic(SamplerState& state, const PairCache& cache,
                            const TrainPairSet& pairs, Rng& rng);
// lambda_ij ~ GIG(1/2, 1, c_ij^2 zeta_ij^2).
void sample_lambda_hinge(SamplerState& state, const PairCache& cache, const TrainPairSet& pairs,
                         const Hyperparams& hp, Rng& rng);

// One collapsed chain over a training corpus. Strictly sequential.
class GibbsChain {
 public:
  GibbsChain(const Corpus& corpus, const TrainPairSet& pairs, const Hyperparams& hp, Rng& rng);
  GibbsChain(const Corpus& corpus, const TrainPairSet& pairs, const Hyperparams& hp,
             SamplerState state);

  PrecisionGaussian eta_conditional() const;

  void sample_eta(Rng& rng);
  void sample_z_sweep(ZMode mode, Rng& rng);
  void sample_z_document(DocIndex i, ZMode mode, Rng& rng);
  void sample_lambda(Rng& rng);

  // eta, then every document's tokens, then lambda.
  void iterate(ZMode mode, Rng& rng, TimingReport* timing = nullptr);

  // Normalized conditional of token n of document i given all other
  // variables. Does not modify the chain.
  std::vector<double> token_conditional(DocIndex i, std::size_t n, ZMode mode) const;

  // Replace eta or lambda (used to hold them fixed in tests).
  void set_eta(const Eigen::VectorXd& eta);
  void set_lambda(const std::vector<double>& lambda);

  const SamplerState& state() const { return state_; }
  const PairCache& cache() const { return cache_; }
  const Hyperparams& hyperparams() const { return hp_; }
  const Corpus& corpus() const { return *corpus_; }
  const TrainPairSet& pairs() const { return *pairs_; }
  std::size_t numerical_warnings() const { return numerical_warnings_; }

 private:
  struct Neighbor {
    std::int32_t pair;
    const double* v;  // U zbar_j (out pair) or U^T zbar_j (in pair)
  };

  void collect_neighbors(DocIndex i, std::vector<Neighbor>& out) const;
  void move_token_mass(DocIndex i, int from, int to, double inv_n);
  double topic_weights(DocIndex i, WordId t, const double* link);
  int draw_topic(DocIndex i, WordId t, const double* link, Rng& rng);
  void token_link_terms(const std::vector<Neighbor>& nbrs, double inv_n, double* link) const;
  void approx_link_terms(const std::vector<Neighbor>& nbrs, double inv_n, double* link) const;

  const Corpus* corpus_;
  const TrainPairSet* pairs_;
  Hyperparams hp_;
  SamplerState state_;
  PairCache cache_;
  double beta_sum_ = 0.0;
  std::size_t numerical_warnings_ = 0;
  std::vector<Neighbor> nbrs_;
  std::vector<double> link_buf_;
  std::vector<double> weight_buf_;
};

// Saved chain for resuming an interrupted run.
struct Checkpoint {
  int iteration = 0;
  SamplerState state;
  std::string rng_state;
  // Running sums over the averaged tail of the chain.
  int samples = 0;
  Eigen::VectorXd eta_sum;
  Eigen::MatrixXd phi_sum;
  Eigen::MatrixXd zbar_sum;
  TimingReport timing;
  std::uint64_t run_fingerprint = 0;
};

// Hash of everything that must match for a checkpoint to be resumable.
std::uint64_t run_fingerprint(const Corpus& corpus, const TrainPairSet& pairs,
                              const TrainConfig& config);

// Runs the chain for burn_in + post_burn_in_samples - 1 iterations and
// returns the point estimate (topics from the counts, classifier from eta).
TrainResult train(const Corpus& corpus, const TrainPairSet& pairs, const TrainConfig& config,
                  Rng& rng);

}  // namespace grtm
