#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grtm/corpus.hpp"
#include "grtm/rng.hpp"
#include "grtm/state.hpp"

namespace grtm {

struct TestInferenceConfig {
  double rel_tol = 1e-4;
  int max_iters = 500;
  // Evidence-conditioned chain used for word prediction.
  int word_pred_burn_in = 50;
  int word_pred_samples = 50;

  void validate() const;
};

// Collapsed sampler for one unseen document under fixed topics:
// p(z_n = k | rest) proportional to phi[k, w_n] (C_k without n + alpha_k).
class TestDocSampler {
 public:
  TestDocSampler(std::span<const WordId> tokens, const Eigen::MatrixXd& phi,
                 const std::vector<double>& alpha, Rng& rng);

  void sweep(Rng& rng);
  // sum_n log sum_k phi[k, w_n] (C_k + alpha_k) / (N + sum alpha)
  double log_likelihood() const;
  Eigen::VectorXd zbar() const;
  // Normalized conditional of token n given the other assignments.
  std::vector<double> conditional(std::size_t n) const;

  const std::vector<int>& z() const { return z_; }
  const std::vector<int>& counts() const { return counts_; }

 private:
  std::vector<WordId> tokens_;
  const Eigen::MatrixXd* phi_;
  std::vector<double> alpha_;
  double alpha_sum_ = 0.0;
  std::vector<int> z_;
  std::vector<int> counts_;
  std::vector<double> weights_;
};

struct TestTopics {
  std::vector<int> z;
  Eigen::VectorXd zbar;
  int iterations = 0;
  bool converged = false;
};

// Sweeps until the relative change of the log-likelihood drops below rel_tol
// or max_iters is reached.
TestTopics infer_test_topics(std::span<const WordId> tokens, const Eigen::MatrixXd& phi,
                             const std::vector<double>& alpha, const TestInferenceConfig& cfg,
                             Rng& rng);

struct LinkPrediction {
  double score = 0.0;  // the discriminant omega
  int label = 0;       // 1 iff omega > 0
};

LinkPrediction predict_link(const Eigen::VectorXd& zbar_i, const Eigen::VectorXd& zbar_j,
                            const Eigen::MatrixXd& u);

// Rank 1 for the largest score; tied scores share their average rank.
std::vector<double> average_ranks(std::span<const double> scores);

// Probability that a random positive outscores a random negative, ties 1/2.
double auc(std::span<const double> scores, std::span<const int> labels);

// Mean rank of the true targets among all candidates.
double mean_rank_of(std::span<const double> scores, std::span<const std::size_t> targets);

// Which discriminant scores a (test, train) pair on a directed corpus.
// Undirected corpora always use the larger of both orientations.
enum class LinkOrientation { test_to_train, train_to_test, either };

std::string to_string(LinkOrientation o);
LinkOrientation parse_orientation(const std::string& s);

// Scores of one test document against every training document of the model.
Eigen::VectorXd score_against_train(const Eigen::VectorXd& test_zbar, const PosteriorEstimate& model,
                                    bool directed, LinkOrientation orientation);

struct RankSummary {
  double value = 0.0;        // mean rank
  std::size_t count = 0;     // ranked items
  std::size_t skipped = 0;   // test documents without usable evidence
};

// Pooled over every (test document, true link) pair.
RankSummary link_rank(const Corpus& corpus, std::span<const DocIndex> test_docs,
                      std::span<const Eigen::VectorXd> test_zbar, const PosteriorEstimate& model,
                      LinkOrientation orientation);

// Predictive word distribution for a document whose words are hidden but
// whose links to training documents are observed. Returns sum_k phi[k, w]
// E[zbar_k | links].
Eigen::VectorXd predict_words(std::size_t num_tokens, std::span<const Link> evidence_links,
                              DocIndex self, const PosteriorEstimate& model,
                              std::span<const std::int32_t> train_local,
                              const TestInferenceConfig& cfg, Rng& rng);

// Per-document mean rank of the document's tokens under predict_words,
// averaged over test documents with at least one link to the training set.
// Documents without such links are counted in `skipped`.
RankSummary word_rank(const Corpus& corpus, std::span<const DocIndex> test_docs,
                      const PosteriorEstimate& model, const TestInferenceConfig& cfg,
                      std::uint64_t seed);

struct Suggestion {
  DocIndex doc = 0;  // corpus index of the training document
  double score = 0.0;
};

// Training documents ordered by descending score (ties by index).
std::vector<Suggestion> suggest_links(std::span<const WordId> query_tokens,
                                      const PosteriorEstimate& model, std::size_t top_k,
                                      const TestInferenceConfig& cfg, bool directed,
                                      LinkOrientation orientation, Rng& rng);

struct FoldMetrics {
  int fold = 0;
  double link_rank = 0.0;
  double word_rank = 0.0;
  double auc = 0.0;
  std::size_t link_rank_links = 0;
  std::size_t link_rank_skipped = 0;
  std::size_t word_rank_docs = 0;
  std::size_t word_rank_skipped = 0;
};

// Test-document topics come from stream derive(seed, 2 * doc) and word
// prediction from derive(seed, 2 * doc + 1), so results do not depend on the
// order in which documents are processed.
FoldMetrics evaluate_fold(const Corpus& corpus, const FoldSplit& fold,
                          const PosteriorEstimate& model, const TestInferenceConfig& cfg,
                          LinkOrientation orientation, std::uint64_t seed);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single fold
};

struct EvalReport {
  std::vector<FoldMetrics> folds;

  MetricSummary link_rank() const;
  MetricSummary word_rank() const;
  MetricSummary auc() const;
};

MetricSummary summarize(std::span<const double> values);

}  // namespace grtm
