#include "grtm/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "grtm/error.hpp"

namespace grtm {
namespace {

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log psi(y = 1 | omega) with the augmentation constants dropped.
double log_positive_link(double omega, const Hyperparams& hp) {
  if (hp.loss == Loss::logistic) return -hp.c_pos * softplus(-omega);
  return -2.0 * hp.c_pos * std::max(0.0, hp.ell - omega);
}

std::vector<std::int32_t> local_index(const PosteriorEstimate& model, std::size_t n_docs) {
  std::vector<std::int32_t> local(n_docs, -1);
  for (std::size_t t = 0; t < model.train_docs.size(); ++t) {
    const auto d = model.train_docs[t];
    if (d < 0 || static_cast<std::size_t>(d) >= n_docs) {
      throw IntegrityError("model references document " + std::to_string(d) + " outside the corpus");
    }
    local[static_cast<std::size_t>(d)] = static_cast<std::int32_t>(t);
  }
  return local;
}

std::vector<std::vector<Link>> incident_links(const Corpus& corpus) {
  std::vector<std::vector<Link>> inc(corpus.num_docs());
  for (const auto& l : corpus.links) {
    inc[static_cast<std::size_t>(l.citing)].push_back(l);
    inc[static_cast<std::size_t>(l.cited)].push_back(l);
  }
  return inc;
}

// Whether link l (incident to test document d) counts as a true link under
// the orientation.
bool link_counts(const Link& l, DocIndex d, bool directed, LinkOrientation o) {
  if (!directed || o == LinkOrientation::either) return true;
  return o == LinkOrientation::test_to_train ? l.citing == d : l.cited == d;
}

int draw_from(const std::vector<double>& w, double total, Rng& rng) {
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int last = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k] <= 0.0) continue;
    acc += w[k];
    last = static_cast<int>(k);
    if (u < acc) return last;
  }
  return last;
}

void check_model(const PosteriorEstimate& model) {
  if (model.phi.rows() != model.num_topics || model.phi.cols() != model.vocab_size) {
    throw IntegrityError("model topics have the wrong shape");
  }
  if (model.train_zbar.rows() != static_cast<Eigen::Index>(model.train_docs.size()) ||
      model.train_zbar.cols() != model.num_topics) {
    throw IntegrityError("model training representation has the wrong shape");
  }
}

}  // namespace

void TestInferenceConfig::validate() const {
  if (!(rel_tol > 0.0)) throw ArgumentError("rel_tol must be positive");
  if (max_iters < 1) throw ArgumentError("max_iters must be at least 1");
  if (word_pred_burn_in < 0) throw ArgumentError("word-prediction burn-in must be non-negative");
  if (word_pred_samples < 1) throw ArgumentError("word-prediction samples must be at least 1");
}

TestDocSampler::TestDocSampler(std::span<const WordId> tokens, const Eigen::MatrixXd& phi,
                               const std::vector<double>& alpha, Rng& rng)
    : tokens_(tokens.begin(), tokens.end()), phi_(&phi), alpha_(alpha) {
  if (tokens_.empty()) throw ArgumentError("test document has no tokens");
  const auto k_count = static_cast<std::size_t>(phi.rows());
  if (alpha_.size() != k_count) throw ArgumentError("alpha length differs from the topic count");
  for (WordId w : tokens_) {
    if (w < 0 || w >= phi.cols()) throw ArgumentError("word id " + std::to_string(w) + " outside the vocabulary");
  }
  alpha_sum_ = std::accumulate(alpha_.begin(), alpha_.end(), 0.0);
  counts_.assign(k_count, 0);
  weights_.resize(k_count);
  z_.resize(tokens_.size());
  for (auto& k : z_) {
    k = static_cast<int>(rng.uniform_index(k_count));
    ++counts_[static_cast<std::size_t>(k)];
  }
}

void TestDocSampler::sweep(Rng& rng) {
  const auto k_count = counts_.size();
  for (std::size_t n = 0; n < tokens_.size(); ++n) {
    --counts_[static_cast<std::size_t>(z_[n])];
    double total = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      weights_[k] = (*phi_)(static_cast<Eigen::Index>(k), tokens_[n]) * (counts_[k] + alpha_[k]);
      total += weights_[k];
    }
    if (!(total > 0.0)) throw NumericalError("test-document conditional has zero mass");
    z_[n] = draw_from(weights_, total, rng);
    ++counts_[static_cast<std::size_t>(z_[n])];
  }
}

std::vector<double> TestDocSampler::conditional(std::size_t n) const {
  std::vector<int> c = counts_;
  --c[static_cast<std::size_t>(z_.at(n))];
  std::vector<double> w(c.size());
  double total = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    w[k] = (*phi_)(static_cast<Eigen::Index>(k), tokens_[n]) * (c[k] + alpha_[k]);
    total += w[k];
  }
  for (double& x : w) x /= total;
  return w;
}

double TestDocSampler::log_likelihood() const {
  const double denom = static_cast<double>(tokens_.size()) + alpha_sum_;
  double ll = 0.0;
  for (WordId w : tokens_) {
    double p = 0.0;
    for (std::size_t k = 0; k < counts_.size(); ++k) {
      p += (*phi_)(static_cast<Eigen::Index>(k), w) * (counts_[k] + alpha_[k]);
    }
    ll += std::log(p / denom);
  }
  return ll;
}

Eigen::VectorXd TestDocSampler::zbar() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(counts_.size()));
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = static_cast<double>(counts_[k]) / static_cast<double>(tokens_.size());
  }
  return out;
}

TestTopics infer_test_topics(std::span<const WordId> tokens, const Eigen::MatrixXd& phi,
                             const std::vector<double>& alpha, const TestInferenceConfig& cfg,
                             Rng& rng) {
  cfg.validate();
  TestDocSampler sampler(tokens, phi, alpha, rng);
  TestTopics out;
  double prev = sampler.log_likelihood();
  for (int it = 1; it <= cfg.max_iters; ++it) {
    sampler.sweep(rng);
    const double cur = sampler.log_likelihood();
    out.iterations = it;
    if (std::abs(cur - prev) <= cfg.rel_tol * std::abs(prev)) {
      out.converged = true;
      break;
    }
    prev = cur;
  }
  out.z = sampler.z();
  out.zbar = sampler.zbar();
  return out;
}

LinkPrediction predict_link(const Eigen::VectorXd& zbar_i, const Eigen::VectorXd& zbar_j,
                            const Eigen::MatrixXd& u) {
  if (zbar_i.size() != u.rows() || zbar_j.size() != u.cols()) {
    throw ArgumentError("predict_link: dimensions do not match the weight matrix");
  }
  LinkPrediction out;
  out.score = zbar_i.dot(u * zbar_j);
  out.label = out.score > 0.0 ? 1 : 0;
  return out;
}

std::vector<double> average_ranks(std::span<const double> scores) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> ranks(n);
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start + 1;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    // Positions start+1 .. end share their mean.
    const double r = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t m = start; m < end; ++m) ranks[order[m]] = r;
    start = end;
  }
  return ranks;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ArgumentError("auc: scores and labels differ in length");
  const auto ranks = average_ranks(scores);
  const double n = static_cast<double>(scores.size());
  double n_pos = 0.0, rank_sum = 0.0;
  for (std::size_t m = 0; m < scores.size(); ++m) {
    if (labels[m] != 0 && labels[m] != 1) throw ArgumentError("auc: labels must be 0 or 1");
    if (labels[m] == 1) {
      n_pos += 1.0;
      rank_sum += n + 1.0 - ranks[m];
    }
  }
  const double n_neg = n - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw ArgumentError("auc: need at least one positive and one negative");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double mean_rank_of(std::span<const double> scores, std::span<const std::size_t> targets) {
  if (targets.empty()) throw ArgumentError("mean_rank_of: no targets");
  const auto ranks = average_ranks(scores);
  double sum = 0.0;
  for (std::size_t t : targets) sum += ranks.at(t);
  return sum / static_cast<double>(targets.size());
}

std::string to_string(LinkOrientation o) {
  switch (o) {
    case LinkOrientation::test_to_train: return "test-to-train";
    case LinkOrientation::train_to_test: return "train-to-test";
    case LinkOrientation::either: return "either";
  }
  return "test-to-train";
}

LinkOrientation parse_orientation(const std::string& s) {
  if (s == "test-to-train") return LinkOrientation::test_to_train;
  if (s == "train-to-test") return LinkOrientation::train_to_test;
  if (s == "either") return LinkOrientation::either;
  throw ArgumentError("unknown link orientation '" + s + "'");
}

Eigen::VectorXd score_against_train(const Eigen::VectorXd& test_zbar, const PosteriorEstimate& model,
                                    bool directed, LinkOrientation orientation) {
  const Eigen::MatrixXd u = model.weight_matrix();
  if (test_zbar.size() != u.rows()) throw ArgumentError("test representation has the wrong length");
  // omega(test, t) = zbar_t . (U^T zbar_test); omega(t, test) = zbar_t . (U zbar_test)
  const bool both = !directed || orientation == LinkOrientation::either;
  if (both) {
    const Eigen::VectorXd out_scores = model.train_zbar * (u.transpose() * test_zbar);
    const Eigen::VectorXd in_scores = model.train_zbar * (u * test_zbar);
    return out_scores.cwiseMax(in_scores);
  }
  if (orientation == LinkOrientation::test_to_train) return model.train_zbar * (u.transpose() * test_zbar);
  return model.train_zbar * (u * test_zbar);
}

RankSummary link_rank(const Corpus& corpus, std::span<const DocIndex> test_docs,
                      std::span<const Eigen::VectorXd> test_zbar, const PosteriorEstimate& model,
                      LinkOrientation orientation) {
  if (model.train_docs.empty()) throw ArgumentError("link_rank: empty training set");
  if (test_zbar.size() != test_docs.size()) throw ArgumentError("link_rank: one representation per test document");
  check_model(model);
  const auto local = local_index(model, corpus.num_docs());
  const auto inc = incident_links(corpus);
  RankSummary out;
  double sum = 0.0;
  std::vector<std::size_t> targets;
  for (std::size_t m = 0; m < test_docs.size(); ++m) {
    const DocIndex d = test_docs[m];
    targets.clear();
    for (const auto& l : inc[static_cast<std::size_t>(d)]) {
      const DocIndex other = l.citing == d ? l.cited : l.citing;
      const auto t = local[static_cast<std::size_t>(other)];
      if (t < 0 || !link_counts(l, d, corpus.directed, orientation)) continue;
      targets.push_back(static_cast<std::size_t>(t));
    }
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    if (targets.empty()) {
      ++out.skipped;
      continue;
    }
    const Eigen::VectorXd scores = score_against_train(test_zbar[m], model, corpus.directed, orientation);
    const auto ranks = average_ranks(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())));
    for (std::size_t t : targets) sum += ranks[t];
    out.count += targets.size();
  }
  out.value = out.count > 0 ? sum / static_cast<double>(out.count) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Eigen::VectorXd predict_words(std::size_t num_tokens, std::span<const Link> evidence_links,
                              DocIndex self, const PosteriorEstimate& model,
                              std::span<const std::int32_t> train_local,
                              const TestInferenceConfig& cfg, Rng& rng) {
  cfg.validate();
  check_model(model);
  if (num_tokens == 0) throw ArgumentError("predict_words: document has no tokens");
  const int k_count = model.num_topics;
  const Hyperparams& hp = model.hyperparams;
  const Eigen::MatrixXd u = model.weight_matrix();
  // omega = zbar_self . v for each evidence link.
  std::vector<Eigen::VectorXd> v;
  for (const auto& l : evidence_links) {
    const bool outgoing = l.citing == self;
    if (!outgoing && l.cited != self) continue;
    const DocIndex other = outgoing ? l.cited : l.citing;
    const auto t = train_local[static_cast<std::size_t>(other)];
    if (t < 0) continue;
    const Eigen::VectorXd zt = model.train_zbar.row(t).transpose();
    v.push_back(outgoing ? Eigen::VectorXd(u * zt) : Eigen::VectorXd(u.transpose() * zt));
  }

  const double inv_n = 1.0 / static_cast<double>(num_tokens);
  std::vector<int> z(num_tokens);
  std::vector<int> counts(static_cast<std::size_t>(k_count), 0);
  for (auto& k : z) {
    k = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k_count)));
    ++counts[static_cast<std::size_t>(k)];
  }
  std::vector<double> omega(v.size(), 0.0);
  for (std::size_t l = 0; l < v.size(); ++l) {
    for (int k = 0; k < k_count; ++k) omega[l] += counts[static_cast<std::size_t>(k)] * inv_n * v[l][k];
  }

  std::vector<double> logw(static_cast<std::size_t>(k_count)), w(static_cast<std::size_t>(k_count));
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(k_count);
  const int total_iters = cfg.word_pred_burn_in + cfg.word_pred_samples;
  for (int it = 0; it < total_iters; ++it) {
    for (std::size_t n = 0; n < num_tokens; ++n) {
      const int old_k = z[n];
      --counts[static_cast<std::size_t>(old_k)];
      for (std::size_t l = 0; l < v.size(); ++l) omega[l] -= v[l][old_k] * inv_n;
      double top = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < k_count; ++k) {
        double lw = std::log(counts[static_cast<std::size_t>(k)] + hp.alpha[static_cast<std::size_t>(k)]);
        for (std::size_t l = 0; l < v.size(); ++l) lw += log_positive_link(omega[l] + v[l][k] * inv_n, hp);
        logw[static_cast<std::size_t>(k)] = lw;
        top = std::max(top, lw);
      }
      double total = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = std::exp(logw[k] - top);
        total += w[k];
      }
      const int new_k = draw_from(w, total, rng);
      z[n] = new_k;
      ++counts[static_cast<std::size_t>(new_k)];
      for (std::size_t l = 0; l < v.size(); ++l) omega[l] += v[l][new_k] * inv_n;
    }
    if (it >= cfg.word_pred_burn_in) {
      for (int k = 0; k < k_count; ++k) acc[k] += counts[static_cast<std::size_t>(k)] * inv_n;
    }
  }
  acc /= static_cast<double>(cfg.word_pred_samples);
  return model.phi.transpose() * acc;
}

RankSummary word_rank(const Corpus& corpus, std::span<const DocIndex> test_docs,
                      const PosteriorEstimate& model, const TestInferenceConfig& cfg,
                      std::uint64_t seed) {
  check_model(model);
  if (model.vocab_size != corpus.vocab_size) throw IntegrityError("model and corpus vocabularies differ");
  const auto local = local_index(model, corpus.num_docs());
  const auto inc = incident_links(corpus);
  RankSummary out;
  double sum = 0.0;
  std::vector<Link> evidence;
  for (DocIndex d : test_docs) {
    const auto& tokens = corpus.docs[static_cast<std::size_t>(d)].tokens;
    evidence.clear();
    for (const auto& l : inc[static_cast<std::size_t>(d)]) {
      const DocIndex other = l.citing == d ? l.cited : l.citing;
      if (local[static_cast<std::size_t>(other)] >= 0) evidence.push_back(l);
    }
    if (evidence.empty() || tokens.empty()) {
      ++out.skipped;
      continue;
    }
    Rng rng = Rng::derive(seed, 2 * static_cast<std::uint64_t>(d) + 1);
    const Eigen::VectorXd p = predict_words(tokens.size(), evidence, d, model, local, cfg, rng);
    const auto ranks = average_ranks(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
    double doc_sum = 0.0;
    for (WordId w : tokens) doc_sum += ranks[static_cast<std::size_t>(w)];
    sum += doc_sum / static_cast<double>(tokens.size());
    ++out.count;
  }
  out.value = out.count > 0 ? sum / static_cast<double>(out.count) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

std::vector<Suggestion> suggest_links(std::span<const WordId> query_tokens,
                                      const PosteriorEstimate& model, std::size_t top_k,
                                      const TestInferenceConfig& cfg, bool directed,
                                      LinkOrientation orientation, Rng& rng) {
  if (top_k < 1) throw ArgumentError("top_k must be at least 1");
  check_model(model);
  const auto topics = infer_test_topics(query_tokens, model.phi, model.hyperparams.alpha, cfg, rng);
  const Eigen::VectorXd scores = score_against_train(topics.zbar, model, directed, orientation);
  std::vector<std::size_t> order(model.train_docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)];
  });
  order.resize(std::min(top_k, order.size()));
  std::vector<Suggestion> out;
  out.reserve(order.size());
  for (std::size_t t : order) out.push_back({model.train_docs[t], scores[static_cast<Eigen::Index>(t)]});
  return out;
}

FoldMetrics evaluate_fold(const Corpus& corpus, const FoldSplit& fold,
                          const PosteriorEstimate& model, const TestInferenceConfig& cfg,
                          LinkOrientation orientation, std::uint64_t seed) {
  cfg.validate();
  check_model(model);
  if (model.vocab_size != corpus.vocab_size) throw IntegrityError("model and corpus vocabularies differ");
  if (model.train_docs.empty()) throw ArgumentError("evaluate_fold: empty training set");
  FoldMetrics out;
  out.fold = fold.fold_index;

  std::vector<Eigen::VectorXd> test_zbar;
  test_zbar.reserve(fold.test_docs.size());
  for (DocIndex d : fold.test_docs) {
    const auto& tokens = corpus.docs[static_cast<std::size_t>(d)].tokens;
    if (tokens.empty()) {
      test_zbar.push_back(Eigen::VectorXd::Zero(model.num_topics));
      continue;
    }
    Rng rng = Rng::derive(seed, 2 * static_cast<std::uint64_t>(d));
    test_zbar.push_back(infer_test_topics(tokens, model.phi, model.hyperparams.alpha, cfg, rng).zbar);
  }

  const auto lr = link_rank(corpus, fold.test_docs, test_zbar, model, orientation);
  out.link_rank = lr.value;
  out.link_rank_links = lr.count;
  out.link_rank_skipped = lr.skipped;

  const auto wr = word_rank(corpus, fold.test_docs, model, cfg, seed);
  out.word_rank = wr.value;
  out.word_rank_docs = wr.count;
  out.word_rank_skipped = wr.skipped;

  // AUC over every (test, train) pair.
  const auto local = local_index(model, corpus.num_docs());
  const auto inc = incident_links(corpus);
  const std::size_t n_train = model.train_docs.size();
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(fold.test_docs.size() * n_train);
  labels.reserve(fold.test_docs.size() * n_train);
  std::vector<int> row_labels(n_train);
  for (std::size_t m = 0; m < fold.test_docs.size(); ++m) {
    const DocIndex d = fold.test_docs[m];
    std::fill(row_labels.begin(), row_labels.end(), 0);
    for (const auto& l : inc[static_cast<std::size_t>(d)]) {
      const DocIndex other = l.citing == d ? l.cited : l.citing;
      const auto t = local[static_cast<std::size_t>(other)];
      if (t >= 0 && link_counts(l, d, corpus.directed, orientation)) row_labels[static_cast<std::size_t>(t)] = 1;
    }
    const Eigen::VectorXd s = score_against_train(test_zbar[m], model, corpus.directed, orientation);
    scores.insert(scores.end(), s.data(), s.data() + s.size());
    labels.insert(labels.end(), row_labels.begin(), row_labels.end());
  }
  const auto n_pos = std::count(labels.begin(), labels.end(), 1);
  const bool both_classes = n_pos > 0 && static_cast<std::size_t>(n_pos) < labels.size();
  out.auc = both_classes ? auc(scores, labels) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

namespace {

template <typename F>
MetricSummary summarize_field(const std::vector<FoldMetrics>& folds, F field) {
  std::vector<double> v;
  v.reserve(folds.size());
  for (const auto& f : folds) v.push_back(field(f));
  return summarize(v);
}

}  // namespace

MetricSummary EvalReport::link_rank() const {
  return summarize_field(folds, [](const FoldMetrics& f) { return f.link_rank; });
}
MetricSummary EvalReport::word_rank() const {
  return summarize_field(folds, [](const FoldMetrics& f) { return f.word_rank; });
}
MetricSummary EvalReport::auc() const {
  return summarize_field(folds, [](const FoldMetrics& f) { return f.auc; });
}

}  // namespace grtm
