// grtm: train, evaluate and inspect relational topic models on document
// networks in LINQS format.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "grtm/corpus.hpp"
#include "grtm/error.hpp"
#include "grtm/gibbs.hpp"
#include "grtm/predict.hpp"
#include "grtm/serialize.hpp"
#include "grtm/state.hpp"

namespace fs = std::filesystem;
using namespace grtm;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;
constexpr const char* kDataDirEnv = "GRTM_DATA_DIR";

std::mutex g_log_mutex;

void log_line(const std::string& s) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << s << std::endl;
}

struct CorpusOptions {
  std::string dataset;
  std::vector<std::string> content;
  std::vector<std::string> cites;
  std::string corpus_file;
  bool undirected = false;

  bool given() const { return !dataset.empty() || !content.empty() || !corpus_file.empty(); }
};

struct TrainOptions {
  CorpusOptions corpus;
  int k = 10;
  std::string loss = "logistic";
  bool full_matrix = true;
  bool approx = false;
  double c_pos = 4.0;
  double c_neg = 1.0;
  double ell = 1.0;
  double alpha = 5.0;
  double beta = 0.01;
  double nu2 = 1.0;
  double neg_ratio = 0.01;
  int burn_in = 400;
  int folds = 5;
  std::vector<int> only_folds;
  std::uint64_t seed = 0;
  int samples = 1;
  int checkpoint_every = 50;
  bool resume = false;
  int stop_after = -1;
  int jobs = 1;
  std::string out = "out";
};

struct EvalOptions {
  CorpusOptions corpus;
  std::string models;
  std::string out;
  std::string orientation = "test-to-train";
  double rel_tol = 1e-4;
  int max_iters = 500;
  int word_burn_in = 50;
  int word_samples = 50;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// Runs fn(0..n-1) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw ArgumentError(what + " '" + path + "' does not exist");
}

// <data dir>/<name>/ holding one or more X.content / X.cites pairs.
void resolve_dataset(const std::string& name, std::vector<std::string>& content,
                     std::vector<std::string>& cites) {
  const char* env = std::getenv(kDataDirEnv);
  const fs::path base = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("data");
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  fs::path dir;
  for (const auto& candidate : {base / name, base / lower}) {
    if (fs::is_directory(candidate)) {
      dir = candidate;
      break;
    }
  }
  if (dir.empty()) {
    throw ArgumentError("dataset '" + name + "' not found under " + base.string() + " (set " +
                        kDataDirEnv + " or pass --dataset-content/--dataset-cites)");
  }
  std::vector<fs::path> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".content") found.push_back(entry.path());
  }
  std::sort(found.begin(), found.end());
  if (found.empty()) throw ArgumentError("no .content files in " + dir.string());
  for (const auto& c : found) {
    fs::path ci = c;
    ci.replace_extension(".cites");
    content.push_back(c.string());
    cites.push_back(ci.string());
  }
}

Corpus load_corpus_from(const CorpusOptions& o) {
  if (!o.corpus_file.empty()) {
    require_file(o.corpus_file, "corpus file");
    Corpus c = load_corpus(o.corpus_file);
    if (o.undirected && c.directed) throw ArgumentError("--undirected cannot be applied to a directed corpus cache");
    return c;
  }
  std::vector<std::string> content = o.content, cites = o.cites;
  if (!o.dataset.empty()) resolve_dataset(o.dataset, content, cites);
  if (content.empty()) throw ArgumentError("no corpus given (use --dataset, --dataset-content/--dataset-cites or --corpus)");
  if (content.size() != cites.size()) throw ArgumentError("give one --dataset-cites per --dataset-content");
  for (const auto& p : content) require_file(p, "content file");
  for (const auto& p : cites) require_file(p, "cites file");
  LoadStats stats;
  Corpus c = load_linqs(content, cites, !o.undirected, &stats);
  std::ostringstream os;
  os << "corpus: " << c.num_docs() << " docs, V = " << c.vocab_size << ", " << c.links.size()
     << (c.directed ? " directed" : " undirected") << " links";
  if (stats.skipped_unknown + stats.duplicates + stats.self_links + stats.collapsed_reciprocal > 0) {
    os << " (dropped: " << stats.skipped_unknown << " unknown id, " << stats.duplicates << " duplicate, "
       << stats.self_links << " self, " << stats.collapsed_reciprocal << " reciprocal)";
  }
  log_line(os.str());
  return c;
}

void add_corpus_options(CLI::App* app, CorpusOptions& o) {
  app->add_option("--dataset", o.dataset, std::string("Dataset directory name under $") + kDataDirEnv);
  app->add_option("--dataset-content", o.content, "LINQS .content file (repeatable)");
  app->add_option("--dataset-cites", o.cites, "LINQS .cites file (repeatable, one per .content)");
  app->add_option("--corpus", o.corpus_file, "Corpus cache written by train");
  app->add_flag("--undirected", o.undirected, "Treat links as undirected");
}

void add_train_options(CLI::App* app, TrainOptions& o) {
  add_corpus_options(app, o.corpus);
  app->add_option("--k", o.k, "Number of topics")->check(CLI::PositiveNumber);
  app->add_option("--loss", o.loss, "logistic or hinge")->check(CLI::IsMember({"logistic", "hinge"}));
  app->add_flag("--full-matrix,!--diagonal", o.full_matrix, "Full K x K weight matrix (default) or diagonal");
  app->add_flag("--approx", o.approx, "Approximate z sampling (link factors once per document)");
  app->add_option("--c-pos", o.c_pos, "Regularization weight of positive links");
  app->add_option("--c-neg", o.c_neg, "Regularization weight of negative links");
  app->add_option("--ell", o.ell, "Hinge margin (>= 1)");
  app->add_option("--alpha", o.alpha, "Symmetric Dirichlet prior on topic proportions");
  app->add_option("--beta", o.beta, "Symmetric Dirichlet prior on topics");
  app->add_option("--nu2", o.nu2, "Prior variance of each weight");
  app->add_option("--neg-ratio", o.neg_ratio, "Fraction of unobserved pairs used as negatives");
  app->add_option("--burn-in", o.burn_in, "Gibbs iterations");
  app->add_option("--folds", o.folds, "Number of cross-validation folds");
  app->add_option("--fold", o.only_folds, "Train only these folds (repeatable)");
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--samples", o.samples, "Post-burn-in samples averaged into the estimate");
  app->add_option("--checkpoint-every", o.checkpoint_every, "Checkpoint interval in iterations (0: off)");
  app->add_flag("--resume", o.resume, "Continue folds from their checkpoints");
  app->add_option("--stop-after", o.stop_after, "Stop each fold after this many iterations")->group("");
  app->add_option("--jobs", o.jobs, "Folds trained in parallel");
  app->add_option("--out", o.out, "Output directory");
}

void add_eval_options(CLI::App* app, EvalOptions& o, bool with_models) {
  if (with_models) {
    add_corpus_options(app, o.corpus);
    app->add_option("--models", o.models, "Directory written by train")->required();
    app->add_option("--out", o.out, "Output directory (default: the models directory)");
    app->add_option("--jobs", o.jobs, "Folds evaluated in parallel");
  }
  app->add_option("--orientation", o.orientation, "test-to-train, train-to-test or either")
      ->check(CLI::IsMember({"test-to-train", "train-to-test", "either"}));
  app->add_option("--rel-tol", o.rel_tol, "Test-document inference tolerance");
  app->add_option("--max-iters", o.max_iters, "Test-document inference sweeps");
  app->add_option("--word-burn-in", o.word_burn_in, "Burn-in of the word-prediction chain");
  app->add_option("--word-samples", o.word_samples, "Samples of the word-prediction chain");
  app->add_option(with_models ? "--seed" : "--eval-seed", o.seed, "Evaluation seed");
}

Hyperparams hyperparams_for(const TrainOptions& o, int vocab_size) {
  Hyperparams hp = Hyperparams::symmetric(o.k, vocab_size, o.alpha, o.beta);
  hp.nu2 = o.nu2;
  hp.c_pos = o.c_pos;
  hp.c_neg = o.c_neg;
  hp.ell = o.ell;
  hp.loss = parse_loss(o.loss);
  hp.full_matrix = o.full_matrix;
  hp.burn_in = o.burn_in;
  hp.seed = o.seed;
  hp.validate(vocab_size);
  return hp;
}

void validate_train(const TrainOptions& o) {
  if (o.loss == "hinge" && !(o.ell >= 1.0)) throw ArgumentError("--ell must be >= 1 for the hinge loss");
  if (!(o.neg_ratio > 0.0 && o.neg_ratio <= 1.0)) throw ArgumentError("--neg-ratio must be in (0, 1]");
  if (o.folds < 2) throw ArgumentError("--folds must be at least 2");
  if (o.samples < 1) throw ArgumentError("--samples must be at least 1");
  if (o.burn_in < 0) throw ArgumentError("--burn-in must be non-negative");
  if (o.checkpoint_every < 0) throw ArgumentError("--checkpoint-every must be non-negative");
  if (!(o.alpha > 0.0) || !(o.beta > 0.0) || !(o.nu2 > 0.0)) throw ArgumentError("--alpha, --beta and --nu2 must be positive");
  if (!(o.c_pos > 0.0) || !(o.c_neg > 0.0)) throw ArgumentError("--c-pos and --c-neg must be positive");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

// Options that determine the outputs, in a form --config reads back.
std::string effective_config(const TrainOptions& o) {
  std::ostringstream os;
  os << "[train]\n";
  auto corpus_lines = [&](const CorpusOptions& c) {
    if (!c.corpus_file.empty()) {
      os << "corpus=\"" << c.corpus_file << "\"\n";
    } else if (!c.dataset.empty()) {
      os << "dataset=\"" << c.dataset << "\"\n";
    } else {
      os << "dataset-content=[";
      for (std::size_t i = 0; i < c.content.size(); ++i) os << (i ? "," : "") << '"' << c.content[i] << '"';
      os << "]\ndataset-cites=[";
      for (std::size_t i = 0; i < c.cites.size(); ++i) os << (i ? "," : "") << '"' << c.cites[i] << '"';
      os << "]\n";
    }
    os << "undirected=" << bool_text(c.undirected) << '\n';
  };
  corpus_lines(o.corpus);
  os << "k=" << o.k << '\n'
     << "loss=" << o.loss << '\n'
     << "full-matrix=" << bool_text(o.full_matrix) << '\n'
     << "approx=" << bool_text(o.approx) << '\n'
     << "c-pos=" << format_double(o.c_pos) << '\n'
     << "c-neg=" << format_double(o.c_neg) << '\n'
     << "ell=" << format_double(o.ell) << '\n'
     << "alpha=" << format_double(o.alpha) << '\n'
     << "beta=" << format_double(o.beta) << '\n'
     << "nu2=" << format_double(o.nu2) << '\n'
     << "neg-ratio=" << format_double(o.neg_ratio) << '\n'
     << "burn-in=" << o.burn_in << '\n'
     << "folds=" << o.folds << '\n'
     << "seed=" << o.seed << '\n'
     << "samples=" << o.samples << '\n'
     << "checkpoint-every=" << o.checkpoint_every << '\n';
  if (!o.only_folds.empty()) {
    os << "fold=[";
    for (std::size_t i = 0; i < o.only_folds.size(); ++i) os << (i ? "," : "") << o.only_folds[i];
    os << "]\n";
  }
  return os.str();
}

std::string fold_model_path(const fs::path& dir, int fold) {
  return (dir / ("fold-" + std::to_string(fold) + ".model.json")).string();
}

std::uint64_t pair_seed(std::uint64_t seed, int fold) {
  return Rng::derive(seed, 0x70616972ULL + static_cast<std::uint64_t>(fold)).next_u64();
}

int cmd_train(const TrainOptions& o) {
  validate_train(o);
  const Corpus corpus = load_corpus_from(o.corpus);
  const Hyperparams hp = hyperparams_for(o, corpus.vocab_size);
  const fs::path out(o.out);
  fs::create_directories(out);
  save_corpus((out / "corpus.json").string(), corpus);
  write_file_atomic((out / "config.ini").string(), effective_config(o));

  const auto folds = split_folds(corpus, o.folds, o.seed);
  std::vector<int> selected;
  if (o.only_folds.empty()) {
    for (int f = 0; f < o.folds; ++f) selected.push_back(f);
  } else {
    for (int f : o.only_folds) {
      if (f < 0 || f >= o.folds) throw ArgumentError("--fold " + std::to_string(f) + " out of range");
      selected.push_back(f);
    }
  }

  std::vector<TimingReport> timings(selected.size());
  std::vector<int> completed(selected.size(), 1);
  parallel_for(selected.size(), o.jobs, [&](std::size_t idx) {
    const int f = selected[idx];
    const auto& fold = folds[static_cast<std::size_t>(f)];
    const std::uint64_t ps = pair_seed(o.seed, f);
    const TrainPairSet pairs = build_train_pairs(corpus, fold.train_docs, o.neg_ratio, o.c_pos, o.c_neg, ps);
    for (const auto& w : pairs.warnings) log_line("fold " + std::to_string(f) + ": warning: " + w);
    const TrainingSet ts = make_training_set(corpus, fold.train_docs, pairs);

    TrainConfig cfg;
    cfg.hyperparams = hp;
    cfg.approx_z = o.approx;
    cfg.post_burn_in_samples = o.samples;
    cfg.checkpoint_every = o.checkpoint_every;
    cfg.checkpoint_path = (out / ("fold-" + std::to_string(f) + ".checkpoint.json")).string();
    cfg.resume = o.resume;
    cfg.stop_after = o.stop_after;
    Rng rng = Rng::derive(o.seed, static_cast<std::uint64_t>(f));
    log_line("fold " + std::to_string(f) + ": " + std::to_string(ts.corpus.num_docs()) + " training docs, " +
             std::to_string(pairs.num_positive) + " positive / " + std::to_string(pairs.num_negative) +
             " negative pairs");
    TrainResult res = train(ts.corpus, ts.pairs, cfg, rng);
    timings[idx] = res.timing;
    if (res.numerical_warnings > 0) {
      log_line("fold " + std::to_string(f) + ": " + std::to_string(res.numerical_warnings) +
               " z conditionals renormalized in log space");
    }
    if (!res.completed) {
      completed[idx] = 0;
      log_line("fold " + std::to_string(f) + ": stopped after " + std::to_string(res.iterations_done) +
               " iterations; checkpoint kept");
      return;
    }
    res.posterior.train_docs = ts.doc_ids;
    ModelFile m;
    m.posterior = std::move(res.posterior);
    m.fold = fold;
    m.corpus_fingerprint = corpus_fingerprint(corpus);
    m.num_docs = static_cast<int>(corpus.num_docs());
    m.neg_ratio = o.neg_ratio;
    m.pair_seed = ps;
    m.approx_z = o.approx;
    m.post_burn_in_samples = o.samples;
    m.iterations = res.iterations_done;
    save_model(fold_model_path(out, f), m);
    fs::remove(cfg.checkpoint_path);
    log_line("fold " + std::to_string(f) + ": done");
  });

  std::ostringstream csv;
  csv << "fold,iterations,z_seconds,z_percent,lambda_seconds,lambda_percent,eta_seconds,eta_percent,total_seconds\n";
  csv << std::fixed << std::setprecision(4);
  for (std::size_t idx = 0; idx < selected.size(); ++idx) {
    const auto& t = timings[idx];
    csv << selected[idx] << ',' << t.iterations << ',' << t.z_seconds << ',' << t.percent(t.z_seconds) << ','
        << t.lambda_seconds << ',' << t.percent(t.lambda_seconds) << ',' << t.eta_seconds << ','
        << t.percent(t.eta_seconds) << ',' << t.total_seconds << '\n';
  }
  write_file_atomic((out / "timing.csv").string(), csv.str());
  std::cout << csv.str();
  return 0;
}

TestInferenceConfig inference_config(const EvalOptions& o) {
  TestInferenceConfig cfg;
  cfg.rel_tol = o.rel_tol;
  cfg.max_iters = o.max_iters;
  cfg.word_pred_burn_in = o.word_burn_in;
  cfg.word_pred_samples = o.word_samples;
  cfg.validate();
  return cfg;
}

std::vector<std::string> model_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ArgumentError("models directory '" + dir.string() + "' does not exist");
  std::vector<std::pair<int, std::string>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    const std::string prefix = "fold-", suffix = ".model.json";
    if (name.size() > prefix.size() + suffix.size() && name.starts_with(prefix) && name.ends_with(suffix)) {
      const std::string num = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
      if (!num.empty() && std::all_of(num.begin(), num.end(), ::isdigit)) {
        found.emplace_back(std::stoi(num), entry.path().string());
      }
    }
  }
  std::sort(found.begin(), found.end());
  if (found.empty()) throw ArgumentError("no fold-*.model.json files in " + dir.string());
  std::vector<std::string> out;
  for (auto& f : found) out.push_back(std::move(f.second));
  return out;
}

void check_model_matches(const ModelFile& m, const Corpus& corpus, const std::string& path) {
  if (m.posterior.vocab_size != corpus.vocab_size) {
    throw IntegrityError(path + ": model V = " + std::to_string(m.posterior.vocab_size) +
                         " but corpus V = " + std::to_string(corpus.vocab_size));
  }
  if (m.num_docs != static_cast<int>(corpus.num_docs()) || m.corpus_fingerprint != corpus_fingerprint(corpus)) {
    throw IntegrityError(path + ": model was trained on a different corpus");
  }
}

EvalReport run_eval(const EvalOptions& o, const Corpus& corpus, const fs::path& models_dir) {
  const TestInferenceConfig cfg = inference_config(o);
  const LinkOrientation orientation = parse_orientation(o.orientation);
  const auto files = model_files(models_dir);
  EvalReport report;
  report.folds.resize(files.size());
  parallel_for(files.size(), o.jobs, [&](std::size_t idx) {
    const ModelFile m = load_model(files[idx]);
    check_model_matches(m, corpus, files[idx]);
    report.folds[idx] = evaluate_fold(corpus, m.fold, m.posterior, cfg, orientation, o.seed);
  });
  return report;
}

void write_eval(const EvalReport& report, const fs::path& out) {
  std::ostringstream csv;
  write_eval_csv(csv, report);
  write_file_atomic((out / "metrics.csv").string(), csv.str());
  write_file_atomic((out / "metrics.json").string(), to_json(report).dump(2) + "\n");
}

void print_summary(const EvalReport& report) {
  std::cout << std::left << std::setw(10) << "metric" << std::right << std::setw(14) << "mean" << std::setw(14)
            << "std" << '\n';
  auto row = [](const char* name, const MetricSummary& s) {
    std::cout << std::left << std::setw(10) << name << std::right << std::fixed << std::setprecision(4)
              << std::setw(14) << s.mean << std::setw(14) << s.std << '\n';
  };
  row("link_rank", report.link_rank());
  row("word_rank", report.word_rank());
  row("auc", report.auc());
  std::cout.unsetf(std::ios::floatfield);
}

int cmd_eval(const EvalOptions& o) {
  const fs::path models(o.models);
  const Corpus corpus = o.corpus.given() ? load_corpus_from(o.corpus) : [&] {
    const std::string cache = (models / "corpus.json").string();
    require_file(cache, "corpus cache");
    return load_corpus(cache);
  }();
  const EvalReport report = run_eval(o, corpus, models);
  const fs::path out = o.out.empty() ? models : fs::path(o.out);
  fs::create_directories(out);
  write_eval(report, out);
  print_summary(report);
  return 0;
}

struct SuggestOptions {
  std::string model;
  std::string query;
  std::string corpus;
  std::string out;
  std::size_t top_k = 8;
  std::string orientation = "test-to-train";
  double rel_tol = 1e-4;
  int max_iters = 500;
  std::uint64_t seed = 0;
};

// A whitespace-separated list of word ids, or one `.content` line
// (id, V binary indicators, label).
std::vector<WordId> parse_query(const std::string& text, int vocab_size) {
  std::istringstream in(text);
  std::vector<std::string> fields;
  for (std::string f; in >> f;) fields.push_back(f);
  if (fields.empty()) throw ArgumentError("query is empty");
  std::vector<WordId> tokens;
  if (fields.size() == static_cast<std::size_t>(vocab_size) + 2) {
    bool binary = true;
    for (std::size_t i = 1; i + 1 < fields.size(); ++i) binary = binary && (fields[i] == "0" || fields[i] == "1");
    if (binary) {
      for (std::size_t i = 1; i + 1 < fields.size(); ++i) {
        if (fields[i] == "1") tokens.push_back(static_cast<WordId>(i - 1));
      }
      if (tokens.empty()) throw ArgumentError("query has no words");
      return tokens;
    }
  }
  std::vector<std::string> unknown;
  for (const auto& f : fields) {
    long long v = -1;
    std::istringstream fs_(f);
    if (!(fs_ >> v) || !fs_.eof() || v < 0) throw FormatError("query word '" + f + "' is not a word id");
    if (v >= vocab_size) {
      unknown.push_back(f);
      continue;
    }
    tokens.push_back(static_cast<WordId>(v));
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw ArgumentError("query words outside the vocabulary (V = " + std::to_string(vocab_size) + "): " + list);
  }
  return tokens;
}

int cmd_suggest(const SuggestOptions& o) {
  require_file(o.model, "model file");
  require_file(o.query, "query file");
  if (o.top_k < 1) throw ArgumentError("--top-k must be at least 1");
  const ModelFile m = load_model(o.model);
  const std::string corpus_path =
      o.corpus.empty() ? (fs::path(o.model).parent_path() / "corpus.json").string() : o.corpus;
  require_file(corpus_path, "corpus cache");
  const Corpus corpus = load_corpus(corpus_path);
  check_model_matches(m, corpus, o.model);
  const auto tokens = parse_query(read_file(o.query), m.posterior.vocab_size);
  TestInferenceConfig cfg;
  cfg.rel_tol = o.rel_tol;
  cfg.max_iters = o.max_iters;
  Rng rng(o.seed);
  const auto suggestions =
      suggest_links(tokens, m.posterior, o.top_k, cfg, corpus.directed, parse_orientation(o.orientation), rng);
  std::ostringstream csv;
  csv << "rank,doc_id,label,score\n";
  for (std::size_t r = 0; r < suggestions.size(); ++r) {
    const auto& doc = corpus.docs[static_cast<std::size_t>(suggestions[r].doc)];
    csv << r + 1 << ',' << doc.external_id << ',' << doc.label.value_or("") << ','
        << format_double(suggestions[r].score) << '\n';
  }
  if (!o.out.empty()) write_file_atomic(o.out, csv.str());
  std::cout << csv.str();
  return 0;
}

struct ExportOptions {
  std::string model;
  std::string out;
  int top_words = 10;
};

int cmd_export(const ExportOptions& o) {
  require_file(o.model, "model file");
  if (o.top_words < 1) throw ArgumentError("--top-words must be at least 1");
  const ModelFile m = load_model(o.model);
  const auto& p = m.posterior;
  const fs::path out = o.out.empty() ? fs::path(o.model).parent_path() : fs::path(o.out);
  fs::create_directories(out);

  std::ostringstream topics;
  const auto m_words = std::min<Eigen::Index>(o.top_words, p.vocab_size);
  for (int k = 0; k < p.num_topics; ++k) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p.vocab_size));
    for (Eigen::Index t = 0; t < p.vocab_size; ++t) order[static_cast<std::size_t>(t)] = t;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return p.phi(k, a) > p.phi(k, b); });
    topics << "topic " << k << ':';
    for (Eigen::Index r = 0; r < m_words; ++r) {
      const auto t = order[static_cast<std::size_t>(r)];
      topics << " w" << t << " (" << format_double(p.phi(k, t)) << ')';
    }
    topics << '\n';
  }
  write_file_atomic((out / "topics.txt").string(), topics.str());

  std::ostringstream weights;
  if (p.full_matrix) {
    const Eigen::MatrixXd u = p.weight_matrix();
    for (Eigen::Index a = 0; a < u.rows(); ++a) {
      for (Eigen::Index b = 0; b < u.cols(); ++b) weights << (b ? "," : "") << format_double(u(a, b));
      weights << '\n';
    }
  } else {
    for (Eigen::Index k = 0; k < p.eta.size(); ++k) weights << (k ? "," : "") << format_double(p.eta[k]);
    weights << '\n';
  }
  write_file_atomic((out / "weights.csv").string(), weights.str());
  std::cout << topics.str();
  return 0;
}

struct SweepOptions {
  TrainOptions train;
  EvalOptions eval;
  std::string param;
  std::vector<std::string> values;
};

void set_param(TrainOptions& o, const std::string& name, const std::string& value) {
  static const std::map<std::string, std::function<void(TrainOptions&, const std::string&)>> setters{
      {"c-pos", [](TrainOptions& t, const std::string& v) { t.c_pos = std::stod(v); }},
      {"c-neg", [](TrainOptions& t, const std::string& v) { t.c_neg = std::stod(v); }},
      {"ell", [](TrainOptions& t, const std::string& v) { t.ell = std::stod(v); }},
      {"alpha", [](TrainOptions& t, const std::string& v) { t.alpha = std::stod(v); }},
      {"beta", [](TrainOptions& t, const std::string& v) { t.beta = std::stod(v); }},
      {"nu2", [](TrainOptions& t, const std::string& v) { t.nu2 = std::stod(v); }},
      {"neg-ratio", [](TrainOptions& t, const std::string& v) { t.neg_ratio = std::stod(v); }},
      {"burn-in", [](TrainOptions& t, const std::string& v) { t.burn_in = std::stoi(v); }},
      {"k", [](TrainOptions& t, const std::string& v) { t.k = std::stoi(v); }},
      {"loss", [](TrainOptions& t, const std::string& v) { t.loss = v; }},
  };
  const auto it = setters.find(name);
  if (it == setters.end()) throw ArgumentError("--param " + name + " cannot be swept");
  try {
    it->second(o, value);
  } catch (const std::logic_error&) {
    throw ArgumentError("bad value '" + value + "' for --param " + name);
  }
}

int cmd_sweep(const SweepOptions& o) {
  if (o.values.empty()) throw ArgumentError("--values is empty");
  const fs::path out(o.train.out);
  fs::create_directories(out);
  std::ostringstream summary;
  summary << "param,value,metric,mean,std\n";
  for (const auto& value : o.values) {
    TrainOptions t = o.train;
    set_param(t, o.param, value);
    const fs::path point = out / (o.param + "=" + value);
    t.out = point.string();
    log_line("sweep: " + o.param + " = " + value);
    cmd_train(t);
    EvalOptions e = o.eval;
    e.jobs = o.train.jobs;
    const Corpus corpus = load_corpus((point / "corpus.json").string());
    const EvalReport report = run_eval(e, corpus, point);
    write_eval(report, point);
    std::ostringstream csv;
    write_eval_csv(csv, report);
    write_file_atomic((out / ("sweep_" + o.param + "_" + value + ".csv")).string(), csv.str());
    const std::pair<const char*, MetricSummary> rows[] = {
        {"link_rank", report.link_rank()}, {"word_rank", report.word_rank()}, {"auc", report.auc()}};
    for (const auto& [name, s] : rows) {
      summary << o.param << ',' << value << ',' << name << ',' << format_double(s.mean) << ','
              << format_double(s.std) << '\n';
    }
  }
  write_file_atomic((out / "sweep.csv").string(), summary.str());
  std::cout << summary.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relational topic models for document networks"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Read options from a key=value file; flags override it. Keys go under [train] or [sweep]");

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train one model per cross-validation fold");
  add_train_options(train_cmd, train_opts);

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "Link rank, word rank and AUC of trained folds");
  add_eval_options(eval_cmd, eval_opts, true);

  SuggestOptions sug;
  auto* suggest_cmd = app.add_subcommand("suggest", "Rank training documents as links for a new document");
  suggest_cmd->add_option("--model", sug.model, "Fold model file")->required();
  suggest_cmd->add_option("--query", sug.query, "File holding word ids, or one .content line")->required();
  suggest_cmd->add_option("--corpus", sug.corpus, "Corpus cache (default: beside the model)");
  suggest_cmd->add_option("--top-k", sug.top_k, "Number of suggestions");
  suggest_cmd->add_option("--orientation", sug.orientation, "test-to-train, train-to-test or either")
      ->check(CLI::IsMember({"test-to-train", "train-to-test", "either"}));
  suggest_cmd->add_option("--rel-tol", sug.rel_tol, "Inference tolerance");
  suggest_cmd->add_option("--max-iters", sug.max_iters, "Inference sweeps");
  suggest_cmd->add_option("--seed", sug.seed, "Random seed");
  suggest_cmd->add_option("--out", sug.out, "Also write the ranking to this CSV file");

  ExportOptions exp;
  auto* export_cmd = app.add_subcommand("export", "Write topics.txt and weights.csv for a model");
  export_cmd->add_option("--model", exp.model, "Fold model file")->required();
  export_cmd->add_option("--out", exp.out, "Output directory (default: beside the model)");
  export_cmd->add_option("--top-words", exp.top_words, "Words listed per topic");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate over a grid of one option");
  add_train_options(sweep_cmd, sweep.train);
  add_eval_options(sweep_cmd, sweep.eval, false);
  sweep_cmd->add_option("--param", sweep.param, "Option to vary, e.g. c-pos")->required();
  sweep_cmd->add_option("--values", sweep.values, "Comma-separated values")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts);
    if (*eval_cmd) return cmd_eval(eval_opts);
    if (*suggest_cmd) return cmd_suggest(sug);
    if (*export_cmd) return cmd_export(exp);
    if (*sweep_cmd) return cmd_sweep(sweep);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitData;
  } catch (const IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
