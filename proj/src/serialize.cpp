#include "grtm/serialize.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "grtm/error.hpp"

namespace grtm {

using nlohmann::json;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw FormatError("matrix data does not match its shape");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t n = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[n++];
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::uint64_t from_hex(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("bad hexadecimal value '" + s + "'");
  return v;
}

void check_header(const json& j, const std::string& format, int version) {
  if (!j.is_object() || j.value("format", std::string()) != format) {
    throw FormatError("not a " + format + " file");
  }
  const int v = j.value("version", -1);
  if (v != version) {
    throw FormatError(format + " version " + std::to_string(v) + " is not supported (expected " +
                      std::to_string(version) + ")");
  }
}

json parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

json timing_json(const TimingReport& t) {
  return json{{"z_seconds", t.z_seconds},
              {"lambda_seconds", t.lambda_seconds},
              {"eta_seconds", t.eta_seconds},
              {"total_seconds", t.total_seconds},
              {"iterations", t.iterations}};
}

TimingReport timing_from(const json& j) {
  TimingReport t;
  t.z_seconds = j.at("z_seconds").get<double>();
  t.lambda_seconds = j.at("lambda_seconds").get<double>();
  t.eta_seconds = j.at("eta_seconds").get<double>();
  t.total_seconds = j.at("total_seconds").get<double>();
  t.iterations = j.at("iterations").get<int>();
  return t;
}

// Wraps json access errors as format errors.
template <typename F>
auto guarded(const std::string& what, F f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

json metric_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << contents;
    out.flush();
    if (!out) throw Error("error writing " + tmp);
  }
  std::filesystem::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json to_json(const Hyperparams& hp) {
  return json{{"num_topics", hp.num_topics}, {"alpha", hp.alpha},   {"beta", hp.beta},
              {"nu2", hp.nu2},               {"c_pos", hp.c_pos},   {"c_neg", hp.c_neg},
              {"ell", hp.ell},               {"loss", to_string(hp.loss)},
              {"full_matrix", hp.full_matrix}, {"burn_in", hp.burn_in}, {"seed", hex(hp.seed)}};
}

Hyperparams hyperparams_from_json(const json& j) {
  return guarded("hyperparameters", [&] {
    Hyperparams hp;
    hp.num_topics = j.at("num_topics").get<int>();
    hp.alpha = j.at("alpha").get<std::vector<double>>();
    hp.beta = j.at("beta").get<std::vector<double>>();
    hp.nu2 = j.at("nu2").get<double>();
    hp.c_pos = j.at("c_pos").get<double>();
    hp.c_neg = j.at("c_neg").get<double>();
    hp.ell = j.at("ell").get<double>();
    hp.loss = parse_loss(j.at("loss").get<std::string>());
    hp.full_matrix = j.at("full_matrix").get<bool>();
    hp.burn_in = j.at("burn_in").get<int>();
    hp.seed = from_hex(j.at("seed").get<std::string>());
    return hp;
  });
}

json to_json(const Corpus& corpus) {
  json docs = json::array();
  for (const auto& d : corpus.docs) {
    json jd{{"id", d.external_id}, {"tokens", d.tokens}};
    if (d.label) jd["label"] = *d.label;
    docs.push_back(std::move(jd));
  }
  json links = json::array();
  for (const auto& l : corpus.links) links.push_back({l.citing, l.cited});
  return json{{"format", "grtm-corpus"}, {"version", kCorpusFormatVersion},
              {"vocab_size", corpus.vocab_size}, {"directed", corpus.directed},
              {"docs", std::move(docs)}, {"links", std::move(links)}};
}

Corpus corpus_from_json(const json& j) {
  check_header(j, "grtm-corpus", kCorpusFormatVersion);
  Corpus c = guarded("corpus", [&] {
    Corpus c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.directed = j.at("directed").get<bool>();
    for (const auto& jd : j.at("docs")) {
      Document d;
      d.external_id = jd.at("id").get<std::string>();
      d.tokens = jd.at("tokens").get<std::vector<WordId>>();
      if (jd.contains("label")) d.label = jd.at("label").get<std::string>();
      c.docs.push_back(std::move(d));
    }
    for (const auto& jl : j.at("links")) c.links.push_back(Link{jl.at(0).get<DocIndex>(), jl.at(1).get<DocIndex>()});
    return c;
  });
  try {
    c.validate();
  } catch (const IntegrityError& e) {
    throw FormatError(std::string("corpus cache: ") + e.what());
  }
  return c;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  write_file_atomic(path, to_json(corpus).dump());
}

Corpus load_corpus(const std::string& path) { return corpus_from_json(parse_json_file(path)); }

json to_json(const ModelFile& m) {
  const auto& p = m.posterior;
  return json{{"format", "grtm-model"},
              {"version", kModelFormatVersion},
              {"num_topics", p.num_topics},
              {"vocab_size", p.vocab_size},
              {"full_matrix", p.full_matrix},
              {"hyperparams", to_json(p.hyperparams)},
              {"phi", matrix_json(p.phi)},
              {"eta", vector_json(p.eta)},
              {"topic_word", p.topic_word},
              {"train_docs", p.train_docs},
              {"train_zbar", matrix_json(p.train_zbar)},
              {"fold", m.fold.fold_index},
              {"test_docs", m.fold.test_docs},
              {"corpus_fingerprint", hex(m.corpus_fingerprint)},
              {"num_docs", m.num_docs},
              {"neg_ratio", m.neg_ratio},
              {"pair_seed", hex(m.pair_seed)},
              {"approx_z", m.approx_z},
              {"post_burn_in_samples", m.post_burn_in_samples},
              {"iterations", m.iterations}};
}

ModelFile model_from_json(const json& j) {
  check_header(j, "grtm-model", kModelFormatVersion);
  return guarded("model", [&] {
    ModelFile m;
    auto& p = m.posterior;
    p.num_topics = j.at("num_topics").get<int>();
    p.vocab_size = j.at("vocab_size").get<int>();
    p.full_matrix = j.at("full_matrix").get<bool>();
    p.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    p.phi = matrix_from(j.at("phi"));
    p.eta = vector_from(j.at("eta"));
    p.topic_word = j.at("topic_word").get<std::vector<int>>();
    p.train_docs = j.at("train_docs").get<std::vector<DocIndex>>();
    p.train_zbar = matrix_from(j.at("train_zbar"));
    m.fold.fold_index = j.at("fold").get<int>();
    m.fold.test_docs = j.at("test_docs").get<std::vector<DocIndex>>();
    m.fold.train_docs = p.train_docs;
    m.corpus_fingerprint = from_hex(j.at("corpus_fingerprint").get<std::string>());
    m.num_docs = j.at("num_docs").get<int>();
    m.neg_ratio = j.at("neg_ratio").get<double>();
    m.pair_seed = from_hex(j.at("pair_seed").get<std::string>());
    m.approx_z = j.at("approx_z").get<bool>();
    m.post_burn_in_samples = j.at("post_burn_in_samples").get<int>();
    m.iterations = j.at("iterations").get<int>();
    const auto dim = p.full_matrix ? p.num_topics * p.num_topics : p.num_topics;
    if (p.eta.size() != dim || p.phi.rows() != p.num_topics || p.phi.cols() != p.vocab_size ||
        p.train_zbar.rows() != static_cast<Eigen::Index>(p.train_docs.size()) ||
        p.train_zbar.cols() != p.num_topics ||
        p.topic_word.size() != static_cast<std::size_t>(p.num_topics) * static_cast<std::size_t>(p.vocab_size)) {
      throw FormatError("model arrays do not match the declared K and V");
    }
    return m;
  });
}

void save_model(const std::string& path, const ModelFile& model) {
  write_file_atomic(path, to_json(model).dump());
}

ModelFile load_model(const std::string& path) { return model_from_json(parse_json_file(path)); }

void save_checkpoint(const std::string& path, const Checkpoint& cp) {
  const auto& s = cp.state;
  json j{{"format", "grtm-checkpoint"},
         {"version", kCheckpointFormatVersion},
         {"iteration", cp.iteration},
         {"run_fingerprint", hex(cp.run_fingerprint)},
         {"rng_state", cp.rng_state},
         {"num_topics", s.num_topics},
         {"vocab_size", s.vocab_size},
         {"z", s.z},
         {"topic_word", s.topic_word},
         {"doc_topic", s.doc_topic},
         {"topic_total", s.topic_total},
         {"eta", vector_json(s.eta)},
         {"lambda", s.lambda},
         {"samples", cp.samples},
         {"timing", timing_json(cp.timing)}};
  if (cp.samples > 0) {
    j["eta_sum"] = vector_json(cp.eta_sum);
    j["phi_sum"] = matrix_json(cp.phi_sum);
    j["zbar_sum"] = matrix_json(cp.zbar_sum);
  }
  write_file_atomic(path, j.dump());
}

Checkpoint load_checkpoint(const std::string& path) {
  const json j = parse_json_file(path);
  check_header(j, "grtm-checkpoint", kCheckpointFormatVersion);
  return guarded("checkpoint", [&] {
    Checkpoint cp;
    cp.iteration = j.at("iteration").get<int>();
    cp.run_fingerprint = from_hex(j.at("run_fingerprint").get<std::string>());
    cp.rng_state = j.at("rng_state").get<std::string>();
    auto& s = cp.state;
    s.num_topics = j.at("num_topics").get<int>();
    s.vocab_size = j.at("vocab_size").get<int>();
    s.z = j.at("z").get<std::vector<std::vector<int>>>();
    s.topic_word = j.at("topic_word").get<std::vector<int>>();
    s.doc_topic = j.at("doc_topic").get<std::vector<int>>();
    s.topic_total = j.at("topic_total").get<std::vector<int>>();
    s.eta = vector_from(j.at("eta"));
    s.lambda = j.at("lambda").get<std::vector<double>>();
    cp.samples = j.at("samples").get<int>();
    cp.timing = timing_from(j.at("timing"));
    if (cp.samples > 0) {
      cp.eta_sum = vector_from(j.at("eta_sum"));
      cp.phi_sum = matrix_from(j.at("phi_sum"));
      cp.zbar_sum = matrix_from(j.at("zbar_sum"));
    }
    return cp;
  });
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  struct Row {
    const char* name;
    double FoldMetrics::*field;
    MetricSummary (EvalReport::*summary)() const;
  };
  const Row rows[] = {{"link_rank", &FoldMetrics::link_rank, &EvalReport::link_rank},
                      {"word_rank", &FoldMetrics::word_rank, &EvalReport::word_rank},
                      {"auc", &FoldMetrics::auc, &EvalReport::auc}};
  out << "metric,fold,value,std\n";
  for (const auto& r : rows) {
    for (const auto& f : report.folds) {
      out << r.name << ',' << f.fold << ',' << format_double(f.*(r.field)) << ",\n";
    }
    const auto s = (report.*(r.summary))();
    out << r.name << ",summary," << format_double(s.mean) << ',' << format_double(s.std) << '\n';
  }
}

json to_json(const EvalReport& report) {
  json folds = json::array();
  for (const auto& f : report.folds) {
    folds.push_back(json{{"fold", f.fold},
                         {"link_rank", metric_json(f.link_rank)},
                         {"word_rank", metric_json(f.word_rank)},
                         {"auc", metric_json(f.auc)},
                         {"link_rank_links", f.link_rank_links},
                         {"link_rank_skipped", f.link_rank_skipped},
                         {"word_rank_docs", f.word_rank_docs},
                         {"word_rank_skipped", f.word_rank_skipped}});
  }
  auto summary = [](const MetricSummary& s) {
    return json{{"mean", metric_json(s.mean)}, {"std", metric_json(s.std)}};
  };
  return json{{"folds", std::move(folds)},
              {"summary",
               {{"link_rank", summary(report.link_rank())},
                {"word_rank", summary(report.word_rank())},
                {"auc", summary(report.auc())}}}};
}

}  // namespace grtm
