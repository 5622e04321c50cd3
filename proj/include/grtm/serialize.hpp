#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grtm/corpus.hpp"
#include "grtm/gibbs.hpp"
#include "grtm/predict.hpp"
#include "grtm/state.hpp"

namespace grtm {

inline constexpr int kCorpusFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Corpus& corpus);
Corpus corpus_from_json(const nlohmann::json& j);
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

// A trained fold: the estimate plus what is needed to evaluate it. Wall-clock
// timings are kept out so that reruns produce identical files.
struct ModelFile {
  PosteriorEstimate posterior;
  FoldSplit fold;
  std::uint64_t corpus_fingerprint = 0;
  int num_docs = 0;
  double neg_ratio = 0.0;
  std::uint64_t pair_seed = 0;
  bool approx_z = false;
  int post_burn_in_samples = 1;
  int iterations = 0;
};

nlohmann::json to_json(const ModelFile& model);
ModelFile model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const ModelFile& model);
ModelFile load_model(const std::string& path);

void save_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::string& path);

// One row per fold and a `summary` row (mean, std) per metric.
void write_eval_csv(std::ostream& out, const EvalReport& report);
nlohmann::json to_json(const EvalReport& report);

// Writes to a temporary file beside `path`, then renames over it.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

// Shortest text that parses back to the same double.
std::string format_double(double v);

}  // namespace grtm
