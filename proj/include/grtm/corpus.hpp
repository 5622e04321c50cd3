#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace grtm {

using DocIndex = std::int32_t;
using WordId = std::int32_t;

struct Document {
  std::string external_id;
  std::vector<WordId> tokens;
  // Class label from the dataset; carried as metadata only.
  std::optional<std::string> label;

  std::size_t size() const { return tokens.size(); }
};

// Ordered (citing -> cited) pair. Undirected corpora keep citing < cited.
struct Link {
  DocIndex citing = 0;
  DocIndex cited = 0;

  auto operator<=>(const Link&) const = default;
};

struct Corpus {
  std::vector<Document> docs;
  int vocab_size = 0;
  // Sorted, duplicate-free, no self-links.
  std::vector<Link> links;
  bool directed = true;

  std::size_t num_docs() const { return docs.size(); }
  std::size_t num_tokens() const;
  bool has_link(DocIndex citing, DocIndex cited) const;

  // Throws IntegrityError if any invariant is broken.
  void validate() const;
};

using IdMap = std::unordered_map<std::string, DocIndex>;

struct ContentParseResult {
  std::vector<Document> docs;
  int vocab_size = 0;
  IdMap id_map;
};

// LINQS `.content`: id, V binary word indicators, class label per line.
ContentParseResult parse_content(std::istream& in);

struct CitesParseResult {
  // In file order, before de-duplication.
  std::vector<Link> links;
  std::size_t skipped_unknown = 0;
  std::size_t duplicates = 0;
  std::size_t self_links = 0;
};

// LINQS `.cites`: "cited_id citing_id" per line. Unknown ids, duplicates and
// self-links are dropped and counted.
CitesParseResult parse_cites(std::istream& in, const IdMap& id_map);

struct LoadStats {
  std::size_t skipped_unknown = 0;
  std::size_t duplicates = 0;
  std::size_t self_links = 0;
  // Extra duplicates created by collapsing orientations (undirected only).
  std::size_t collapsed_reciprocal = 0;
};

// Builds a corpus from parsed parts. Undirected corpora store each link once
// as (min, max).
Corpus assemble_corpus(ContentParseResult content, const CitesParseResult& cites,
                       bool directed, LoadStats* stats = nullptr);

// Loads one or more `.content`/`.cites` file pairs (WebKB ships one pair per
// site) into a single corpus. All content files must share the vocabulary.
Corpus load_linqs(std::span<const std::string> content_paths,
                  std::span<const std::string> cites_paths, bool directed,
                  LoadStats* stats = nullptr);

// Writes the corpus back in LINQS format. Requires every token to occur at
// most once per document (binary bag of words).
void write_content(std::ostream& out, const Corpus& corpus);
void write_cites(std::ostream& out, const Corpus& corpus);

struct FoldSplit {
  std::vector<DocIndex> train_docs;  // sorted
  std::vector<DocIndex> test_docs;   // sorted
  int fold_index = 0;
};

// Random permutation of documents cut into n_folds near-equal test sets.
std::vector<FoldSplit> split_folds(const Corpus& corpus, int n_folds, std::uint64_t seed);

struct TrainPair {
  DocIndex i = 0;
  DocIndex j = 0;
  int y = 0;
  double c = 1.0;
};

struct TrainPairSet {
  std::vector<TrainPair> pairs;  // positives first, then negatives
  std::size_t num_positive = 0;
  std::size_t num_negative = 0;
  std::uint64_t negative_candidates = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return pairs.size(); }
};

// All positive links inside the training documents plus
// round(neg_ratio * #unobserved pairs) negatives drawn uniformly without
// replacement. Documents without tokens are left out.
TrainPairSet build_train_pairs(const Corpus& corpus, std::span<const DocIndex> train_docs,
                               double neg_ratio, double c_pos, double c_neg,
                               std::uint64_t seed);

// Training documents re-indexed densely (in the order given), with the links
// and pairs among them mapped to local indices.
struct TrainingSet {
  Corpus corpus;
  TrainPairSet pairs;
  std::vector<DocIndex> doc_ids;  // local index -> index in the full corpus
};

TrainingSet make_training_set(const Corpus& corpus, std::span<const DocIndex> train_docs,
                              const TrainPairSet& pairs);

// Hash of vocabulary size, token lists and links.
std::uint64_t corpus_fingerprint(const Corpus& corpus);

}  // namespace grtm
