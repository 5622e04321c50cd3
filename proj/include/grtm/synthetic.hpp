#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "grtm/corpus.hpp"

namespace grtm {

// Planted-community document network. Each document belongs to one
// community; its tokens come from the community's block of the vocabulary
// with probability word_purity and uniformly from the whole vocabulary
// otherwise. An ordered pair (a, b) is linked with probability
// link_prob(community(a), community(b)).
struct SyntheticSpec {
  int num_docs = 60;
  int vocab_size = 20;
  int num_communities = 2;
  double word_purity = 0.9;
  int min_length = 15;
  int max_length = 25;
  Eigen::MatrixXd link_prob;
  bool directed = true;
  // Keep each word at most once per document, as in LINQS data.
  bool binary = false;
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<int> community;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

// 60 docs, V = 20, two communities with dense links inside each.
SyntheticSpec two_community_spec(std::uint64_t seed);
// Four communities with directed cross links A -> B -> C -> D -> A that
// dominate the links inside communities.
SyntheticSpec asymmetric_blocks_spec(std::uint64_t seed);
// Sparse links and weakly informative words; communities are mostly
// visible through the links.
SyntheticSpec imbalanced_spec(std::uint64_t seed);
// Same shape as Cora: 2708 docs, V = 1433, 7 communities, about 18 tokens
// per doc and about 5400 links.
SyntheticSpec cora_scale_spec(std::uint64_t seed);

}  // namespace grtm
