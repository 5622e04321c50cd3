#include "grtm/synthetic.hpp"

#include <algorithm>
#include <string>

#include "grtm/error.hpp"
#include "grtm/rng.hpp"

namespace grtm {

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  const int c_count = spec.num_communities;
  if (spec.num_docs < 1 || c_count < 1 || spec.vocab_size < c_count) {
    throw ArgumentError("synthetic: need at least one doc and one vocabulary word per community");
  }
  if (spec.min_length < 0 || spec.max_length < spec.min_length) throw ArgumentError("synthetic: bad length range");
  if (spec.link_prob.rows() != c_count || spec.link_prob.cols() != c_count) {
    throw ArgumentError("synthetic: link_prob must be C x C");
  }
  Rng rng(spec.seed);
  SyntheticCorpus out;
  auto& corpus = out.corpus;
  corpus.vocab_size = spec.vocab_size;
  corpus.directed = spec.directed;
  const int block = spec.vocab_size / c_count;
  for (int d = 0; d < spec.num_docs; ++d) {
    const int c = d % c_count;
    out.community.push_back(c);
    Document doc;
    doc.external_id = "d" + std::to_string(d);
    doc.label = "c" + std::to_string(c);
    const auto span = static_cast<std::uint64_t>(spec.max_length - spec.min_length + 1);
    const int len = spec.min_length + static_cast<int>(rng.uniform_index(span));
    for (int n = 0; n < len; ++n) {
      WordId w;
      if (rng.uniform() < spec.word_purity) {
        w = static_cast<WordId>(c * block + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(block))));
      } else {
        w = static_cast<WordId>(rng.uniform_index(static_cast<std::uint64_t>(spec.vocab_size)));
      }
      doc.tokens.push_back(w);
    }
    if (spec.binary) {
      std::sort(doc.tokens.begin(), doc.tokens.end());
      doc.tokens.erase(std::unique(doc.tokens.begin(), doc.tokens.end()), doc.tokens.end());
    }
    corpus.docs.push_back(std::move(doc));
  }
  for (int a = 0; a < spec.num_docs; ++a) {
    for (int b = 0; b < spec.num_docs; ++b) {
      if (a == b) continue;
      const double p = spec.link_prob(out.community[static_cast<std::size_t>(a)],
                                      out.community[static_cast<std::size_t>(b)]);
      if (rng.uniform() < p) {
        corpus.links.push_back(spec.directed ? Link{a, b} : Link{std::min(a, b), std::max(a, b)});
      }
    }
  }
  std::sort(corpus.links.begin(), corpus.links.end());
  corpus.links.erase(std::unique(corpus.links.begin(), corpus.links.end()), corpus.links.end());
  corpus.validate();
  return out;
}

SyntheticSpec two_community_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.num_docs = 60;
  s.vocab_size = 20;
  s.num_communities = 2;
  s.word_purity = 0.9;
  s.link_prob.resize(2, 2);
  s.link_prob << 0.8, 0.01, 0.01, 0.8;
  s.seed = seed;
  return s;
}

SyntheticSpec asymmetric_blocks_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.num_docs = 80;
  s.vocab_size = 40;
  s.num_communities = 4;
  s.word_purity = 0.9;
  s.link_prob = Eigen::MatrixXd::Constant(4, 4, 0.005);
  for (int c = 0; c < 4; ++c) {
    s.link_prob(c, c) = 0.05;
    s.link_prob(c, (c + 1) % 4) = 0.3;
  }
  s.seed = seed;
  return s;
}

SyntheticSpec imbalanced_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.num_docs = 200;
  s.vocab_size = 40;
  s.num_communities = 4;
  s.word_purity = 0.3;
  s.min_length = 8;
  s.max_length = 16;
  s.link_prob = Eigen::MatrixXd::Constant(4, 4, 0.002);
  for (int c = 0; c < 4; ++c) s.link_prob(c, c) = 0.06;
  s.seed = seed;
  return s;
}

SyntheticSpec cora_scale_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.num_docs = 2708;
  s.vocab_size = 1433;
  s.num_communities = 7;
  s.word_purity = 0.6;
  s.min_length = 9;
  s.max_length = 27;
  s.link_prob = Eigen::MatrixXd::Constant(7, 7, 0.0001);
  for (int c = 0; c < 7; ++c) s.link_prob(c, c) = 0.0046;
  s.binary = true;
  s.seed = seed;
  return s;
}

}  // namespace grtm
