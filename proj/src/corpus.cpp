#include "grtm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "grtm/error.hpp"
#include "grtm/hash.hpp"
#include "grtm/rng.hpp"

namespace grtm {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == '\t' || line[pos] == ' ' || line[pos] == '\r')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != '\t' && line[end] != ' ' && line[end] != '\r') ++end;
    out.emplace_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

std::uint64_t pair_key(DocIndex a, DocIndex b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

std::size_t Corpus::num_tokens() const {
  std::size_t n = 0;
  for (const auto& d : docs) n += d.size();
  return n;
}

bool Corpus::has_link(DocIndex citing, DocIndex cited) const {
  Link key{citing, cited};
  if (!directed && key.citing > key.cited) std::swap(key.citing, key.cited);
  return std::binary_search(links.begin(), links.end(), key);
}

void Corpus::validate() const {
  if (vocab_size <= 0) throw IntegrityError("corpus: vocabulary size must be positive");
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (WordId t : docs[i].tokens) {
      if (t < 0 || t >= vocab_size) {
        throw IntegrityError("corpus: document " + std::to_string(i) + " has word id " +
                             std::to_string(t) + " outside vocabulary of size " +
                             std::to_string(vocab_size));
      }
    }
  }
  const auto n = static_cast<DocIndex>(docs.size());
  for (std::size_t l = 0; l < links.size(); ++l) {
    const Link& link = links[l];
    if (link.citing < 0 || link.citing >= n || link.cited < 0 || link.cited >= n) {
      throw IntegrityError("corpus: link endpoint out of range");
    }
    if (link.citing == link.cited) throw IntegrityError("corpus: self-link");
    if (!directed && link.citing > link.cited) {
      throw IntegrityError("corpus: undirected link not stored as (min, max)");
    }
    if (l > 0 && !(links[l - 1] < link)) {
      throw IntegrityError("corpus: links not sorted or contain duplicates");
    }
  }
}

ContentParseResult parse_content(std::istream& in) {
  ContentParseResult result;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_fields = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (expected_fields == 0) {
      if (fields.size() < 3) {
        throw FormatError("content line needs an id, at least one word column and a label",
                          line_no);
      }
      expected_fields = fields.size();
      result.vocab_size = static_cast<int>(expected_fields - 2);
    } else if (fields.size() != expected_fields) {
      throw FormatError("expected " + std::to_string(expected_fields) + " columns, found " +
                            std::to_string(fields.size()),
                        line_no);
    }
    Document doc;
    doc.external_id = std::string(fields.front());
    doc.label = std::string(fields.back());
    for (std::size_t t = 0; t + 2 < fields.size(); ++t) {
      const auto f = fields[t + 1];
      if (f == "1") {
        doc.tokens.push_back(static_cast<WordId>(t));
      } else if (f != "0") {
        throw FormatError("word indicator must be 0 or 1, found '" + std::string(f) + "'",
                          line_no);
      }
    }
    const auto index = static_cast<DocIndex>(result.docs.size());
    if (!result.id_map.emplace(doc.external_id, index).second) {
      throw FormatError("duplicate document id '" + doc.external_id + "'", line_no);
    }
    result.docs.push_back(std::move(doc));
  }
  return result;
}

CitesParseResult parse_cites(std::istream& in, const IdMap& id_map) {
  CitesParseResult result;
  std::unordered_map<std::uint64_t, bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 2) {
      throw FormatError("cites line must hold exactly two ids, found " +
                            std::to_string(fields.size()),
                        line_no);
    }
    const auto cited = id_map.find(std::string(fields[0]));
    const auto citing = id_map.find(std::string(fields[1]));
    if (cited == id_map.end() || citing == id_map.end()) {
      ++result.skipped_unknown;
      continue;
    }
    if (cited->second == citing->second) {
      ++result.self_links;
      continue;
    }
    if (!seen.emplace(pair_key(citing->second, cited->second), true).second) {
      ++result.duplicates;
      continue;
    }
    result.links.push_back(Link{citing->second, cited->second});
  }
  return result;
}

Corpus assemble_corpus(ContentParseResult content, const CitesParseResult& cites,
                       bool directed, LoadStats* stats) {
  Corpus corpus;
  corpus.docs = std::move(content.docs);
  corpus.vocab_size = content.vocab_size;
  corpus.directed = directed;
  corpus.links = cites.links;
  if (!directed) {
    for (auto& l : corpus.links) {
      if (l.citing > l.cited) std::swap(l.citing, l.cited);
    }
  }
  std::sort(corpus.links.begin(), corpus.links.end());
  const auto before = corpus.links.size();
  corpus.links.erase(std::unique(corpus.links.begin(), corpus.links.end()), corpus.links.end());
  if (stats) {
    stats->skipped_unknown += cites.skipped_unknown;
    stats->duplicates += cites.duplicates;
    stats->self_links += cites.self_links;
    stats->collapsed_reciprocal += before - corpus.links.size();
  }
  corpus.validate();
  return corpus;
}

Corpus load_linqs(std::span<const std::string> content_paths,
                  std::span<const std::string> cites_paths, bool directed, LoadStats* stats) {
  if (content_paths.empty()) throw ArgumentError("no .content file given");
  if (content_paths.size() != cites_paths.size()) {
    throw ArgumentError("need one .cites file per .content file");
  }
  ContentParseResult merged;
  for (const auto& path : content_paths) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open content file '" + path + "'");
    ContentParseResult part;
    try {
      part = parse_content(in);
    } catch (const FormatError& e) {
      throw FormatError(path + ": " + e.what());
    }
    if (merged.vocab_size != 0 && part.vocab_size != merged.vocab_size) {
      throw FormatError(path + ": vocabulary size " + std::to_string(part.vocab_size) +
                        " differs from " + std::to_string(merged.vocab_size));
    }
    merged.vocab_size = part.vocab_size;
    for (auto& doc : part.docs) {
      const auto index = static_cast<DocIndex>(merged.docs.size());
      if (!merged.id_map.emplace(doc.external_id, index).second) {
        throw FormatError(path + ": document id '" + doc.external_id +
                          "' already defined by an earlier file");
      }
      merged.docs.push_back(std::move(doc));
    }
  }
  CitesParseResult all_cites;
  std::unordered_map<std::uint64_t, bool> seen;
  for (const auto& path : cites_paths) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open cites file '" + path + "'");
    CitesParseResult part;
    try {
      part = parse_cites(in, merged.id_map);
    } catch (const FormatError& e) {
      throw FormatError(path + ": " + e.what());
    }
    all_cites.skipped_unknown += part.skipped_unknown;
    all_cites.self_links += part.self_links;
    all_cites.duplicates += part.duplicates;
    for (const auto& l : part.links) {
      if (seen.emplace(pair_key(l.citing, l.cited), true).second) {
        all_cites.links.push_back(l);
      } else {
        ++all_cites.duplicates;
      }
    }
  }
  return assemble_corpus(std::move(merged), all_cites, directed, stats);
}

void write_content(std::ostream& out, const Corpus& corpus) {
  std::vector<char> row(static_cast<std::size_t>(corpus.vocab_size));
  for (const auto& doc : corpus.docs) {
    std::fill(row.begin(), row.end(), '0');
    for (WordId t : doc.tokens) {
      if (row[static_cast<std::size_t>(t)] == '1') {
        throw ArgumentError("write_content: document '" + doc.external_id +
                            "' repeats a word; LINQS content is binary");
      }
      row[static_cast<std::size_t>(t)] = '1';
    }
    out << doc.external_id;
    for (char c : row) out << '\t' << c;
    out << '\t' << doc.label.value_or("none") << '\n';
  }
}

void write_cites(std::ostream& out, const Corpus& corpus) {
  for (const auto& l : corpus.links) {
    out << corpus.docs[static_cast<std::size_t>(l.cited)].external_id << '\t'
        << corpus.docs[static_cast<std::size_t>(l.citing)].external_id << '\n';
  }
}

std::vector<FoldSplit> split_folds(const Corpus& corpus, int n_folds, std::uint64_t seed) {
  const auto n = corpus.num_docs();
  if (n_folds < 2 || static_cast<std::size_t>(n_folds) > n) {
    throw ArgumentError("split_folds: n_folds must be in [2, " + std::to_string(n) +
                        "], got " + std::to_string(n_folds));
  }
  std::vector<DocIndex> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  }
  std::vector<FoldSplit> folds(static_cast<std::size_t>(n_folds));
  const std::size_t base = n / static_cast<std::size_t>(n_folds);
  const std::size_t extra = n % static_cast<std::size_t>(n_folds);
  std::size_t start = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    auto& fold = folds[f];
    fold.fold_index = static_cast<int>(f);
    fold.test_docs.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                          perm.begin() + static_cast<std::ptrdiff_t>(start + len));
    std::sort(fold.test_docs.begin(), fold.test_docs.end());
    start += len;
  }
  for (auto& fold : folds) {
    fold.train_docs.reserve(n - fold.test_docs.size());
    std::size_t t = 0;
    for (DocIndex d = 0; d < static_cast<DocIndex>(n); ++d) {
      if (t < fold.test_docs.size() && fold.test_docs[t] == d) {
        ++t;
      } else {
        fold.train_docs.push_back(d);
      }
    }
  }
  return folds;
}

TrainPairSet build_train_pairs(const Corpus& corpus, std::span<const DocIndex> train_docs,
                               double neg_ratio, double c_pos, double c_neg,
                               std::uint64_t seed) {
  if (!(neg_ratio > 0.0 && neg_ratio <= 1.0)) {
    throw ArgumentError("build_train_pairs: neg_ratio must be in (0, 1]");
  }
  if (!(c_pos > 0.0) || !(c_neg > 0.0)) {
    throw ArgumentError("build_train_pairs: c_pos and c_neg must be positive");
  }
  TrainPairSet out;
  const auto n_docs = static_cast<DocIndex>(corpus.num_docs());
  std::vector<char> in_train(corpus.num_docs(), 0);
  std::vector<DocIndex> members;
  std::size_t empty = 0;
  for (DocIndex d : train_docs) {
    if (d < 0 || d >= n_docs) throw ArgumentError("build_train_pairs: document index out of range");
    if (in_train[static_cast<std::size_t>(d)]) continue;
    if (corpus.docs[static_cast<std::size_t>(d)].tokens.empty()) {
      ++empty;
      continue;
    }
    in_train[static_cast<std::size_t>(d)] = 1;
    members.push_back(d);
  }
  std::sort(members.begin(), members.end());
  if (empty > 0) {
    out.warnings.push_back(std::to_string(empty) +
                           " training document(s) without tokens left out of the pair set");
  }

  // Positive keys in (i, j) order; local indices make enumeration order match.
  std::vector<std::int64_t> local(corpus.num_docs(), -1);
  for (std::size_t a = 0; a < members.size(); ++a) {
    local[static_cast<std::size_t>(members[a])] = static_cast<std::int64_t>(a);
  }
  std::vector<std::uint64_t> positive_keys;
  for (const auto& l : corpus.links) {
    if (in_train[static_cast<std::size_t>(l.citing)] && in_train[static_cast<std::size_t>(l.cited)]) {
      out.pairs.push_back(TrainPair{l.citing, l.cited, 1, c_pos});
      positive_keys.push_back(pair_key(static_cast<DocIndex>(local[static_cast<std::size_t>(l.citing)]),
                                       static_cast<DocIndex>(local[static_cast<std::size_t>(l.cited)])));
    }
  }
  out.num_positive = out.pairs.size();
  std::sort(positive_keys.begin(), positive_keys.end());
  if (out.num_positive == 0) {
    out.warnings.push_back("no positive links inside the training documents");
  }

  const auto m = static_cast<std::uint64_t>(members.size());
  const std::uint64_t ordered = m * (m > 0 ? m - 1 : 0);
  const std::uint64_t all_pairs = corpus.directed ? ordered : ordered / 2;
  const std::uint64_t candidates = all_pairs - positive_keys.size();
  out.negative_candidates = candidates;
  auto wanted = static_cast<std::uint64_t>(std::llround(neg_ratio * static_cast<double>(candidates)));
  wanted = std::min(wanted, candidates);

  // Selection sampling over the candidates in (i, j) order.
  Rng rng(seed);
  std::uint64_t remaining = candidates;
  std::uint64_t needed = wanted;
  std::size_t pos_cursor = 0;
  for (std::uint64_t a = 0; a < m && needed > 0; ++a) {
    const std::uint64_t b_start = corpus.directed ? 0 : a + 1;
    for (std::uint64_t b = b_start; b < m && needed > 0; ++b) {
      if (a == b) continue;
      const auto key = pair_key(static_cast<DocIndex>(a), static_cast<DocIndex>(b));
      while (pos_cursor < positive_keys.size() && positive_keys[pos_cursor] < key) ++pos_cursor;
      if (pos_cursor < positive_keys.size() && positive_keys[pos_cursor] == key) continue;
      if (static_cast<double>(remaining) * rng.uniform() < static_cast<double>(needed)) {
        out.pairs.push_back(TrainPair{members[a], members[b], 0, c_neg});
        --needed;
      }
      --remaining;
    }
  }
  out.num_negative = out.pairs.size() - out.num_positive;
  return out;
}

TrainingSet make_training_set(const Corpus& corpus, std::span<const DocIndex> train_docs,
                              const TrainPairSet& pairs) {
  TrainingSet out;
  std::vector<DocIndex> to_local(corpus.num_docs(), -1);
  out.corpus.vocab_size = corpus.vocab_size;
  out.corpus.directed = corpus.directed;
  for (DocIndex d : train_docs) {
    if (d < 0 || static_cast<std::size_t>(d) >= corpus.num_docs()) {
      throw ArgumentError("make_training_set: document index out of range");
    }
    if (to_local[static_cast<std::size_t>(d)] >= 0) throw ArgumentError("make_training_set: duplicate document");
    to_local[static_cast<std::size_t>(d)] = static_cast<DocIndex>(out.doc_ids.size());
    out.doc_ids.push_back(d);
    out.corpus.docs.push_back(corpus.docs[static_cast<std::size_t>(d)]);
  }
  for (const auto& l : corpus.links) {
    const DocIndex a = to_local[static_cast<std::size_t>(l.citing)];
    const DocIndex b = to_local[static_cast<std::size_t>(l.cited)];
    if (a < 0 || b < 0) continue;
    out.corpus.links.push_back(corpus.directed ? Link{a, b} : Link{std::min(a, b), std::max(a, b)});
  }
  std::sort(out.corpus.links.begin(), out.corpus.links.end());
  out.pairs = pairs;
  for (auto& p : out.pairs.pairs) {
    const DocIndex a = to_local[static_cast<std::size_t>(p.i)];
    const DocIndex b = to_local[static_cast<std::size_t>(p.j)];
    if (a < 0 || b < 0) throw ArgumentError("make_training_set: pair touches a document outside the set");
    p.i = a;
    p.j = b;
  }
  return out;
}

std::uint64_t corpus_fingerprint(const Corpus& corpus) {
  Hasher h;
  h.value(corpus.vocab_size).value(corpus.directed).value(corpus.docs.size());
  for (const auto& d : corpus.docs) {
    h.value(d.tokens.size());
    h.bytes(d.tokens.data(), d.tokens.size() * sizeof(WordId));
  }
  h.value(corpus.links.size());
  for (const auto& l : corpus.links) h.value(l.citing).value(l.cited);
  return h.digest();
}

}  // namespace grtm
