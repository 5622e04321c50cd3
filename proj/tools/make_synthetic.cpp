// Writes a planted-community network as LINQS .content/.cites files.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "grtm/corpus.hpp"
#include "grtm/error.hpp"
#include "grtm/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthetic document network in LINQS format"};
  std::string kind = "two-community", prefix;
  std::uint64_t seed = 1;
  app.add_option("--kind", kind, "two-community, asymmetric, imbalanced or cora-scale")
      ->check(CLI::IsMember({"two-community", "asymmetric", "imbalanced", "cora-scale"}));
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--prefix", prefix, "Writes PREFIX.content and PREFIX.cites")->required();
  CLI11_PARSE(app, argc, argv);

  grtm::SyntheticSpec spec = kind == "two-community" ? grtm::two_community_spec(seed)
                             : kind == "asymmetric"  ? grtm::asymmetric_blocks_spec(seed)
                             : kind == "imbalanced"  ? grtm::imbalanced_spec(seed)
                                                     : grtm::cora_scale_spec(seed);
  spec.binary = true;
  try {
    const auto syn = grtm::generate_synthetic(spec);
    std::ofstream content(prefix + ".content"), cites(prefix + ".cites");
    if (!content || !cites) {
      std::cerr << "cannot write " << prefix << ".content/.cites\n";
      return 2;
    }
    grtm::write_content(content, syn.corpus);
    grtm::write_cites(cites, syn.corpus);
    std::cout << syn.corpus.num_docs() << " docs, V = " << syn.corpus.vocab_size << ", "
              << syn.corpus.links.size() << " links\n";
  } catch (const grtm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
