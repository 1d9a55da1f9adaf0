// Writes the synthetic keyword corpus (utterances.jsonl, annotations.jsonl).
#include <iostream>

#include <CLI11.hpp>

#include "care/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"care-synth: write the synthetic keyword corpus"};
  std::string dir = "synthetic";
  std::size_t sessions = 10, exchanges = 6;
  std::uint64_t seed = 7;
  app.add_option("dir", dir, "output directory");
  app.add_option("--sessions", sessions);
  app.add_option("--exchanges", exchanges);
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);
  care::write_synthetic_corpus(care::make_keyword_corpus(sessions, exchanges, seed), dir);
  std::cout << dir << "\n";
  return 0;
}
