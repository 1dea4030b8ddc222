// Generates a small synthetic corpus (hex dumps, listings and a manifest)
// for demos, tests and benchmarks.  The corpus is a pure function of its
// parameters: the same seed always produces byte-identical files.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "malfuse/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate a deterministic synthetic corpus"};

  std::string out_dir;
  malfuse::synth::CorpusSpec spec;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--classes", spec.num_classes, "number of classes (2-9)");
  app.add_option("--per-class", spec.labeled_per_class,
                 "labeled samples per class");
  app.add_option("--unlabeled", spec.unlabeled, "unlabeled samples");
  app.add_option("--seed", spec.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto manifest = malfuse::synth::write_corpus(out_dir, spec);
    std::cout << manifest.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
