// Command-line driver for the feature-fusion pipeline.
//
// Every subcommand reads one INI config (--config); any key can be
// overridden on the command line with repeatable --set section.key=value.
// Exit codes: 0 success, 1 usage or config error, 2 data error,
// 3 partial success (some samples were skipped).

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "malfuse/errors.hpp"
#include "malfuse/pipeline.hpp"

namespace {

std::string trimmed(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"malfuse: fused static features and boosted trees for "
               "malware-family classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "malfuse 1.0.0");

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "pipeline config file (INI)")
      ->required();
  app.add_option("--set", overrides,
                 "override one config key: section.key=value (repeatable)");

  CLI::App* sc_extract = app.add_subcommand(
      "extract", "compute hand-crafted features for every manifest sample");

  std::string arch;
  CLI::App* sc_cnn = app.add_subcommand(
      "train-cnn", "train a CNN extractor and merge its features");
  sc_cnn->add_option("--arch", arch, "CNN feature category to train")
      ->required()
      ->check(CLI::IsMember(malfuse::deep_categories()));

  std::string preset = "final";
  std::vector<std::string> categories;
  std::string tag;
  auto add_catset = [&](CLI::App* sc) {
    sc->add_option("--preset", preset, "named category bundle")
        ->check(CLI::IsMember(malfuse::preset_names()));
    sc->add_option("--categories", categories,
                   "explicit category list (overrides --preset)")
        ->delimiter(',');
    sc->add_option("--tag", tag, "output artifact name (default: the preset)");
  };
  CLI::App* sc_gbt = app.add_subcommand(
      "train-gbt", "train a boosted-tree model on stored features");
  add_catset(sc_gbt);
  CLI::App* sc_eval = app.add_subcommand(
      "evaluate", "stratified k-fold cross-validation of a boosted-tree model");
  add_catset(sc_eval);

  std::string method = "chi2";
  CLI::App* sc_select = app.add_subcommand(
      "select", "univariate feature scores plus a top-k validation sweep");
  sc_select->add_option("--method", method, "scoring statistic")
      ->check(CLI::IsMember({"chi2", "anova_f", "mutual_info"}));
  sc_select
      ->add_option("--categories", categories,
                   "categories to score (default: all in the store)")
      ->delimiter(',');

  CLI::App* sc_step = app.add_subcommand(
      "stepwise", "greedy forward selection over feature categories");
  sc_step
      ->add_option("--categories", categories,
                   "candidate categories (default: all in the store)")
      ->delimiter(',');

  std::string model_path;
  std::string out_path;
  CLI::App* sc_predict = app.add_subcommand(
      "predict", "write class probabilities for every store row");
  sc_predict->add_option("--model", model_path, "trained model (.mfgb)")
      ->required();
  sc_predict->add_option("--out", out_path, "output CSV path")->required();

  std::string kind = "gain";
  bool by_category = false;
  CLI::App* sc_import = app.add_subcommand(
      "importance", "split and gain importances of a trained model");
  sc_import->add_option("--model", model_path, "trained model (.mfgb)")
      ->required();
  sc_import->add_option("--kind", kind, "sort order")
      ->check(CLI::IsMember({"weight", "gain"}));
  sc_import->add_flag("--by-category", by_category,
                      "aggregate importances per feature category");
  sc_import->add_option("--out", out_path, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  malfuse::PipelineConfig cfg;
  try {
    cfg = malfuse::PipelineConfig::load(config_path);
    for (const auto& kv : overrides) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) {
        std::cerr << "config error: --set expects section.key=value, got '"
                  << kv << "'\n";
        return 1;
      }
      cfg.set(trimmed(kv.substr(0, eq)), trimmed(kv.substr(eq + 1)));
    }
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }

  std::ostream& log = std::cout;
  try {
    if (sc_extract->parsed()) {
      const malfuse::ExtractStats stats = malfuse::run_extract(cfg, log);
      if (!stats.skipped.empty()) {
        std::cerr << "warning: skipped " << stats.skipped.size() << " of "
                  << stats.total << " samples\n";
        return 3;
      }
      return 0;
    }
    if (sc_cnn->parsed()) {
      malfuse::run_train_cnn(cfg, arch, log);
      return 0;
    }

    // An explicit --categories list wins over --preset; select/stepwise have
    // no preset and default to everything in the store.
    const bool has_preset = sc_gbt->parsed() || sc_eval->parsed();
    const std::vector<std::string> cats =
        (categories.empty() && has_preset) ? malfuse::preset_categories(preset)
                                           : categories;
    const std::string out_tag =
        !tag.empty() ? tag : (categories.empty() ? preset : "custom");

    if (sc_gbt->parsed()) {
      malfuse::run_train_gbt(cfg, out_tag, cats, log);
      return 0;
    }
    if (sc_eval->parsed()) {
      malfuse::run_evaluate(cfg, out_tag, cats, log);
      return 0;
    }
    if (sc_select->parsed()) {
      malfuse::ScoreMethod m = malfuse::ScoreMethod::kChi2;
      if (method == "anova_f") m = malfuse::ScoreMethod::kAnovaF;
      if (method == "mutual_info") m = malfuse::ScoreMethod::kMutualInfo;
      malfuse::run_select(cfg, m, cats, log);
      return 0;
    }
    if (sc_step->parsed()) {
      malfuse::run_stepwise(cfg, cats, log);
      return 0;
    }
    if (sc_predict->parsed()) {
      malfuse::run_predict(cfg, model_path, out_path, log);
      return 0;
    }
    if (sc_import->parsed()) {
      const malfuse::ImportanceKind k = kind == "weight"
                                            ? malfuse::ImportanceKind::kWeight
                                            : malfuse::ImportanceKind::kGain;
      malfuse::run_importance(cfg, model_path, k, by_category, out_path, log);
      return 0;
    }
    std::cerr << "error: no subcommand given\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
