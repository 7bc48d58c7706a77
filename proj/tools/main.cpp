#include <CLI11.hpp>
#include <iostream>

#include "hsissl/error.hpp"
#include "hsissl_cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Barlow-Twins pre-training and few-shot classification for hyperspectral scenes"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;

  using Command = void (*)(const hsissl::cli::RunConfig&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands{
      {"synth", "Generate a synthetic labeled scene", hsissl::cli::cmd_synth},
      {"pretrain", "Barlow-Twins pre-training of an encoder", hsissl::cli::cmd_pretrain},
      {"classify", "Few-shot classification grid over shots x seeds x protocols",
       hsissl::cli::cmd_classify},
      {"ablate", "Augmentation-pair ablation matrix", hsissl::cli::cmd_ablate},
      {"eval", "Evaluate a classifier checkpoint and export a prediction map",
       hsissl::cli::cmd_eval},
  };
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--set", overrides, "Override a config value, e.g. pretrain.epochs=30")
        ->take_all();
    sub->add_option("--out", out, "Output directory")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    auto document = hsissl::cli::load_config_document(config_path, overrides);
    document["out"] = out;
    const auto config = hsissl::cli::RunConfig::from_json(document);
    for (const auto& [name, help, fn] : commands) {
      if (app.got_subcommand(name)) fn(config, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hsissl::exit_code_for(e);
  }
  return 0;
}
