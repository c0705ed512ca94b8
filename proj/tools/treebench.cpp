#include <iostream>

#include <CLI11.hpp>

#include "treebench/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kCompute = 1, kUsage = 2 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-tree and model-comparison toolkit for categorical crash data"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;

  using Command = treebench::CommandResult (*)(const treebench::PipelineContext&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"ingest", "Filter and recode raw records into a coded table", &treebench::cmd_ingest},
      {"select-features", "Backward elimination by forest SHAP importance", &treebench::cmd_select_features},
      {"compare", "Cross-validated leaderboard of the model roster", &treebench::cmd_compare},
      {"explain", "SHAP attributions from the selected-feature forest", &treebench::cmd_explain},
      {"synth", "Write a synthetic input set", &treebench::cmd_synth},
  };
  std::vector<CLI::App*> subs;
  std::vector<CLI::Option*> out_opts;
  std::vector<CLI::Option*> seed_opts;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Key/value config file")->required()->check(CLI::ExistingFile);
    out_opts.push_back(sub->add_option("--out", out_dir, "Output directory (overrides `out`)"));
    seed_opts.push_back(sub->add_option("--seed", seed, "Master seed (overrides `seed`)"));
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      std::optional<std::filesystem::path> out;
      std::optional<std::uint64_t> s;
      if (out_opts[i]->count()) out = out_dir;
      if (seed_opts[i]->count()) s = seed;
      const auto ctx = treebench::make_context(config_path, out, s);
      const auto result = std::get<2>(commands[i])(ctx);
      std::cout << result.summary << '\n';
      for (const auto& f : result.files) std::cout << "  wrote " << f.string() << '\n';
      return kOk;
    } catch (const treebench::UsageError& e) {
      std::cerr << "treebench: " << e.what() << '\n';
      return kUsage;
    } catch (const treebench::DataError& e) {
      std::cerr << "treebench: " << e.what() << '\n';
      return kUsage;
    } catch (const std::exception& e) {
      std::cerr << "treebench: " << e.what() << '\n';
      return kCompute;
    }
  }
  return kUsage;
}
