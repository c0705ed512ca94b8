#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "treebench/config.hpp"
#include "treebench/eval.hpp"

namespace treebench {

/// Resolved run settings: config values plus command-line overrides.
struct PipelineContext {
  Config config;
  std::filesystem::path out;
  std::uint64_t seed = 0;
};

/// --out and --seed override the config's `out` and `seed`; both must end up set.
PipelineContext make_context(Config config, std::optional<std::filesystem::path> out = std::nullopt,
                             std::optional<std::uint64_t> seed = std::nullopt);
PipelineContext make_context(const std::filesystem::path& config_path,
                             std::optional<std::filesystem::path> out = std::nullopt,
                             std::optional<std::uint64_t> seed = std::nullopt);

struct CommandResult {
  std::vector<std::filesystem::path> files;  // written, in order
  std::string summary;                       // one-paragraph human summary
};

CommandResult cmd_ingest(const PipelineContext& ctx);
CommandResult cmd_select_features(const PipelineContext& ctx);
CommandResult cmd_compare(const PipelineContext& ctx);
CommandResult cmd_explain(const PipelineContext& ctx);
/// Writes a synthetic input set (raw CRSS-style records plus rules, or a coded table).
CommandResult cmd_synth(const PipelineContext& ctx);

/// Roster parsed from `roster`, `model.<family>.<param>` and `search.<family>.<param>` keys.
std::vector<RosterEntry> roster_from_config(const Config& config);

/// "all", or comma/space separated indices and inclusive ranges "a-b".
std::vector<Eigen::Index> parse_row_selector(const std::string& text, Eigen::Index rows);

}  // namespace treebench
