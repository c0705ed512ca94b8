#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "treebench/baselines.hpp"
#include "treebench/forest.hpp"
#include "treebench/shap.hpp"
#include "treebench/tree.hpp"

namespace treebench {

using Json = nlohmann::ordered_json;

Json feature_to_json(const FeatureSpec& spec);
FeatureSpec feature_from_json(const Json& j);

/// Features, target spec and schema hash.
Json schema_to_json(const std::vector<FeatureSpec>& schema, const FeatureSpec& target_spec);
std::vector<FeatureSpec> schema_from_json(const Json& j, FeatureSpec* target_spec = nullptr);

Json tree_to_json(const DecisionTree& tree);
/// Rejects documents whose stored schema hash does not match their schema.
DecisionTree tree_from_json(const Json& j);

Json forest_to_json(const Forest& forest);
Forest forest_from_json(const Json& j);

Json trace_to_json(const EliminationTrace& trace);
EliminationTrace trace_from_json(const Json& j);

/// Any trained classifier: family, schema hash and fitted parameters.
Json model_to_json(const Classifier& model);

/// Coded table as CSV (features then target) plus a "<stem>.schema.json" sidecar.
void write_coded_table(const std::filesystem::path& csv, const CategoricalTable& table);
CategoricalTable read_coded_table(const std::filesystem::path& csv);
std::filesystem::path schema_sidecar(const std::filesystem::path& csv);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace treebench
