#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "clr/types.hpp"

namespace clr {

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const;  // throws MissingColumn
};

// RFC-4180-ish: quoted fields, embedded commas, CRLF tolerated
RawTable read_csv_table(const std::string& path);

struct RecipeStep {
    enum class Kind { drop, one_hot, bin, scale };
    Kind kind = Kind::scale;
    std::string column;
    double lo = 0.0;   // bin only
    double hi = 1.0;   // bin only
    int n_bins = 0;    // bin only
};

struct PreprocessRecipe {
    std::string name = "generic";
    std::vector<RecipeStep> steps;
    std::string target_column = "target";
    std::string constraint_column;  // empty means no constraint ids
};

// boston, abalone, auto_mpg, generic
PreprocessRecipe builtin_recipe(const std::string& name);

// min/max scaling to [-1, 1]; constant columns map to 0
struct Scaler {
    Vecd lo, hi;
    Matd apply(const Matd& X) const;
};
Scaler fit_scaler(const Matd& X);

struct LoadedData {
    Dataset data;  // structural steps applied, NOT scaled
    std::vector<std::string> feature_names;
    PreprocessRecipe recipe;
    bool wants_scaling = false;
    bool has_target = true;
    int n_dropped = 0;  // rows removed over missing cells
};

// applies drop / one_hot / bin and extracts target + constraint ids;
// scaling is left to the caller so CV folds can fit it on training rows only.
// With require_target=false a file without the target column loads with y=0
// (prediction-time input).
LoadedData load_table(const std::string& path, const PreprocessRecipe& recipe,
                      bool require_target = true);

// load_table plus scaling fitted on the full file; for single-split use
Dataset load_csv(const std::string& path, const PreprocessRecipe& recipe);

nlohmann::json recipe_to_json(const PreprocessRecipe& recipe);
PreprocessRecipe recipe_from_json(const nlohmann::json& j);
nlohmann::json scaler_to_json(const Scaler& s);
Scaler scaler_from_json(const nlohmann::json& j);

struct SyntheticSpec {
    enum class Scenario { planted_lines, indistinguishable_pair, grouped_mixture };
    Scenario scenario = Scenario::planted_lines;
    int n = 300;
    int d = 2;
    int k = 3;
    double noise_sd = 0.0;
    int groups_per_cluster = 4;  // grouped_mixture only
    std::uint64_t seed = 0;
};

SyntheticSpec::Scenario scenario_from_string(const std::string& s);
std::string to_string(SyntheticSpec::Scenario s);

struct SyntheticData {
    Dataset data;
    Partition truth;
    std::vector<LinearModel> models;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// columns x0..x{d-1}, target and, when present, group; round-trips through
// the generic recipe
void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace clr
