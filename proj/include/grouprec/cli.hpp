#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grouprec/aggregate.hpp"
#include "grouprec/data.hpp"
#include "grouprec/eval.hpp"
#include "grouprec/recgraph.hpp"

namespace grouprec {

struct DatasetSpec {
    /// movielens (directory), generic (schema JSON file) or snapshot (JSON file).
    std::string format = "movielens";
    std::filesystem::path path;
};

struct GroupingSpec {
    /// gender, age, occupation, random or explicit.
    std::string strategy = "occupation";
    std::size_t count = 2;
    std::uint64_t seed = 0;
};

struct ExchangeSpec {
    double t_threshold = 1.0;
    std::uint64_t seed = 1;
    std::uint64_t padding_seed = 2;
    /// Group label used by simulate-exchange; first group when empty.
    std::string group;
};

struct AnonymitySpec {
    std::size_t group_size = 10;
    std::size_t item_count = 5;
    std::uint64_t t_max = 5000;
    std::uint64_t step = 1;
    std::size_t origin = 0;
};

struct EvalSpec {
    /// group_private or personal_baseline.
    std::string method = "group_private";
    std::size_t folds = 5;
    std::uint64_t split_seed = 42;
    std::size_t list_length = 900;
    std::vector<std::size_t> recall_ks = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
    bool parallel_folds = false;
};

struct RunConfig {
    DatasetSpec dataset;
    GroupingSpec grouping;
    ExchangeSpec exchange;
    AggregationConfig aggregation;
    RankConfig rank;
    double w_max = 1.0;
    AnonymitySpec anonymity;
    EvalSpec eval;
    std::filesystem::path output_dir = "out";

    GroupingStrategy strategy() const;
    ExperimentConfig experiment() const;
};

/// Parses a JSON config. Missing keys take defaults; unknown keys raise
/// ConfigError. Relative paths resolve against `base`.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Applies `key=value` overrides with dotted keys, e.g. "aggregation.theta_p=0.05".
void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments);

/// Range checks, named after the offending parameter. With `needs_dataset`
/// the dataset path must exist.
void validate_config(const RunConfig& config, bool needs_dataset);

/// Canonical JSON form, as recorded in manifests.
std::string config_json(const RunConfig& config);

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names = {"simulate-exchange", "anonymity-report", "aggregate",
                                                   "build-graph",       "recommend",        "evaluate"};
    return names;
}

/// Runs `command`, writing artifacts and manifest.json into the output
/// directory. Failures leave error.json there and on `err`. Returns the exit
/// status: 0 success, 1 runtime failure, 2 usage or configuration error.
int dispatch(const std::string& command, const RunConfig& config, std::ostream& err);

}  // namespace grouprec
