#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grouprec/aggregate.hpp"
#include "grouprec/data.hpp"
#include "grouprec/recgraph.hpp"

namespace grouprec {

struct PercentileScore {
    /// Mean of position / list length over test items; nullopt without test items.
    std::optional<double> value;
    /// Test items found in the list.
    std::size_t found = 0;
    /// Test items absent from the list, each scored 1.0.
    std::size_t missing = 0;
};

PercentileScore percentile_score(std::span<const ItemId> list, std::span<const ItemId> test_items);

/// Fraction of test items among the first k entries; nullopt for an empty test set.
std::optional<double> recall_at_k(std::span<const ItemId> list, std::span<const ItemId> test_items, std::size_t k);

enum class EvalMethod { group_private, personal_baseline };

const char* to_string(EvalMethod method);

struct ExperimentConfig {
    EvalMethod method = EvalMethod::group_private;
    GroupingStrategy strategy = ByOccupation{};
    /// Run padding, exchange and cleanup before aggregation.
    bool private_stages = true;
    double t_threshold = 1.0;
    std::uint64_t exchange_seed = 1;
    std::uint64_t padding_seed = 2;
    AggregationConfig aggregation;
    RankConfig rank;
    double w_max = 1.0;
    std::size_t list_length = 900;
    std::vector<std::size_t> recall_ks = {5, 10, 15, 20, 25, 30, 35, 40, 45, 50};
    /// Run folds on separate threads.
    bool parallel_folds = false;

    void validate() const;
};

struct FoldResult {
    std::size_t fold = 0;
    std::optional<double> percentile;
    std::map<std::size_t, double> recall;
    /// Users with at least one test item.
    std::size_t users = 0;
    std::size_t test_items = 0;
    std::size_t missing = 0;
    /// Test users whose list came out empty and were left out.
    std::size_t skipped_users = 0;
};

struct EvalReport {
    std::string method;
    std::string strategy;
    std::size_t list_length = 0;
    std::vector<FoldResult> folds;
    /// Means over folds with a defined value.
    std::optional<double> mean_percentile;
    std::map<std::size_t, double> recall;
    double runtime_seconds = 0.0;
};

/// Pad, exchange, cleanup and aggregation for every group, using only the
/// ratings at `rating_indices`. `stream` separates the seeds of independent
/// runs (the fold index in experiments).
std::vector<TopKList> private_topk_lists(const DatasetBundle& bundle, std::span<const Group> groups,
                                         std::span<const std::size_t> rating_indices,
                                         const ExperimentConfig& config, std::uint64_t stream);

/// Cross-validated evaluation. Within a fold, percentile and recall are pooled
/// over every (user, test item) pair.
EvalReport run_experiment(const DatasetBundle& bundle, const ExperimentConfig& config, const SplitPlan& plan);

/// Everything except runtime is deterministic for a fixed configuration.
std::string report_json(const EvalReport& report, bool include_runtime = true);
/// method,fold,metric,k,value rows; fold "mean" holds the averages.
std::string report_csv(const EvalReport& report);

/// Fixed-precision decimal rendering used by every report writer.
std::string format_real(double value);

}  // namespace grouprec
