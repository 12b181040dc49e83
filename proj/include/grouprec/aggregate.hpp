#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "grouprec/model.hpp"

namespace grouprec {

/// Number of unordered pairs ordered oppositely by `a` and `b`. Pairs not
/// ordered by both rankings contribute nothing.
std::uint64_t kendall_tau(const PartialRanking& a, const PartialRanking& b);

std::uint64_t kemeny_cost(const PartialRanking& candidate, std::span<const PartialRanking> profiles);

/// Net majority graph of a group: edge x -> y with weight M_xy - M_yx when
/// that difference is positive, where M is the sum of member matrices.
class ComparisonGraph {
public:
    struct Arc {
        ItemId to;
        std::int64_t weight;
    };

    ComparisonGraph() = default;
    explicit ComparisonGraph(std::size_t node_count);

    std::size_t node_count() const { return out_.size(); }
    std::size_t edge_count() const { return edge_count_; }
    std::span<const Arc> out_arcs(ItemId x) const { return out_[x.index()]; }
    /// Weight of x -> y, 0 when absent.
    std::int64_t weight(ItemId x, ItemId y) const;

    /// Adds x -> y; weight must be positive and the reverse edge absent.
    void add_edge(ItemId x, ItemId y, std::int64_t weight);
    /// Sorts every adjacency list by target id.
    void finalize();

    ComparisonGraph transpose() const;

private:
    std::vector<std::vector<Arc>> out_;
    std::size_t edge_count_ = 0;
};

ComparisonGraph build_comparison_graph(std::span<const PairwiseComparisonMatrix> matrices);

/// Per-item out-weight totals sum_y M_xy of the summed group matrix. This is
/// the Borda score available from mixed pairwise data.
std::vector<double> pairwise_win_totals(std::span<const PairwiseComparisonMatrix> matrices);

/// Fraction of the group's members who rated `item`.
double popularity(ItemId item, std::span<const RatingRecord> group_ratings, std::size_t group_size);

/// popularity() for every item in [0, item_count).
std::vector<double> popularity_table(std::span<const RatingRecord> group_ratings, std::size_t group_size,
                                     std::size_t item_count);

struct AggregationConfig;

/// Fallback ranking used when the SCC structure is too coarse for exact
/// Kemeny. Receives the eligible items and must return a ranking of them.
using KemenyHeuristic = std::function<PartialRanking(const ComparisonGraph& graph,
                                                     std::span<const ItemId> eligible,
                                                     std::span<const double> scores,
                                                     std::span<const double> popularity)>;

struct AggregationConfig {
    std::size_t k = 500;
    std::size_t theta_scc = 20;
    double theta_p = 0.01;
    /// Empty means Borda.
    KemenyHeuristic heuristic;

    /// Throws ConfigError unless k >= 1, 1 <= theta_scc <= min(20, item_count)
    /// and theta_p is in [0, 1]. Pass 0 to skip the item_count check.
    void validate(std::size_t item_count = 0) const;
};

struct SccExtraction {
    /// Popped components in forward topological order of the comparison graph,
    /// each already stripped of items below the popularity threshold.
    std::vector<std::vector<ItemId>> components;
    std::size_t popped = 0;
    std::size_t beta_max = 0;
    /// Node visits plus arc inspections; bounded by |V| + |E|.
    std::size_t work = 0;
};

/// Tarjan's SCC on the transpose graph, stopping once `k` eligible items have
/// been popped.
SccExtraction tarjan_topk(const ComparisonGraph& graph, const AggregationConfig& config,
                          std::span<const double> popularity);

inline constexpr std::size_t kExactKemenyCap = 20;

/// Ordering of `items` minimizing the total weight of back arcs (weighted
/// minimum feedback arc set) by subset dynamic programming. Among optimal
/// orders returns the lexicographically smallest by item id.
PartialRanking exact_kemeny(const ComparisonGraph& graph, std::span<const ItemId> items);

/// Weight of arcs among `ranking` that point backwards.
std::int64_t feedback_weight(const ComparisonGraph& graph, const PartialRanking& ranking);

/// Descending score; ties by descending popularity, then ascending id.
PartialRanking borda(std::span<const ItemId> candidates, std::span<const double> scores,
                     std::span<const double> popularity);

/// Per-item rating sums; the Borda score when raw ratings are at hand.
std::vector<double> rating_sums(std::span<const RatingRecord> ratings, std::size_t item_count);

struct TopKList {
    enum class Method { exact, heuristic };

    std::size_t k = 0;
    std::vector<ItemId> items;
    /// Borda score of each listed item.
    std::vector<double> scores;
    Method method = Method::exact;
    /// Fewer than k eligible items existed.
    bool short_list = false;

    /// 1-based rank of `item`, or k + 1 when absent.
    std::size_t rank_of(ItemId item) const;
};

/// Full intra-group aggregation. `borda_scores` defaults to pairwise win
/// totals when empty.
TopKList aggregate_topk(std::span<const PairwiseComparisonMatrix> matrices,
                        std::span<const double> popularity, const AggregationConfig& config,
                        std::span<const double> borda_scores = {});

/// Same, from an already built graph.
TopKList aggregate_topk(const ComparisonGraph& graph, std::span<const double> popularity,
                        const AggregationConfig& config, std::span<const double> borda_scores);

}  // namespace grouprec
