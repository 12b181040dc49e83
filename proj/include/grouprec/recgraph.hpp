#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grouprec/aggregate.hpp"
#include "grouprec/model.hpp"

namespace grouprec {

enum class NodeKind : std::uint8_t { group, user, item, tag, attribute };

const char* to_string(NodeKind kind);

struct NodeRef {
    NodeKind kind = NodeKind::item;
    std::uint32_t index = 0;
    auto operator<=>(const NodeRef&) const = default;
};

struct NodeBlock {
    NodeKind kind;
    std::size_t offset;
    std::size_t count;
};

/// Heterogeneous weighted digraph. Nodes are laid out in contiguous blocks
/// per kind; arcs are stored in CSR form.
class RecommendationGraph {
public:
    struct Arc {
        std::uint32_t to;
        double weight;
    };

    class Builder {
    public:
        /// Appends a block of `count` nodes of `kind`. Each kind at most once.
        Builder& add_block(NodeKind kind, std::size_t count);
        /// Arc in one direction; parallel arcs are merged by summing weights.
        Builder& add_arc(NodeRef from, NodeRef to, double weight);
        Builder& add_edge(NodeRef a, NodeRef b, double weight) {
            add_arc(a, b, weight);
            return add_arc(b, a, weight);
        }
        Builder& set_w_max(double w_max) {
            w_max_ = w_max;
            return *this;
        }
        RecommendationGraph build() &&;

    private:
        std::size_t global(NodeRef ref) const;

        std::vector<NodeBlock> blocks_;
        std::size_t node_count_ = 0;
        std::vector<std::uint32_t> from_;
        std::vector<Arc> arcs_;
        double w_max_ = 1.0;
        friend class RecommendationGraph;
    };

    std::size_t node_count() const { return node_kind_.size(); }
    std::size_t arc_count() const { return arcs_.size(); }
    double w_max() const { return w_max_; }

    bool has_block(NodeKind kind) const;
    /// Number of nodes of `kind` (0 when the graph has no such block).
    std::size_t count(NodeKind kind) const;
    std::size_t node(NodeRef ref) const;
    NodeRef ref(std::size_t node) const;

    std::span<const Arc> out_arcs(std::size_t node) const {
        return {arcs_.data() + offsets_[node], arcs_.data() + offsets_[node + 1]};
    }
    /// Weight of from -> to, 0 when absent.
    double weight(NodeRef from, NodeRef to) const;

private:
    std::vector<NodeBlock> blocks_;
    std::vector<NodeKind> node_kind_;
    std::vector<std::size_t> offsets_;
    std::vector<Arc> arcs_;
    double w_max_ = 1.0;
};

/// Weight of the group-item edge for an item at 1-based `rank` in a top-k list.
double rank_edge_weight(std::size_t rank, std::size_t k, double w_max);

/// Graph over groups, items and tags. `topk[g]` is the list of group g.
/// Group-item edges follow the rank-weight rule, item-tag and associate edges
/// get weight 1. Sets `empty_cf` when no list contributes an edge.
RecommendationGraph build_graph(std::span<const TopKList> topk, const Catalog& catalog,
                                std::span<const Group> groups, double w_max, bool* empty_cf = nullptr);

/// Column-stochastic transition operator: each node's out-weights normalized
/// to 1. Nodes without out-arcs are flagged dangling.
struct TransitionOperator {
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> targets;
    std::vector<double> probabilities;
    std::vector<bool> dangling;

    std::size_t node_count() const { return dangling.size(); }
    /// out = W * in, ignoring dangling mass. Returns the dangling mass of `in`.
    double apply(std::span<const double> in, std::span<double> out) const;
};

TransitionOperator transition_operator(const RecommendationGraph& g);

struct RankConfig {
    double damping = 0.85;
    double epsilon = 1e-8;
    std::size_t max_iterations = 200;

    void validate() const;
};

struct RankScoreVector {
    std::size_t target = 0;
    std::vector<double> scores;
    std::size_t iterations = 0;
    bool converged = false;
    /// l1 change of the final iteration.
    double last_change = 0.0;
};

/// Personalized PageRank: power iteration on s <- b W s + (1 - b) e_target,
/// started from the uniform vector. Dangling mass returns to the target.
RankScoreVector rank_scores(const TransitionOperator& op, std::size_t target, const RankConfig& config);
RankScoreVector rank_scores(const RecommendationGraph& g, NodeRef target, const RankConfig& config);

/// Item nodes by descending score (ties by item id), minus `exclude`.
std::vector<ItemId> recommend(const RankScoreVector& s, const RecommendationGraph& g,
                              std::span<const ItemId> exclude = {});

/// Drops every item the user has rated; order preserved.
std::vector<ItemId> personalize(std::span<const ItemId> list, std::span<const RatingRecord> user_ratings);

// ---------------------------------------------------------------------------
// Rating prediction

struct Prediction {
    enum class Method { user_based, item_based, group_average, global_mean };

    GroupId group;
    ItemId item;
    double value = 0.0;
    Method method = Method::user_based;
    /// The requested method could not be applied.
    bool fallback = false;
};

/// Rating statistics of one group, from its members' ratings.
struct GroupRatingStats {
    double mean = 0.0;
    std::vector<double> item_sum;
    std::vector<std::uint32_t> item_count;
    std::vector<double> popularity;

    bool rated(ItemId i) const { return item_count[i.index()] > 0; }
    double item_mean(ItemId i) const { return item_sum[i.index()] / item_count[i.index()]; }
};

GroupRatingStats group_rating_stats(std::span<const RatingRecord> group_ratings, std::size_t group_size,
                                    std::size_t item_count);

struct PredictionContext {
    /// Rank scores of the target group, indexed by graph node.
    const RankScoreVector* scores = nullptr;
    const RecommendationGraph* graph = nullptr;
    std::span<const GroupRatingStats> stats;
    double theta_p = 0.01;
    int p_max = 5;
    double global_mean = 3.0;
};

Prediction predict_user_based(const PredictionContext& ctx, GroupId target, ItemId item);
Prediction predict_item_based(const PredictionContext& ctx, GroupId target, ItemId item);

// ---------------------------------------------------------------------------
// Non-private baseline

struct UserProfile {
    std::optional<int> age;
    std::optional<std::string> gender;
    std::optional<std::string> occupation;
    std::string zip;
};

/// Label of the age bucket: "<21", "21-30", "31-40", "41-50", ">50".
std::string age_bucket(int age);

/// Weight of a user-item edge: exp((r - mean) / sqrt(sum of squared
/// deviations)), 1 for users whose ratings are all equal.
std::vector<double> personal_edge_weights(std::span<const RatingRecord> user_ratings);

/// Users, items and profile-attribute values (gender, age bucket,
/// occupation) as nodes. Attribute nodes are omitted when `profiles` is empty.
RecommendationGraph build_personal_graph(std::span<const RatingRecord> ratings, const Catalog& catalog,
                                         std::span<const UserProfile> profiles);

}  // namespace grouprec
