#include "grouprec/recgraph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "grouprec/error.hpp"

namespace grouprec {

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::group: return "group";
        case NodeKind::user: return "user";
        case NodeKind::item: return "item";
        case NodeKind::tag: return "tag";
        case NodeKind::attribute: return "attribute";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

RecommendationGraph::Builder& RecommendationGraph::Builder::add_block(NodeKind kind, std::size_t count) {
    for (const auto& b : blocks_) {
        if (b.kind == kind) throw DomainError(std::string("duplicate node block: ") + to_string(kind));
    }
    blocks_.push_back({kind, node_count_, count});
    node_count_ += count;
    return *this;
}

std::size_t RecommendationGraph::Builder::global(NodeRef ref) const {
    for (const auto& b : blocks_) {
        if (b.kind != ref.kind) continue;
        if (ref.index >= b.count) break;
        return b.offset + ref.index;
    }
    throw DomainError(std::string("unknown ") + to_string(ref.kind) + " node " + std::to_string(ref.index));
}

RecommendationGraph::Builder& RecommendationGraph::Builder::add_arc(NodeRef from, NodeRef to, double weight) {
    if (!(weight > 0.0) || !std::isfinite(weight)) throw DomainError("arc weights must be positive and finite");
    const std::size_t a = global(from);
    const std::size_t b = global(to);
    if (a == b) throw DomainError("self-loops are not allowed");
    from_.push_back(static_cast<std::uint32_t>(a));
    arcs_.push_back({static_cast<std::uint32_t>(b), weight});
    return *this;
}

RecommendationGraph RecommendationGraph::Builder::build() && {
    std::vector<std::size_t> order(arcs_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (from_[l] != from_[r]) return from_[l] < from_[r];
        return arcs_[l].to < arcs_[r].to;
    });

    RecommendationGraph g;
    g.blocks_ = blocks_;
    g.w_max_ = w_max_;
    g.node_kind_.resize(node_count_);
    for (const auto& b : blocks_) {
        std::fill_n(g.node_kind_.begin() + static_cast<std::ptrdiff_t>(b.offset), b.count, b.kind);
    }
    g.offsets_.assign(node_count_ + 1, 0);
    g.arcs_.reserve(arcs_.size());
    std::size_t prev_from = node_count_;
    for (std::size_t idx : order) {
        const std::uint32_t f = from_[idx];
        const Arc arc = arcs_[idx];
        if (f == prev_from && !g.arcs_.empty() && g.arcs_.back().to == arc.to) {
            g.arcs_.back().weight += arc.weight;
            continue;
        }
        g.arcs_.push_back(arc);
        ++g.offsets_[f + 1];
        prev_from = f;
    }
    std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
    return g;
}

bool RecommendationGraph::has_block(NodeKind kind) const {
    return std::any_of(blocks_.begin(), blocks_.end(), [&](const NodeBlock& b) { return b.kind == kind; });
}

std::size_t RecommendationGraph::count(NodeKind kind) const {
    for (const auto& b : blocks_) {
        if (b.kind == kind) return b.count;
    }
    return 0;
}

std::size_t RecommendationGraph::node(NodeRef ref) const {
    for (const auto& b : blocks_) {
        if (b.kind == ref.kind && ref.index < b.count) return b.offset + ref.index;
    }
    throw DomainError(std::string("unknown ") + to_string(ref.kind) + " node " + std::to_string(ref.index));
}

NodeRef RecommendationGraph::ref(std::size_t node) const {
    for (const auto& b : blocks_) {
        if (node >= b.offset && node < b.offset + b.count) {
            return {b.kind, static_cast<std::uint32_t>(node - b.offset)};
        }
    }
    throw DomainError("node " + std::to_string(node) + " out of range");
}

double RecommendationGraph::weight(NodeRef from, NodeRef to) const {
    const auto arcs = out_arcs(node(from));
    const auto target = static_cast<std::uint32_t>(node(to));
    const auto it = std::lower_bound(arcs.begin(), arcs.end(), target,
                                     [](const Arc& a, std::uint32_t t) { return a.to < t; });
    return (it != arcs.end() && it->to == target) ? it->weight : 0.0;
}

// ---------------------------------------------------------------------------

double rank_edge_weight(std::size_t rank, std::size_t k, double w_max) {
    if (k == 0 || rank == 0 || rank > k) return 0.0;
    return static_cast<double>(k + 1 - rank) / static_cast<double>(k) * w_max;
}

RecommendationGraph build_graph(std::span<const TopKList> topk, const Catalog& catalog,
                                std::span<const Group> groups, double w_max, bool* empty_cf) {
    if (topk.size() != groups.size()) throw DomainError("need exactly one top-k list per group");
    if (!(w_max > 0.0)) throw DomainError("w_max must be positive");
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].id.index() != g) throw DomainError("group ids must be dense and in order");
    }
    const std::size_t n = catalog.item_count();

    RecommendationGraph::Builder builder;
    builder.set_w_max(w_max)
        .add_block(NodeKind::group, groups.size())
        .add_block(NodeKind::item, n)
        .add_block(NodeKind::tag, catalog.tag_count());

    bool any_cf = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& list = topk[g];
        for (std::size_t r = 0; r < list.items.size(); ++r) {
            const ItemId item = list.items[r];
            if (item.index() >= n) throw DomainError("top-k list references an unknown item");
            const double w = rank_edge_weight(r + 1, list.k, w_max);
            if (w <= 0.0) continue;
            builder.add_edge({NodeKind::group, static_cast<std::uint32_t>(g)},
                             {NodeKind::item, item.value}, w);
            any_cf = true;
        }
        for (GroupId a : groups[g].associates) {
            builder.add_arc({NodeKind::group, static_cast<std::uint32_t>(g)}, {NodeKind::group, a.value}, 1.0);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (TagId t : catalog.item_tags[i]) {
            builder.add_edge({NodeKind::item, static_cast<std::uint32_t>(i)}, {NodeKind::tag, t.value}, 1.0);
        }
    }
    if (empty_cf) *empty_cf = !any_cf;
    return std::move(builder).build();
}

// ---------------------------------------------------------------------------

double TransitionOperator::apply(std::span<const double> in, std::span<double> out) const {
    double dangling_mass = 0.0;
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t v = node_count();
    for (std::size_t i = 0; i < v; ++i) {
        const double mass = in[i];
        if (dangling[i]) {
            dangling_mass += mass;
            continue;
        }
        if (mass == 0.0) continue;
        for (std::size_t a = offsets[i]; a < offsets[i + 1]; ++a) out[targets[a]] += probabilities[a] * mass;
    }
    return dangling_mass;
}

TransitionOperator transition_operator(const RecommendationGraph& g) {
    TransitionOperator op;
    const std::size_t v = g.node_count();
    op.offsets.assign(v + 1, 0);
    op.dangling.assign(v, false);
    op.targets.reserve(g.arc_count());
    op.probabilities.reserve(g.arc_count());
    for (std::size_t i = 0; i < v; ++i) {
        const auto arcs = g.out_arcs(i);
        double total = 0.0;
        for (const auto& a : arcs) total += a.weight;
        if (arcs.empty() || !(total > 0.0)) {
            op.dangling[i] = true;
        } else {
            for (const auto& a : arcs) {
                op.targets.push_back(a.to);
                op.probabilities.push_back(a.weight / total);
            }
        }
        op.offsets[i + 1] = op.targets.size();
    }
    return op;
}

void RankConfig::validate() const {
    if (!(damping > 0.0 && damping < 1.0)) throw ConfigError("rank.damping must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("rank.epsilon must be positive");
    if (max_iterations < 1) throw ConfigError("rank.max_iterations must be >= 1");
}

RankScoreVector rank_scores(const TransitionOperator& op, std::size_t target, const RankConfig& config) {
    config.validate();
    const std::size_t v = op.node_count();
    if (target >= v) throw DomainError("target node " + std::to_string(target) + " out of range");

    RankScoreVector result;
    result.target = target;
    std::vector<double> s(v, 1.0 / static_cast<double>(v));
    std::vector<double> next(v, 0.0);
    const double beta = config.damping;
    for (std::size_t it = 1; it <= config.max_iterations; ++it) {
        const double dangling_mass = op.apply(s, next);
        double change = 0.0;
        for (std::size_t i = 0; i < v; ++i) next[i] *= beta;
        next[target] += beta * dangling_mass + (1.0 - beta);
        for (std::size_t i = 0; i < v; ++i) change += std::abs(next[i] - s[i]);
        s.swap(next);
        result.iterations = it;
        result.last_change = change;
        if (change < config.epsilon) {
            result.converged = true;
            break;
        }
    }
    result.scores = std::move(s);
    return result;
}

RankScoreVector rank_scores(const RecommendationGraph& g, NodeRef target, const RankConfig& config) {
    return rank_scores(transition_operator(g), g.node(target), config);
}

std::vector<ItemId> recommend(const RankScoreVector& s, const RecommendationGraph& g,
                              std::span<const ItemId> exclude) {
    const std::size_t n = g.count(NodeKind::item);
    if (n == 0) return {};
    const std::size_t offset = g.node({NodeKind::item, 0});
    std::vector<bool> excluded(n, false);
    for (ItemId i : exclude) {
        if (i.index() < n) excluded[i.index()] = true;
    }
    std::vector<ItemId> items;
    items.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!excluded[i]) items.push_back(ItemId(i));
    }
    std::sort(items.begin(), items.end(), [&](ItemId a, ItemId b) {
        const double sa = s.scores[offset + a.index()];
        const double sb = s.scores[offset + b.index()];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    return items;
}

std::vector<ItemId> personalize(std::span<const ItemId> list, std::span<const RatingRecord> user_ratings) {
    std::vector<ItemId> rated;
    rated.reserve(user_ratings.size());
    for (const auto& r : user_ratings) rated.push_back(r.item);
    std::sort(rated.begin(), rated.end());
    std::vector<ItemId> out;
    out.reserve(list.size());
    for (ItemId i : list) {
        if (!std::binary_search(rated.begin(), rated.end(), i)) out.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------------------

GroupRatingStats group_rating_stats(std::span<const RatingRecord> group_ratings, std::size_t group_size,
                                    std::size_t item_count) {
    if (group_size == 0) throw DomainError("rating stats of an empty group");
    GroupRatingStats stats;
    stats.item_sum.assign(item_count, 0.0);
    stats.item_count.assign(item_count, 0);
    double total = 0.0;
    for (const auto& r : group_ratings) {
        stats.item_sum.at(r.item.index()) += r.rating;
        ++stats.item_count[r.item.index()];
        total += r.rating;
    }
    stats.mean = group_ratings.empty() ? 0.0 : total / static_cast<double>(group_ratings.size());
    stats.popularity.resize(item_count);
    for (std::size_t i = 0; i < item_count; ++i) {
        stats.popularity[i] = static_cast<double>(stats.item_count[i]) / static_cast<double>(group_size);
    }
    return stats;
}

namespace {

double clamp_rating(double value, int p_max) { return std::clamp(value, 1.0, static_cast<double>(p_max)); }

const GroupRatingStats& target_stats(const PredictionContext& ctx, GroupId target) {
    if (!ctx.scores || !ctx.graph) throw DomainError("prediction context lacks rank scores or graph");
    if (target.index() >= ctx.stats.size()) throw DomainError("unknown target group");
    return ctx.stats[target.index()];
}

bool above_threshold(const GroupRatingStats& s, ItemId item, double theta_p) {
    return s.rated(item) && s.popularity[item.index()] >= theta_p;
}

}  // namespace

Prediction predict_item_based(const PredictionContext& ctx, GroupId target, ItemId item) {
    const auto& own = target_stats(ctx, target);
    Prediction p{target, item, 0.0, Prediction::Method::item_based, false};
    const std::size_t n = own.item_count.size();
    const std::size_t offset = ctx.graph->node({NodeKind::item, 0});
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const ItemId other(j);
        if (other == item || !above_threshold(own, other, ctx.theta_p)) continue;
        const double s = ctx.scores->scores[offset + j];
        num += s * own.item_mean(other);
        den += s;
    }
    if (den > 0.0) {
        p.value = clamp_rating(num / den, ctx.p_max);
    } else {
        p.value = clamp_rating(ctx.global_mean, ctx.p_max);
        p.method = Prediction::Method::global_mean;
        p.fallback = true;
    }
    return p;
}

Prediction predict_user_based(const PredictionContext& ctx, GroupId target, ItemId item) {
    const auto& own = target_stats(ctx, target);
    if (above_threshold(own, item, ctx.theta_p)) {
        return {target, item, clamp_rating(own.item_mean(item), ctx.p_max), Prediction::Method::group_average,
                false};
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t x = 0; x < ctx.stats.size(); ++x) {
        if (x == target.index()) continue;
        const auto& other = ctx.stats[x];
        if (!above_threshold(other, item, ctx.theta_p)) continue;
        const double s = ctx.scores->scores[ctx.graph->node({NodeKind::group, static_cast<std::uint32_t>(x)})];
        num += s * (other.item_mean(item) - other.mean);
        den += s;
    }
    if (den > 0.0) {
        return {target, item, clamp_rating(num / den + own.mean, ctx.p_max), Prediction::Method::user_based,
                false};
    }
    Prediction p = predict_item_based(ctx, target, item);
    p.fallback = true;
    return p;
}

// ---------------------------------------------------------------------------

std::string age_bucket(int age) {
    if (age < 21) return "<21";
    if (age <= 30) return "21-30";
    if (age <= 40) return "31-40";
    if (age <= 50) return "41-50";
    return ">50";
}

std::vector<double> personal_edge_weights(std::span<const RatingRecord> user_ratings) {
    std::vector<double> weights(user_ratings.size(), 1.0);
    if (user_ratings.empty()) return weights;
    double mean = 0.0;
    for (const auto& r : user_ratings) mean += r.rating;
    mean /= static_cast<double>(user_ratings.size());
    double ss = 0.0;
    for (const auto& r : user_ratings) ss += (r.rating - mean) * (r.rating - mean);
    if (ss == 0.0) return weights;
    const double norm = std::sqrt(ss);
    for (std::size_t i = 0; i < user_ratings.size(); ++i) {
        weights[i] = std::exp((user_ratings[i].rating - mean) / norm);
    }
    return weights;
}

RecommendationGraph build_personal_graph(std::span<const RatingRecord> ratings, const Catalog& catalog,
                                         std::span<const UserProfile> profiles) {
    if (ratings.empty()) throw DomainError("personal graph needs at least one rating");
    const std::size_t users = catalog.user_count();
    if (!profiles.empty() && profiles.size() != users) {
        throw DomainError("profiles must cover every user or none");
    }

    std::vector<std::vector<RatingRecord>> by_user(users);
    for (const auto& r : ratings) by_user.at(r.user.index()).push_back(r);

    IdMap attributes;
    std::vector<std::vector<std::uint32_t>> user_attributes(profiles.size());
    for (std::size_t u = 0; u < profiles.size(); ++u) {
        const auto& p = profiles[u];
        if (p.gender) user_attributes[u].push_back(attributes.intern("gender=" + *p.gender));
        if (p.age) user_attributes[u].push_back(attributes.intern("age=" + age_bucket(*p.age)));
        if (p.occupation) user_attributes[u].push_back(attributes.intern("occupation=" + *p.occupation));
    }

    RecommendationGraph::Builder builder;
    builder.add_block(NodeKind::user, users).add_block(NodeKind::item, catalog.item_count());
    if (!profiles.empty()) builder.add_block(NodeKind::attribute, attributes.size());

    for (std::size_t u = 0; u < users; ++u) {
        const auto weights = personal_edge_weights(by_user[u]);
        for (std::size_t i = 0; i < by_user[u].size(); ++i) {
            builder.add_edge({NodeKind::user, static_cast<std::uint32_t>(u)},
                             {NodeKind::item, by_user[u][i].item.value}, weights[i]);
        }
    }
    for (std::size_t u = 0; u < user_attributes.size(); ++u) {
        for (std::uint32_t a : user_attributes[u]) {
            builder.add_edge({NodeKind::user, static_cast<std::uint32_t>(u)}, {NodeKind::attribute, a}, 1.0);
        }
    }
    return std::move(builder).build();
}

}  // namespace grouprec
