#include "grouprec/aggregate.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "grouprec/error.hpp"

namespace grouprec {

namespace {

// Inversions of `v` by merge sort.
std::uint64_t count_inversions(std::vector<std::size_t>& v, std::vector<std::size_t>& scratch,
                               std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t inv = count_inversions(v, scratch, lo, mid) + count_inversions(v, scratch, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[i] <= v[j]) {
            scratch[k++] = v[i++];
        } else {
            inv += mid - i;
            scratch[k++] = v[j++];
        }
    }
    while (i < mid) scratch[k++] = v[i++];
    while (j < hi) scratch[k++] = v[j++];
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
              scratch.begin() + static_cast<std::ptrdiff_t>(hi), v.begin() + static_cast<std::ptrdiff_t>(lo));
    return inv;
}

}  // namespace

std::uint64_t kendall_tau(const PartialRanking& a, const PartialRanking& b) {
    std::unordered_map<ItemId, std::size_t> pos_b;
    pos_b.reserve(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) pos_b.emplace(b[i], i);
    std::vector<std::size_t> seq;
    seq.reserve(std::min(a.size(), b.size()));
    for (ItemId item : a) {
        if (auto it = pos_b.find(item); it != pos_b.end()) seq.push_back(it->second);
    }
    std::vector<std::size_t> scratch(seq.size());
    return count_inversions(seq, scratch, 0, seq.size());
}

std::uint64_t kemeny_cost(const PartialRanking& candidate, std::span<const PartialRanking> profiles) {
    std::uint64_t total = 0;
    for (const auto& p : profiles) total += kendall_tau(candidate, p);
    return total;
}

// ---------------------------------------------------------------------------

ComparisonGraph::ComparisonGraph(std::size_t node_count) : out_(node_count) {}

std::int64_t ComparisonGraph::weight(ItemId x, ItemId y) const {
    const auto& arcs = out_[x.index()];
    const auto it = std::lower_bound(arcs.begin(), arcs.end(), y,
                                     [](const Arc& a, ItemId target) { return a.to < target; });
    return (it != arcs.end() && it->to == y) ? it->weight : 0;
}

void ComparisonGraph::add_edge(ItemId x, ItemId y, std::int64_t weight) {
    if (weight <= 0) throw DomainError("comparison edges carry positive weight");
    if (x == y || x.index() >= out_.size() || y.index() >= out_.size()) {
        throw DomainError("comparison edge endpoints out of range");
    }
    out_[x.index()].push_back({y, weight});
    ++edge_count_;
}

void ComparisonGraph::finalize() {
    for (auto& arcs : out_) {
        std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) { return a.to < b.to; });
    }
}

ComparisonGraph ComparisonGraph::transpose() const {
    ComparisonGraph t(out_.size());
    for (std::size_t x = 0; x < out_.size(); ++x) {
        for (const auto& arc : out_[x]) t.out_[arc.to.index()].push_back({ItemId(x), arc.weight});
    }
    t.edge_count_ = edge_count_;
    // Sources are visited in ascending order, so targets are already sorted.
    return t;
}

ComparisonGraph build_comparison_graph(std::span<const PairwiseComparisonMatrix> matrices) {
    if (matrices.empty()) return ComparisonGraph(0);
    const std::size_t n = matrices.front().size();
    const std::size_t pairs = matrices.front().pair_count();
    std::vector<std::int32_t> net(pairs, 0);
    for (const auto& m : matrices) {
        if (m.size() != n) throw DomainError("matrices disagree on the item count");
        const auto words = m.words();
        for (std::size_t w = 0; w < words.size(); ++w) {
            // Pairs holding both entries cancel out.
            const std::uint64_t both = words[w] & (words[w] >> 1) & 0x5555555555555555ULL;
            std::uint64_t bits = words[w] & ~(both | (both << 1));
            while (bits != 0) {
                const auto bit = static_cast<std::size_t>(__builtin_ctzll(bits));
                bits &= bits - 1;
                net[w * 32 + bit / 2] += (bit & 1) == 0 ? 1 : -1;
            }
        }
    }

    ComparisonGraph graph(n);
    std::size_t pair = 0;
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = x + 1; y < n; ++y, ++pair) {
            const std::int32_t d = net[pair];
            if (d > 0) {
                graph.add_edge(ItemId(x), ItemId(y), d);
            } else if (d < 0) {
                graph.add_edge(ItemId(y), ItemId(x), -d);
            }
        }
    }
    graph.finalize();
    return graph;
}

std::vector<double> pairwise_win_totals(std::span<const PairwiseComparisonMatrix> matrices) {
    if (matrices.empty()) return {};
    std::vector<std::int64_t> wins(matrices.front().size(), 0);
    for (const auto& m : matrices) {
        m.for_each_one([&](ItemId x, ItemId) { ++wins[x.index()]; });
    }
    return {wins.begin(), wins.end()};
}

double popularity(ItemId item, std::span<const RatingRecord> group_ratings, std::size_t group_size) {
    if (group_size == 0) throw DomainError("popularity of an empty group");
    std::vector<UserId> raters;
    for (const auto& r : group_ratings) {
        if (r.item == item) raters.push_back(r.user);
    }
    std::sort(raters.begin(), raters.end());
    raters.erase(std::unique(raters.begin(), raters.end()), raters.end());
    return static_cast<double>(raters.size()) / static_cast<double>(group_size);
}

std::vector<double> popularity_table(std::span<const RatingRecord> group_ratings, std::size_t group_size,
                                     std::size_t item_count) {
    if (group_size == 0) throw DomainError("popularity of an empty group");
    // (user, item) pairs are unique within a snapshot, so one record = one rater.
    std::vector<double> table(item_count, 0.0);
    for (const auto& r : group_ratings) table.at(r.item.index()) += 1.0;
    for (auto& v : table) v /= static_cast<double>(group_size);
    return table;
}

void AggregationConfig::validate(std::size_t item_count) const {
    if (k < 1) throw ConfigError("aggregation.k must be >= 1");
    if (theta_scc < 1 || theta_scc > kExactKemenyCap) {
        throw ConfigError("aggregation.theta_scc must lie in [1, " + std::to_string(kExactKemenyCap) + "]");
    }
    if (item_count != 0 && theta_scc > item_count) {
        throw ConfigError("aggregation.theta_scc exceeds the item count");
    }
    if (!(theta_p >= 0.0 && theta_p <= 1.0)) throw ConfigError("aggregation.theta_p must lie in [0, 1]");
}

// ---------------------------------------------------------------------------

SccExtraction tarjan_topk(const ComparisonGraph& graph, const AggregationConfig& config,
                          std::span<const double> popularity) {
    const std::size_t n = graph.node_count();
    if (popularity.size() != n) throw DomainError("popularity table does not match the graph");
    SccExtraction out;
    if (n == 0) return out;

    const ComparisonGraph reversed = graph.transpose();
    constexpr std::size_t kUndefined = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> index(n, kUndefined);
    std::vector<std::size_t> low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    struct Frame {
        std::size_t node;
        std::size_t next_arc;
    };
    std::vector<Frame> calls;
    std::size_t counter = 0;

    auto visit = [&](std::size_t v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
        calls.push_back({v, 0});
        ++out.work;
    };

    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != kUndefined) continue;
        visit(root);
        while (!calls.empty()) {
            auto& frame = calls.back();
            const std::size_t v = frame.node;
            const auto arcs = reversed.out_arcs(ItemId(v));
            if (frame.next_arc < arcs.size()) {
                const std::size_t w = arcs[frame.next_arc++].to.index();
                ++out.work;
                if (index[w] == kUndefined) {
                    visit(w);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            calls.pop_back();
            if (!calls.empty()) {
                const std::size_t parent = calls.back().node;
                low[parent] = std::min(low[parent], low[v]);
            }
            if (low[v] != index[v]) continue;

            std::vector<ItemId> component;
            std::size_t u = 0;
            do {
                u = stack.back();
                stack.pop_back();
                on_stack[u] = false;
                if (popularity[u] >= config.theta_p) component.push_back(ItemId(u));
            } while (u != v);
            std::sort(component.begin(), component.end());
            out.popped += component.size();
            out.beta_max = std::max(out.beta_max, component.size());
            if (!component.empty()) out.components.push_back(std::move(component));
            if (out.popped >= config.k) return out;
        }
    }
    return out;
}

PartialRanking exact_kemeny(const ComparisonGraph& graph, std::span<const ItemId> items) {
    const std::size_t s = items.size();
    if (s > kExactKemenyCap) {
        throw CapacityError("exact Kemeny limited to " + std::to_string(kExactKemenyCap) + " items, got " +
                            std::to_string(s));
    }
    if (s <= 1) return {items.begin(), items.end()};

    std::vector<ItemId> sorted(items.begin(), items.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::int64_t> w(s * s, 0);  // w[a * s + b]: weight of sorted[a] -> sorted[b]
    for (std::size_t a = 0; a < s; ++a) {
        for (const auto& arc : graph.out_arcs(sorted[a])) {
            const auto it = std::lower_bound(sorted.begin(), sorted.end(), arc.to);
            if (it != sorted.end() && *it == arc.to) {
                w[a * s + static_cast<std::size_t>(it - sorted.begin())] = arc.weight;
            }
        }
    }

    // best[S]: least back-arc weight to order the items outside S, given S
    // already placed in front. Placing v right after S makes every arc
    // v -> u with u in S a back arc.
    const std::size_t full = (std::size_t{1} << s) - 1;
    std::vector<std::int64_t> best(full + 1, 0);
    auto placement_cost = [&](std::size_t placed, std::size_t v) {
        std::int64_t c = 0;
        for (std::size_t bits = placed; bits != 0; bits &= bits - 1) {
            c += w[v * s + static_cast<std::size_t>(__builtin_ctzll(bits))];
        }
        return c;
    };
    for (std::size_t S = full; S-- > 0;) {
        std::int64_t value = std::numeric_limits<std::int64_t>::max();
        for (std::size_t v = 0; v < s; ++v) {
            if ((S >> v) & 1u) continue;
            value = std::min(value, placement_cost(S, v) + best[S | (std::size_t{1} << v)]);
        }
        best[S] = value;
    }

    PartialRanking order;
    order.reserve(s);
    std::size_t S = 0;
    while (S != full) {
        for (std::size_t v = 0; v < s; ++v) {
            if ((S >> v) & 1u) continue;
            const std::size_t next = S | (std::size_t{1} << v);
            if (placement_cost(S, v) + best[next] == best[S]) {
                order.push_back(sorted[v]);
                S = next;
                break;
            }
        }
    }
    return order;
}

std::int64_t feedback_weight(const ComparisonGraph& graph, const PartialRanking& ranking) {
    std::int64_t total = 0;
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        for (std::size_t j = i + 1; j < ranking.size(); ++j) total += graph.weight(ranking[j], ranking[i]);
    }
    return total;
}

PartialRanking borda(std::span<const ItemId> candidates, std::span<const double> scores,
                     std::span<const double> popularity) {
    PartialRanking out(candidates.begin(), candidates.end());
    auto pop = [&](ItemId i) { return i.index() < popularity.size() ? popularity[i.index()] : 0.0; };
    std::sort(out.begin(), out.end(), [&](ItemId a, ItemId b) {
        const double sa = scores[a.index()];
        const double sb = scores[b.index()];
        if (sa != sb) return sa > sb;
        const double pa = pop(a);
        const double pb = pop(b);
        if (pa != pb) return pa > pb;
        return a < b;
    });
    return out;
}

std::vector<double> rating_sums(std::span<const RatingRecord> ratings, std::size_t item_count) {
    std::vector<double> sums(item_count, 0.0);
    for (const auto& r : ratings) sums.at(r.item.index()) += r.rating;
    return sums;
}

std::size_t TopKList::rank_of(ItemId item) const {
    const auto it = std::find(items.begin(), items.end(), item);
    return it == items.end() ? k + 1 : static_cast<std::size_t>(it - items.begin()) + 1;
}

TopKList aggregate_topk(const ComparisonGraph& graph, std::span<const double> popularity,
                        const AggregationConfig& config, std::span<const double> borda_scores) {
    const std::size_t n = graph.node_count();
    config.validate();
    if (borda_scores.size() != n) throw DomainError("Borda scores do not match the graph");
    const SccExtraction extraction = tarjan_topk(graph, config, popularity);

    TopKList out;
    out.k = config.k;
    if (extraction.beta_max < config.theta_scc) {
        out.method = TopKList::Method::exact;
        for (const auto& component : extraction.components) {
            const PartialRanking ordered = exact_kemeny(graph, component);
            out.items.insert(out.items.end(), ordered.begin(), ordered.end());
        }
    } else {
        out.method = TopKList::Method::heuristic;
        std::vector<ItemId> eligible;
        for (std::size_t i = 0; i < n; ++i) {
            if (popularity[i] >= config.theta_p) eligible.push_back(ItemId(i));
        }
        out.items = config.heuristic ? config.heuristic(graph, eligible, borda_scores, popularity)
                                     : borda(eligible, borda_scores, popularity);
        std::erase_if(out.items, [&](ItemId i) { return popularity[i.index()] < config.theta_p; });
    }
    if (out.items.size() > config.k) out.items.resize(config.k);
    out.short_list = out.items.size() < config.k;
    out.scores.reserve(out.items.size());
    for (ItemId item : out.items) out.scores.push_back(borda_scores[item.index()]);
    return out;
}

TopKList aggregate_topk(std::span<const PairwiseComparisonMatrix> matrices,
                        std::span<const double> popularity, const AggregationConfig& config,
                        std::span<const double> borda_scores) {
    const ComparisonGraph graph = build_comparison_graph(matrices);
    if (!borda_scores.empty()) return aggregate_topk(graph, popularity, config, borda_scores);
    const std::vector<double> wins = pairwise_win_totals(matrices);
    return aggregate_topk(graph, popularity, config, wins);
}

}  // namespace grouprec
