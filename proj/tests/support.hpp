#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "grouprec/aggregate.hpp"
#include "grouprec/model.hpp"
#include "grouprec/recgraph.hpp"
#include "grouprec/rng.hpp"

namespace support {

using namespace grouprec;

inline Catalog make_catalog(std::size_t items, std::size_t users = 1, std::size_t tags = 0) {
    Catalog c;
    for (std::size_t i = 0; i < items; ++i) c.items.intern("i" + std::to_string(i));
    for (std::size_t u = 0; u < users; ++u) c.users.intern("u" + std::to_string(u));
    for (std::size_t t = 0; t < tags; ++t) c.tags.intern("t" + std::to_string(t));
    c.item_tags.assign(items, {});
    return c;
}

inline PartialRanking ranking(std::initializer_list<int> ids) {
    PartialRanking r;
    for (int id : ids) r.push_back(ItemId(id));
    return r;
}

inline PartialRanking random_permutation(std::size_t n, Rng& rng) {
    PartialRanking r;
    for (std::size_t i = 0; i < n; ++i) r.push_back(ItemId(i));
    rng.shuffle(r.begin(), r.end());
    return r;
}

/// Kendall tau by direct pair enumeration.
inline std::uint64_t naive_kendall(const PartialRanking& a, const PartialRanking& b) {
    auto pos = [](const PartialRanking& r, ItemId x) -> long {
        const auto it = std::find(r.begin(), r.end(), x);
        return it == r.end() ? -1 : it - r.begin();
    };
    std::uint64_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const long bi = pos(b, a[i]);
            const long bj = pos(b, a[j]);
            if (bi >= 0 && bj >= 0 && bi > bj) ++d;
        }
    }
    return d;
}

/// Minimum back-arc weight over every permutation of `items`.
inline std::int64_t brute_force_feedback(const ComparisonGraph& g, std::vector<ItemId> items) {
    std::sort(items.begin(), items.end());
    std::int64_t best = -1;
    do {
        std::int64_t cost = 0;
        for (std::size_t i = 0; i < items.size(); ++i) {
            for (std::size_t j = i + 1; j < items.size(); ++j) cost += g.weight(items[j], items[i]);
        }
        if (best < 0 || cost < best) best = cost;
    } while (std::next_permutation(items.begin(), items.end()));
    return best;
}

/// Minimum Kemeny cost over every permutation of 0..n-1.
inline std::uint64_t brute_force_kemeny(std::size_t n, const std::vector<PartialRanking>& profiles) {
    PartialRanking perm;
    for (std::size_t i = 0; i < n; ++i) perm.push_back(ItemId(i));
    std::uint64_t best = UINT64_MAX;
    do {
        best = std::min(best, kemeny_cost(perm, profiles));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Dense column-stochastic matrix of a recommendation graph; dangling
/// columns send their mass to `target`.
inline Eigen::MatrixXd dense_transition(const RecommendationGraph& g, std::size_t target) {
    const auto v = static_cast<Eigen::Index>(g.node_count());
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(v, v);
    for (Eigen::Index j = 0; j < v; ++j) {
        double total = 0.0;
        for (const auto& arc : g.out_arcs(static_cast<std::size_t>(j))) total += arc.weight;
        if (total == 0.0) {
            W(static_cast<Eigen::Index>(target), j) = 1.0;
            continue;
        }
        for (const auto& arc : g.out_arcs(static_cast<std::size_t>(j))) {
            W(static_cast<Eigen::Index>(arc.to), j) += arc.weight / total;
        }
    }
    return W;
}

/// Solves (I - beta W) s = (1 - beta) e_target directly.
inline Eigen::VectorXd dense_rank(const RecommendationGraph& g, std::size_t target, double beta) {
    const Eigen::MatrixXd W = dense_transition(g, target);
    const auto v = W.rows();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(v);
    rhs(static_cast<Eigen::Index>(target)) = 1.0 - beta;
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(v, v) - beta * W;
    return A.fullPivLu().solve(rhs);
}

/// Random connected-ish item graph with `n` nodes for rank tests.
inline RecommendationGraph random_graph(std::size_t n, Rng& rng) {
    RecommendationGraph::Builder b;
    b.add_block(NodeKind::item, n);
    for (std::size_t i = 1; i < n; ++i) {
        const auto j = static_cast<std::uint32_t>(rng.below(i));
        b.add_edge({NodeKind::item, static_cast<std::uint32_t>(i)}, {NodeKind::item, j}, 0.1 + rng.uniform());
    }
    const std::size_t extra = n;
    for (std::size_t e = 0; e < extra; ++e) {
        const auto a = static_cast<std::uint32_t>(rng.below(n));
        const auto c = static_cast<std::uint32_t>(rng.below(n));
        if (a != c) b.add_arc({NodeKind::item, a}, {NodeKind::item, c}, 0.1 + rng.uniform());
    }
    return std::move(b).build();
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("grouprec_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path write(const std::string& name, const std::string& text) const {
        const auto p = path_ / name;
        std::ofstream(p) << text;
        return p;
    }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

inline std::string genre_flags(int on) {
    std::string s;
    for (int g = 0; g < 19; ++g) s += g == on ? "|1" : "|0";
    return s;
}

// Three items, three users, ML-100K file layout.
inline void write_movielens(const TempDir& dir, const std::string& data) {
    dir.write("u.item", "1|Toy Story (1995)|01-Jan-1995||http://x" + genre_flags(3) + "\n" +
                            "2|GoldenEye (1995)|01-Jan-1995||http://y" + genre_flags(1) + "\n" +
                            "3|Four Rooms (1995)|01-Jan-1995||http://z" + genre_flags(16) + "\n");
    dir.write("u.user", "1|24|M|technician|85711\n2|53|F|other|94043\n3|23|M|writer|32067\n");
    dir.write("u.data", data);
}

inline const char* kMovieLensData = "1\t1\t5\t881250949\n1\t2\t3\t881250950\n2\t1\t4\t881250951\n3\t3\t5\t881250952\n";

}  // namespace support
