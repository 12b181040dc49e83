// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "grouprec/aggregate.hpp"
#include "grouprec/data.hpp"
#include "grouprec/eval.hpp"
#include "grouprec/exchange.hpp"
#include "grouprec/recgraph.hpp"
#include "support.hpp"

using namespace grouprec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > budget_seconds) {
        o.pass = false;
        o.detail += " (over time budget)";
    }
    if (!o.pass) ++failures;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.2fs", secs);
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " [" << timing << "] " << o.detail << std::endl;
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

Group group_of(std::size_t n) {
    Group g{GroupId(0), "g", {}, {}};
    for (std::size_t u = 0; u < n; ++u) g.members.push_back(UserId(u));
    return g;
}

std::uint64_t naive_cost(const PartialRanking& candidate, const std::vector<PartialRanking>& profiles) {
    std::uint64_t total = 0;
    for (const auto& p : profiles) total += support::naive_kendall(candidate, p);
    return total;
}

std::uint64_t brute_optimum(std::size_t n, const std::vector<PartialRanking>& profiles) {
    PartialRanking perm;
    for (std::size_t i = 0; i < n; ++i) perm.push_back(ItemId(i));
    std::uint64_t best = UINT64_MAX;
    do {
        best = std::min(best, naive_cost(perm, profiles));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

std::vector<PairwiseComparisonMatrix> matrices_of(const std::vector<PartialRanking>& profiles, std::size_t n) {
    const auto catalog = support::make_catalog(n, profiles.size());
    std::vector<PairwiseComparisonMatrix> out;
    for (std::size_t u = 0; u < profiles.size(); ++u) out.push_back(pairwise_from_ranking(UserId(u), profiles[u], catalog));
    return out;
}

Outcome ac1() {
    const auto p1 = support::ranking({0, 1, 2});
    const auto p2 = support::ranking({1, 0, 2});
    const auto p3 = support::ranking({2, 0, 1});
    const auto k12 = kendall_tau(p1, p2);
    const auto k13 = kendall_tau(p1, p3);
    const std::vector<PartialRanking> profiles = {p1, p2, p3};
    const auto ms = matrices_of(profiles, 3);
    const std::vector<double> popularity(3, 1.0);
    AggregationConfig cfg;
    cfg.k = 3;
    cfg.theta_scc = 3;
    const auto top = aggregate_topk(ms, popularity, cfg);
    const bool ok = k12 == 1 && k13 == 2 && top.items == p1;
    std::string got;
    for (auto i : top.items) got += std::to_string(i.value + 1);
    return {ok, "K12=" + std::to_string(k12) + " K13=" + std::to_string(k13) + " kemeny=" + got};
}

Outcome ac2() {
    const std::size_t N = 10, n = 5;
    const auto model = transition_model(N, n);
    const auto t = mixing_ticks(model, 0.01);
    const double closed = effective_anonymity(distribution_at(model, t, 0));

    const auto catalog = support::make_catalog(n, N);
    Rng rng(11);
    std::vector<PairwiseComparisonMatrix> inputs;
    for (std::size_t u = 0; u < N; ++u) {
        inputs.push_back(pairwise_from_ranking(UserId(u), support::random_permutation(n, rng), catalog));
    }
    ExchangeConfig cfg;
    cfg.group = group_of(N);
    cfg.seed = 2024;
    cfg.t_threshold = 1e9;
    const std::size_t replicas = 10000;

    // Compare at the mixing tick count and well before mixing, where the
    // distribution is still far from uniform.
    double worst = 0.0;
    std::string detail;
    for (std::uint64_t ticks : {std::uint64_t{40}, t}) {
        cfg.tick_limit = ticks;
        const auto empirical = empirical_provenance(inputs, cfg, replicas, 0);
        const auto expected = distribution_at(model, ticks, 0);
        const double tv = total_variation(empirical, expected);
        worst = std::max(worst, tv);
        detail += " tv@" + std::to_string(ticks) + "=" + fmt(tv, 5);
    }
    const bool ok = model.n_prime == 20 && closed >= 9.9 && worst <= 0.05;
    return {ok, "n'=" + std::to_string(model.n_prime) + " t=" + std::to_string(t) + " A=" + fmt(closed) + detail};
}

Outcome ac3() {
    double worst = 0.0;
    for (std::size_t N = 2; N <= 10; ++N) {
        for (std::size_t n = 2; n <= 6; ++n) {
            const auto model = transition_model(N, n);
            const double n_prime = static_cast<double>(n * (n - 1));
            const double lambda = 1.0 - 2.0 / (n_prime * static_cast<double>(N - 1));
            Eigen::EigenSolver<Eigen::MatrixXd> solver(model.P);
            std::vector<double> values;
            for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
                worst = std::max(worst, std::abs(solver.eigenvalues()(i).imag()));
                values.push_back(solver.eigenvalues()(i).real());
            }
            std::sort(values.begin(), values.end());
            worst = std::max(worst, std::abs(values.back() - 1.0));
            for (std::size_t i = 0; i + 1 < values.size(); ++i) worst = std::max(worst, std::abs(values[i] - lambda));
        }
    }
    return {worst <= 1e-9, "max deviation " + std::to_string(worst)};
}

Outcome ac4() {
    Rng rng(404);
    std::size_t exact = 0;
    for (int run = 0; run < 100; ++run) {
        const std::size_t N = 2 + rng.below(9);
        const std::size_t n = 2 + rng.below(15);
        const auto catalog = support::make_catalog(n, N);
        std::vector<PairwiseComparisonMatrix> inputs;
        for (std::size_t u = 0; u < N; ++u) {
            auto r = support::random_permutation(n, rng);
            r.resize(rng.below(n + 1));
            inputs.push_back(pad_matrix(pairwise_from_ranking(UserId(u), r, catalog), rng).matrix);
        }
        std::uint64_t before = 0;
        for (const auto& m : inputs) {
            for (std::size_t p = 0; p < m.position_count(); ++p) before += m.get_position(p);
        }
        ExchangeConfig cfg;
        cfg.group = group_of(N);
        cfg.seed = rng.next();
        cfg.t_threshold = 1.0 + static_cast<double>(rng.below(200));
        const auto result = simulate_exchange(inputs, cfg);
        std::uint64_t after = 0;
        for (const auto& m : result.matrices) {
            for (std::size_t p = 0; p < m.position_count(); ++p) after += m.get_position(p);
        }
        exact += before == after;
    }
    return {exact == 100, std::to_string(exact) + "/100 runs conserved"};
}

Outcome ac5() {
    Rng rng(55);
    std::size_t kemeny_ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(5);
        const std::size_t voters = 1 + rng.below(9);
        std::vector<PartialRanking> profiles;
        for (std::size_t v = 0; v < voters; ++v) profiles.push_back(support::random_permutation(n, rng));
        const auto graph = build_comparison_graph(matrices_of(profiles, n));
        std::vector<ItemId> items;
        for (std::size_t i = 0; i < n; ++i) items.push_back(ItemId(i));
        const auto best = exact_kemeny(graph, items);
        kemeny_ok += naive_cost(best, profiles) == brute_optimum(n, profiles);
    }
    std::size_t borda_ok = 0;
    double worst_ratio = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(6);
        const std::size_t voters = 1 + rng.below(9);
        std::vector<PartialRanking> profiles;
        for (std::size_t v = 0; v < voters; ++v) profiles.push_back(support::random_permutation(n, rng));
        // Positional Borda: n - 1 - position, summed over voters.
        std::vector<double> scores(n, 0.0);
        for (const auto& p : profiles) {
            for (std::size_t pos = 0; pos < n; ++pos) scores[p[pos].index()] += static_cast<double>(n - 1 - pos);
        }
        std::vector<ItemId> items;
        for (std::size_t i = 0; i < n; ++i) items.push_back(ItemId(i));
        const std::vector<double> popularity(n, 1.0);
        const auto b = borda(items, scores, popularity);
        const auto cost = naive_cost(b, profiles);
        const auto opt = brute_optimum(n, profiles);
        borda_ok += cost <= 5 * opt;
        if (opt > 0) worst_ratio = std::max(worst_ratio, static_cast<double>(cost) / static_cast<double>(opt));
    }
    return {kemeny_ok == 100 && borda_ok == 200, "kemeny " + std::to_string(kemeny_ok) + "/100, borda " +
                                                     std::to_string(borda_ok) + "/200 (worst ratio " +
                                                     fmt(worst_ratio, 3) + ")"};
}

Outcome ac6() {
    Rng rng(66);
    const RankConfig cfg;
    double worst_solve = 0.0, worst_norm = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.below(49);
        const auto g = support::random_graph(n, rng);
        const std::size_t target = rng.below(n);
        const auto s = rank_scores(transition_operator(g), target, cfg);
        const auto dense = support::dense_rank(g, target, cfg.damping);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            worst_solve = std::max(worst_solve, std::abs(s.scores[i] - dense(static_cast<Eigen::Index>(i))));
            sum += s.scores[i];
        }
        worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
    }
    RecommendationGraph::Builder b;
    b.add_block(NodeKind::item, 2).add_edge({NodeKind::item, 0}, {NodeKind::item, 1}, 1.0);
    const auto pair = std::move(b).build();
    const auto s = rank_scores(pair, {NodeKind::item, 0}, cfg);
    worst_norm = std::max(worst_norm, std::abs(s.scores[0] + s.scores[1] - 1.0));
    const bool fixture = std::abs(s.scores[0] - 0.5405) <= 1e-4 && std::abs(s.scores[1] - 0.4595) <= 1e-4;
    const bool ok = worst_solve <= 1e-6 && worst_norm <= 1e-9 && fixture;
    return {ok, "max |power - dense|=" + std::to_string(worst_solve) + " s=(" + fmt(s.scores[0]) + ", " +
                    fmt(s.scores[1]) + ") max |sum-1|=" + std::to_string(worst_norm)};
}

const fs::path kDataDir = GROUPREC_ML100K_DIR;

Outcome ac7() {
    const auto b = load_movielens(kDataDir);
    std::size_t male = 0, female = 0;
    for (const auto& p : b.profiles) {
        if (p.gender == "M") ++male;
        if (p.gender == "F") ++female;
    }
    const double users = static_cast<double>(b.catalog.user_count());
    const double m = 100.0 * static_cast<double>(male) / users;
    const double f = 100.0 * static_cast<double>(female) / users;
    const bool counts = b.catalog.user_count() == 943 && b.catalog.item_count() == 1682;
    const bool split = std::abs(m - 71.16) <= 0.01 && std::abs(f - 28.84) <= 0.01;
    return {counts && split, std::to_string(b.catalog.user_count()) + " users, " +
                                 std::to_string(b.catalog.item_count()) + " items, M " + fmt(m, 2) + "% / F " +
                                 fmt(f, 2) + "% (" + std::to_string(male) + "/" + std::to_string(female) + ")"};
}

Outcome ac8() {
    const auto bundle = load_movielens(kDataDir);
    const auto plan = kfold_split(bundle, 5, 42);
    auto base = [] {
        ExperimentConfig c;
        c.list_length = 900;
        c.aggregation.k = 500;
        c.aggregation.theta_p = 0.01;
        c.parallel_folds = true;
        return c;
    };
    std::vector<std::pair<std::string, EvalReport>> reports;
    for (auto strategy : {GroupingStrategy{ByGender{}}, GroupingStrategy{ByAge{}}, GroupingStrategy{ByOccupation{}}}) {
        auto c = base();
        c.strategy = strategy;
        reports.emplace_back(strategy_name(strategy), run_experiment(bundle, c, plan));
    }
    auto personal_cfg = base();
    personal_cfg.method = EvalMethod::personal_baseline;
    const auto personal = run_experiment(bundle, personal_cfg, plan);

    const auto& occupation = reports.back().second;
    const double occ_pct = occupation.mean_percentile.value_or(1.0);
    const double occ_recall = occupation.recall.count(50) ? occupation.recall.at(50) : 0.0;
    const double personal_pct = personal.mean_percentile.value_or(1.0);
    const bool a = occ_pct >= 0.08 && occ_pct <= 0.14;
    const bool b = occ_recall >= 0.45 && occ_recall <= 0.58;
    bool c = true;
    bool d = true;
    std::string detail;
    auto curve_ok = [](const EvalReport& r) {
        double last = 0.0;
        for (const auto& [k, v] : r.recall) {
            if (v < last) return false;
            last = v;
        }
        for (const auto& f : r.folds) {
            last = 0.0;
            for (const auto& [k, v] : f.recall) {
                if (v < last) return false;
                last = v;
            }
        }
        return true;
    };
    for (const auto& [name, r] : reports) {
        const double pct = r.mean_percentile.value_or(1.0);
        c = c && personal_pct < pct;
        d = d && curve_ok(r);
        detail += name + " pct=" + fmt(pct) + " r@50=" + fmt(r.recall.count(50) ? r.recall.at(50) : 0.0) + "; ";
    }
    d = d && curve_ok(personal);
    detail += "personal pct=" + fmt(personal_pct) + " r@50=" +
              fmt(personal.recall.count(50) ? personal.recall.at(50) : 0.0) + " | (a) " + (a ? "ok" : "out of band") +
              " (b) " + (b ? "ok" : "out of band") + " (c) " + (c ? "ok" : "violated") + " (d) " +
              (d ? "ok" : "violated");
    return {a && b && c && d, detail};
}

Outcome ac9() {
    support::TempDir dir;
    const fs::path first = dir.path() / "first";
    const fs::path second = dir.path() / "second";
    const std::string args = " evaluate -d " + kDataDir.string() +
                             " -g occupation -s eval.parallel_folds=true -o ";
    for (const auto& out : {first, second}) {
        const std::string cmd = std::string(GROUPREC_CLI_PATH) + args + out.string() + " >/dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) return {false, "evaluate failed"};
    }
    const auto a = support::read_file(first / "report.csv");
    const auto b = support::read_file(second / "report.csv");
    auto config_of = [](const fs::path& p) {
        auto m = nlohmann::json::parse(support::read_file(p / "manifest.json"));
        m["config"].erase("output_dir");
        return m["config"].dump() + m["seeds"].dump() + m["dataset"].dump();
    };
    const bool same_manifest = config_of(first) == config_of(second);
    const bool ok = same_manifest && !a.empty() && a == b;
    return {ok, std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different") +
                    (same_manifest ? "" : ", manifests differ")};
}

}  // namespace

int main() {
    criterion("AC1 worked example", 1.0, ac1);
    criterion("AC2 anonymity", 120.0, ac2);
    criterion("AC3 eigenstructure", 10.0, ac3);
    criterion("AC4 sum conservation", 30.0, ac4);
    criterion("AC5 kemeny oracle and borda bound", 120.0, ac5);
    criterion("AC6 rank scores", 30.0, ac6);
    criterion("AC7 dataset fidelity", 10.0, ac7);
    criterion("AC8 end-to-end experiment", 1200.0, ac8);
    criterion("AC9 reproducibility", 600.0, ac9);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
