#include <doctest.h>

#include "grouprec/error.hpp"
#include "grouprec/eval.hpp"
#include "grouprec/rng.hpp"
#include "support.hpp"

using namespace grouprec;
using support::ranking;

namespace {

DatasetBundle synthetic_bundle(std::uint64_t seed) {
    Rng rng(seed);
    DatasetBundle b;
    const std::size_t items = 30, users = 16;
    for (std::size_t i = 0; i < items; ++i) b.catalog.items.intern("item" + std::to_string(i));
    for (int t = 0; t < 4; ++t) b.catalog.tags.intern("tag" + std::to_string(t));
    b.catalog.item_tags.resize(items);
    for (std::size_t i = 0; i < items; ++i) b.catalog.item_tags[i] = {TagId(static_cast<int>(i % 4))};
    for (std::size_t u = 0; u < users; ++u) {
        b.catalog.users.intern("user" + std::to_string(u));
        UserProfile p;
        p.gender = u % 2 ? "M" : "F";
        p.age = 18 + static_cast<int>(u) * 3;
        p.occupation = u % 3 ? "student" : "artist";
        b.profiles.push_back(p);
        for (std::size_t i = 0; i < items; ++i) {
            if (rng.below(3) == 0) continue;
            // Items with a low index are liked more, so ranks carry signal.
            const int base = i < 10 ? 4 : (i < 20 ? 3 : 2);
            const int r = std::clamp(base + static_cast<int>(rng.below(3)) - 1, 1, 5);
            b.ratings.push_back({UserId(u), ItemId(i), r, {}});
        }
    }
    return b;
}

ExperimentConfig small_config(EvalMethod method) {
    ExperimentConfig c;
    c.method = method;
    c.strategy = ByGender{};
    c.aggregation.k = 10;
    c.aggregation.theta_scc = 5;
    c.list_length = 30;
    c.recall_ks = {5, 10, 20};
    return c;
}

}  // namespace

TEST_CASE("percentile score") {
    std::vector<ItemId> list;
    for (int i = 0; i < 100; ++i) list.push_back(ItemId(i));
    const auto tenth = ranking({9});
    CHECK(*percentile_score(list, tenth).value == doctest::Approx(0.1));
    const auto first = ranking({0});
    CHECK(*percentile_score(list, first).value == doctest::Approx(0.01));
    const auto absent = ranking({500});
    const auto miss = percentile_score(list, absent);
    CHECK(*miss.value == doctest::Approx(1.0));
    CHECK(miss.missing == 1);
    const auto mixed = ranking({9, 500});
    CHECK(*percentile_score(list, mixed).value == doctest::Approx(0.55));
    CHECK_FALSE(percentile_score(list, std::vector<ItemId>{}).value);
    CHECK_THROWS_AS(percentile_score(std::vector<ItemId>{}, tenth), DomainError);
}

TEST_CASE("recall at k") {
    const auto list = ranking({3, 1, 4, 5, 9, 2, 6});
    const auto test = ranking({1, 9});
    CHECK(*recall_at_k(list, test, 2) == doctest::Approx(0.5));
    CHECK(*recall_at_k(list, test, 5) == doctest::Approx(1.0));
    CHECK(*recall_at_k(list, test, 1) == doctest::Approx(0.0));
    CHECK(*recall_at_k(list, test, 100) == doctest::Approx(1.0));
    CHECK_FALSE(recall_at_k(list, std::vector<ItemId>{}, 3));

    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto perm = support::random_permutation(40, rng);
        std::vector<ItemId> l, t;
        for (auto i : perm) l.push_back(ItemId(i));
        for (int j = 0; j < 5; ++j) t.push_back(ItemId(static_cast<int>(rng.below(40))));
        double last = 0.0;
        for (std::size_t k = 1; k <= 40; ++k) {
            const double r = *recall_at_k(l, t, k);
            CHECK(r >= last);
            last = r;
        }
        CHECK(last == doctest::Approx(1.0));
    }
}

TEST_CASE("experiment config ranges") {
    auto c = small_config(EvalMethod::group_private);
    CHECK_NOTHROW(c.validate());
    c.recall_ks = {0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(EvalMethod::group_private);
    c.list_length = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(EvalMethod::group_private);
    c.w_max = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("experiments are deterministic") {
    const auto b = synthetic_bundle(17);
    const auto plan = kfold_split(b, 3, 5);
    for (auto method : {EvalMethod::group_private, EvalMethod::personal_baseline}) {
        auto cfg = small_config(method);
        const auto first = run_experiment(b, cfg, plan);
        cfg.parallel_folds = true;
        const auto second = run_experiment(b, cfg, plan);
        CHECK(report_csv(first) == report_csv(second));
        CHECK(report_json(first, false) == report_json(second, false));
        REQUIRE(first.folds.size() == 3);
        REQUIRE(first.mean_percentile);
        CHECK(*first.mean_percentile > 0.0);
        CHECK(*first.mean_percentile <= 1.0);
        double last = 0.0;
        for (const auto& [k, r] : first.recall) {
            CHECK(r >= last);
            last = r;
        }
    }
}

TEST_CASE("private top-k lists respect k with and without the private stages") {
    const auto b = synthetic_bundle(23);
    const auto plan = kfold_split(b, 3, 5);
    auto cfg = small_config(EvalMethod::group_private);
    const auto groups = group_users(b, cfg.strategy);
    const auto with = private_topk_lists(b, groups, plan.folds[0].train, cfg, 0);
    cfg.private_stages = false;
    const auto without = private_topk_lists(b, groups, plan.folds[0].train, cfg, 0);
    REQUIRE(with.size() == without.size());
    for (std::size_t g = 0; g < with.size(); ++g) {
        CHECK(with[g].items.size() == without[g].items.size());
        CHECK(with[g].items.size() <= cfg.aggregation.k);
    }
}

TEST_CASE("report formats") {
    EvalReport r;
    r.method = "group_private";
    r.strategy = "gender";
    r.list_length = 10;
    FoldResult f;
    f.fold = 0;
    f.percentile = 0.25;
    f.recall = {{5, 0.5}};
    r.folds = {f};
    r.mean_percentile = 0.25;
    r.recall = {{5, 0.5}};
    r.runtime_seconds = 1.5;
    const auto csv = report_csv(r);
    CHECK(csv.rfind("method,fold,metric,k,value\n", 0) == 0);
    CHECK(csv.find("group_private:gender,0,percentile,,0.2500000000") != std::string::npos);
    CHECK(csv.find("group_private:gender,mean,recall,5,0.5000000000") != std::string::npos);
    CHECK(report_json(r, true).find("runtime") != std::string::npos);
    CHECK(report_json(r, false).find("runtime") == std::string::npos);
    CHECK(format_real(1.0 / 3.0) == "0.3333333333");
}
