#include "grouprec/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <future>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "grouprec/error.hpp"
#include "grouprec/exchange.hpp"
#include "grouprec/rng.hpp"

namespace grouprec {

PercentileScore percentile_score(std::span<const ItemId> list, std::span<const ItemId> test_items) {
    if (list.empty()) throw DomainError("percentile of an empty recommendation list");
    PercentileScore out;
    if (test_items.empty()) return out;
    std::unordered_map<std::uint32_t, std::size_t> position;
    position.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) position.emplace(list[i].value, i + 1);
    const double length = static_cast<double>(list.size());
    double sum = 0.0;
    for (ItemId item : test_items) {
        const auto it = position.find(item.value);
        if (it == position.end()) {
            sum += 1.0;
            ++out.missing;
        } else {
            sum += static_cast<double>(it->second) / length;
            ++out.found;
        }
    }
    out.value = sum / static_cast<double>(test_items.size());
    return out;
}

std::optional<double> recall_at_k(std::span<const ItemId> list, std::span<const ItemId> test_items, std::size_t k) {
    if (k < 1) throw DomainError("recall needs k >= 1");
    if (test_items.empty()) return std::nullopt;
    const auto head = list.first(std::min(k, list.size()));
    std::size_t hits = 0;
    for (ItemId item : test_items) {
        if (std::find(head.begin(), head.end(), item) != head.end()) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test_items.size());
}

const char* to_string(EvalMethod method) {
    return method == EvalMethod::group_private ? "group_private" : "personal_baseline";
}

void ExperimentConfig::validate() const {
    aggregation.validate();
    rank.validate();
    if (!(w_max > 0.0)) throw ConfigError("rank.w_max must be positive");
    if (list_length < 1) throw ConfigError("eval.list_length must be >= 1");
    if (recall_ks.empty()) throw ConfigError("eval.recall_ks must not be empty");
    for (std::size_t k : recall_ks) {
        if (k < 1) throw ConfigError("eval.recall_ks entries must be >= 1");
    }
    if (!(t_threshold >= 0.0)) throw ConfigError("exchange.t_threshold must be >= 0");
}

namespace {

using UserRatings = std::vector<std::vector<RatingRecord>>;

UserRatings ratings_by_user(const DatasetBundle& bundle, std::span<const std::size_t> indices) {
    UserRatings by_user(bundle.catalog.user_count());
    for (std::size_t idx : indices) {
        const auto& r = bundle.ratings[idx];
        by_user[r.user.index()].push_back(r);
    }
    return by_user;
}

struct Accumulator {
    double percentile_sum = 0.0;
    std::size_t test_items = 0;
    std::size_t missing = 0;
    std::size_t users = 0;
    std::size_t skipped = 0;
    std::map<std::size_t, std::size_t> hits;

    void add(std::span<const ItemId> list, std::span<const ItemId> test, std::span<const std::size_t> ks) {
        if (list.empty()) {
            ++skipped;
            return;
        }
        const auto p = percentile_score(list, test);
        percentile_sum += *p.value * static_cast<double>(test.size());
        test_items += test.size();
        missing += p.missing;
        ++users;
        for (std::size_t k : ks) {
            hits[k] += static_cast<std::size_t>(std::llround(*recall_at_k(list, test, k) * test.size()));
        }
    }

    FoldResult finish(std::size_t fold, std::span<const std::size_t> ks) const {
        FoldResult out;
        out.fold = fold;
        out.users = users;
        out.test_items = test_items;
        out.missing = missing;
        out.skipped_users = skipped;
        if (test_items > 0) {
            out.percentile = percentile_sum / static_cast<double>(test_items);
            for (std::size_t k : ks) {
                out.recall[k] = static_cast<double>(hits.at(k)) / static_cast<double>(test_items);
            }
        }
        return out;
    }
};

std::vector<ItemId> truncated(std::vector<ItemId> list, std::size_t length) {
    if (list.size() > length) list.resize(length);
    return list;
}

std::vector<ItemId> test_items_of(const std::vector<RatingRecord>& test) {
    std::vector<ItemId> items;
    items.reserve(test.size());
    for (const auto& r : test) items.push_back(r.item);
    return items;
}

TopKList group_topk(const DatasetBundle& bundle, const Group& group, const UserRatings& train,
                    const ExperimentConfig& config, std::uint64_t padding_seed, std::uint64_t exchange_seed) {
    const auto& catalog = bundle.catalog;
    std::vector<PairwiseComparisonMatrix> matrices;
    std::vector<RatingRecord> group_ratings;
    matrices.reserve(group.members.size());
    for (UserId u : group.members) {
        const auto& history = train[u.index()];
        group_ratings.insert(group_ratings.end(), history.begin(), history.end());
        auto m = pairwise_from_ratings(u, history, catalog);
        if (config.private_stages) {
            Rng rng(mix_seed(padding_seed, u.value));
            m = pad_matrix(std::move(m), rng).matrix;
        }
        matrices.push_back(std::move(m));
    }
    if (config.private_stages) {
        if (group.members.size() >= 2 && config.t_threshold > 0.0) {
            ExchangeConfig ex;
            ex.t_threshold = config.t_threshold;
            ex.seed = exchange_seed;
            ex.group = group;
            matrices = simulate_exchange(std::move(matrices), ex).matrices;
        }
        for (auto& m : matrices) m = cleanup(std::move(m));
    }
    const auto popularity = popularity_table(group_ratings, group.members.size(), catalog.item_count());
    return aggregate_topk(matrices, popularity, config.aggregation);
}

FoldResult run_group_fold(const DatasetBundle& bundle, const ExperimentConfig& config,
                          const std::vector<Group>& groups, const Fold& fold, std::size_t fold_index) {
    const UserRatings train = ratings_by_user(bundle, fold.train);
    const UserRatings test = ratings_by_user(bundle, fold.test);
    const auto lists = private_topk_lists(bundle, groups, fold.train, config, fold_index);
    const RecommendationGraph graph = build_graph(lists, bundle.catalog, groups, config.w_max);
    const TransitionOperator op = transition_operator(graph);

    Accumulator acc;
    for (const auto& g : groups) {
        const auto s = rank_scores(op, graph.node({NodeKind::group, g.id.value}), config.rank);
        const std::vector<ItemId> shared = recommend(s, graph);
        for (UserId u : g.members) {
            const auto& user_test = test[u.index()];
            if (user_test.empty()) continue;
            const auto list = truncated(personalize(shared, train[u.index()]), config.list_length);
            acc.add(list, test_items_of(user_test), config.recall_ks);
        }
    }
    return acc.finish(fold_index, config.recall_ks);
}

FoldResult run_personal_fold(const DatasetBundle& bundle, const ExperimentConfig& config, const Fold& fold,
                             std::size_t fold_index) {
    std::vector<RatingRecord> train_ratings;
    train_ratings.reserve(fold.train.size());
    for (std::size_t idx : fold.train) train_ratings.push_back(bundle.ratings[idx]);
    const UserRatings train = ratings_by_user(bundle, fold.train);
    const UserRatings test = ratings_by_user(bundle, fold.test);

    const RecommendationGraph graph = build_personal_graph(train_ratings, bundle.catalog, bundle.profiles);
    const TransitionOperator op = transition_operator(graph);

    Accumulator acc;
    for (std::size_t u = 0; u < test.size(); ++u) {
        if (test[u].empty()) continue;
        const auto s = rank_scores(op, graph.node({NodeKind::user, static_cast<std::uint32_t>(u)}), config.rank);
        std::vector<ItemId> rated;
        for (const auto& r : train[u]) rated.push_back(r.item);
        const auto list = truncated(recommend(s, graph, rated), config.list_length);
        acc.add(list, test_items_of(test[u]), config.recall_ks);
    }
    return acc.finish(fold_index, config.recall_ks);
}

}  // namespace

std::vector<TopKList> private_topk_lists(const DatasetBundle& bundle, std::span<const Group> groups,
                                         std::span<const std::size_t> rating_indices,
                                         const ExperimentConfig& config, std::uint64_t stream) {
    const UserRatings ratings = ratings_by_user(bundle, rating_indices);
    const std::uint64_t padding_seed = mix_seed(config.padding_seed, stream);
    const std::uint64_t exchange_seed = mix_seed(config.exchange_seed, stream);
    std::vector<TopKList> lists;
    lists.reserve(groups.size());
    for (const auto& g : groups) {
        lists.push_back(group_topk(bundle, g, ratings, config, mix_seed(padding_seed, g.id.value),
                                   mix_seed(exchange_seed, g.id.value)));
    }
    return lists;
}

EvalReport run_experiment(const DatasetBundle& bundle, const ExperimentConfig& config, const SplitPlan& plan) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();

    EvalReport report;
    report.method = to_string(config.method);
    report.strategy = config.method == EvalMethod::group_private ? strategy_name(config.strategy) : "individual";
    report.list_length = config.list_length;

    std::vector<Group> groups;
    if (config.method == EvalMethod::group_private) groups = group_users(bundle, config.strategy);

    auto run_fold = [&](std::size_t f) {
        return config.method == EvalMethod::group_private
                   ? run_group_fold(bundle, config, groups, plan.folds[f], f)
                   : run_personal_fold(bundle, config, plan.folds[f], f);
    };
    if (config.parallel_folds) {
        std::vector<std::future<FoldResult>> pending;
        for (std::size_t f = 0; f < plan.folds.size(); ++f) {
            pending.push_back(std::async(std::launch::async, run_fold, f));
        }
        for (auto& p : pending) report.folds.push_back(p.get());
    } else {
        for (std::size_t f = 0; f < plan.folds.size(); ++f) report.folds.push_back(run_fold(f));
    }

    double percentile_sum = 0.0;
    std::size_t defined = 0;
    std::map<std::size_t, double> recall_sum;
    for (const auto& fold : report.folds) {
        if (!fold.percentile) continue;
        percentile_sum += *fold.percentile;
        ++defined;
        for (const auto& [k, v] : fold.recall) recall_sum[k] += v;
    }
    if (defined > 0) {
        report.mean_percentile = percentile_sum / static_cast<double>(defined);
        for (const auto& [k, v] : recall_sum) report.recall[k] = v / static_cast<double>(defined);
    }
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string format_real(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.10f", value);
    return buffer;
}

std::string report_json(const EvalReport& report, bool include_runtime) {
    using nlohmann::ordered_json;
    auto real = [](std::optional<double> v) { return v ? ordered_json(std::stod(format_real(*v))) : ordered_json(); };
    auto curve = [&](const std::map<std::size_t, double>& recall) {
        ordered_json j = ordered_json::object();
        for (const auto& [k, v] : recall) j[std::to_string(k)] = real(v);
        return j;
    };
    ordered_json j;
    j["method"] = report.method;
    j["strategy"] = report.strategy;
    j["list_length"] = report.list_length;
    j["mean_percentile"] = real(report.mean_percentile);
    j["recall"] = curve(report.recall);
    ordered_json folds = ordered_json::array();
    for (const auto& f : report.folds) {
        folds.push_back({{"fold", f.fold},
                         {"percentile", real(f.percentile)},
                         {"recall", curve(f.recall)},
                         {"users", f.users},
                         {"test_items", f.test_items},
                         {"missing", f.missing},
                         {"skipped_users", f.skipped_users}});
    }
    j["folds"] = std::move(folds);
    if (include_runtime) j["runtime_seconds"] = report.runtime_seconds;
    return j.dump(2) + "\n";
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "method,fold,metric,k,value\n";
    const std::string label = report.method + ":" + report.strategy;
    auto rows = [&](const std::string& fold, std::optional<double> percentile,
                    const std::map<std::size_t, double>& recall) {
        if (percentile) out << label << ',' << fold << ",percentile,," << format_real(*percentile) << '\n';
        for (const auto& [k, v] : recall) out << label << ',' << fold << ",recall," << k << ',' << format_real(v) << '\n';
    };
    for (const auto& f : report.folds) rows(std::to_string(f.fold), f.percentile, f.recall);
    rows("mean", report.mean_percentile, report.recall);
    return out.str();
}

}  // namespace grouprec
