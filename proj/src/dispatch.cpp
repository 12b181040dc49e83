#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "grouprec/cli.hpp"
#include "grouprec/error.hpp"
#include "grouprec/exchange.hpp"

#ifndef GROUPREC_VERSION
#define GROUPREC_VERSION "dev"
#endif

namespace grouprec {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// FNV-1a over raw bytes; stable across runs and platforms of equal endianness.
class Digest {
public:
    void add(const void* data, std::size_t size) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= bytes[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    std::string hex() const {
        char buffer[17];
        std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(state_));
        return buffer;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string digest(const PairwiseComparisonMatrix& m) {
    Digest d;
    const auto words = m.words();
    d.add(words.data(), words.size_bytes());
    return d.hex();
}

std::string dataset_digest(const DatasetBundle& bundle) {
    Digest d;
    for (const auto& r : bundle.ratings) {
        const std::uint32_t row[3] = {r.user.value, r.item.value, static_cast<std::uint32_t>(r.rating)};
        d.add(row, sizeof row);
    }
    return d.hex();
}

class Run {
public:
    Run(std::string command, const RunConfig& config) : command_(std::move(command)), config_(config) {}

    void write(const std::string& name, const std::string& content) {
        fs::create_directories(config_.output_dir);
        const fs::path path = config_.output_dir / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IngestionError("cannot write " + path.string());
        out << content;
        if (!out) throw IngestionError("failed writing " + path.string());
        outputs_.push_back(name);
    }

    void write_json(const std::string& name, const ordered_json& j) { write(name, j.dump(2) + "\n"); }

    const DatasetBundle& dataset() {
        if (!bundle_) {
            const auto& spec = config_.dataset;
            if (spec.format == "movielens") {
                bundle_ = load_movielens(spec.path);
            } else if (spec.format == "snapshot") {
                bundle_ = read_snapshot(spec.path);
            } else {
                std::ifstream in(spec.path);
                if (!in) throw IngestionError("cannot open schema " + spec.path.string());
                std::ostringstream text;
                text << in.rdbuf();
                bundle_ = load_generic(parse_generic_schema(text.str(), spec.path.parent_path()));
            }
        }
        return *bundle_;
    }

    void finish() {
        ordered_json manifest;
        manifest["tool"] = "grouprec";
        manifest["version"] = GROUPREC_VERSION;
        manifest["command"] = command_;
        manifest["config"] = ordered_json::parse(config_json(config_));
        manifest["seeds"] = {{"split", config_.eval.split_seed},
                             {"grouping", config_.grouping.seed},
                             {"padding", config_.exchange.padding_seed},
                             {"exchange", config_.exchange.seed}};
        if (bundle_) {
            manifest["dataset"] = {{"format", config_.dataset.format},
                                   {"path", config_.dataset.path.string()},
                                   {"users", bundle_->catalog.user_count()},
                                   {"items", bundle_->catalog.item_count()},
                                   {"ratings", bundle_->ratings.size()},
                                   {"digest", dataset_digest(*bundle_)}};
        }
        manifest["outputs"] = outputs_;
        write_json("manifest.json", manifest);
    }

private:
    std::string command_;
    const RunConfig& config_;
    std::optional<DatasetBundle> bundle_;
    std::vector<std::string> outputs_;
};

std::vector<std::size_t> all_ratings(const DatasetBundle& bundle) {
    std::vector<std::size_t> indices(bundle.ratings.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    return indices;
}

ordered_json topk_json(const DatasetBundle& bundle, const std::vector<Group>& groups,
                       const std::vector<TopKList>& lists) {
    ordered_json out = ordered_json::array();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& list = lists[g];
        ordered_json items = ordered_json::array();
        for (std::size_t r = 0; r < list.items.size(); ++r) {
            items.push_back({{"rank", r + 1},
                             {"item", bundle.catalog.items.label(list.items[r].index())},
                             {"score", list.scores[r]}});
        }
        out.push_back({{"group", groups[g].label},
                       {"size", groups[g].size()},
                       {"k", list.k},
                       {"method", list.method == TopKList::Method::exact ? "exact" : "heuristic"},
                       {"short_list", list.short_list},
                       {"items", std::move(items)}});
    }
    return out;
}

std::string node_label(const RecommendationGraph& g, std::size_t node, const DatasetBundle& bundle,
                       const std::vector<Group>& groups) {
    const NodeRef ref = g.ref(node);
    switch (ref.kind) {
        case NodeKind::group: return groups[ref.index].label;
        case NodeKind::item: return bundle.catalog.items.label(ref.index);
        case NodeKind::tag: return bundle.catalog.tags.label(ref.index);
        default: return std::to_string(ref.index);
    }
}

void simulate_exchange_command(Run& run, const RunConfig& config) {
    const auto& bundle = run.dataset();
    const auto groups = group_users(bundle, config.strategy());
    const Group* chosen = &groups.front();
    if (!config.exchange.group.empty()) {
        chosen = nullptr;
        for (const auto& g : groups) {
            if (g.label == config.exchange.group) chosen = &g;
        }
        if (!chosen) throw ConfigError("exchange.group '" + config.exchange.group + "' is not a group");
    }
    const Group& group = *chosen;

    std::vector<std::vector<RatingRecord>> history(bundle.catalog.user_count());
    for (const auto& r : bundle.ratings) history[r.user.index()].push_back(r);
    std::vector<PairwiseComparisonMatrix> matrices;
    const std::uint64_t padding_seed = mix_seed(config.exchange.padding_seed, group.id.value);
    for (UserId u : group.members) {
        Rng rng(mix_seed(padding_seed, u.value));
        matrices.push_back(pad_matrix(pairwise_from_ratings(u, history[u.index()], bundle.catalog), rng).matrix);
    }
    const std::uint64_t before = total_ones(matrices);
    std::vector<std::string> digests_before;
    for (const auto& m : matrices) digests_before.push_back(digest(m));

    ExchangeResult result;
    if (config.exchange.t_threshold > 0.0 && group.size() >= 2) {
        ExchangeConfig ex;
        ex.t_threshold = config.exchange.t_threshold;
        ex.seed = mix_seed(config.exchange.seed, group.id.value);
        ex.group = group;
        result = simulate_exchange(matrices, ex);
    } else {
        result.matrices = matrices;
    }

    std::ostringstream events;
    events << "time,initiator,partner,x,y\n";
    for (const auto& e : result.events) {
        events << format_real(e.time) << ',' << bundle.catalog.users.label(e.initiator.index()) << ','
               << bundle.catalog.users.label(e.partner.index()) << ','
               << bundle.catalog.items.label(e.entry.x.index()) << ','
               << bundle.catalog.items.label(e.entry.y.index()) << '\n';
    }
    run.write("events.csv", events.str());

    ordered_json members = ordered_json::array();
    for (std::size_t i = 0; i < group.members.size(); ++i) {
        const auto cleaned = cleanup(result.matrices[i]);
        members.push_back({{"user", bundle.catalog.users.label(group.members[i].index())},
                           {"ones_before", matrices[i].ones()},
                           {"ones_after", result.matrices[i].ones()},
                           {"digest_before", digests_before[i]},
                           {"digest_after", digest(result.matrices[i])},
                           {"ones_after_cleanup", cleaned.ones()}});
    }
    run.write_json("exchange.json", {{"group", group.label},
                                     {"members", group.size()},
                                     {"t_threshold", config.exchange.t_threshold},
                                     {"ticks", result.events.size()},
                                     {"total_before", before},
                                     {"total_after", total_ones(result.matrices)},
                                     {"matrices", std::move(members)}});
}

void anonymity_command(Run& run, const RunConfig& config) {
    const auto& a = config.anonymity;
    const auto model = transition_model(a.group_size, a.item_count);
    ordered_json series = ordered_json::array();
    std::ostringstream csv;
    csv << "t,effective_size\n";
    for (std::uint64_t t = 0;; t += a.step) {
        const std::uint64_t at = std::min(t, a.t_max);
        const double size = anonymity_report(model, at, a.origin).effective_size;
        series.push_back({{"t", at}, {"effective_size", size}});
        csv << at << ',' << format_real(size) << '\n';
        if (at == a.t_max) break;
    }
    run.write("anonymity.csv", csv.str());
    run.write_json("anonymity.json", {{"group_size", a.group_size},
                                      {"item_count", a.item_count},
                                      {"n_prime", model.n_prime},
                                      {"second_eigenvalue", model.second_eigenvalue()},
                                      {"mixing_ticks_0.01", mixing_ticks(model, 0.01)},
                                      {"series", std::move(series)}});
}

struct Pipeline {
    std::vector<Group> groups;
    std::vector<TopKList> lists;
};

Pipeline aggregate_groups(Run& run, const RunConfig& config) {
    const auto& bundle = run.dataset();
    Pipeline p;
    p.groups = group_users(bundle, config.strategy());
    const auto indices = all_ratings(bundle);
    p.lists = private_topk_lists(bundle, p.groups, indices, config.experiment(), 0);
    run.write_json("topk.json", topk_json(bundle, p.groups, p.lists));
    return p;
}

RecommendationGraph graph_command(Run& run, const RunConfig& config, const Pipeline& p) {
    const auto& bundle = run.dataset();
    bool empty_cf = false;
    auto graph = build_graph(p.lists, bundle.catalog, p.groups, config.w_max, &empty_cf);
    std::ostringstream csv;
    csv << "from_kind,from,to_kind,to,weight\n";
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        for (const auto& arc : graph.out_arcs(v)) {
            csv << to_string(graph.ref(v).kind) << ',' << node_label(graph, v, bundle, p.groups) << ','
                << to_string(graph.ref(arc.to).kind) << ',' << node_label(graph, arc.to, bundle, p.groups) << ','
                << format_real(arc.weight) << '\n';
        }
    }
    run.write("graph_edges.csv", csv.str());
    run.write_json("graph.json", {{"nodes", graph.node_count()},
                                  {"arcs", graph.arc_count()},
                                  {"groups", graph.count(NodeKind::group)},
                                  {"items", graph.count(NodeKind::item)},
                                  {"tags", graph.count(NodeKind::tag)},
                                  {"w_max", graph.w_max()},
                                  {"empty_cf", empty_cf}});
    return graph;
}

void recommend_command(Run& run, const RunConfig& config, const Pipeline& p, const RecommendationGraph& graph) {
    const auto& bundle = run.dataset();
    const auto op = transition_operator(graph);
    ordered_json out = ordered_json::array();
    const std::size_t item_offset = graph.node({NodeKind::item, 0});
    for (const auto& g : p.groups) {
        const auto s = rank_scores(op, graph.node({NodeKind::group, g.id.value}), config.rank);
        auto list = recommend(s, graph);
        if (list.size() > config.eval.list_length) list.resize(config.eval.list_length);
        ordered_json items = ordered_json::array();
        for (ItemId i : list) {
            items.push_back({{"item", bundle.catalog.items.label(i.index())}, {"score", s.scores[item_offset + i.index()]}});
        }
        out.push_back({{"group", g.label},
                       {"iterations", s.iterations},
                       {"converged", s.converged},
                       {"items", std::move(items)}});
    }
    run.write_json("recommendations.json", out);
}

void evaluate_command(Run& run, const RunConfig& config) {
    const auto& bundle = run.dataset();
    const auto plan = kfold_split(bundle, config.eval.folds, config.eval.split_seed);
    const auto report = run_experiment(bundle, config.experiment(), plan);
    run.write("report.json", report_json(report));
    run.write("report.csv", report_csv(report));
}

void execute(Run& run, const std::string& command, const RunConfig& config) {
    if (command == "simulate-exchange") {
        simulate_exchange_command(run, config);
    } else if (command == "anonymity-report") {
        anonymity_command(run, config);
    } else if (command == "aggregate") {
        aggregate_groups(run, config);
    } else if (command == "build-graph") {
        const auto p = aggregate_groups(run, config);
        graph_command(run, config, p);
    } else if (command == "recommend") {
        const auto p = aggregate_groups(run, config);
        const auto graph = graph_command(run, config, p);
        recommend_command(run, config, p, graph);
    } else {
        evaluate_command(run, config);
    }
    run.finish();
}

int report_error(const RunConfig& config, std::ostream& err, const std::string& kind, const std::string& message,
                 int status) {
    const ordered_json record = {{"status", "error"}, {"kind", kind}, {"message", message}, {"exit_code", status}};
    err << record.dump() << '\n';
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (!ec) {
        std::ofstream out(config.output_dir / "error.json", std::ios::binary);
        out << record.dump(2) << '\n';
    }
    return status;
}

}  // namespace

int dispatch(const std::string& command, const RunConfig& config, std::ostream& err) {
    const auto& known = commands();
    if (std::find(known.begin(), known.end(), command) == known.end()) {
        return report_error(config, err, "usage", "unknown command '" + command + "'", 2);
    }
    try {
        validate_config(config, command != "anonymity-report");
        Run run(command, config);
        execute(run, command, config);
        return 0;
    } catch (const Error& e) {
        const bool usage = e.kind() == "usage" || e.kind() == "config";
        return report_error(config, err, e.kind(), e.what(), usage ? 2 : 1);
    } catch (const std::exception& e) {
        return report_error(config, err, "internal", e.what(), 1);
    }
}

}  // namespace grouprec
