#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "grouprec/cli.hpp"
#include "grouprec/error.hpp"

namespace grouprec {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

ordered_json to_json(const RunConfig& c) {
    ordered_json j;
    j["dataset"] = {{"format", c.dataset.format}, {"path", c.dataset.path.string()}};
    j["grouping"] = {{"strategy", c.grouping.strategy}, {"count", c.grouping.count}, {"seed", c.grouping.seed}};
    j["exchange"] = {{"t_threshold", c.exchange.t_threshold},
                     {"seed", c.exchange.seed},
                     {"padding_seed", c.exchange.padding_seed},
                     {"group", c.exchange.group}};
    j["aggregation"] = {{"k", c.aggregation.k},
                        {"theta_scc", c.aggregation.theta_scc},
                        {"theta_p", c.aggregation.theta_p}};
    j["rank"] = {{"damping", c.rank.damping},
                 {"epsilon", c.rank.epsilon},
                 {"max_iterations", c.rank.max_iterations},
                 {"w_max", c.w_max}};
    j["anonymity"] = {{"group_size", c.anonymity.group_size},
                      {"item_count", c.anonymity.item_count},
                      {"t_max", c.anonymity.t_max},
                      {"step", c.anonymity.step},
                      {"origin", c.anonymity.origin}};
    j["eval"] = {{"method", c.eval.method},
                 {"folds", c.eval.folds},
                 {"split_seed", c.eval.split_seed},
                 {"list_length", c.eval.list_length},
                 {"recall_ks", c.eval.recall_ks},
                 {"parallel_folds", c.eval.parallel_folds}};
    j["output_dir"] = c.output_dir.string();
    return j;
}

// Reads the keys of one section, rejecting anything not listed.
class Section {
public:
    Section(const ordered_json& root, std::string name) : name_(std::move(name)) {
        if (name_.empty()) {
            node_ = &root;
        } else if (root.contains(name_)) {
            node_ = &root.at(name_);
            if (!node_->is_object()) throw ConfigError(name_ + " must be an object");
        }
    }

    template <class T>
    void read(const std::string& key, T& out) {
        known_.insert(key);
        if (!node_ || !node_->contains(key)) return;
        try {
            out = node_->at(key).get<T>();
        } catch (const ordered_json::exception&) {
            throw ConfigError(qualified(key) + " has the wrong type");
        }
    }

    void finish(const std::set<std::string>& sections = {}) const {
        if (!node_) return;
        for (const auto& [key, _] : node_->items()) {
            if (!known_.contains(key) && !sections.contains(key)) {
                throw ConfigError("unknown config key '" + qualified(key) + "'");
            }
        }
    }

private:
    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    std::string name_;
    const ordered_json* node_ = nullptr;
    std::set<std::string> known_;
};

RunConfig from_json(const ordered_json& j, const fs::path& base) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    auto resolve = [&](const std::string& p) -> fs::path {
        if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
        return base / p;
    };

    Section dataset(j, "dataset");
    std::string dataset_path;
    dataset.read("format", c.dataset.format);
    dataset.read("path", dataset_path);
    dataset.finish();
    c.dataset.path = resolve(dataset_path);

    Section grouping(j, "grouping");
    grouping.read("strategy", c.grouping.strategy);
    grouping.read("count", c.grouping.count);
    grouping.read("seed", c.grouping.seed);
    grouping.finish();

    Section exchange(j, "exchange");
    exchange.read("t_threshold", c.exchange.t_threshold);
    exchange.read("seed", c.exchange.seed);
    exchange.read("padding_seed", c.exchange.padding_seed);
    exchange.read("group", c.exchange.group);
    exchange.finish();

    Section aggregation(j, "aggregation");
    aggregation.read("k", c.aggregation.k);
    aggregation.read("theta_scc", c.aggregation.theta_scc);
    aggregation.read("theta_p", c.aggregation.theta_p);
    aggregation.finish();

    Section rank(j, "rank");
    rank.read("damping", c.rank.damping);
    rank.read("epsilon", c.rank.epsilon);
    rank.read("max_iterations", c.rank.max_iterations);
    rank.read("w_max", c.w_max);
    rank.finish();

    Section anonymity(j, "anonymity");
    anonymity.read("group_size", c.anonymity.group_size);
    anonymity.read("item_count", c.anonymity.item_count);
    anonymity.read("t_max", c.anonymity.t_max);
    anonymity.read("step", c.anonymity.step);
    anonymity.read("origin", c.anonymity.origin);
    anonymity.finish();

    Section eval(j, "eval");
    eval.read("method", c.eval.method);
    eval.read("folds", c.eval.folds);
    eval.read("split_seed", c.eval.split_seed);
    eval.read("list_length", c.eval.list_length);
    eval.read("recall_ks", c.eval.recall_ks);
    eval.read("parallel_folds", c.eval.parallel_folds);
    eval.finish();

    Section top(j, "");
    std::string output_dir = c.output_dir.string();
    top.read("output_dir", output_dir);
    top.finish({"dataset", "grouping", "exchange", "aggregation", "rank", "anonymity", "eval"});
    c.output_dir = resolve(output_dir);

    validate_config(c, false);
    return c;
}

}  // namespace

GroupingStrategy RunConfig::strategy() const {
    const auto& s = grouping.strategy;
    if (s == "gender") return ByGender{};
    if (s == "age") return ByAge{};
    if (s == "occupation") return ByOccupation{};
    if (s == "random") return RandomGroups{grouping.count, grouping.seed};
    if (s == "explicit") return ExplicitGroups{};
    throw ConfigError("grouping.strategy must be gender, age, occupation, random or explicit");
}

ExperimentConfig RunConfig::experiment() const {
    ExperimentConfig e;
    e.method = eval.method == "personal_baseline" ? EvalMethod::personal_baseline : EvalMethod::group_private;
    e.strategy = strategy();
    e.t_threshold = exchange.t_threshold;
    e.exchange_seed = exchange.seed;
    e.padding_seed = exchange.padding_seed;
    e.aggregation = aggregation;
    e.rank = rank;
    e.w_max = w_max;
    e.list_length = eval.list_length;
    e.recall_ks = eval.recall_ks;
    e.parallel_folds = eval.parallel_folds;
    return e;
}

RunConfig parse_config(const std::string& json_text, const fs::path& base) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const ordered_json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j, base);
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments) {
    if (assignments.empty()) return;
    ordered_json j = to_json(config);
    for (const auto& assignment : assignments) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
        const std::string key = assignment.substr(0, eq);
        const std::string text = assignment.substr(eq + 1);
        ordered_json value;
        try {
            value = ordered_json::parse(text);
        } catch (const ordered_json::parse_error&) {
            value = text;
        }
        ordered_json* node = &j;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (!node->contains(part)) throw ConfigError("unknown config key '" + key + "'");
            node = &(*node)[part];
            if (dot == std::string::npos) break;
            if (!node->is_object()) throw ConfigError("unknown config key '" + key + "'");
            start = dot + 1;
        }
        // Strings that merely look like numbers stay strings.
        if (node->is_string() && !value.is_string()) value = text;
        *node = std::move(value);
    }
    config = from_json(j, {});
}

void validate_config(const RunConfig& c, bool needs_dataset) {
    static const std::set<std::string> formats = {"movielens", "generic", "snapshot"};
    if (!formats.contains(c.dataset.format)) {
        throw ConfigError("dataset.format must be movielens, generic or snapshot");
    }
    if (needs_dataset) {
        if (c.dataset.path.empty()) throw ConfigError("dataset.path is required for this command");
        if (!fs::exists(c.dataset.path)) throw ConfigError("dataset.path does not exist: " + c.dataset.path.string());
    }
    (void)c.strategy();
    if (c.grouping.strategy == "random" && c.grouping.count < 1) throw ConfigError("grouping.count must be >= 1");
    if (!(c.exchange.t_threshold >= 0.0)) throw ConfigError("exchange.t_threshold must be >= 0");
    c.aggregation.validate();
    c.rank.validate();
    if (!(c.w_max > 0.0)) throw ConfigError("rank.w_max must be positive");
    if (c.anonymity.group_size < 2) throw ConfigError("anonymity.group_size must be >= 2");
    if (c.anonymity.item_count < 2) throw ConfigError("anonymity.item_count must be >= 2");
    if (c.anonymity.step < 1) throw ConfigError("anonymity.step must be >= 1");
    if (c.anonymity.origin >= c.anonymity.group_size) throw ConfigError("anonymity.origin must be < group_size");
    if (c.eval.method != "group_private" && c.eval.method != "personal_baseline") {
        throw ConfigError("eval.method must be group_private or personal_baseline");
    }
    if (c.eval.folds < 2) throw ConfigError("eval.folds must be >= 2");
    c.experiment().validate();
}

std::string config_json(const RunConfig& config) { return to_json(config).dump(2); }

}  // namespace grouprec
