#include "grouprec/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include <json.hpp>

#include "grouprec/error.hpp"
#include "grouprec/rng.hpp"

namespace grouprec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kMovieLensGenres = {
    "unknown", "Action",  "Adventure", "Animation", "Children's", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery",
    "Romance", "Sci-Fi", "Thriller", "War", "Western"};

std::vector<std::string_view> split(std::string_view line, char delimiter) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t end = line.find(delimiter, start);
        if (end == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, end - start));
        start = end + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
    s = trim(s);
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

// Ratings may be written as "4" or "4.0"; fractional values are rejected.
std::optional<int> parse_rating(std::string_view s) {
    if (auto i = parse_number<int>(s)) return i;
    if (auto d = parse_number<double>(s); d && *d == static_cast<int>(*d)) return static_cast<int>(*d);
    return std::nullopt;
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("cannot open " + path.string());
    return in;
}

[[noreturn]] void malformed(const fs::path& path, std::size_t line_no, const std::string& why) {
    throw IngestionError(path.string() + ":" + std::to_string(line_no) + ": " + why);
}

void add_rating(DatasetBundle& bundle, std::set<std::pair<std::uint32_t, std::uint32_t>>& seen,
                RatingRecord record, const fs::path& path, std::size_t line_no) {
    if (record.rating < 1 || record.rating > bundle.catalog.p_max) {
        throw DataIntegrityError(path.string() + ":" + std::to_string(line_no) + ": rating " +
                                 std::to_string(record.rating) + " outside 1.." +
                                 std::to_string(bundle.catalog.p_max));
    }
    if (!seen.emplace(record.user.value, record.item.value).second) {
        throw DataIntegrityError(path.string() + ":" + std::to_string(line_no) +
                                 ": duplicate (user, item) rating");
    }
    bundle.ratings.push_back(record);
}

}  // namespace

void DatasetBundle::validate() const {
    catalog.validate();
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& r : ratings) {
        if (r.user.index() >= catalog.user_count() || r.item.index() >= catalog.item_count()) {
            throw DataIntegrityError("rating references an unknown user or item");
        }
        if (r.rating < 1 || r.rating > catalog.p_max) throw DataIntegrityError("rating outside the scale");
        if (!seen.emplace(r.user.value, r.item.value).second) {
            throw DataIntegrityError("duplicate (user, item) rating");
        }
    }
    if (!profiles.empty() && profiles.size() != catalog.user_count()) {
        throw DataIntegrityError("profiles must cover every user or none");
    }
    if (group_labels && group_labels->size() != catalog.user_count()) {
        throw DataIntegrityError("group labels must cover every user");
    }
}

// ---------------------------------------------------------------------------

DatasetBundle load_movielens(const fs::path& directory) {
    const fs::path data_path = directory / "u.data";
    const fs::path item_path = directory / "u.item";
    const fs::path user_path = directory / "u.user";
    for (const auto& p : {data_path, item_path, user_path}) {
        if (!fs::exists(p)) throw IngestionError("missing MovieLens file " + p.string());
    }

    DatasetBundle bundle;
    auto& catalog = bundle.catalog;
    catalog.p_max = 5;

    std::vector<std::string> genres = kMovieLensGenres;
    if (const fs::path genre_path = directory / "u.genre"; fs::exists(genre_path)) {
        auto in = open_input(genre_path);
        std::vector<std::string> names;
        std::string line;
        while (std::getline(in, line)) {
            const auto fields = split(trim(line), '|');
            if (fields.size() == 2 && !fields[0].empty()) names.emplace_back(fields[0]);
        }
        if (names.size() == kMovieLensGenres.size()) genres = std::move(names);
    }
    for (const auto& g : genres) catalog.tags.intern(g);

    {
        auto in = open_input(item_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string_view view = trim(line);
            if (view.empty()) continue;
            const auto fields = split(view, '|');
            if (fields.size() < 1 + genres.size()) malformed(item_path, line_no, "expected at least 20 fields");
            if (!parse_number<long>(fields[0])) malformed(item_path, line_no, "bad movie id");
            const std::size_t before = catalog.items.size();
            catalog.items.intern(trim(fields[0]));
            if (catalog.items.size() == before) malformed(item_path, line_no, "duplicate movie id");
            std::vector<TagId> tags;
            const std::size_t first_flag = fields.size() - genres.size();
            for (std::size_t g = 0; g < genres.size(); ++g) {
                const auto flag = trim(fields[first_flag + g]);
                if (flag == "1") {
                    tags.push_back(TagId(g));
                } else if (flag != "0") {
                    malformed(item_path, line_no, "genre flags must be 0 or 1");
                }
            }
            catalog.item_tags.push_back(std::move(tags));
        }
    }
    {
        auto in = open_input(user_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string_view view = trim(line);
            if (view.empty()) continue;
            const auto fields = split(view, '|');
            if (fields.size() != 5) malformed(user_path, line_no, "expected 5 fields");
            const auto age = parse_number<int>(fields[1]);
            if (!parse_number<long>(fields[0]) || !age) malformed(user_path, line_no, "bad user id or age");
            const std::size_t before = catalog.users.size();
            catalog.users.intern(trim(fields[0]));
            if (catalog.users.size() == before) malformed(user_path, line_no, "duplicate user id");
            UserProfile profile;
            profile.age = *age;
            profile.gender = std::string(trim(fields[2]));
            profile.occupation = std::string(trim(fields[3]));
            profile.zip = std::string(trim(fields[4]));
            bundle.profiles.push_back(std::move(profile));
        }
    }
    {
        auto in = open_input(data_path);
        std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
        std::string line;
        std::size_t line_no = 0;
        bundle.ratings.reserve(100000);
        while (std::getline(in, line)) {
            ++line_no;
            const std::string_view view = trim(line);
            if (view.empty()) continue;
            const auto fields = split(view, '\t');
            if (fields.size() != 4) malformed(data_path, line_no, "expected 4 tab-separated fields");
            const auto user = catalog.users.find(trim(fields[0]));
            const auto item = catalog.items.find(trim(fields[1]));
            const auto rating = parse_rating(fields[2]);
            const auto ts = parse_number<std::int64_t>(fields[3]);
            if (!rating || !ts) malformed(data_path, line_no, "bad rating or timestamp");
            if (!user || !item) malformed(data_path, line_no, "unknown user or item id");
            add_rating(bundle, seen, {UserId(*user), ItemId(*item), *rating, *ts}, data_path, line_no);
        }
    }
    bundle.validate();
    return bundle;
}

// ---------------------------------------------------------------------------

namespace {

ColumnRef column_from_json(const json& j, const std::string& key) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_unsigned()) return j.get<std::size_t>();
    throw ConfigError("schema." + key + " must be a column name or a non-negative index");
}

std::size_t resolve_column(const ColumnRef& ref, const std::vector<std::string>& header, const std::string& key) {
    if (const auto* index = std::get_if<std::size_t>(&ref)) return *index;
    const auto& name = std::get<std::string>(ref);
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("schema." + key + " refers to unknown column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

GenericSchema parse_generic_schema(const std::string& json_text, const fs::path& base) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("schema is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("schema must be a JSON object");
    static const std::set<std::string> known = {"ratings", "delimiter", "header", "user_column",
                                                "item_column", "rating_column", "timestamp_column",
                                                "p_max", "groups", "tags", "associations"};
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ConfigError("unknown schema key '" + key + "'");
    }
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base.empty() ? fs::path(p) : base / p; };

    GenericSchema s;
    if (!j.contains("ratings")) throw ConfigError("schema.ratings is required");
    try {
        s.ratings_path = resolve(j.at("ratings").get<std::string>());
        if (j.contains("delimiter")) {
            const auto d = j.at("delimiter").get<std::string>();
            if (d.size() != 1 && d != "\\t") throw ConfigError("schema.delimiter must be one character");
            s.delimiter = d == "\\t" ? '\t' : d[0];
        }
        if (j.contains("header")) s.header = j.at("header").get<bool>();
        if (j.contains("user_column")) s.user_column = column_from_json(j.at("user_column"), "user_column");
        if (j.contains("item_column")) s.item_column = column_from_json(j.at("item_column"), "item_column");
        if (j.contains("rating_column")) s.rating_column = column_from_json(j.at("rating_column"), "rating_column");
        if (j.contains("timestamp_column")) {
            s.timestamp_column = column_from_json(j.at("timestamp_column"), "timestamp_column");
        }
        if (j.contains("p_max")) s.p_max = j.at("p_max").get<int>();
        if (j.contains("groups")) s.groups_path = resolve(j.at("groups").get<std::string>());
        if (j.contains("tags")) s.tags_path = resolve(j.at("tags").get<std::string>());
        if (j.contains("associations")) s.associations_path = resolve(j.at("associations").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("schema field has the wrong type: ") + e.what());
    }
    if (s.p_max < 1) throw ConfigError("schema.p_max must be >= 1");
    return s;
}

DatasetBundle load_generic(const GenericSchema& schema) {
    if (!fs::exists(schema.ratings_path)) throw IngestionError("missing ratings file " + schema.ratings_path.string());
    DatasetBundle bundle;
    auto& catalog = bundle.catalog;
    catalog.p_max = schema.p_max;

    auto in = open_input(schema.ratings_path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    if (schema.header) {
        if (std::getline(in, line)) {
            ++line_no;
            for (auto f : split(trim(line), schema.delimiter)) header.emplace_back(trim(f));
        }
    } else {
        for (const ColumnRef* c : {&schema.user_column, &schema.item_column, &schema.rating_column}) {
            if (std::holds_alternative<std::string>(*c)) {
                throw ConfigError("column names need a header row; use indices instead");
            }
        }
    }
    const std::size_t user_col = resolve_column(schema.user_column, header, "user_column");
    const std::size_t item_col = resolve_column(schema.item_column, header, "item_column");
    const std::size_t rating_col = resolve_column(schema.rating_column, header, "rating_column");
    std::optional<std::size_t> ts_col;
    if (schema.timestamp_column) ts_col = resolve_column(*schema.timestamp_column, header, "timestamp_column");
    const std::size_t needed = std::max({user_col, item_col, rating_col, ts_col.value_or(0)}) + 1;
    if (!header.empty() && needed > header.size()) throw ConfigError("schema column index beyond the header");

    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view view = trim(line);
        if (view.empty()) continue;
        const auto fields = split(view, schema.delimiter);
        if (fields.size() < needed) malformed(schema.ratings_path, line_no, "too few columns");
        const auto rating = parse_rating(fields[rating_col]);
        if (!rating) malformed(schema.ratings_path, line_no, "bad rating");
        std::optional<std::int64_t> ts;
        if (ts_col) {
            ts = parse_number<std::int64_t>(fields[*ts_col]);
            if (!ts) malformed(schema.ratings_path, line_no, "bad timestamp");
        }
        const UserId user(catalog.users.intern(trim(fields[user_col])));
        const ItemId item(catalog.items.intern(trim(fields[item_col])));
        add_rating(bundle, seen, {user, item, *rating, ts}, schema.ratings_path, line_no);
    }

    std::vector<std::set<std::uint32_t>> tags_of(catalog.item_count());
    if (schema.tags_path) {
        auto tin = open_input(*schema.tags_path);
        std::size_t tag_line = 0;
        while (std::getline(tin, line)) {
            ++tag_line;
            const std::string_view view = trim(line);
            if (view.empty()) continue;
            const auto fields = split(view, schema.delimiter);
            if (fields.size() != 2) malformed(*schema.tags_path, tag_line, "expected item,tag");
            const auto item = catalog.items.intern(trim(fields[0]));
            const auto tag = catalog.tags.intern(trim(fields[1]));
            if (item >= tags_of.size()) tags_of.resize(item + 1);
            tags_of[item].insert(tag);
        }
    }
    tags_of.resize(catalog.item_count());
    for (const auto& s : tags_of) {
        std::vector<TagId> list;
        for (auto t : s) list.push_back(TagId(t));
        catalog.item_tags.push_back(std::move(list));
    }

    if (schema.groups_path) {
        std::vector<std::string> labels(catalog.user_count(), "unknown");
        auto gin = open_input(*schema.groups_path);
        std::size_t group_line = 0;
        while (std::getline(gin, line)) {
            ++group_line;
            const std::string_view view = trim(line);
            if (view.empty()) continue;
            const auto fields = split(view, schema.delimiter);
            if (fields.size() != 2) malformed(*schema.groups_path, group_line, "expected user,label");
            const auto user = catalog.users.find(trim(fields[0]));
            if (!user) continue;  // users without ratings play no part
            labels[*user] = std::string(trim(fields[1]));
        }
        bundle.group_labels = std::move(labels);
    }
    if (schema.associations_path) {
        auto ain = open_input(*schema.associations_path);
        std::size_t assoc_line = 0;
        while (std::getline(ain, line)) {
            ++assoc_line;
            const std::string_view view = trim(line);
            if (view.empty()) continue;
            const auto fields = split(view, schema.delimiter);
            if (fields.size() != 2) malformed(*schema.associations_path, assoc_line, "expected label,label");
            bundle.group_associations.emplace_back(trim(fields[0]), trim(fields[1]));
        }
    }
    if (catalog.item_count() == 0) throw IngestionError("no ratings in " + schema.ratings_path.string());
    bundle.validate();
    return bundle;
}

// ---------------------------------------------------------------------------

void write_snapshot(const DatasetBundle& bundle, const fs::path& path) {
    json j;
    const auto& c = bundle.catalog;
    j["p_max"] = c.p_max;
    j["items"] = c.items.labels();
    j["users"] = c.users.labels();
    j["tags"] = c.tags.labels();
    json item_tags = json::array();
    for (const auto& tags : c.item_tags) {
        json row = json::array();
        for (TagId t : tags) row.push_back(t.value);
        item_tags.push_back(std::move(row));
    }
    j["item_tags"] = std::move(item_tags);
    json ratings = json::array();
    for (const auto& r : bundle.ratings) {
        ratings.push_back({r.user.value, r.item.value, r.rating, r.timestamp ? json(*r.timestamp) : json(nullptr)});
    }
    j["ratings"] = std::move(ratings);
    json profiles = json::array();
    for (const auto& p : bundle.profiles) {
        profiles.push_back({{"age", p.age ? json(*p.age) : json(nullptr)},
                            {"gender", p.gender ? json(*p.gender) : json(nullptr)},
                            {"occupation", p.occupation ? json(*p.occupation) : json(nullptr)},
                            {"zip", p.zip}});
    }
    j["profiles"] = std::move(profiles);
    j["group_labels"] = bundle.group_labels ? json(*bundle.group_labels) : json(nullptr);
    j["group_associations"] = bundle.group_associations;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write " + path.string());
    out << j.dump();
}

DatasetBundle read_snapshot(const fs::path& path) {
    auto in = open_input(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
    DatasetBundle bundle;
    try {
        auto& c = bundle.catalog;
        c.p_max = j.at("p_max").get<int>();
        for (const auto& s : j.at("items")) c.items.intern(s.get<std::string>());
        for (const auto& s : j.at("users")) c.users.intern(s.get<std::string>());
        for (const auto& s : j.at("tags")) c.tags.intern(s.get<std::string>());
        for (const auto& row : j.at("item_tags")) {
            std::vector<TagId> tags;
            for (const auto& t : row) tags.push_back(TagId(t.get<std::uint32_t>()));
            c.item_tags.push_back(std::move(tags));
        }
        for (const auto& r : j.at("ratings")) {
            RatingRecord rec{UserId(r.at(0).get<std::uint32_t>()), ItemId(r.at(1).get<std::uint32_t>()),
                             r.at(2).get<int>(), std::nullopt};
            if (!r.at(3).is_null()) rec.timestamp = r.at(3).get<std::int64_t>();
            bundle.ratings.push_back(rec);
        }
        for (const auto& p : j.at("profiles")) {
            UserProfile prof;
            if (!p.at("age").is_null()) prof.age = p.at("age").get<int>();
            if (!p.at("gender").is_null()) prof.gender = p.at("gender").get<std::string>();
            if (!p.at("occupation").is_null()) prof.occupation = p.at("occupation").get<std::string>();
            prof.zip = p.at("zip").get<std::string>();
            bundle.profiles.push_back(std::move(prof));
        }
        if (!j.at("group_labels").is_null()) bundle.group_labels = j.at("group_labels").get<std::vector<std::string>>();
        bundle.group_associations =
            j.at("group_associations").get<std::vector<std::pair<std::string, std::string>>>();
    } catch (const json::exception& e) {
        throw IngestionError(path.string() + ": malformed snapshot: " + e.what());
    }
    bundle.validate();
    return bundle;
}

// ---------------------------------------------------------------------------

std::string strategy_name(const GroupingStrategy& strategy) {
    struct Visitor {
        std::string operator()(const ByGender&) const { return "gender"; }
        std::string operator()(const ByAge&) const { return "age"; }
        std::string operator()(const ByOccupation&) const { return "occupation"; }
        std::string operator()(const RandomGroups& r) const { return "random" + std::to_string(r.count); }
        std::string operator()(const ExplicitGroups&) const { return "explicit"; }
    };
    return std::visit(Visitor{}, strategy);
}

namespace {

std::vector<Group> groups_from_labels(const std::vector<std::string>& labels,
                                      const std::vector<std::pair<std::string, std::string>>& associations) {
    std::map<std::string, std::vector<UserId>> by_label;
    for (std::size_t u = 0; u < labels.size(); ++u) by_label[labels[u]].push_back(UserId(u));
    std::vector<Group> groups;
    std::map<std::string, std::size_t> index;
    for (auto& [label, members] : by_label) {
        index[label] = groups.size();
        groups.push_back({GroupId(groups.size()), label, std::move(members), {}});
    }
    for (const auto& [a, b] : associations) {
        const auto ia = index.find(a);
        const auto ib = index.find(b);
        if (ia == index.end() || ib == index.end() || ia->second == ib->second) continue;
        auto& la = groups[ia->second].associates;
        auto& lb = groups[ib->second].associates;
        la.push_back(GroupId(ib->second));
        lb.push_back(GroupId(ia->second));
    }
    for (auto& g : groups) {
        std::sort(g.associates.begin(), g.associates.end());
        g.associates.erase(std::unique(g.associates.begin(), g.associates.end()), g.associates.end());
    }
    return groups;
}

}  // namespace

std::vector<Group> group_users(const DatasetBundle& bundle, const GroupingStrategy& strategy) {
    const std::size_t users = bundle.catalog.user_count();
    if (users == 0) throw StrategyError("dataset has no users");

    if (const auto* random = std::get_if<RandomGroups>(&strategy)) {
        if (random->count < 1 || random->count > users) {
            throw StrategyError("random grouping needs 1 <= count <= user count");
        }
        std::vector<std::uint32_t> order(users);
        for (std::size_t u = 0; u < users; ++u) order[u] = static_cast<std::uint32_t>(u);
        Rng rng(random->seed);
        rng.shuffle(order.begin(), order.end());
        std::vector<Group> groups(random->count);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            groups[g].id = GroupId(g);
            groups[g].label = "random-" + std::to_string(g + 1);
        }
        for (std::size_t i = 0; i < users; ++i) groups[i % random->count].members.push_back(UserId(order[i]));
        for (auto& g : groups) std::sort(g.members.begin(), g.members.end());
        return groups;
    }

    if (std::holds_alternative<ExplicitGroups>(strategy)) {
        if (!bundle.group_labels) throw StrategyError("explicit grouping requested but the dataset has no group labels");
        return groups_from_labels(*bundle.group_labels, bundle.group_associations);
    }

    if (!bundle.has_profiles()) {
        throw StrategyError("grouping by " + strategy_name(strategy) + " needs user profiles");
    }
    std::vector<std::string> labels(users, "unknown");
    for (std::size_t u = 0; u < users; ++u) {
        const auto& p = bundle.profiles[u];
        if (std::holds_alternative<ByGender>(strategy) && p.gender && !p.gender->empty()) {
            labels[u] = *p.gender;
        } else if (std::holds_alternative<ByAge>(strategy) && p.age) {
            labels[u] = age_bucket(*p.age);
        } else if (std::holds_alternative<ByOccupation>(strategy) && p.occupation && !p.occupation->empty()) {
            labels[u] = *p.occupation;
        }
    }
    return groups_from_labels(labels, {});
}

SplitPlan kfold_split(const DatasetBundle& bundle, std::size_t fold_count, std::uint64_t seed) {
    if (fold_count < 2) throw SplitError("fold_count must be >= 2");
    const std::size_t total = bundle.ratings.size();
    if (total < fold_count) {
        throw SplitError("cannot split " + std::to_string(total) + " ratings into " + std::to_string(fold_count) +
                         " folds");
    }
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());

    std::vector<std::size_t> fold_of(total);
    SplitPlan plan{fold_count, seed, std::vector<Fold>(fold_count)};
    for (std::size_t f = 0; f < fold_count; ++f) {
        const std::size_t begin = f * total / fold_count;
        const std::size_t end = (f + 1) * total / fold_count;
        for (std::size_t i = begin; i < end; ++i) fold_of[order[i]] = f;
    }
    for (std::size_t idx = 0; idx < total; ++idx) {
        const std::size_t f = fold_of[idx];
        for (std::size_t g = 0; g < fold_count; ++g) {
            if (g == f) {
                plan.folds[g].held_out.push_back(idx);
                if (bundle.ratings[idx].rating == bundle.catalog.p_max) plan.folds[g].test.push_back(idx);
            } else {
                plan.folds[g].train.push_back(idx);
            }
        }
    }
    return plan;
}

}  // namespace grouprec
