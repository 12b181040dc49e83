#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "grouprec/data.hpp"
#include "grouprec/error.hpp"
#include "support.hpp"

using namespace grouprec;
namespace fs = std::filesystem;

namespace {

using support::TempDir;
using support::write_movielens;
const char* const kData = support::kMovieLensData;

DatasetBundle toy_bundle(std::size_t users, std::size_t ratings_per_user, int p_max = 5) {
    DatasetBundle b;
    b.catalog.p_max = p_max;
    for (std::size_t i = 0; i < ratings_per_user; ++i) b.catalog.items.intern("i" + std::to_string(i));
    b.catalog.item_tags.resize(ratings_per_user);
    for (std::size_t u = 0; u < users; ++u) {
        b.catalog.users.intern("u" + std::to_string(u));
        for (std::size_t i = 0; i < ratings_per_user; ++i) {
            b.ratings.push_back({UserId(u), ItemId(i), 1 + static_cast<int>((u + i) % p_max), {}});
        }
    }
    return b;
}

}  // namespace

TEST_CASE("movielens loader") {
    TempDir dir;
    write_movielens(dir, kData);
    const auto b = load_movielens(dir.path());
    CHECK(b.catalog.item_count() == 3);
    CHECK(b.catalog.user_count() == 3);
    CHECK(b.ratings.size() == 4);
    CHECK(b.catalog.tag_count() == 19);
    CHECK(b.catalog.item_tags[0] == std::vector<TagId>{TagId(3)});
    CHECK(b.catalog.tags.label(3) == "Animation");
    REQUIRE(b.has_profiles());
    CHECK(b.profiles[1].gender == "F");
    CHECK(b.profiles[1].age == 53);
    CHECK(b.profiles[2].occupation == "writer");
    CHECK(b.ratings[0].timestamp == 881250949);
    CHECK(b.ratings[3].rating == 5);
    CHECK_NOTHROW(b.validate());
}

TEST_CASE("movielens loader rejects bad input") {
    SUBCASE("rating outside the scale") {
        TempDir dir;
        write_movielens(dir, "1\t1\t7\t1\n");
        CHECK_THROWS_AS(load_movielens(dir.path()), DataIntegrityError);
    }
    SUBCASE("duplicate rating") {
        TempDir dir;
        write_movielens(dir, "1\t1\t4\t1\n1\t1\t3\t2\n");
        CHECK_THROWS_AS(load_movielens(dir.path()), DataIntegrityError);
    }
    SUBCASE("malformed line") {
        TempDir dir;
        write_movielens(dir, "1\t1\n");
        CHECK_THROWS_AS(load_movielens(dir.path()), IngestionError);
    }
    SUBCASE("missing files") {
        TempDir dir;
        CHECK_THROWS_AS(load_movielens(dir.path()), IngestionError);
    }
}

TEST_CASE("snapshot round trip") {
    TempDir dir;
    write_movielens(dir, kData);
    auto b = load_movielens(dir.path());
    b.group_labels = std::vector<std::string>{"a", "b", "a"};
    b.group_associations = {{"a", "b"}};
    const auto path = dir.path() / "snap.json";
    write_snapshot(b, path);
    const auto r = read_snapshot(path);
    CHECK(r.catalog.items.labels() == b.catalog.items.labels());
    CHECK(r.catalog.users.labels() == b.catalog.users.labels());
    CHECK(r.catalog.tags.labels() == b.catalog.tags.labels());
    CHECK(r.catalog.item_tags == b.catalog.item_tags);
    CHECK(r.catalog.p_max == b.catalog.p_max);
    REQUIRE(r.ratings.size() == b.ratings.size());
    for (std::size_t i = 0; i < r.ratings.size(); ++i) {
        CHECK(r.ratings[i].user == b.ratings[i].user);
        CHECK(r.ratings[i].item == b.ratings[i].item);
        CHECK(r.ratings[i].rating == b.ratings[i].rating);
        CHECK(r.ratings[i].timestamp == b.ratings[i].timestamp);
    }
    REQUIRE(r.profiles.size() == b.profiles.size());
    CHECK(r.profiles[2].occupation == b.profiles[2].occupation);
    CHECK(r.profiles[1].age == b.profiles[1].age);
    CHECK(r.group_labels == b.group_labels);
    CHECK(r.group_associations == b.group_associations);

    write_snapshot(r, dir.path() / "again.json");
    std::ifstream a(path), c(dir.path() / "again.json");
    CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(c), {}));
}

TEST_CASE("generic schema") {
    TempDir dir;
    dir.write("r.tsv", "who\twhat\tstars\nalice\tx\t3\nbob\tx\t1\nbob\ty\t3\ncarol\tz\t2\n");
    dir.write("tags.tsv", "x\tred\ny\tred\ny\tblue\n");
    dir.write("groups.tsv", "alice\tteam1\nbob\tteam2\n");
    dir.write("assoc.tsv", "team1\tteam2\n");
    const auto schema = parse_generic_schema(R"({"ratings": "r.tsv", "delimiter": "\\t", "header": true,
        "user_column": "who", "item_column": "what", "rating_column": "stars", "p_max": 3,
        "tags": "tags.tsv", "groups": "groups.tsv", "associations": "assoc.tsv"})",
                                             dir.path());
    CHECK(schema.delimiter == '\t');
    const auto b = load_generic(schema);
    CHECK(b.catalog.user_count() == 3);
    CHECK(b.catalog.item_count() == 3);
    CHECK(b.catalog.p_max == 3);
    CHECK(b.ratings.size() == 4);
    CHECK(b.catalog.tag_count() == 2);
    CHECK(b.catalog.item_tags[1].size() == 2);
    REQUIRE(b.group_labels);
    CHECK(*b.group_labels == std::vector<std::string>{"team1", "team2", "unknown"});

    const auto groups = group_users(b, ExplicitGroups{});
    REQUIRE(groups.size() == 3);
    CHECK(groups[0].label == "team1");
    CHECK(groups[0].associates == std::vector<GroupId>{GroupId(1)});
    CHECK(groups[1].associates == std::vector<GroupId>{GroupId(0)});
    CHECK(groups[2].label == "unknown");
    CHECK_NOTHROW(validate_groups(groups));

    CHECK_THROWS_AS(parse_generic_schema(R"({"ratings": "r.tsv", "colour": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_generic_schema(R"({"delimiter": ","})"), ConfigError);

    dir.write("bad.csv", "a,x,4\n");
    const auto bad = parse_generic_schema(R"({"ratings": "bad.csv", "header": false, "p_max": 3})", dir.path());
    CHECK_THROWS_AS(load_generic(bad), DataIntegrityError);
}

TEST_CASE("grouping strategies") {
    TempDir dir;
    write_movielens(dir, kData);
    const auto b = load_movielens(dir.path());

    const auto gender = group_users(b, ByGender{});
    REQUIRE(gender.size() == 2);
    CHECK(gender[0].label == "F");
    CHECK(gender[1].members == std::vector<UserId>{UserId(0), UserId(2)});

    const auto age = group_users(b, ByAge{});
    CHECK(age.size() == 2);
    const auto occupation = group_users(b, ByOccupation{});
    CHECK(occupation.size() == 3);

    auto missing = b;
    missing.profiles[1].occupation.reset();
    const auto with_unknown = group_users(missing, ByOccupation{});
    REQUIRE(with_unknown.size() == 3);
    CHECK(with_unknown[1].label == "unknown");
    CHECK(with_unknown[1].members == std::vector<UserId>{UserId(1)});

    auto bare = b;
    bare.profiles.clear();
    CHECK_THROWS_AS(group_users(bare, ByGender{}), StrategyError);
    CHECK_THROWS_AS(group_users(b, ExplicitGroups{}), StrategyError);
    CHECK_THROWS_AS(group_users(b, RandomGroups{4, 1}), StrategyError);
}

TEST_CASE("random groups partition users deterministically") {
    const auto b = toy_bundle(23, 2);
    const auto a = group_users(b, RandomGroups{4, 9});
    const auto again = group_users(b, RandomGroups{4, 9});
    const auto other = group_users(b, RandomGroups{4, 10});
    REQUIRE(a.size() == 4);
    std::set<std::uint32_t> seen;
    std::size_t smallest = 100, largest = 0;
    for (std::size_t g = 0; g < a.size(); ++g) {
        CHECK(a[g].members == again[g].members);
        CHECK(a[g].label == "random-" + std::to_string(g + 1));
        smallest = std::min(smallest, a[g].size());
        largest = std::max(largest, a[g].size());
        for (auto u : a[g].members) CHECK(seen.insert(u.value).second);
    }
    CHECK(seen.size() == 23);
    CHECK(largest - smallest <= 1);
    bool differs = false;
    for (std::size_t g = 0; g < a.size(); ++g) differs |= a[g].members != other[g].members;
    CHECK(differs);
}

TEST_CASE("k-fold split") {
    const auto b = toy_bundle(2, 5);
    const auto plan = kfold_split(b, 5, 42);
    REQUIRE(plan.folds.size() == 5);
    std::set<std::size_t> all;
    for (const auto& f : plan.folds) {
        CHECK(f.held_out.size() == 2);
        CHECK(f.train.size() == 8);
        for (auto i : f.held_out) CHECK(all.insert(i).second);
        for (auto i : f.test) {
            CHECK(b.ratings[i].rating == b.catalog.p_max);
            CHECK(std::find(f.held_out.begin(), f.held_out.end(), i) != f.held_out.end());
        }
        std::size_t fives = 0;
        for (auto i : f.held_out) fives += b.ratings[i].rating == 5;
        CHECK(f.test.size() == fives);
        for (auto i : f.train) CHECK(std::find(f.held_out.begin(), f.held_out.end(), i) == f.held_out.end());
    }
    CHECK(all.size() == 10);

    const auto same = kfold_split(b, 5, 42);
    for (std::size_t f = 0; f < 5; ++f) CHECK(same.folds[f].held_out == plan.folds[f].held_out);

    CHECK_THROWS_AS(kfold_split(b, 1, 42), SplitError);
    CHECK_THROWS_AS(kfold_split(b, 11, 42), SplitError);
}
