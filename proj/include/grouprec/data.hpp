#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "grouprec/model.hpp"
#include "grouprec/recgraph.hpp"

namespace grouprec {

struct DatasetBundle {
    Catalog catalog;
    std::vector<RatingRecord> ratings;
    /// One entry per user when present.
    std::vector<UserProfile> profiles;
    /// Explicit group label per user, when supplied with the dataset.
    std::optional<std::vector<std::string>> group_labels;
    /// Symmetric associations between explicit group labels.
    std::vector<std::pair<std::string, std::string>> group_associations;

    bool has_profiles() const { return !profiles.empty(); }
    /// Throws DataIntegrityError when an invariant is violated.
    void validate() const;
};

/// Reads the ML-100K layout: u.data (tab separated user, item, rating,
/// timestamp), u.item (pipe separated, last 19 fields are genre flags) and
/// u.user (id|age|gender|occupation|zip).
DatasetBundle load_movielens(const std::filesystem::path& directory);

/// Single-file JSON snapshot of a bundle; read_snapshot(write_snapshot(b)) == b.
void write_snapshot(const DatasetBundle& bundle, const std::filesystem::path& path);
DatasetBundle read_snapshot(const std::filesystem::path& path);

/// Column reference by header name or zero-based index.
using ColumnRef = std::variant<std::string, std::size_t>;

struct GenericSchema {
    std::filesystem::path ratings_path;
    char delimiter = ',';
    bool header = true;
    ColumnRef user_column = std::size_t{0};
    ColumnRef item_column = std::size_t{1};
    ColumnRef rating_column = std::size_t{2};
    std::optional<ColumnRef> timestamp_column;
    int p_max = 5;
    /// user,label lines (same delimiter, no header).
    std::optional<std::filesystem::path> groups_path;
    /// item,tag lines.
    std::optional<std::filesystem::path> tags_path;
    /// label,label lines of associated groups.
    std::optional<std::filesystem::path> associations_path;
};

/// Parses a schema from JSON text; unknown keys are rejected. Relative paths
/// resolve against `base`.
GenericSchema parse_generic_schema(const std::string& json_text, const std::filesystem::path& base = {});

DatasetBundle load_generic(const GenericSchema& schema);

struct ByGender {};
struct ByAge {};
struct ByOccupation {};
struct RandomGroups {
    std::size_t count = 2;
    std::uint64_t seed = 0;
};
struct ExplicitGroups {};

using GroupingStrategy = std::variant<ByGender, ByAge, ByOccupation, RandomGroups, ExplicitGroups>;

std::string strategy_name(const GroupingStrategy& strategy);

/// Partitions users; every user lands in exactly one group. Profile-based
/// strategies put users missing the attribute into an "unknown" group.
/// Groups are ordered by label (random groups by index).
std::vector<Group> group_users(const DatasetBundle& bundle, const GroupingStrategy& strategy);

struct Fold {
    /// All rating indices assigned to this fold.
    std::vector<std::size_t> held_out;
    /// held_out restricted to ratings equal to p_max.
    std::vector<std::size_t> test;
    /// Ratings of every other fold.
    std::vector<std::size_t> train;
};

struct SplitPlan {
    std::size_t fold_count = 0;
    std::uint64_t seed = 0;
    std::vector<Fold> folds;
};

SplitPlan kfold_split(const DatasetBundle& bundle, std::size_t fold_count, std::uint64_t seed);

}  // namespace grouprec
