#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace grouprec {

/// Dense index assigned at ingestion. The tag type keeps item, user, group
/// and tag namespaces from being mixed up.
template <class Tag>
struct Id {
    std::uint32_t value = 0;

    constexpr Id() = default;
    constexpr explicit Id(std::uint32_t v) : value(v) {}
    constexpr explicit Id(std::size_t v) : value(static_cast<std::uint32_t>(v)) {}
    constexpr explicit Id(int v) : value(static_cast<std::uint32_t>(v)) {}

    constexpr std::size_t index() const { return value; }
    constexpr auto operator<=>(const Id&) const = default;
};

using ItemId = Id<struct ItemTag>;
using UserId = Id<struct UserTag>;
using GroupId = Id<struct GroupTag>;
using TagId = Id<struct TagTag>;

/// Bidirectional map between original dataset identifiers and dense indices.
class IdMap {
public:
    /// Returns the dense index for `label`, assigning the next one if unseen.
    std::uint32_t intern(std::string_view label);
    std::optional<std::uint32_t> find(std::string_view label) const;
    const std::string& label(std::size_t index) const { return labels_.at(index); }
    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

struct Catalog {
    IdMap items;
    IdMap users;
    IdMap tags;
    /// Sorted tag ids per item; the sparse form of the binary vector T_i.
    std::vector<std::vector<TagId>> item_tags;
    int p_max = 5;

    std::size_t item_count() const { return items.size(); }
    std::size_t user_count() const { return users.size(); }
    std::size_t tag_count() const { return tags.size(); }
    bool has_tag(ItemId item, TagId tag) const;

    /// Checks the catalog invariants; throws DataIntegrityError.
    void validate() const;
};

struct RatingRecord {
    UserId user;
    ItemId item;
    int rating = 0;
    std::optional<std::int64_t> timestamp;
};

struct Group {
    GroupId id;
    std::string label;
    std::vector<UserId> members;
    std::vector<GroupId> associates;

    std::size_t size() const { return members.size(); }
};

/// Throws DataIntegrityError unless every group is nonempty, no group is its
/// own associate and association is symmetric.
void validate_groups(std::span<const Group> groups);

struct OrderedPair {
    ItemId x;
    ItemId y;
    auto operator<=>(const OrderedPair&) const = default;
};

/// Per-user n x n 0/1 matrix of "x preferred to y" flags.
///
/// Entries are packed two bits per unordered pair {x < y}: bit 0 holds M_xy,
/// bit 1 holds M_yx. Pairs are laid out row-major over the strict upper
/// triangle, so pair_index(x, y) for x < y is x*n - x(x+1)/2 + (y - x - 1).
class PairwiseComparisonMatrix {
public:
    PairwiseComparisonMatrix() = default;
    PairwiseComparisonMatrix(UserId owner, std::size_t n);

    UserId owner() const { return owner_; }
    std::size_t size() const { return n_; }
    std::size_t pair_count() const { return n_ < 2 ? 0 : n_ * (n_ - 1) / 2; }
    /// Number of ordered off-diagonal positions, n(n-1).
    std::size_t position_count() const { return 2 * pair_count(); }

    bool get(ItemId x, ItemId y) const;
    void set(ItemId x, ItemId y, bool value);

    /// Ordered position index in [0, n(n-1)): row x, skipping the diagonal.
    std::size_t position(OrderedPair entry) const;
    OrderedPair entry_at(std::size_t position) const;
    bool get_position(std::size_t position) const;
    void set_position(std::size_t position, bool value);

    std::size_t pair_index(ItemId lo, ItemId hi) const;
    /// Two-bit state of an unordered pair; see class comment.
    unsigned pair_state(std::size_t pair) const {
        return static_cast<unsigned>((words_[pair >> 5] >> ((pair & 31) * 2)) & 3u);
    }
    void set_pair_state(std::size_t pair, unsigned state);

    std::uint64_t ones() const;
    /// Unordered pairs with exactly one of M_xy, M_yx set.
    std::uint64_t asymmetric_pairs() const;
    /// Unordered pairs with both entries set.
    std::uint64_t symmetric_pairs() const;

    /// Calls f(x, y) for every set entry, in pair-index order.
    template <class F>
    void for_each_one(F&& f) const;

    std::span<const std::uint64_t> words() const { return words_; }
    std::span<std::uint64_t> words() { return words_; }

    bool operator==(const PairwiseComparisonMatrix&) const = default;

private:
    UserId owner_;
    std::size_t n_ = 0;
    std::vector<std::uint64_t> words_;
};

using PartialRanking = std::vector<ItemId>;

/// Throws DataIntegrityError on duplicates or ids outside the catalog.
void validate_ranking(const PartialRanking& ranking, std::size_t item_count);

/// M_xy = 1 iff both items are rated and r_x > r_y.
PairwiseComparisonMatrix pairwise_from_ratings(UserId owner, std::span<const RatingRecord> ratings,
                                               const Catalog& catalog);

/// M_xy = 1 iff x precedes y in the ranking.
PairwiseComparisonMatrix pairwise_from_ranking(UserId owner, const PartialRanking& ranking,
                                               const Catalog& catalog);

// ---------------------------------------------------------------------------

template <class F>
void PairwiseComparisonMatrix::for_each_one(F&& f) const {
    if (n_ < 2) return;
    std::size_t row = 0;
    std::size_t row_start = 0;        // pair index of (row, row + 1)
    std::size_t row_len = n_ - 1;     // pairs in this row
    for (std::size_t w = 0; w < words_.size(); ++w) {
        std::uint64_t bits = words_[w];
        while (bits != 0) {
            const auto bit = static_cast<std::size_t>(__builtin_ctzll(bits));
            bits &= bits - 1;
            const std::size_t pair = w * 32 + bit / 2;
            while (pair >= row_start + row_len) {
                row_start += row_len;
                --row_len;
                ++row;
            }
            const ItemId lo(row);
            const ItemId hi(row + 1 + (pair - row_start));
            if ((bit & 1) == 0) {
                f(lo, hi);
            } else {
                f(hi, lo);
            }
        }
    }
}

}  // namespace grouprec

template <class Tag>
struct std::hash<grouprec::Id<Tag>> {
    std::size_t operator()(const grouprec::Id<Tag>& id) const noexcept {
        return std::hash<std::uint32_t>{}(id.value);
    }
};
