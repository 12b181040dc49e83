#include "grouprec/model.hpp"

#include <algorithm>
#include <bit>
#include <string>
#include <unordered_set>

#include "grouprec/error.hpp"

namespace grouprec {

std::uint32_t IdMap::intern(std::string_view label) {
    const std::string key(label);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(labels_.size());
    labels_.push_back(key);
    index_.emplace(key, id);
    return id;
}

std::optional<std::uint32_t> IdMap::find(std::string_view label) const {
    if (auto it = index_.find(std::string(label)); it != index_.end()) return it->second;
    return std::nullopt;
}

bool Catalog::has_tag(ItemId item, TagId tag) const {
    const auto& tags_of = item_tags.at(item.index());
    return std::binary_search(tags_of.begin(), tags_of.end(), tag);
}

void Catalog::validate() const {
    if (item_count() == 0) throw DataIntegrityError("catalog has no items");
    if (item_tags.size() != item_count()) {
        throw DataIntegrityError("tag assignments cover " + std::to_string(item_tags.size()) +
                                 " items, catalog has " + std::to_string(item_count()));
    }
    for (std::size_t i = 0; i < item_tags.size(); ++i) {
        const auto& tags_of = item_tags[i];
        if (!std::is_sorted(tags_of.begin(), tags_of.end()) ||
            std::adjacent_find(tags_of.begin(), tags_of.end()) != tags_of.end()) {
            throw DataIntegrityError("tag list of item " + items.label(i) + " not sorted/unique");
        }
        for (TagId t : tags_of) {
            if (t.index() >= tag_count()) {
                throw DataIntegrityError("item " + items.label(i) + " references unknown tag");
            }
        }
    }
    if (p_max < 1) throw DataIntegrityError("p_max must be >= 1");
}

void validate_groups(std::span<const Group> groups) {
    std::unordered_set<std::uint64_t> edges;
    for (const auto& g : groups) {
        if (g.members.empty()) throw DataIntegrityError("group '" + g.label + "' is empty");
        for (GroupId a : g.associates) {
            if (a == g.id) throw DataIntegrityError("group '" + g.label + "' is its own associate");
            edges.insert((std::uint64_t{g.id.value} << 32) | a.value);
        }
    }
    for (std::uint64_t e : edges) {
        const std::uint64_t reverse = (e << 32) | (e >> 32);
        if (!edges.contains(reverse)) throw DataIntegrityError("group association is not symmetric");
    }
}

PairwiseComparisonMatrix::PairwiseComparisonMatrix(UserId owner, std::size_t n)
    : owner_(owner), n_(n), words_((pair_count() + 31) / 32, 0) {}

std::size_t PairwiseComparisonMatrix::pair_index(ItemId lo, ItemId hi) const {
    const std::size_t x = lo.index();
    const std::size_t y = hi.index();
    return x * n_ - x * (x + 1) / 2 + (y - x - 1);
}

bool PairwiseComparisonMatrix::get(ItemId x, ItemId y) const {
    if (x == y) return false;
    if (x < y) return (pair_state(pair_index(x, y)) & 1u) != 0;
    return (pair_state(pair_index(y, x)) & 2u) != 0;
}

void PairwiseComparisonMatrix::set(ItemId x, ItemId y, bool value) {
    if (x == y || x.index() >= n_ || y.index() >= n_) {
        throw DomainError("pairwise entry (" + std::to_string(x.value) + ", " +
                          std::to_string(y.value) + ") outside the off-diagonal of a " +
                          std::to_string(n_) + "-item matrix");
    }
    const bool forward = x < y;
    const std::size_t pair = forward ? pair_index(x, y) : pair_index(y, x);
    const std::uint64_t mask = std::uint64_t{forward ? 1u : 2u} << ((pair & 31) * 2);
    if (value) {
        words_[pair >> 5] |= mask;
    } else {
        words_[pair >> 5] &= ~mask;
    }
}

void PairwiseComparisonMatrix::set_pair_state(std::size_t pair, unsigned state) {
    const unsigned shift = static_cast<unsigned>((pair & 31) * 2);
    auto& w = words_[pair >> 5];
    w = (w & ~(std::uint64_t{3} << shift)) | (std::uint64_t{state & 3u} << shift);
}

std::size_t PairwiseComparisonMatrix::position(OrderedPair entry) const {
    const std::size_t x = entry.x.index();
    const std::size_t y = entry.y.index();
    return x * (n_ - 1) + (y < x ? y : y - 1);
}

OrderedPair PairwiseComparisonMatrix::entry_at(std::size_t pos) const {
    const std::size_t x = pos / (n_ - 1);
    const std::size_t j = pos % (n_ - 1);
    return {ItemId(x), ItemId(j < x ? j : j + 1)};
}

bool PairwiseComparisonMatrix::get_position(std::size_t pos) const {
    const auto e = entry_at(pos);
    return get(e.x, e.y);
}

void PairwiseComparisonMatrix::set_position(std::size_t pos, bool value) {
    const auto e = entry_at(pos);
    set(e.x, e.y, value);
}

std::uint64_t PairwiseComparisonMatrix::ones() const {
    std::uint64_t total = 0;
    for (auto w : words_) total += static_cast<std::uint64_t>(std::popcount(w));
    return total;
}

namespace {
constexpr std::uint64_t kLowBits = 0x5555555555555555ULL;
}

std::uint64_t PairwiseComparisonMatrix::asymmetric_pairs() const {
    std::uint64_t total = 0;
    for (auto w : words_) total += static_cast<std::uint64_t>(std::popcount((w ^ (w >> 1)) & kLowBits));
    return total;
}

std::uint64_t PairwiseComparisonMatrix::symmetric_pairs() const {
    std::uint64_t total = 0;
    for (auto w : words_) total += static_cast<std::uint64_t>(std::popcount(w & (w >> 1) & kLowBits));
    return total;
}

void validate_ranking(const PartialRanking& ranking, std::size_t item_count) {
    std::vector<bool> seen(item_count, false);
    for (ItemId item : ranking) {
        if (item.index() >= item_count) {
            throw DataIntegrityError("ranking references unknown item " + std::to_string(item.value));
        }
        if (seen[item.index()]) {
            throw DataIntegrityError("duplicate item " + std::to_string(item.value) + " in ranking");
        }
        seen[item.index()] = true;
    }
}

PairwiseComparisonMatrix pairwise_from_ratings(UserId owner, std::span<const RatingRecord> ratings,
                                               const Catalog& catalog) {
    const std::size_t n = catalog.item_count();
    std::vector<int> rating_of(n, 0);
    for (const auto& r : ratings) {
        if (r.user != owner) {
            throw DataIntegrityError("rating for user " + std::to_string(r.user.value) +
                                     " passed as history of user " + std::to_string(owner.value));
        }
        if (r.item.index() >= n) {
            throw DataIntegrityError("rating references unknown item " + std::to_string(r.item.value));
        }
        if (r.rating < 1 || r.rating > catalog.p_max) {
            throw DataIntegrityError("rating " + std::to_string(r.rating) + " outside 1.." +
                                     std::to_string(catalog.p_max));
        }
        if (rating_of[r.item.index()] != 0) {
            throw DataIntegrityError("duplicate rating of item " + catalog.items.label(r.item.index()) +
                                     " by user " + std::to_string(owner.value));
        }
        rating_of[r.item.index()] = r.rating;
    }

    std::vector<std::uint32_t> rated;
    rated.reserve(ratings.size());
    for (const auto& r : ratings) rated.push_back(r.item.value);
    std::sort(rated.begin(), rated.end());

    PairwiseComparisonMatrix m(owner, n);
    for (std::size_t a = 0; a < rated.size(); ++a) {
        for (std::size_t b = a + 1; b < rated.size(); ++b) {
            const ItemId x(rated[a]);
            const ItemId y(rated[b]);
            const int rx = rating_of[x.index()];
            const int ry = rating_of[y.index()];
            if (rx > ry) {
                m.set(x, y, true);
            } else if (ry > rx) {
                m.set(y, x, true);
            }
        }
    }
    return m;
}

PairwiseComparisonMatrix pairwise_from_ranking(UserId owner, const PartialRanking& ranking,
                                               const Catalog& catalog) {
    validate_ranking(ranking, catalog.item_count());
    PairwiseComparisonMatrix m(owner, catalog.item_count());
    for (std::size_t a = 0; a < ranking.size(); ++a) {
        for (std::size_t b = a + 1; b < ranking.size(); ++b) m.set(ranking[a], ranking[b], true);
    }
    return m;
}

}  // namespace grouprec
