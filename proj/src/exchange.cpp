#include "grouprec/exchange.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "grouprec/error.hpp"

namespace grouprec {

namespace {

constexpr std::uint64_t kLowBits = 0x5555555555555555ULL;

}  // namespace

std::uint64_t padding_count(const PairwiseComparisonMatrix& m) {
    const std::uint64_t pairs = m.pair_count();
    const std::uint64_t compared = m.asymmetric_pairs();
    return compared >= pairs ? 0 : (pairs - compared) / 2;
}

PaddingResult pad_matrix(PairwiseComparisonMatrix m, Rng& rng) {
    if (m.symmetric_pairs() != 0) {
        throw DomainError("pad_matrix expects a matrix without symmetric pairs");
    }
    const std::uint64_t p = padding_count(m);
    const std::uint64_t zero_pairs = m.pair_count() - m.asymmetric_pairs();
    if (zero_pairs < p) {
        throw InternalError("not enough empty pairs to pad (" + std::to_string(zero_pairs) + " < " +
                            std::to_string(p) + ")");
    }

    auto words = m.words();
    const std::size_t pair_count = m.pair_count();
    if (zero_pairs * 8 < pair_count) {
        // Few empty pairs: selection sampling, each taken with probability
        // needed / remaining.
        std::uint64_t needed = p;
        std::uint64_t remaining = zero_pairs;
        for (std::size_t pair = 0; pair < pair_count && needed > 0; ++pair) {
            if (m.pair_state(pair) != 0) continue;
            if (rng.below(remaining) < needed) {
                m.set_pair_state(pair, 3);
                --needed;
            }
            --remaining;
        }
        return {std::move(m), p};
    }

    // Each empty pair is taken with probability 1/2 using one random word per
    // 32 pairs; the count is then corrected by adding or dropping uniformly
    // chosen pairs. Conditioned on its size the coin-flip subset is uniform,
    // so the corrected subset is a uniform p-subset of the empty pairs.
    std::uint64_t taken = 0;
    for (std::size_t w = 0; w < words.size(); ++w) {
        const std::size_t limit = std::min<std::size_t>(32, pair_count - w * 32);
        const std::uint64_t valid = limit == 32 ? kLowBits : kLowBits & ((std::uint64_t{1} << (2 * limit)) - 1);
        const std::uint64_t empty = ~(words[w] | (words[w] >> 1)) & valid;
        const std::uint64_t pick = empty & rng.next();
        words[w] |= pick | (pick << 1);
        taken += static_cast<std::uint64_t>(__builtin_popcountll(pick));
    }
    // Before padding no pair is symmetric, so state 3 marks a padded pair.
    while (taken > p) {
        const std::size_t pair = rng.below(pair_count);
        if (m.pair_state(pair) == 3) {
            m.set_pair_state(pair, 0);
            --taken;
        }
    }
    while (taken < p) {
        const std::size_t pair = rng.below(pair_count);
        if (m.pair_state(pair) == 0) {
            m.set_pair_state(pair, 3);
            ++taken;
        }
    }
    return {std::move(m), p};
}

PairwiseComparisonMatrix cleanup(PairwiseComparisonMatrix m) {
    for (auto& w : m.words()) {
        const std::uint64_t both = w & (w >> 1) & kLowBits;
        w &= ~(both | (both << 1));
    }
    return m;
}

std::uint64_t total_ones(std::span<const PairwiseComparisonMatrix> matrices) {
    std::uint64_t total = 0;
    for (const auto& m : matrices) total += m.ones();
    return total;
}

void ExchangeConfig::validate() const {
    if (!(t_threshold >= 0.0) || !std::isfinite(t_threshold)) {
        throw ConfigError("t_threshold must be a finite value >= 0");
    }
    if (group.members.size() < 2) {
        throw ConfigError("exchange needs a group of at least 2 members, got " +
                          std::to_string(group.members.size()));
    }
}

ExchangeResult simulate_exchange(std::vector<PairwiseComparisonMatrix> matrices,
                                 const ExchangeConfig& config) {
    config.validate();
    const auto& members = config.group.members;
    const std::size_t group_size = members.size();
    if (matrices.size() != group_size) {
        throw ConfigError("expected one matrix per group member (" + std::to_string(group_size) +
                          "), got " + std::to_string(matrices.size()));
    }
    const std::size_t n = matrices.front().size();
    for (std::size_t i = 0; i < group_size; ++i) {
        if (matrices[i].owner() != members[i]) {
            throw ConfigError("matrix " + std::to_string(i) + " is not owned by group member " +
                              std::to_string(members[i].value));
        }
        if (matrices[i].size() != n) throw ConfigError("matrices disagree on the item count");
    }
    if (n < 2) throw ConfigError("exchange needs at least 2 items");

    ExchangeResult result;
    const std::size_t positions = matrices.front().position_count();
    if (config.track_provenance) {
        Provenance prov;
        prov.origin.reserve(group_size);
        for (std::size_t i = 0; i < group_size; ++i) {
            prov.origin.emplace_back(positions, static_cast<std::uint32_t>(i));
        }
        result.provenance = std::move(prov);
    }

    Rng rng(config.seed);
    const auto rate = static_cast<double>(group_size);
    const std::uint64_t max_ticks = config.tick_limit.value_or(std::numeric_limits<std::uint64_t>::max());
    double clock = 0.0;
    for (std::uint64_t tick = 0; tick < max_ticks; ++tick) {
        clock += rng.exponential(rate);
        if (clock > config.t_threshold) break;
        const auto initiator = static_cast<std::size_t>(rng.below(group_size));
        auto partner = static_cast<std::size_t>(rng.below(group_size - 1));
        if (partner >= initiator) ++partner;
        const auto pos = static_cast<std::size_t>(rng.below(positions));

        auto& a = matrices[initiator];
        auto& b = matrices[partner];
        const bool va = a.get_position(pos);
        const bool vb = b.get_position(pos);
        if (va != vb) {
            a.set_position(pos, vb);
            b.set_position(pos, va);
        }
        if (result.provenance) {
            auto& origin = result.provenance->origin;
            std::swap(origin[initiator][pos], origin[partner][pos]);
        }
        result.events.push_back({clock, members[initiator], members[partner], a.entry_at(pos)});
    }
    result.matrices = std::move(matrices);
    return result;
}

// ---------------------------------------------------------------------------

double TransitionModel::stay_probability() const {
    return 1.0 - (2.0 / static_cast<double>(group_size)) / static_cast<double>(n_prime);
}

double TransitionModel::move_probability() const {
    const auto N = static_cast<double>(group_size);
    return (1.0 / static_cast<double>(n_prime)) * (1.0 / N) * (2.0 / (N - 1.0));
}

double TransitionModel::second_eigenvalue() const {
    return 1.0 - 2.0 / (static_cast<double>(n_prime) * (static_cast<double>(group_size) - 1.0));
}

TransitionModel transition_model(std::size_t group_size, std::size_t item_count) {
    if (group_size < 2) throw DomainError("transition model needs N >= 2");
    if (item_count < 2) throw DomainError("transition model needs n >= 2");
    TransitionModel model;
    model.group_size = group_size;
    model.n_prime = static_cast<std::uint64_t>(item_count) * (item_count - 1);
    const auto N = static_cast<Eigen::Index>(group_size);
    model.P = Eigen::MatrixXd::Constant(N, N, model.move_probability());
    model.P.diagonal().setConstant(model.stay_probability());
    return model;
}

std::vector<double> distribution_at(const TransitionModel& model, std::uint64_t t, std::size_t origin) {
    const std::size_t N = model.group_size;
    if (origin >= N) throw DomainError("origin " + std::to_string(origin) + " outside the group");
    std::vector<double> dist(N, 0.0);
    if (t == 0) {
        dist[origin] = 1.0;
        return dist;
    }
    const double uniform = 1.0 / static_cast<double>(N);
    const double decay = std::pow(model.second_eigenvalue(), static_cast<double>(t - 1));
    const auto col = static_cast<Eigen::Index>(origin);
    for (std::size_t i = 0; i < N; ++i) {
        dist[i] = uniform + decay * (model.P(static_cast<Eigen::Index>(i), col) - uniform);
    }
    return dist;
}

double effective_anonymity(std::span<const double> distribution) {
    double total = 0.0;
    for (double p : distribution) {
        if (p < 0.0) throw DomainError("probability entries must be non-negative");
        total += p;
    }
    if (!(total > 0.0)) throw DomainError("distribution has zero mass");
    double entropy = 0.0;
    for (double p : distribution) {
        const double q = p / total;
        if (q > 0.0) entropy -= q * std::log2(q);
    }
    return std::exp2(entropy);
}

AnonymityReport anonymity_report(const TransitionModel& model, std::uint64_t t, std::size_t origin) {
    AnonymityReport report;
    report.time = static_cast<double>(t);
    report.distribution = distribution_at(model, t, origin);
    report.effective_size = effective_anonymity(report.distribution);
    return report;
}

std::uint64_t mixing_ticks(const TransitionModel& model, double tolerance) {
    const double lambda = model.second_eigenvalue();
    if (lambda <= 0.0) return 1;
    auto t = static_cast<std::uint64_t>(std::floor(std::log(tolerance) / std::log(lambda)));
    while (std::pow(lambda, static_cast<double>(t)) >= tolerance) ++t;
    while (t > 0 && std::pow(lambda, static_cast<double>(t - 1)) < tolerance) --t;
    return t;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t member_index(const Group& group, UserId user) {
    const auto it = std::find(group.members.begin(), group.members.end(), user);
    if (it == group.members.end()) {
        throw DomainError("user " + std::to_string(user.value) + " is not a member of the group");
    }
    return static_cast<std::size_t>(it - group.members.begin());
}

}  // namespace

std::size_t record_holder(std::span<const ExchangeEvent> events, const Group& group,
                          OrderedPair entry, std::size_t origin, double time) {
    std::size_t holder = origin;
    for (const auto& e : events) {
        if (e.time > time) break;
        if (e.entry != entry) continue;
        const std::size_t a = member_index(group, e.initiator);
        const std::size_t b = member_index(group, e.partner);
        if (holder == a) {
            holder = b;
        } else if (holder == b) {
            holder = a;
        }
    }
    return holder;
}

std::vector<double> provenance_distribution(const ExchangeResult& run, const Group& group,
                                            std::size_t origin, std::optional<OrderedPair> entry,
                                            std::optional<double> time) {
    if (!run.provenance) throw UsageError("provenance was not tracked for this run");
    const auto& labels = run.provenance->origin;
    const std::size_t N = labels.size();
    if (origin >= N) throw DomainError("origin outside the group");
    std::vector<double> counts(N, 0.0);
    const std::size_t positions = labels.front().size();
    const bool at_end = !time || run.events.empty() || *time >= run.events.back().time;

    if (at_end) {
        for (std::size_t member = 0; member < N; ++member) {
            if (entry) {
                const auto pos = run.matrices[member].position(*entry);
                if (labels[member][pos] == origin) counts[member] += 1.0;
            } else {
                for (std::size_t pos = 0; pos < positions; ++pos) {
                    if (labels[member][pos] == origin) counts[member] += 1.0;
                }
            }
        }
    } else {
        const auto& shape = run.matrices.front();
        auto locate = [&](OrderedPair e) {
            counts[record_holder(run.events, group, e, origin, *time)] += 1.0;
        };
        if (entry) {
            locate(*entry);
        } else {
            for (std::size_t pos = 0; pos < positions; ++pos) locate(shape.entry_at(pos));
        }
    }
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    for (auto& c : counts) c /= total;
    return counts;
}

std::vector<double> empirical_provenance(std::span<const ExchangeResult> replicas, const Group& group,
                                         std::size_t origin, std::optional<OrderedPair> entry,
                                         std::optional<double> time) {
    if (replicas.empty()) throw UsageError("no replicas supplied");
    std::vector<double> mean(group.members.size(), 0.0);
    for (const auto& run : replicas) {
        const auto dist = provenance_distribution(run, group, origin, entry, time);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += dist[i];
    }
    for (auto& m : mean) m /= static_cast<double>(replicas.size());
    return mean;
}

std::vector<double> empirical_provenance(const std::vector<PairwiseComparisonMatrix>& inputs,
                                         const ExchangeConfig& config, std::size_t replicas,
                                         std::size_t origin) {
    if (replicas == 0) throw UsageError("replica count must be positive");
    std::vector<double> mean(config.group.members.size(), 0.0);
    ExchangeConfig replica_config = config;
    replica_config.track_provenance = true;
    for (std::size_t r = 0; r < replicas; ++r) {
        replica_config.seed = mix_seed(config.seed, r);
        const auto run = simulate_exchange(inputs, replica_config);
        const auto dist = provenance_distribution(run, config.group, origin);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += dist[i];
    }
    for (auto& m : mean) m /= static_cast<double>(replicas);
    return mean;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw DomainError("distributions differ in length");
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
    return 0.5 * sum;
}

}  // namespace grouprec
