#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "grouprec/model.hpp"
#include "grouprec/rng.hpp"

namespace grouprec {

// ---------------------------------------------------------------------------
// Pre-exchange padding and post-exchange cleanup

struct PaddingResult {
    PairwiseComparisonMatrix matrix;
    /// Number of fully-zero unordered pairs that were set to 1/1.
    std::uint64_t padded_pairs = 0;
};

/// floor(((n(n-1)/2) - c) / 2) where c counts pairs with exactly one entry set.
std::uint64_t padding_count(const PairwiseComparisonMatrix& m);

/// Sets `padding_count(m)` uniformly chosen all-zero unordered pairs to
/// M_xy = M_yx = 1, leaving every other entry untouched. Expects the
/// pre-padding form (no symmetric pairs).
PaddingResult pad_matrix(PairwiseComparisonMatrix m, Rng& rng);

/// Clears both entries of every pair with M_xy = M_yx = 1.
PairwiseComparisonMatrix cleanup(PairwiseComparisonMatrix m);

/// Sum of all entries over a set of matrices.
std::uint64_t total_ones(std::span<const PairwiseComparisonMatrix> matrices);

// ---------------------------------------------------------------------------
// Exchange simulation

struct ExchangeConfig {
    double t_threshold = 0.0;
    std::uint64_t seed = 0;
    Group group;
    bool track_provenance = false;
    /// Optional cap on the number of clock ticks; the run ends at whichever of
    /// t_threshold or the cap comes first. Used to sample the walk at a fixed
    /// tick count.
    std::optional<std::uint64_t> tick_limit;

    void validate() const;
};

struct ExchangeEvent {
    double time = 0.0;
    UserId initiator;
    UserId partner;
    OrderedPair entry;
};

/// Origin labels for every ordered position of every member's matrix. Labels
/// are member indices (positions in ExchangeConfig::group.members).
struct Provenance {
    std::vector<std::vector<std::uint32_t>> origin;
};

struct ExchangeResult {
    std::vector<PairwiseComparisonMatrix> matrices;
    std::vector<ExchangeEvent> events;
    std::optional<Provenance> provenance;
};

/// Runs the gossip exchange: a rate-N Poisson clock; at each tick a uniform
/// initiator swaps one uniformly chosen ordered entry with a uniform partner.
/// `matrices[i]` must belong to `config.group.members[i]`.
ExchangeResult simulate_exchange(std::vector<PairwiseComparisonMatrix> matrices,
                                 const ExchangeConfig& config);

/// Expected number of global clock ticks before `t_threshold`.
inline double expected_ticks(std::size_t group_size, double t_threshold) {
    return static_cast<double>(group_size) * t_threshold;
}

// ---------------------------------------------------------------------------
// Anonymity analytics

/// Marginal transition matrix of a single record's walk over the N members.
struct TransitionModel {
    std::size_t group_size = 0;
    std::uint64_t n_prime = 0;
    Eigen::MatrixXd P;

    double stay_probability() const;
    double move_probability() const;
    /// 1 - 2 / (n'(N - 1)); multiplicity N - 1.
    double second_eigenvalue() const;
};

TransitionModel transition_model(std::size_t group_size, std::size_t item_count);

/// Column `origin` of P^t, via the rank-one closed form
/// P^t = J/N + lambda_2^(t-1) (P - J/N) for t >= 1.
std::vector<double> distribution_at(const TransitionModel& model, std::uint64_t t, std::size_t origin);

/// 2^H(p) with H in bits and 0 log 0 = 0. Input is renormalized.
double effective_anonymity(std::span<const double> distribution);

struct AnonymityReport {
    double time = 0.0;
    std::vector<double> distribution;
    double effective_size = 0.0;
};

AnonymityReport anonymity_report(const TransitionModel& model, std::uint64_t t, std::size_t origin = 0);

/// Smallest t with lambda_2^t < tolerance.
std::uint64_t mixing_ticks(const TransitionModel& model, double tolerance);

// ---------------------------------------------------------------------------
// Empirical provenance

/// Member currently holding the record that started at member `origin` in
/// position `entry`, after replaying all events with time <= `time`.
std::size_t record_holder(std::span<const ExchangeEvent> events, const Group& group,
                          OrderedPair entry, std::size_t origin, double time);

/// Distribution over members of where records originating at `origin` sit at
/// `time` (end of run when nullopt). Aggregated over all positions, or just
/// `entry` when given. Requires a run with provenance tracking.
std::vector<double> provenance_distribution(const ExchangeResult& run, const Group& group,
                                            std::size_t origin,
                                            std::optional<OrderedPair> entry = std::nullopt,
                                            std::optional<double> time = std::nullopt);

/// Averages provenance_distribution over replicas.
std::vector<double> empirical_provenance(std::span<const ExchangeResult> replicas, const Group& group,
                                         std::size_t origin,
                                         std::optional<OrderedPair> entry = std::nullopt,
                                         std::optional<double> time = std::nullopt);

/// Runs `replicas` independent simulations (seeds derived from config.seed)
/// with provenance tracking and returns the averaged end-of-run distribution.
std::vector<double> empirical_provenance(const std::vector<PairwiseComparisonMatrix>& inputs,
                                         const ExchangeConfig& config, std::size_t replicas,
                                         std::size_t origin);

double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace grouprec
