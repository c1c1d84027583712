#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "smyrf/attention.hpp"
#include "smyrf/clustering.hpp"
#include "smyrf/rng.hpp"

namespace smyrf {

inline constexpr std::uint64_t kEnumerationCap = 10'000'000;

struct BiclusteringSolution {
    ClusterAssignment assignment;
    double objective = 0.0;
    std::uint64_t enumerated_count = 0;
};

// Number of balanced joint partitions of (n_q queries, n_k keys) into L
// clusters, modulo simultaneous relabeling of cluster ids:
//   multinomial(n_q; n_q/L...) / L * multinomial(n_k; n_k/L...)
// Returns nullopt when the count overflows 64 bits (then it certainly
// exceeds any practical enumeration cap).
std::optional<std::uint64_t> balanced_assignment_count(std::size_t n_q, std::size_t n_k,
                                                       std::size_t L);

// Exhaustive global minimum of the clustered-vs-dense Frobenius objective.
// Enumeration is canonicalized by pinning query 0 to cluster 0; ties keep
// the lexicographically first assignment. Throws CapacityError when the
// assignment count exceeds kEnumerationCap.
BiclusteringSolution brute_force_biclustering(const AttentionInstance& inst, std::size_t L);

// Sum over within-cluster pairs of (q.k + a)^2, and its complement over
// out-of-cluster pairs. The two always add up to the same instance-wide
// constant, so ranking assignments by one reverses the ranking by the other.
double max_mass(const AttentionInstance& inst, const ClusterAssignment& assign, double shift_a);
double outside_mass(const AttentionInstance& inst, const ClusterAssignment& assign,
                    double shift_a);

// Exact top-k key indices per query by inner product, ties by index.
std::vector<std::vector<std::uint32_t>> top_k_oracle(const AttentionInstance& inst, std::size_t k);

// Recipe for instances satisfying the sparsity assumption by construction:
// block b's queries and keys share one random direction, within-block logits
// sit near a constant c with cross-block logits at 0, and c is chosen so
// every cross-block softmax weight is at most ~logit_gap.
struct AssumptionSpec {
    std::size_t heavy_count_T = 8;  // max heavy keys per query
    double logit_gap = 1e-12;       // target weight ratio non-heavy/heavy
    std::size_t blocks = 1;
};

AttentionInstance generate_compliant_instance(const AssumptionSpec& spec, std::size_t n_q,
                                              std::size_t n_k, std::size_t d, std::size_t d_v,
                                              Rng& rng);

// Post-hoc check of the multi-round clustering against a query's heavy keys
// (dense softmax weight >= heavy_threshold): `covered` means every heavy key
// was co-clustered at least once, `fair` means all heavy keys of a query
// were co-clustered equally often.
struct FairnessReport {
    bool covered = true;
    bool fair = true;
    std::size_t max_count_spread = 0;   // max over queries of (max - min) count
    double deviation = 0.0;             // max_count_spread / rounds
    std::size_t violating_queries = 0;  // unfair or uncovered queries
};

FairnessReport check_fairness(const AttentionInstance& inst, std::span<const RoundResult> rounds,
                              const PadInfo& pad, double heavy_threshold = 1e-6);

// Fractions of attention-map entries under each threshold, plus the special
// threshold 1/N_k. Input rows must sum to 1 (within 1e-6).
struct SparsityStats {
    std::vector<double> thresholds;
    std::vector<double> fractions;
    double below_uniform = 0.0;
};

SparsityStats sparsity_stats(const Matrix& attn, std::span<const double> thresholds);

// Uniformly random balanced assignment; the baseline SMYRF is judged against.
ClusterAssignment random_balanced_assignment(std::size_t n_q, std::size_t n_k, std::size_t L,
                                             Rng& rng);

}  // namespace smyrf
