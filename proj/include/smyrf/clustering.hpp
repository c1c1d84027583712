#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "smyrf/alsh.hpp"
#include "smyrf/attention.hpp"

namespace smyrf {

struct SmyrfConfig {
    std::size_t num_clusters = 1;  // L; must divide N_q and N_k after padding
    std::size_t num_rounds = 1;    // H
    std::uint64_t seed = 0;
    TransformKind transform{};

    void validate() const;
};

// Output of one hashing round. per_query_mass is the round's softmax mass
// sum(e^{q.k - shift}) over the query's cluster, stored together with the
// per-query shift (the max within-cluster logit) so that merge_rounds can
// rebase all rounds of a query onto one common shift and take exact ratios.
struct RoundResult {
    ClusterAssignment assignment;
    std::vector<double> per_query_mass;
    std::vector<double> per_query_shift;
    Matrix partial_output;  // N_q x d_v
};

// Sort queries and keys independently by hash and cut both orders into L
// contiguous equal-count blocks; block i of queries joins block i of keys.
// Ties break by original index, so the assignment is fully deterministic.
ClusterAssignment adaptive_cluster(std::span<const double> query_hashes,
                                   std::span<const double> key_hashes, std::size_t num_clusters);

// Hash (seed, round), cluster adaptively, run within-cluster attention.
RoundResult run_round(const AttentionInstance& inst, const SmyrfConfig& cfg, std::size_t round);
RoundResult run_round(const AttentionInstance& inst, const SmyrfConfig& cfg, std::size_t round,
                      const PadInfo& pad);

struct MergeStats {
    std::size_t clamped_masses = 0;  // queries whose total round mass underflowed
};

// Weighted sum of the rounds' partial outputs; each round's weight for a
// query is its share of the total softmax mass across rounds. Weights per
// query sum to 1. Keys found in several rounds are deliberately not
// deduplicated; the mass ratios absorb the double counting.
Matrix merge_rounds(std::span<const RoundResult> rounds, MergeStats* stats = nullptr);

// Append zero queries (rows dropped from outputs) and far-sink keys (zero
// vector and value row; forced logit kSinkLogit; hash +inf) until
// num_clusters divides both counts.
std::pair<AttentionInstance, PadInfo> pad_to_divisible(const AttentionInstance& inst,
                                                       std::size_t num_clusters);

struct SmyrfRun {
    Matrix output;                    // N_q x d_v, original rows only
    std::vector<RoundResult> rounds;  // over the padded instance
    PadInfo pad;
    MergeStats merge;
};

// Full pipeline: pad if needed, run H rounds (parallel, capped by the
// SMYRF_THREADS env var), merge in round order, drop pad rows. Bitwise
// reproducible for a fixed seed regardless of thread schedule.
SmyrfRun smyrf_attention_run(const AttentionInstance& inst, const SmyrfConfig& cfg);
Matrix smyrf_attention(const AttentionInstance& inst, const SmyrfConfig& cfg);

namespace detail {

// Worker cap from SMYRF_THREADS (0 or unset = hardware concurrency).
std::size_t thread_cap();

}  // namespace detail

}  // namespace smyrf
