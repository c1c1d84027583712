#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "smyrf/clustering.hpp"
#include "smyrf/ops.hpp"
#include "smyrf/oracle.hpp"

namespace smyrf {

// Cap on N_q * N_k when materializing attention maps for the Eq.-style map
// objective.
inline constexpr std::uint64_t kMaterializeCap = 100'000'000;

struct ApproximationReport {
    std::size_t n_q = 0, n_k = 0, d = 0, d_v = 0;
    SmyrfConfig config;

    double output_error_rel = 0.0;  // ||smyrf - dense||_F / ||dense||_F
    double output_error_abs = 0.0;

    // Clustered-vs-dense map objective for the realized round-0 assignment;
    // only computed when maps were requested and fit the capacity cap.
    std::optional<double> map_error;

    double fairness_deviation = 0.0;
    bool all_heavy_covered = false;
    std::size_t recall_k = 0;
    double top_k_recall = 0.0;  // fraction of top-k pairs co-clustered in >= 1 round

    SparsityStats sparsity;

    double dense_seconds = 0.0;
    double smyrf_seconds = 0.0;
    ops::Counts dense_ops;
    ops::Counts smyrf_ops;

    double memory_fraction = 0.0;  // H * (N_k/L) / N_k, the paper-style accounting
    std::size_t mass_clamp_events = 0;
};

struct CompareOptions {
    bool materialize_maps = false;
    std::vector<double> thresholds = {0.01};
    std::size_t recall_k = 0;  // 0 = keys per cluster
};

// Runs dense and SMYRF on the same instance and fills the full report.
// Everything except the two wall-clock fields is deterministic in
// (instance, config).
ApproximationReport compare(const AttentionInstance& inst, const SmyrfConfig& cfg,
                            const CompareOptions& opt = {});

// Non-increasing singular-value curve; normalize divides by the largest.
std::vector<double> svd_decay(const Matrix& attn, bool normalize);

struct ScalingRecord {
    std::size_t length = 0;
    double dense_median_s = 0.0, dense_min_s = 0.0, dense_max_s = 0.0;
    double smyrf_median_s = 0.0, smyrf_min_s = 0.0, smyrf_max_s = 0.0;
    std::uint64_t dense_pair_mults = 0;
    std::uint64_t smyrf_pair_mults = 0;
    std::uint64_t smyrf_hash_mults = 0;
    std::uint64_t smyrf_sort_comparisons = 0;
};

struct ScalingStudy {
    std::vector<ScalingRecord> records;
    std::size_t reps = 0;
    std::size_t d = 0;
    std::size_t queries_per_cluster = 0;
    std::size_t rounds = 0;
    std::uint64_t seed = 0;
    double dense_slope = 0.0;  // log-log fit over lengths; ~2 expected
    double smyrf_slope = 0.0;  // ~1 to ~1.2 expected
};

// Times dense vs SMYRF on identical random instances per length; reported
// times are medians of `reps` runs (reps >= 5). Operation counts are exact
// and independent of the clock.
ScalingStudy scaling_study(std::span<const std::size_t> lengths, std::size_t d,
                           std::size_t cluster_size, std::size_t rounds, std::uint64_t seed,
                           std::size_t reps = 5);

// Gaussian test instance (queries/keys/values ~ N(0, scale^2)).
AttentionInstance random_instance(std::size_t n_q, std::size_t n_k, std::size_t d,
                                  std::size_t d_v, Rng& rng, double scale = 1.0);

}  // namespace smyrf
