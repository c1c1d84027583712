#include "smyrf/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "smyrf/error.hpp"

namespace smyrf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Least-squares slope of ln(y) against ln(x).
double log_log_slope(std::span<const std::size_t> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(static_cast<double>(xs[i]));
        const double ly = std::log(ys[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = n * sxx - sx * sx;
    return (n * sxy - sx * sy) / denom;
}

}  // namespace

AttentionInstance random_instance(std::size_t n_q, std::size_t n_k, std::size_t d,
                                  std::size_t d_v, Rng& rng, double scale) {
    AttentionInstance inst;
    inst.queries = Matrix(n_q, d);
    inst.keys = Matrix(n_k, d);
    inst.values = Matrix(n_k, d_v);
    for (auto& x : inst.queries.data()) x = scale * rng.gaussian();
    for (auto& x : inst.keys.data()) x = scale * rng.gaussian();
    for (auto& x : inst.values.data()) x = scale * rng.gaussian();
    return inst;
}

ApproximationReport compare(const AttentionInstance& inst, const SmyrfConfig& cfg,
                            const CompareOptions& opt) {
    inst.validate();
    cfg.validate();
    if (opt.materialize_maps &&
        static_cast<std::uint64_t>(inst.n_q()) * inst.n_k() > kMaterializeCap) {
        throw CapacityError("compare: materialize_maps needs N_q*N_k <= " +
                            std::to_string(kMaterializeCap) + ", got " +
                            std::to_string(inst.n_q()) + "*" + std::to_string(inst.n_k()));
    }

    ApproximationReport report;
    report.n_q = inst.n_q();
    report.n_k = inst.n_k();
    report.d = inst.d();
    report.d_v = inst.d_v();
    report.config = cfg;

    ops::reset();
    auto t0 = Clock::now();
    const Matrix dense = dense_attention(inst);
    report.dense_seconds = seconds_since(t0);
    report.dense_ops = ops::snapshot();

    ops::reset();
    t0 = Clock::now();
    const SmyrfRun run = smyrf_attention_run(inst, cfg);
    report.smyrf_seconds = seconds_since(t0);
    report.smyrf_ops = ops::snapshot();
    report.mass_clamp_events = run.merge.clamped_masses;

    // Output errors.
    double diff_sq = 0.0;
    for (std::size_t i = 0; i < dense.size(); ++i) {
        const double diff = run.output.data()[i] - dense.data()[i];
        diff_sq += diff * diff;
    }
    const double dense_norm = frobenius_norm(dense);
    report.output_error_abs = std::sqrt(diff_sq);
    report.output_error_rel =
        dense_norm > 0.0 ? report.output_error_abs / dense_norm : report.output_error_abs;

    // Map objective from the realized round-0 assignment.
    if (opt.materialize_maps) {
        const auto& assign0 = run.rounds.front().assignment;
        const auto [padded, pad] = pad_to_divisible(inst, cfg.num_clusters);
        report.map_error = frobenius_objective(padded, assign0, pad);
    }

    report.memory_fraction =
        static_cast<double>(cfg.num_rounds) *
        static_cast<double>(run.rounds.front().assignment.keys_per_cluster()) /
        static_cast<double>(run.rounds.front().assignment.key_cluster.size());

    // Fairness of the realized rounds against the dense heavy keys.
    const FairnessReport fairness = check_fairness(inst, run.rounds, run.pad);
    report.fairness_deviation = fairness.deviation;
    report.all_heavy_covered = fairness.covered;

    // Top-k recall: fraction of exact top-k pairs co-clustered in >= 1 round.
    const std::size_t k =
        opt.recall_k > 0 ? std::min(opt.recall_k, inst.n_k())
                         : std::min(inst.n_k(), run.rounds.front().assignment.keys_per_cluster());
    report.recall_k = k;
    const auto top = top_k_oracle(inst, k);
    std::size_t caught = 0;
    for (std::size_t q = 0; q < inst.n_q(); ++q) {
        for (const auto j : top[q]) {
            for (const auto& round : run.rounds) {
                if (round.assignment.query_cluster[q] == round.assignment.key_cluster[j]) {
                    ++caught;
                    break;
                }
            }
        }
    }
    report.top_k_recall =
        static_cast<double>(caught) / (static_cast<double>(inst.n_q()) * static_cast<double>(k));

    // Sparsity of the dense map, streamed one row at a time.
    {
        const std::size_t n_k = inst.n_k();
        const double uniform = 1.0 / static_cast<double>(n_k);
        std::vector<std::size_t> below(opt.thresholds.size(), 0);
        std::size_t below_uniform = 0;
        std::vector<double> logits(n_k);
        for (std::size_t i = 0; i < inst.n_q(); ++i) {
            auto q = inst.queries.row(i);
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n_k; ++j) {
                logits[j] = dot(q, inst.keys.row(j));
                mx = std::max(mx, logits[j]);
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < n_k; ++j) sum += std::exp(logits[j] - mx);
            for (std::size_t j = 0; j < n_k; ++j) {
                const double w = std::exp(logits[j] - mx) / sum;
                for (std::size_t t = 0; t < opt.thresholds.size(); ++t) {
                    if (w < opt.thresholds[t]) ++below[t];
                }
                if (w < uniform) ++below_uniform;
            }
        }
        const double total = static_cast<double>(inst.n_q()) * static_cast<double>(n_k);
        report.sparsity.thresholds = opt.thresholds;
        report.sparsity.fractions.resize(opt.thresholds.size());
        for (std::size_t t = 0; t < opt.thresholds.size(); ++t) {
            report.sparsity.fractions[t] = static_cast<double>(below[t]) / total;
        }
        report.sparsity.below_uniform = static_cast<double>(below_uniform) / total;
    }

    return report;
}

std::vector<double> svd_decay(const Matrix& attn, bool normalize) {
    auto sv = singular_values(attn);
    if (normalize && !sv.empty() && sv.front() > 0.0) {
        const double top = sv.front();
        for (auto& x : sv) x /= top;
    }
    return sv;
}

ScalingStudy scaling_study(std::span<const std::size_t> lengths, std::size_t d,
                           std::size_t cluster_size, std::size_t rounds, std::uint64_t seed,
                           std::size_t reps) {
    if (lengths.empty()) throw UsageError("scaling_study: no lengths");
    if (reps < 5) throw UsageError("scaling_study: needs at least 5 repetitions");
    if (cluster_size == 0) throw UsageError("scaling_study: cluster size must be >= 1");
    for (const auto n : lengths) {
        if (n % cluster_size != 0) {
            throw UsageError("scaling_study: length " + std::to_string(n) +
                             " not divisible by cluster size " + std::to_string(cluster_size));
        }
    }

    ScalingStudy study;
    study.reps = reps;
    study.d = d;
    study.queries_per_cluster = cluster_size;
    study.rounds = rounds;
    study.seed = seed;

    std::vector<double> dense_medians, smyrf_medians;
    for (std::size_t li = 0; li < lengths.size(); ++li) {
        const std::size_t n = lengths[li];
        Rng rng = Rng::child(seed, li);
        const AttentionInstance inst = random_instance(n, n, d, d, rng);

        SmyrfConfig cfg;
        cfg.num_clusters = n / cluster_size;
        cfg.num_rounds = rounds;
        cfg.seed = seed + li;

        ScalingRecord record;
        record.length = n;

        std::vector<double> dense_times, smyrf_times;
        ops::reset();
        for (std::size_t r = 0; r < reps; ++r) {
            const auto t0 = Clock::now();
            const Matrix out = dense_attention(inst);
            dense_times.push_back(seconds_since(t0));
            if (r == 0) record.dense_pair_mults = ops::snapshot().attention_pair_mults;
        }
        ops::reset();
        for (std::size_t r = 0; r < reps; ++r) {
            const auto t0 = Clock::now();
            const Matrix out = smyrf_attention(inst, cfg);
            smyrf_times.push_back(seconds_since(t0));
            if (r == 0) {
                const auto counts = ops::snapshot();
                record.smyrf_pair_mults = counts.attention_pair_mults;
                record.smyrf_hash_mults = counts.hash_mults;
                record.smyrf_sort_comparisons = counts.sort_comparisons;
            }
        }

        record.dense_median_s = median(dense_times);
        record.dense_min_s = *std::min_element(dense_times.begin(), dense_times.end());
        record.dense_max_s = *std::max_element(dense_times.begin(), dense_times.end());
        record.smyrf_median_s = median(smyrf_times);
        record.smyrf_min_s = *std::min_element(smyrf_times.begin(), smyrf_times.end());
        record.smyrf_max_s = *std::max_element(smyrf_times.begin(), smyrf_times.end());
        dense_medians.push_back(record.dense_median_s);
        smyrf_medians.push_back(record.smyrf_median_s);
        study.records.push_back(record);
    }

    study.dense_slope = log_log_slope(lengths, dense_medians);
    study.smyrf_slope = log_log_slope(lengths, smyrf_medians);
    return study;
}

}  // namespace smyrf
