#include "smyrf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "smyrf/error.hpp"

namespace smyrf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::optional<std::uint64_t> checked_mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r;
    if (__builtin_mul_overflow(a, b, &r)) return std::nullopt;
    return r;
}

// C(n, k) with overflow detection.
std::optional<std::uint64_t> binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // result * (n - k + i) / i stays integral at every step.
        const auto prod = checked_mul(result, n - k + i);
        if (!prod) return std::nullopt;
        result = *prod / i;
    }
    return result;
}

// multinomial(n; s, s, ..., s) with L parts.
std::optional<std::uint64_t> multinomial_equal(std::uint64_t n, std::uint64_t L) {
    const std::uint64_t s = n / L;
    std::uint64_t remaining = n;
    std::uint64_t result = 1;
    for (std::uint64_t i = 0; i < L; ++i) {
        const auto choose = binomial(remaining, s);
        if (!choose) return std::nullopt;
        const auto prod = checked_mul(result, *choose);
        if (!prod) return std::nullopt;
        result = *prod;
        remaining -= s;
    }
    return result;
}

// Enumerates balanced labeled partitions of {0..n-1} into L blocks of n/L in
// lexicographic order of the assignment array; index 0 may be pinned to
// block 0 (canonical form modulo joint relabeling).
template <typename Visit>
void enumerate_partitions(std::size_t n, std::size_t L, bool pin_first,
                          std::vector<std::uint32_t>& assign, Visit&& visit) {
    std::vector<std::size_t> room(L, n / L);
    assign.assign(n, 0);

    // Recursive lambda over index position.
    auto rec = [&](auto&& self, std::size_t i) -> void {
        if (i == n) {
            visit(assign);
            return;
        }
        const std::size_t last = (i == 0 && pin_first) ? 1 : L;
        for (std::size_t c = 0; c < last; ++c) {
            if (room[c] == 0) continue;
            --room[c];
            assign[i] = static_cast<std::uint32_t>(c);
            self(self, i + 1);
            ++room[c];
        }
    };
    rec(rec, 0);
}

Matrix product_matrix(const AttentionInstance& inst) {
    return matmul(inst.queries, transpose(inst.keys));
}

}  // namespace

std::optional<std::uint64_t> balanced_assignment_count(std::size_t n_q, std::size_t n_k,
                                                       std::size_t L) {
    if (L == 0 || n_q % L != 0 || n_k % L != 0) {
        throw InvariantError("balanced_assignment_count: L must divide N_q and N_k");
    }
    const auto q_parts = multinomial_equal(n_q, L);
    if (!q_parts) return std::nullopt;
    const auto k_parts = multinomial_equal(n_k, L);
    if (!k_parts) return std::nullopt;
    // Joint relabeling symmetry: fix the cluster of query 0, dividing the
    // labeled query partitions by exactly L.
    return checked_mul(*q_parts / L, *k_parts);
}

BiclusteringSolution brute_force_biclustering(const AttentionInstance& inst, std::size_t L) {
    inst.validate();
    if (L == 0 || inst.n_q() % L != 0 || inst.n_k() % L != 0) {
        throw InvariantError("brute_force_biclustering: L must divide N_q and N_k");
    }
    const auto count = balanced_assignment_count(inst.n_q(), inst.n_k(), L);
    if (!count || *count > kEnumerationCap) {
        throw CapacityError("brute_force_biclustering: " +
                            (count ? std::to_string(*count) : std::string(">2^64")) +
                            " balanced assignments exceed the cap of " +
                            std::to_string(kEnumerationCap));
    }

    // Shared per-instance tables: shifted exponentials and dense weights.
    const Matrix p = product_matrix(inst);
    const std::size_t n_q = inst.n_q();
    const std::size_t n_k = inst.n_k();
    Matrix shifted_exp(n_q, n_k);
    Matrix dense_w(n_q, n_k);
    for (std::size_t i = 0; i < n_q; ++i) {
        double mx = kNegInf;
        for (std::size_t j = 0; j < n_k; ++j) mx = std::max(mx, p(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < n_k; ++j) {
            shifted_exp(i, j) = std::exp(p(i, j) - mx);
            sum += shifted_exp(i, j);
        }
        for (std::size_t j = 0; j < n_k; ++j) dense_w(i, j) = shifted_exp(i, j) / sum;
    }

    // Objective for one assignment straight from the shared tables.
    auto objective = [&](std::span<const std::uint32_t> qc,
                         std::span<const std::uint32_t> kc) {
        double total = 0.0;
        for (std::size_t i = 0; i < n_q; ++i) {
            const auto ci = qc[i];
            double cluster_sum = 0.0;
            for (std::size_t j = 0; j < n_k; ++j) {
                if (kc[j] == ci) cluster_sum += shifted_exp(i, j);
            }
            for (std::size_t j = 0; j < n_k; ++j) {
                const double w_cluster =
                    kc[j] == ci ? shifted_exp(i, j) / cluster_sum : 0.0;
                const double diff = w_cluster - dense_w(i, j);
                total += diff * diff;
            }
        }
        return std::sqrt(total);
    };

    BiclusteringSolution best;
    best.objective = std::numeric_limits<double>::infinity();
    std::uint64_t seen = 0;

    std::vector<std::uint32_t> qc, kc;
    enumerate_partitions(n_q, L, /*pin_first=*/true, qc, [&](const auto& q_assign) {
        enumerate_partitions(n_k, L, /*pin_first=*/false, kc, [&](const auto& k_assign) {
            ++seen;
            const double value = objective(q_assign, k_assign);
            if (value < best.objective) {
                best.objective = value;
                best.assignment.num_clusters = L;
                best.assignment.query_cluster = q_assign;
                best.assignment.key_cluster = k_assign;
            }
        });
    });

    best.enumerated_count = seen;
    return best;
}

double max_mass(const AttentionInstance& inst, const ClusterAssignment& assign, double shift_a) {
    inst.validate();
    assign.validate();
    const Matrix p = product_matrix(inst);
    double total = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
            if (assign.query_cluster[i] == assign.key_cluster[j]) {
                const double term = p(i, j) + shift_a;
                total += term * term;
            }
        }
    }
    return total;
}

double outside_mass(const AttentionInstance& inst, const ClusterAssignment& assign,
                    double shift_a) {
    inst.validate();
    assign.validate();
    const Matrix p = product_matrix(inst);
    double total = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
            if (assign.query_cluster[i] != assign.key_cluster[j]) {
                const double term = p(i, j) + shift_a;
                total += term * term;
            }
        }
    }
    return total;
}

std::vector<std::vector<std::uint32_t>> top_k_oracle(const AttentionInstance& inst,
                                                     std::size_t k) {
    inst.validate();
    if (k > inst.n_k()) throw DomainError("top_k_oracle: k exceeds the number of keys");
    const Matrix p = product_matrix(inst);
    std::vector<std::vector<std::uint32_t>> result(inst.n_q());
    std::vector<std::uint32_t> order(inst.n_k());
    for (std::size_t i = 0; i < inst.n_q(); ++i) {
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            if (p(i, a) != p(i, b)) return p(i, a) > p(i, b);
            return a < b;
        });
        result[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return result;
}

AttentionInstance generate_compliant_instance(const AssumptionSpec& spec, std::size_t n_q,
                                              std::size_t n_k, std::size_t d, std::size_t d_v,
                                              Rng& rng) {
    const std::size_t blocks = spec.blocks;
    if (blocks == 0) throw DomainError("generate_compliant_instance: blocks must be >= 1");
    if (n_q % blocks != 0 || n_k % blocks != 0) {
        throw DomainError("generate_compliant_instance: blocks must divide N_q and N_k");
    }
    if (d < blocks) {
        throw DomainError("generate_compliant_instance: need d >= blocks for orthogonal blocks");
    }
    if (!(spec.logit_gap > 0.0 && spec.logit_gap < 1e-6)) {
        throw DomainError("generate_compliant_instance: logit_gap must be in (0, 1e-6)");
    }
    if (n_k / blocks > spec.heavy_count_T) {
        throw DomainError("generate_compliant_instance: keys per block " +
                          std::to_string(n_k / blocks) + " exceeds heavy_count_T " +
                          std::to_string(spec.heavy_count_T));
    }

    // Orthonormal block directions via Gram-Schmidt on Gaussian draws.
    std::vector<std::vector<double>> dirs;
    dirs.reserve(blocks);
    while (dirs.size() < blocks) {
        auto v = gaussian_vector(rng, d);
        for (const auto& u : dirs) {
            const double proj = dot(v, u);
            for (std::size_t e = 0; e < d; ++e) v[e] -= proj * u[e];
        }
        const double norm = l2_norm(v);
        if (norm < 1e-8) continue;  // rare degenerate draw; redraw
        for (auto& x : v) x /= norm;
        dirs.push_back(std::move(v));
    }

    // Within-block logits sit near c = (-ln(gap) + 4) / (1 - eta)^2 with
    // per-vector norm jitter eta; cross-block logits are exactly 0, so every
    // cross-block softmax weight is at most e^{-4} * gap.
    constexpr double kEta = 0.02;
    constexpr double kMargin = 4.0;
    const double c = (-std::log(spec.logit_gap) + kMargin) / ((1.0 - kEta) * (1.0 - kEta));
    const double base = std::sqrt(c);

    AttentionInstance inst;
    inst.queries = Matrix(n_q, d);
    inst.keys = Matrix(n_k, d);
    inst.values = Matrix(n_k, d_v);

    const std::size_t q_per = n_q / blocks;
    const std::size_t k_per = n_k / blocks;
    for (std::size_t b = 0; b < blocks; ++b) {
        // Mild norm separation between the block's query and key sides; the
        // within-block logit c * t * r is independent of it.
        const double s = 1.0 + 0.05 * (2.0 * rng.uniform() - 1.0);
        for (std::size_t i = 0; i < q_per; ++i) {
            const double t = 1.0 + kEta * (2.0 * rng.uniform() - 1.0);
            const double scale = base * s * t;
            auto row = inst.queries.row(b * q_per + i);
            for (std::size_t e = 0; e < d; ++e) row[e] = scale * dirs[b][e];
        }
        for (std::size_t j = 0; j < k_per; ++j) {
            const double r = 1.0 + kEta * (2.0 * rng.uniform() - 1.0);
            const double scale = (base / s) * r;
            auto row = inst.keys.row(b * k_per + j);
            for (std::size_t e = 0; e < d; ++e) row[e] = scale * dirs[b][e];
        }
    }
    for (auto& x : inst.values.data()) x = rng.gaussian();
    return inst;
}

FairnessReport check_fairness(const AttentionInstance& inst, std::span<const RoundResult> rounds,
                              const PadInfo& pad, double heavy_threshold) {
    inst.validate();
    if (rounds.empty()) throw UsageError("check_fairness: no rounds");

    const std::size_t n_k = inst.n_k();
    for (const auto& round : rounds) {
        // Rounds may run over a padded instance; they must at least cover
        // the original rows.
        if (round.assignment.query_cluster.size() < pad.original_queries ||
            round.assignment.key_cluster.size() < pad.original_keys ||
            pad.original_queries > inst.n_q() || pad.original_keys > n_k) {
            throw ShapeError("check_fairness: rounds do not cover the instance");
        }
    }

    // Pad rows, when present, are ignored on both sides.
    const std::size_t real_q = std::min(inst.n_q(), pad.original_queries);
    const std::size_t real_k = std::min(n_k, pad.original_keys);
    FairnessReport report;
    std::vector<double> logits(real_k);
    std::vector<std::uint32_t> heavy;
    std::vector<std::size_t> counts;
    for (std::size_t q = 0; q < real_q; ++q) {
        // Dense softmax row to find the heavy keys.
        auto query = inst.queries.row(q);
        double mx = kNegInf;
        for (std::size_t j = 0; j < real_k; ++j) {
            logits[j] = dot(query, inst.keys.row(j));
            mx = std::max(mx, logits[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < real_k; ++j) sum += std::exp(logits[j] - mx);
        heavy.clear();
        for (std::size_t j = 0; j < real_k; ++j) {
            if (std::exp(logits[j] - mx) / sum >= heavy_threshold) {
                heavy.push_back(static_cast<std::uint32_t>(j));
            }
        }
        if (heavy.empty()) continue;

        counts.assign(heavy.size(), 0);
        for (const auto& round : rounds) {
            const auto cq = round.assignment.query_cluster[q];
            for (std::size_t t = 0; t < heavy.size(); ++t) {
                if (round.assignment.key_cluster[heavy[t]] == cq) ++counts[t];
            }
        }
        const auto [mn, mx_count] = std::minmax_element(counts.begin(), counts.end());
        const std::size_t spread = *mx_count - *mn;
        if (*mn == 0) report.covered = false;
        if (spread != 0) report.fair = false;
        if (spread != 0 || *mn == 0) ++report.violating_queries;
        report.max_count_spread = std::max(report.max_count_spread, spread);
    }
    report.deviation =
        static_cast<double>(report.max_count_spread) / static_cast<double>(rounds.size());
    return report;
}

SparsityStats sparsity_stats(const Matrix& attn, std::span<const double> thresholds) {
    if (attn.rows() == 0 || attn.cols() == 0) throw ShapeError("sparsity_stats: empty matrix");
    for (std::size_t i = 0; i < attn.rows(); ++i) {
        double sum = 0.0;
        for (double w : attn.row(i)) sum += w;
        if (std::abs(sum - 1.0) > 1e-6) {
            throw DomainError("sparsity_stats: row " + std::to_string(i) +
                              " sums to " + std::to_string(sum) + ", expected 1");
        }
    }
    SparsityStats stats;
    stats.thresholds.assign(thresholds.begin(), thresholds.end());
    stats.fractions.resize(thresholds.size(), 0.0);
    const double uniform = 1.0 / static_cast<double>(attn.cols());
    const double total = static_cast<double>(attn.size());
    std::size_t below_uniform = 0;
    std::vector<std::size_t> below(thresholds.size(), 0);
    for (double w : attn.data()) {
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            if (w < thresholds[t]) ++below[t];
        }
        if (w < uniform) ++below_uniform;
    }
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        stats.fractions[t] = static_cast<double>(below[t]) / total;
    }
    stats.below_uniform = static_cast<double>(below_uniform) / total;
    return stats;
}

ClusterAssignment random_balanced_assignment(std::size_t n_q, std::size_t n_k, std::size_t L,
                                             Rng& rng) {
    if (L == 0 || n_q % L != 0 || n_k % L != 0) {
        throw InvariantError("random_balanced_assignment: L must divide N_q and N_k");
    }
    auto shuffle_cut = [&](std::size_t n) {
        std::vector<std::uint32_t> order(n);
        std::iota(order.begin(), order.end(), 0u);
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = rng.uniform_index(i);
            std::swap(order[i - 1], order[j]);
        }
        std::vector<std::uint32_t> labels(n);
        const std::size_t per = n / L;
        for (std::size_t t = 0; t < n; ++t) {
            labels[order[t]] = static_cast<std::uint32_t>(t / per);
        }
        return labels;
    };
    ClusterAssignment assign;
    assign.num_clusters = L;
    assign.query_cluster = shuffle_cut(n_q);
    assign.key_cluster = shuffle_cut(n_k);
    return assign;
}

}  // namespace smyrf
