#include "smyrf/clustering.hpp"

#include <algorithm>
#include <atomic>
#include <cfloat>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "smyrf/error.hpp"
#include "smyrf/ops.hpp"

namespace smyrf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Stable argsort by (hash, index); counts comparator calls into the sort
// counter once per sort.
std::vector<std::uint32_t> hash_order(std::span<const double> hashes) {
    std::vector<std::uint32_t> order(hashes.size());
    std::iota(order.begin(), order.end(), 0u);
    std::uint64_t comparisons = 0;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        ++comparisons;
        if (hashes[a] != hashes[b]) return hashes[a] < hashes[b];
        return a < b;
    });
    ops::add_sort_comparisons(comparisons);
    return order;
}

}  // namespace

void SmyrfConfig::validate() const {
    if (num_clusters == 0) throw UsageError("SmyrfConfig: num_clusters must be >= 1");
    if (num_rounds == 0) throw UsageError("SmyrfConfig: num_rounds must be >= 1");
}

ClusterAssignment adaptive_cluster(std::span<const double> query_hashes,
                                   std::span<const double> key_hashes,
                                   std::size_t num_clusters) {
    if (num_clusters == 0) throw InvariantError("adaptive_cluster: zero clusters");
    if (query_hashes.size() % num_clusters != 0 || key_hashes.size() % num_clusters != 0) {
        throw InvariantError("adaptive_cluster: " + std::to_string(num_clusters) +
                             " clusters must divide " + std::to_string(query_hashes.size()) +
                             " queries and " + std::to_string(key_hashes.size()) + " keys");
    }
    ClusterAssignment assign;
    assign.num_clusters = num_clusters;
    assign.query_cluster.resize(query_hashes.size());
    assign.key_cluster.resize(key_hashes.size());

    const auto q_order = hash_order(query_hashes);
    const auto k_order = hash_order(key_hashes);
    const std::size_t per_q = query_hashes.size() / num_clusters;
    const std::size_t per_k = key_hashes.size() / num_clusters;
    for (std::size_t t = 0; t < q_order.size(); ++t) {
        assign.query_cluster[q_order[t]] = static_cast<std::uint32_t>(t / per_q);
    }
    for (std::size_t t = 0; t < k_order.size(); ++t) {
        assign.key_cluster[k_order[t]] = static_cast<std::uint32_t>(t / per_k);
    }
    return assign;
}

RoundResult run_round(const AttentionInstance& inst, const SmyrfConfig& cfg, std::size_t round) {
    return run_round(inst, cfg, round, PadInfo{inst.n_q(), inst.n_k()});
}

RoundResult run_round(const AttentionInstance& inst, const SmyrfConfig& cfg, std::size_t round,
                      const PadInfo& pad) {
    cfg.validate();
    inst.validate();

    TransformKind kind = cfg.transform;
    if (kind.family == TransformFamily::l2lsh && kind.l2lsh_u == 0.0) {
        kind.l2lsh_u = l2lsh_auto_u(inst.keys);
    }
    const NormBounds bounds = NormBounds::exact(inst.queries, inst.keys);
    const std::size_t d_prime = kind.transformed_dim(inst.d());
    const HashRoundConfig hr = HashRoundConfig::draw(cfg.seed, round, d_prime);

    std::vector<double> query_hashes(inst.n_q());
    std::vector<double> key_hashes(inst.n_k());
    for (std::size_t i = 0; i < inst.n_q(); ++i) {
        // Pad queries sort to the far end; their output rows are dropped.
        query_hashes[i] = i < pad.original_queries
                              ? hash_scalar(transform_query(kind, inst.queries.row(i), bounds), hr)
                              : kInf;
    }
    for (std::size_t j = 0; j < inst.n_k(); ++j) {
        key_hashes[j] = j < pad.original_keys
                            ? hash_scalar(transform_key(kind, inst.keys.row(j), bounds), hr)
                            : kInf;
    }
    ops::add_hash((static_cast<std::uint64_t>(pad.original_queries) + pad.original_keys) * d_prime);

    RoundResult result;
    result.assignment = adaptive_cluster(query_hashes, key_hashes, cfg.num_clusters);
    detail::clustered_attention_core(inst, result.assignment, &pad, result.partial_output,
                                     &result.per_query_mass, &result.per_query_shift);
    return result;
}

Matrix merge_rounds(std::span<const RoundResult> rounds, MergeStats* stats) {
    if (rounds.empty()) throw UsageError("merge_rounds: no rounds");
    const std::size_t n_q = rounds.front().partial_output.rows();
    const std::size_t d_v = rounds.front().partial_output.cols();
    for (const auto& r : rounds) {
        if (r.partial_output.rows() != n_q || r.partial_output.cols() != d_v ||
            r.per_query_mass.size() != n_q || r.per_query_shift.size() != n_q) {
            throw ShapeError("merge_rounds: rounds disagree on instance shape");
        }
    }

    Matrix out(n_q, d_v);
    std::size_t clamped = 0;
    std::vector<double> rebased(rounds.size());
    for (std::size_t q = 0; q < n_q; ++q) {
        double shift = -kInf;
        for (const auto& r : rounds) shift = std::max(shift, r.per_query_shift[q]);

        double total = 0.0;
        for (std::size_t h = 0; h < rounds.size(); ++h) {
            const auto& r = rounds[h];
            rebased[h] = r.per_query_mass[q] * std::exp(r.per_query_shift[q] - shift);
            total += rebased[h];
        }
        if (!(total >= DBL_MIN)) {
            // All rounds underflowed for this query; clamp so the weights
            // stay finite and flag the event.
            total = DBL_MIN;
            ++clamped;
        }
        double* out_row = out.row(q).data();
        for (std::size_t h = 0; h < rounds.size(); ++h) {
            const double weight = rebased[h] / total;
            if (weight == 0.0) continue;
            const double* part = rounds[h].partial_output.row(q).data();
            for (std::size_t e = 0; e < d_v; ++e) out_row[e] += weight * part[e];
        }
    }
    if (stats) stats->clamped_masses = clamped;
    return out;
}

std::pair<AttentionInstance, PadInfo> pad_to_divisible(const AttentionInstance& inst,
                                                       std::size_t num_clusters) {
    inst.validate();
    if (num_clusters == 0) throw UsageError("pad_to_divisible: zero clusters");
    const PadInfo pad{inst.n_q(), inst.n_k()};
    const std::size_t pad_q = (num_clusters - inst.n_q() % num_clusters) % num_clusters;
    const std::size_t pad_k = (num_clusters - inst.n_k() % num_clusters) % num_clusters;
    if (pad_q == 0 && pad_k == 0) return {inst, pad};

    AttentionInstance padded;
    padded.queries = Matrix(inst.n_q() + pad_q, inst.d());
    padded.keys = Matrix(inst.n_k() + pad_k, inst.d());
    padded.values = Matrix(inst.n_k() + pad_k, inst.d_v());
    std::copy(inst.queries.data().begin(), inst.queries.data().end(),
              padded.queries.data().begin());
    std::copy(inst.keys.data().begin(), inst.keys.data().end(), padded.keys.data().begin());
    std::copy(inst.values.data().begin(), inst.values.data().end(), padded.values.data().begin());
    return {std::move(padded), pad};
}

namespace detail {

std::size_t thread_cap() {
    if (const char* env = std::getenv("SMYRF_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs body(0..n-1) on up to thread_cap() workers. Rethrows the first
// exception after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(thread_cap(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

SmyrfRun smyrf_attention_run(const AttentionInstance& inst, const SmyrfConfig& cfg) {
    cfg.validate();
    inst.validate();

    auto [padded, pad] = pad_to_divisible(inst, cfg.num_clusters);
    SmyrfRun run;
    run.pad = pad;
    run.rounds.resize(cfg.num_rounds);
    const AttentionInstance& work = padded;
    detail::parallel_for(cfg.num_rounds, [&](std::size_t h) {
        run.rounds[h] = run_round(work, cfg, h, pad);
    });

    Matrix merged = merge_rounds(run.rounds, &run.merge);
    if (merged.rows() == pad.original_queries) {
        run.output = std::move(merged);
    } else {
        run.output = Matrix(pad.original_queries, merged.cols());
        std::copy(merged.data().begin(),
                  merged.data().begin() + run.output.size(), run.output.data().begin());
    }
    return run;
}

Matrix smyrf_attention(const AttentionInstance& inst, const SmyrfConfig& cfg) {
    return smyrf_attention_run(inst, cfg).output;
}

}  // namespace smyrf
