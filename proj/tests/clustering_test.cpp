#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <set>

#include "smyrf/analysis.hpp"
#include "smyrf/clustering.hpp"
#include "smyrf/error.hpp"
#include "smyrf/ops.hpp"
#include "smyrf/oracle.hpp"
#include "test_support.hpp"

using namespace smyrf;
using namespace smyrf::testing;

TEST_SUITE("clustering") {

TEST_CASE("adaptive clustering sorts and splits by hand") {
    const std::vector<double> qh = {0.1, 0.9, 0.5, 0.3};
    const std::vector<double> kh = {0.2, 0.8, 0.4, 0.6};
    const ClusterAssignment assign = adaptive_cluster(qh, kh, 2);
    CHECK(assign.query_cluster == std::vector<std::uint32_t>{0, 1, 1, 0});
    CHECK(assign.key_cluster == std::vector<std::uint32_t>{0, 1, 0, 1});
}

TEST_CASE("equal hashes break ties by index and stay balanced") {
    const std::vector<double> qh(8, 0.5);
    const std::vector<double> kh(8, 0.5);
    const ClusterAssignment assign = adaptive_cluster(qh, kh, 4);
    assign.validate();
    CHECK(assign.query_cluster == std::vector<std::uint32_t>{0, 0, 1, 1, 2, 2, 3, 3});
    CHECK(assign.key_cluster == std::vector<std::uint32_t>{0, 0, 1, 1, 2, 2, 3, 3});
}

TEST_CASE("adaptive clustering is balanced with monotone boundaries") {
    Rng rng(61);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t L = 1 + rng.uniform_index(6);
        const std::size_t n_q = L * (1 + rng.uniform_index(5));
        const std::size_t n_k = L * (1 + rng.uniform_index(5));
        std::vector<double> qh(n_q), kh(n_k);
        for (auto& h : qh) h = rng.uniform();
        for (auto& h : kh) h = rng.uniform();
        const ClusterAssignment assign = adaptive_cluster(qh, kh, L);
        assign.validate();

        // Independent check: sorting the hashes and cutting into blocks must
        // reproduce each cluster's hash interval.
        auto check_monotone = [&](const std::vector<double>& hashes,
                                  const std::vector<std::uint32_t>& labels) {
            for (std::size_t c = 0; c + 1 < L; ++c) {
                double hi = -1e300, lo = 1e300;
                for (std::size_t i = 0; i < hashes.size(); ++i) {
                    if (labels[i] == c) hi = std::max(hi, hashes[i]);
                    if (labels[i] == c + 1) lo = std::min(lo, hashes[i]);
                }
                CHECK(hi <= lo);
            }
        };
        check_monotone(qh, assign.query_cluster);
        check_monotone(kh, assign.key_cluster);
    }
    CHECK_THROWS_AS(adaptive_cluster(std::vector<double>(5, 0.0), std::vector<double>(4, 0.0), 2),
                    InvariantError);
}

TEST_CASE("run_round composes hashing, clustering, and within-cluster attention") {
    Rng rng(62);
    AttentionInstance inst;
    inst.queries = random_matrix(12, 4, rng);
    inst.keys = random_matrix(12, 4, rng);
    inst.values = random_matrix(12, 3, rng);
    SmyrfConfig cfg;
    cfg.num_clusters = 3;
    cfg.num_rounds = 1;
    cfg.seed = 99;

    const RoundResult round = run_round(inst, cfg, 0);
    round.assignment.validate();
    CHECK(max_abs_diff(round.partial_output, clustered_attention(inst, round.assignment)) <
          1e-12);
    for (double m : round.per_query_mass) CHECK(m > 0.0);
}

TEST_CASE("run_round with one cluster reproduces dense attention and full masses") {
    Rng rng(63);
    AttentionInstance inst;
    inst.queries = random_matrix(6, 3, rng);
    inst.keys = random_matrix(8, 3, rng);
    inst.values = random_matrix(8, 2, rng);
    SmyrfConfig cfg;
    cfg.num_clusters = 1;
    cfg.seed = 5;

    const RoundResult round = run_round(inst, cfg, 0);
    CHECK(max_abs_diff(round.partial_output, dense_attention(inst)) < 1e-12);
    for (std::size_t q = 0; q < inst.n_q(); ++q) {
        double want = 0.0;
        for (std::size_t j = 0; j < inst.n_k(); ++j) {
            want += std::exp(dot(inst.queries.row(q), inst.keys.row(j)) -
                             round.per_query_shift[q]);
        }
        CHECK(round.per_query_mass[q] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("different rounds almost always produce different assignments") {
    int differing = 0;
    for (int seed = 0; seed < 100; ++seed) {
        Rng rng(1000 + seed);
        AttentionInstance inst;
        inst.queries = random_matrix(64, 8, rng);
        inst.keys = random_matrix(64, 8, rng);
        inst.values = random_matrix(64, 4, rng);
        SmyrfConfig cfg;
        cfg.num_clusters = 8;
        cfg.num_rounds = 2;
        cfg.seed = static_cast<std::uint64_t>(seed);
        const RoundResult r0 = run_round(inst, cfg, 0);
        const RoundResult r1 = run_round(inst, cfg, 1);
        if (r0.assignment.query_cluster != r1.assignment.query_cluster ||
            r0.assignment.key_cluster != r1.assignment.key_cluster) {
            ++differing;
        }
    }
    CHECK(differing >= 99);
}

TEST_CASE("merging a single round is exact") {
    Rng rng(64);
    AttentionInstance inst;
    inst.queries = random_matrix(8, 3, rng);
    inst.keys = random_matrix(8, 3, rng);
    inst.values = random_matrix(8, 2, rng);
    SmyrfConfig cfg;
    cfg.num_clusters = 2;
    cfg.seed = 17;
    const RoundResult round = run_round(inst, cfg, 0);
    const std::vector<RoundResult> rounds = {round};
    CHECK(merge_rounds(rounds) == round.partial_output);
}

TEST_CASE("merging two identical rounds changes nothing") {
    Rng rng(65);
    AttentionInstance inst;
    inst.queries = random_matrix(8, 3, rng);
    inst.keys = random_matrix(8, 3, rng);
    inst.values = random_matrix(8, 2, rng);
    SmyrfConfig cfg;
    cfg.num_clusters = 4;
    cfg.seed = 18;
    const RoundResult round = run_round(inst, cfg, 0);
    const std::vector<RoundResult> rounds = {round, round};
    CHECK(max_abs_diff(merge_rounds(rounds), round.partial_output) < 1e-12);
    CHECK_THROWS_AS(merge_rounds(std::vector<RoundResult>{}), UsageError);
}

TEST_CASE("merge weights per query sum to one") {
    Rng rng(66);
    AttentionInstance inst;
    inst.queries = random_matrix(16, 4, rng);
    inst.keys = random_matrix(16, 4, rng);
    inst.values = random_matrix(16, 2, rng);
    SmyrfConfig cfg;
    cfg.num_clusters = 4;
    cfg.num_rounds = 4;
    cfg.seed = 19;
    std::vector<RoundResult> rounds;
    for (std::size_t h = 0; h < cfg.num_rounds; ++h) rounds.push_back(run_round(inst, cfg, h));

    for (std::size_t q = 0; q < inst.n_q(); ++q) {
        double shift = -1e300;
        for (const auto& r : rounds) shift = std::max(shift, r.per_query_shift[q]);
        double total = 0.0;
        for (const auto& r : rounds) {
            total += r.per_query_mass[q] * std::exp(r.per_query_shift[q] - shift);
        }
        double weight_sum = 0.0;
        for (const auto& r : rounds) {
            const double w = r.per_query_mass[q] * std::exp(r.per_query_shift[q] - shift) / total;
            CHECK(w >= 0.0);
            CHECK(w <= 1.0);
            weight_sum += w;
        }
        CHECK(std::abs(weight_sum - 1.0) < 1e-12);
    }
}

TEST_CASE("smyrf with L=1, H=1 reduces to dense attention") {
    Rng rng(67);
    for (int trial = 0; trial < 5; ++trial) {
        AttentionInstance inst;
        const std::size_t n_q = 1 + rng.uniform_index(12);
        const std::size_t n_k = 1 + rng.uniform_index(12);
        inst.queries = random_matrix(n_q, 4, rng);
        inst.keys = random_matrix(n_k, 4, rng);
        inst.values = random_matrix(n_k, 3, rng);
        SmyrfConfig cfg;
        cfg.num_clusters = 1;
        cfg.num_rounds = 1;
        cfg.seed = static_cast<std::uint64_t>(trial);
        CHECK(max_abs_diff(smyrf_attention(inst, cfg), dense_attention(inst)) < 1e-10);
    }
}

TEST_CASE("merged rounds are exact on assumption-compliant instances") {
    AssumptionSpec spec;
    spec.blocks = 8;
    spec.heavy_count_T = 8;
    spec.logit_gap = 1e-12;

    int fair_instances = 0;
    for (int trial = 0; trial < 5; ++trial) {
        Rng rng(680 + trial);
        const AttentionInstance inst = generate_compliant_instance(spec, 64, 64, 16, 8, rng);
        SmyrfConfig cfg;
        cfg.num_clusters = 8;
        cfg.num_rounds = 4;
        cfg.seed = static_cast<std::uint64_t>(71 + trial);
        const SmyrfRun run = smyrf_attention_run(inst, cfg);
        const FairnessReport fairness = check_fairness(inst, run.rounds, run.pad);
        if (!fairness.fair || !fairness.covered) continue;
        ++fair_instances;
        const Matrix dense = dense_attention(inst);
        const double rel = frob_diff(run.output, dense) / frobenius_norm(dense);
        CHECK(rel < 1e-6);
    }
    CHECK(fair_instances >= 1);
}

TEST_CASE("smyrf beats the median random balanced assignment") {
    Rng rng(69);
    AttentionInstance inst;
    inst.queries = random_matrix(256, 16, rng);
    inst.keys = random_matrix(256, 16, rng);
    inst.values = random_matrix(256, 16, rng);
    SmyrfConfig cfg;
    cfg.num_clusters = 16;
    cfg.num_rounds = 8;
    cfg.seed = 21;

    const Matrix dense = dense_attention(inst);
    const double smyrf_err = frob_diff(smyrf_attention(inst, cfg), dense);

    std::vector<double> random_errs;
    Rng baseline_rng(1234);
    for (int t = 0; t < 50; ++t) {
        const auto assign = random_balanced_assignment(256, 256, 16, baseline_rng);
        random_errs.push_back(frob_diff(clustered_attention(inst, assign), dense));
    }
    std::sort(random_errs.begin(), random_errs.end());
    const double median = 0.5 * (random_errs[24] + random_errs[25]);
    CHECK(smyrf_err < median);
}

TEST_CASE("smyrf attention is bitwise deterministic across thread schedules") {
    Rng rng(70);
    AttentionInstance inst;
    inst.queries = random_matrix(32, 8, rng);
    inst.keys = random_matrix(32, 8, rng);
    inst.values = random_matrix(32, 4, rng);
    SmyrfConfig cfg;
    cfg.num_clusters = 4;
    cfg.num_rounds = 6;
    cfg.seed = 3;

    setenv("SMYRF_THREADS", "1", 1);
    const Matrix serial = smyrf_attention(inst, cfg);
    setenv("SMYRF_THREADS", "4", 1);
    const Matrix parallel = smyrf_attention(inst, cfg);
    unsetenv("SMYRF_THREADS");
    const Matrix again = smyrf_attention(inst, cfg);
    CHECK(serial == parallel);
    CHECK(serial == again);
}

TEST_CASE("padding: already divisible is the identity") {
    Rng rng(71);
    AttentionInstance inst;
    inst.queries = random_matrix(8, 3, rng);
    inst.keys = random_matrix(8, 3, rng);
    inst.values = random_matrix(8, 2, rng);
    const auto [padded, pad] = pad_to_divisible(inst, 4);
    CHECK(padded.queries == inst.queries);
    CHECK(padded.keys == inst.keys);
    CHECK(padded.values == inst.values);
    CHECK(pad.original_queries == 8);
    CHECK(pad.original_keys == 8);
}

TEST_CASE("padding: sink keys leave dense attention unchanged") {
    Rng rng(72);
    AttentionInstance inst;
    inst.queries = random_matrix(8, 3, rng);
    inst.keys = random_matrix(7, 3, rng);
    inst.values = random_matrix(7, 2, rng);
    const auto [padded, pad] = pad_to_divisible(inst, 4);
    CHECK(padded.n_k() == 8);
    CHECK(pad.original_keys == 7);
    const Matrix unpadded_out = dense_attention(inst);
    const Matrix padded_out = dense_attention(padded, pad);
    CHECK(max_abs_diff(unpadded_out, padded_out) < 1e-9);
}

TEST_CASE("padding: extra query rows are dropped from the pipeline output") {
    Rng rng(73);
    AttentionInstance inst;
    inst.queries = random_matrix(5, 3, rng);
    inst.keys = random_matrix(8, 3, rng);
    inst.values = random_matrix(8, 2, rng);
    const auto [padded, pad] = pad_to_divisible(inst, 4);
    CHECK(padded.n_q() == 8);
    CHECK(pad.original_queries == 5);

    SmyrfConfig cfg;
    cfg.num_clusters = 4;
    cfg.num_rounds = 2;
    cfg.seed = 8;
    const SmyrfRun run = smyrf_attention_run(inst, cfg);
    CHECK(run.output.rows() == 5);
    CHECK(run.pad.original_queries == 5);

    // Non-divisible instances still reduce to dense for L=1-equivalent runs:
    // every real query attends within balanced clusters of the padded set.
    for (double x : run.output.data()) CHECK(std::isfinite(x));
}

TEST_CASE("operation counters follow the closed forms") {
    Rng rng(74);
    const std::size_t n = 128, d = 8, d_v = 8;
    AttentionInstance inst;
    inst.queries = random_matrix(n, d, rng);
    inst.keys = random_matrix(n, d, rng);
    inst.values = random_matrix(n, d_v, rng);

    ops::reset();
    dense_attention(inst);
    const auto dense_counts = ops::snapshot();
    CHECK(dense_counts.attention_pair_mults == n * n * d);

    SmyrfConfig cfg;
    cfg.num_clusters = 16;  // C = 8 queries/keys per cluster
    cfg.num_rounds = 4;
    cfg.seed = 12;
    ops::reset();
    smyrf_attention(inst, cfg);
    const auto smyrf_counts = ops::snapshot();
    const std::size_t c_k = n / cfg.num_clusters;
    CHECK(smyrf_counts.attention_pair_mults == cfg.num_rounds * n * c_k * d);
    CHECK(smyrf_counts.hash_mults == cfg.num_rounds * (2 * n) * (d + 2));
    // Sorting is O(N log N) per side per round with a small constant.
    CHECK(smyrf_counts.sort_comparisons <= cfg.num_rounds * 2 * 3 * n * 8);
    CHECK(smyrf_counts.sort_comparisons > 0);
}

}
