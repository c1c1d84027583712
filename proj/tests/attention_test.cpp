#include <doctest.h>

#include <cmath>

#include "smyrf/attention.hpp"
#include "smyrf/error.hpp"
#include "test_support.hpp"

using namespace smyrf;
using namespace smyrf::testing;

namespace {

// Queries/keys laid out so that cross-cluster inner products are -1e6 while
// within-cluster products stay small: query c is g*e_c and key c is
// g*e_c - (1e6/g) * (1 - e_c).
AttentionInstance block_diag_instance(std::size_t clusters, std::size_t per_cluster, Rng& rng) {
    const std::size_t d = clusters;
    const double g = 2.0;
    AttentionInstance inst;
    inst.queries = Matrix(clusters * per_cluster, d);
    inst.keys = Matrix(clusters * per_cluster, d);
    inst.values = random_matrix(clusters * per_cluster, 3, rng);
    for (std::size_t c = 0; c < clusters; ++c) {
        for (std::size_t t = 0; t < per_cluster; ++t) {
            const std::size_t row = c * per_cluster + t;
            inst.queries(row, c) = g;
            for (std::size_t e = 0; e < d; ++e) {
                inst.keys(row, e) = e == c ? g : -1e6 / g;
            }
        }
    }
    return inst;
}

ClusterAssignment contiguous_assignment(std::size_t clusters, std::size_t per_q,
                                        std::size_t per_k) {
    ClusterAssignment assign;
    assign.num_clusters = clusters;
    for (std::size_t c = 0; c < clusters; ++c) {
        for (std::size_t t = 0; t < per_q; ++t)
            assign.query_cluster.push_back(static_cast<std::uint32_t>(c));
        for (std::size_t t = 0; t < per_k; ++t)
            assign.key_cluster.push_back(static_cast<std::uint32_t>(c));
    }
    return assign;
}

}  // namespace

TEST_SUITE("attention") {

TEST_CASE("dense attention with a single key returns that value row") {
    Rng rng(21);
    AttentionInstance inst;
    inst.queries = random_matrix(5, 3, rng);
    inst.keys = random_matrix(1, 3, rng);
    inst.values = random_matrix(1, 4, rng);
    const Matrix out = dense_attention(inst);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t e = 0; e < 4; ++e) CHECK(out(i, e) == doctest::Approx(inst.values(0, e)));
}

TEST_CASE("identical keys average their values") {
    Rng rng(22);
    AttentionInstance inst;
    inst.queries = random_matrix(3, 2, rng);
    const Matrix k = random_matrix(1, 2, rng);
    inst.keys = Matrix(2, 2, {k(0, 0), k(0, 1), k(0, 0), k(0, 1)});
    inst.values = random_matrix(2, 2, rng);
    const Matrix out = dense_attention(inst);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t e = 0; e < 2; ++e) {
            CHECK(out(i, e) ==
                  doctest::Approx(0.5 * (inst.values(0, e) + inst.values(1, e))).epsilon(1e-12));
        }
}

TEST_CASE("dense attention matches the scalar oracle") {
    Rng rng(23);
    AttentionInstance inst;
    inst.queries = random_matrix(8, 4, rng);
    inst.keys = random_matrix(8, 4, rng);
    inst.values = random_matrix(8, 5, rng);
    CHECK(max_abs_diff(dense_attention(inst), attention_oracle(inst)) < 1e-10);
}

TEST_CASE("dense attention equals softmax(QK^T)V") {
    Rng rng(24);
    AttentionInstance inst;
    inst.queries = random_matrix(6, 3, rng);
    inst.keys = random_matrix(9, 3, rng);
    inst.values = random_matrix(9, 2, rng);
    const Matrix via_map = matmul(softmax_rows(matmul(inst.queries, transpose(inst.keys))),
                                  inst.values);
    CHECK(max_abs_diff(dense_attention(inst), via_map) < 1e-10);
}

TEST_CASE("mask_product with one cluster is the identity") {
    Rng rng(25);
    const Matrix p = random_matrix(4, 6, rng);
    ClusterAssignment assign = contiguous_assignment(1, 4, 6);
    CHECK(mask_product(p, assign, MaskParams::hard()) == p);
}

TEST_CASE("mask_product writes -a off the diagonal clusters") {
    const Matrix p = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    ClusterAssignment assign;
    assign.num_clusters = 2;
    assign.query_cluster = {0, 1};
    assign.key_cluster = {0, 1};
    const Matrix masked = mask_product(p, assign, MaskParams::soft(std::exp(-10.0)));
    CHECK(masked(0, 0) == 1.0);
    CHECK(masked(1, 1) == 4.0);
    CHECK(masked(0, 1) == doctest::Approx(-10.0).epsilon(1e-12));
    CHECK(masked(1, 0) == doctest::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("hard mask softmax matches the per-cluster softmax oracle") {
    Rng rng(26);
    const Matrix p = random_matrix(8, 8, rng, 2.0);
    ClusterAssignment assign;
    assign.num_clusters = 2;
    assign.query_cluster = {0, 1, 0, 1, 0, 1, 0, 1};
    assign.key_cluster = {1, 0, 1, 0, 1, 0, 1, 0};
    const Matrix s = softmax_rows(mask_product(p, assign, MaskParams::hard()));
    for (std::size_t i = 0; i < s.rows(); ++i) {
        double sum = 0.0;
        for (double x : s.row(i)) sum += x;
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    CHECK(max_abs_diff(s, per_cluster_softmax_oracle(p, assign)) < 1e-12);
    for (std::size_t i = 0; i < s.rows(); ++i)
        for (std::size_t j = 0; j < s.cols(); ++j) {
            if (assign.key_cluster[j] != assign.query_cluster[i]) CHECK(s(i, j) == 0.0);
        }
}

TEST_CASE("clustered attention with one cluster is dense attention") {
    Rng rng(27);
    AttentionInstance inst;
    inst.queries = random_matrix(6, 3, rng);
    inst.keys = random_matrix(4, 3, rng);
    inst.values = random_matrix(4, 2, rng);
    const ClusterAssignment assign = contiguous_assignment(1, 6, 4);
    CHECK(max_abs_diff(clustered_attention(inst, assign), dense_attention(inst)) < 1e-12);
}

TEST_CASE("block-diagonal construction makes clustering near exact") {
    Rng rng(28);
    const AttentionInstance inst = block_diag_instance(3, 2, rng);
    const ClusterAssignment assign = contiguous_assignment(3, 2, 2);
    CHECK(max_abs_diff(clustered_attention(inst, assign), dense_attention(inst)) < 1e-6);
    CHECK(frobenius_objective(inst, assign) < 1e-5);
}

TEST_CASE("clustered attention matches mask-then-softmax on random assignments") {
    Rng rng(29);
    AttentionInstance inst;
    inst.queries = random_matrix(16, 4, rng);
    inst.keys = random_matrix(8, 4, rng);
    inst.values = random_matrix(8, 3, rng);
    ClusterAssignment assign;
    assign.num_clusters = 4;
    assign.query_cluster = {2, 0, 1, 3, 3, 1, 0, 2, 0, 1, 2, 3, 0, 1, 2, 3};
    assign.key_cluster = {3, 1, 0, 2, 1, 0, 3, 2};
    const Matrix p = matmul(inst.queries, transpose(inst.keys));
    const Matrix expected = matmul(per_cluster_softmax_oracle(p, assign), inst.values);
    CHECK(max_abs_diff(clustered_attention(inst, assign), expected) < 1e-10);
}

TEST_CASE("clustered attention outputs are convex combinations of cluster values") {
    Rng rng(30);
    AttentionInstance inst;
    inst.queries = random_matrix(12, 4, rng);
    inst.keys = random_matrix(6, 4, rng);
    inst.values = random_matrix(6, 3, rng);
    ClusterAssignment assign;
    assign.num_clusters = 3;
    assign.query_cluster = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
    assign.key_cluster = {0, 1, 2, 2, 1, 0};
    const Matrix out = clustered_attention(inst, assign);
    for (std::size_t i = 0; i < inst.n_q(); ++i) {
        const auto ci = assign.query_cluster[i];
        for (std::size_t e = 0; e < inst.d_v(); ++e) {
            double lo = 1e300, hi = -1e300;
            for (std::size_t j = 0; j < inst.n_k(); ++j) {
                if (assign.key_cluster[j] == ci) {
                    lo = std::min(lo, inst.values(j, e));
                    hi = std::max(hi, inst.values(j, e));
                }
            }
            CHECK(out(i, e) >= lo - 1e-12);
            CHECK(out(i, e) <= hi + 1e-12);
        }
    }
}

TEST_CASE("unbalanced assignments are rejected") {
    Rng rng(31);
    AttentionInstance inst;
    inst.queries = random_matrix(4, 2, rng);
    inst.keys = random_matrix(4, 2, rng);
    inst.values = random_matrix(4, 2, rng);
    ClusterAssignment bad;
    bad.num_clusters = 2;
    bad.query_cluster = {0, 0, 0, 1};
    bad.key_cluster = {0, 0, 1, 1};
    CHECK_THROWS_AS(clustered_attention(inst, bad), InvariantError);
}

TEST_CASE("frobenius objective basics") {
    Rng rng(32);
    AttentionInstance inst;
    inst.queries = random_matrix(6, 3, rng);
    inst.keys = random_matrix(6, 3, rng);
    inst.values = random_matrix(6, 2, rng);

    CHECK(frobenius_objective(inst, contiguous_assignment(1, 6, 6)) == 0.0);

    ClusterAssignment assign;
    assign.num_clusters = 2;
    assign.query_cluster = {0, 1, 0, 1, 0, 1};
    assign.key_cluster = {1, 0, 1, 0, 1, 0};

    // Explicit materialization of both maps.
    const Matrix p = matmul(inst.queries, transpose(inst.keys));
    const double expected = frob_diff(per_cluster_softmax_oracle(p, assign), softmax_rows(p));
    CHECK(frobenius_objective(inst, assign) == doctest::Approx(expected).epsilon(1e-10));

    // Invariance under relabeling of cluster ids.
    ClusterAssignment relabeled = assign;
    for (auto& c : relabeled.query_cluster) c = 1 - c;
    for (auto& c : relabeled.key_cluster) c = 1 - c;
    CHECK(frobenius_objective(inst, relabeled) ==
          doctest::Approx(frobenius_objective(inst, assign)).epsilon(1e-12));
}

TEST_CASE("soft mask converges to the hard mask") {
    // With within-cluster logits in a moderate range, epsilon = e^-30 is
    // indistinguishable from hard exclusion.
    Rng rng(33);
    AttentionInstance inst;
    inst.queries = random_matrix(6, 3, rng);
    inst.keys = random_matrix(6, 3, rng);
    inst.values = random_matrix(6, 2, rng);
    ClusterAssignment assign;
    assign.num_clusters = 3;
    assign.query_cluster = {0, 1, 2, 0, 1, 2};
    assign.key_cluster = {2, 1, 0, 0, 1, 2};

    const Matrix p = matmul(inst.queries, transpose(inst.keys));
    const Matrix soft = matmul(softmax_rows(mask_product(p, assign, MaskParams::soft(std::exp(-30.0)))),
                               inst.values);
    const Matrix hard = clustered_attention(inst, assign);
    CHECK(max_abs_diff(soft, hard) < 1e-8);
}

}
