#pragma once

#include <cstdint>
#include <vector>

#include "smyrf/matrix.hpp"

namespace smyrf {

// One attention problem: queries (N_q x d), keys (N_k x d), values (N_k x d_v).
// A multi-head layer is just several independent instances.
struct AttentionInstance {
    Matrix queries;
    Matrix keys;
    Matrix values;

    std::size_t n_q() const { return queries.rows(); }
    std::size_t n_k() const { return keys.rows(); }
    std::size_t d() const { return queries.cols(); }
    std::size_t d_v() const { return values.cols(); }

    void validate() const;
};

// Balanced joint partition of query and key indices: every cluster holds
// exactly N_q/L query indices and N_k/L key indices.
struct ClusterAssignment {
    std::size_t num_clusters = 1;
    std::vector<std::uint32_t> query_cluster;  // length N_q, values in [0, L)
    std::vector<std::uint32_t> key_cluster;    // length N_k, values in [0, L)

    std::size_t queries_per_cluster() const { return query_cluster.size() / num_clusters; }
    std::size_t keys_per_cluster() const { return key_cluster.size() / num_clusters; }

    // Throws InvariantError unless the balance/partition invariants hold.
    void validate() const;
};

// Masking constant for out-of-cluster logits: entries become -a with
// e^{-a} = epsilon. epsilon == 0 is the hard mask; masked logits are -inf
// and drop out of the softmax entirely.
struct MaskParams {
    double epsilon = 0.0;

    static MaskParams hard() { return MaskParams{0.0}; }
    static MaskParams soft(double epsilon);

    bool is_hard() const { return epsilon == 0.0; }
    double mask_logit() const;  // -a (== ln epsilon), or -inf for the hard mask
};

// Pad rows appended past the original counts; real rows always come first.
// Attention entry points that take a PadInfo treat key rows at index >=
// original_keys as far sinks (forced logit kSinkLogit, zero value row) and
// query rows at index >= original_queries as placeholders.
struct PadInfo {
    std::size_t original_queries = 0;
    std::size_t original_keys = 0;
};

inline constexpr double kSinkLogit = -1.0e6;

// Exact reference: softmax(Q.K^T).V, computed row-blockwise (the N_q x N_k
// map is never materialized). No 1/sqrt(d) scaling; callers pre-scale.
Matrix dense_attention(const AttentionInstance& inst);
Matrix dense_attention(const AttentionInstance& inst, const PadInfo& pad);

// The masking operator applied to an explicit product matrix P.
Matrix mask_product(const Matrix& p, const ClusterAssignment& assign, const MaskParams& mask);

// Dense attention restricted to each query's own cluster, computed blockwise.
Matrix clustered_attention(const AttentionInstance& inst, const ClusterAssignment& assign);

// || softmax(Mask_0(P)) - softmax(P) ||_F, streamed one query row at a time.
double frobenius_objective(const AttentionInstance& inst, const ClusterAssignment& assign);
double frobenius_objective(const AttentionInstance& inst, const ClusterAssignment& assign,
                           const PadInfo& pad);

namespace detail {

// Shared blockwise kernel. Writes each query's within-cluster attention row
// into out; optionally records the per-query max logit (shift) and the
// softmax mass sum(e^{logit - shift}) over the query's cluster.
void clustered_attention_core(const AttentionInstance& inst, const ClusterAssignment& assign,
                              const PadInfo* pad, Matrix& out, std::vector<double>* mass,
                              std::vector<double>* shift);

// Index lists per cluster, in ascending index order.
std::vector<std::vector<std::uint32_t>> cluster_members(std::span<const std::uint32_t> labels,
                                                        std::size_t num_clusters);

}  // namespace detail

}  // namespace smyrf
