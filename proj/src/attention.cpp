#include "smyrf/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "smyrf/error.hpp"
#include "smyrf/ops.hpp"

namespace smyrf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Logits of query row `q` against every key, honoring sink overrides.
void query_logits(std::span<const double> q, const Matrix& keys, const PadInfo* pad,
                  double* out) {
    const std::size_t n_k = keys.rows();
    const std::size_t sink_from = pad ? pad->original_keys : n_k;
    for (std::size_t j = 0; j < n_k; ++j) {
        out[j] = j < sink_from ? dot(q, keys.row(j)) : kSinkLogit;
    }
}

}  // namespace

void AttentionInstance::validate() const {
    if (queries.cols() != keys.cols()) {
        throw ShapeError("AttentionInstance: query dim " + std::to_string(queries.cols()) +
                         " != key dim " + std::to_string(keys.cols()));
    }
    if (keys.rows() != values.rows()) {
        throw ShapeError("AttentionInstance: " + std::to_string(keys.rows()) + " keys vs " +
                         std::to_string(values.rows()) + " value rows");
    }
    if (queries.rows() == 0 || keys.rows() == 0) {
        throw ShapeError("AttentionInstance: needs at least one query and one key");
    }
    queries.require_finite("queries");
    keys.require_finite("keys");
    values.require_finite("values");
}

void ClusterAssignment::validate() const {
    if (num_clusters == 0) throw InvariantError("ClusterAssignment: zero clusters");
    if (query_cluster.size() % num_clusters != 0 || key_cluster.size() % num_clusters != 0) {
        throw InvariantError("ClusterAssignment: cluster count must divide N_q and N_k");
    }
    const std::size_t want_q = queries_per_cluster();
    const std::size_t want_k = keys_per_cluster();
    std::vector<std::size_t> nq(num_clusters, 0), nk(num_clusters, 0);
    for (auto c : query_cluster) {
        if (c >= num_clusters) throw InvariantError("ClusterAssignment: query cluster id out of range");
        ++nq[c];
    }
    for (auto c : key_cluster) {
        if (c >= num_clusters) throw InvariantError("ClusterAssignment: key cluster id out of range");
        ++nk[c];
    }
    for (std::size_t c = 0; c < num_clusters; ++c) {
        if (nq[c] != want_q || nk[c] != want_k) {
            throw InvariantError("ClusterAssignment: cluster " + std::to_string(c) +
                                 " has " + std::to_string(nq[c]) + " queries / " +
                                 std::to_string(nk[c]) + " keys, want " +
                                 std::to_string(want_q) + "/" + std::to_string(want_k));
        }
    }
}

MaskParams MaskParams::soft(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw DomainError("MaskParams::soft: epsilon must be in (0, 1)");
    }
    return MaskParams{epsilon};
}

double MaskParams::mask_logit() const {
    if (is_hard()) return kNegInf;
    return std::log(epsilon);
}

namespace detail {

std::vector<std::vector<std::uint32_t>> cluster_members(std::span<const std::uint32_t> labels,
                                                        std::size_t num_clusters) {
    std::vector<std::vector<std::uint32_t>> members(num_clusters);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        members[labels[i]].push_back(static_cast<std::uint32_t>(i));
    }
    return members;
}

void clustered_attention_core(const AttentionInstance& inst, const ClusterAssignment& assign,
                              const PadInfo* pad, Matrix& out, std::vector<double>* mass,
                              std::vector<double>* shift) {
    assign.validate();
    if (assign.query_cluster.size() != inst.n_q() || assign.key_cluster.size() != inst.n_k()) {
        throw ShapeError("clustered_attention: assignment does not cover the instance");
    }

    const std::size_t d_v = inst.d_v();
    out = Matrix(inst.n_q(), d_v);
    if (mass) mass->assign(inst.n_q(), 0.0);
    if (shift) shift->assign(inst.n_q(), kNegInf);

    const auto q_members = cluster_members(assign.query_cluster, assign.num_clusters);
    const auto k_members = cluster_members(assign.key_cluster, assign.num_clusters);

    std::vector<double> logits;
    for (std::size_t c = 0; c < assign.num_clusters; ++c) {
        const auto& qs = q_members[c];
        const auto& ks = k_members[c];
        if (qs.empty() || ks.empty()) continue;
        logits.resize(ks.size());
        const std::size_t sink_from = pad ? pad->original_keys : inst.n_k();
        for (auto qi : qs) {
            auto q = inst.queries.row(qi);
            double mx = kNegInf;
            for (std::size_t t = 0; t < ks.size(); ++t) {
                logits[t] = ks[t] < sink_from ? dot(q, inst.keys.row(ks[t])) : kSinkLogit;
                mx = std::max(mx, logits[t]);
            }
            double sum = 0.0;
            for (double& lg : logits) {
                lg = std::exp(lg - mx);
                sum += lg;
            }
            double* out_row = out.row(qi).data();
            for (std::size_t t = 0; t < ks.size(); ++t) {
                const double w = logits[t] / sum;
                const double* v = inst.values.row(ks[t]).data();
                for (std::size_t e = 0; e < d_v; ++e) out_row[e] += w * v[e];
            }
            if (mass) (*mass)[qi] = sum;
            if (shift) (*shift)[qi] = mx;
        }
        ops::add_attention_pairs(static_cast<std::uint64_t>(qs.size()) * ks.size() * inst.d());
        ops::add_value(static_cast<std::uint64_t>(qs.size()) * ks.size() * d_v);
    }
}

}  // namespace detail

Matrix dense_attention(const AttentionInstance& inst) {
    return dense_attention(inst, PadInfo{inst.n_q(), inst.n_k()});
}

Matrix dense_attention(const AttentionInstance& inst, const PadInfo& pad) {
    inst.validate();
    const std::size_t n_q = inst.n_q();
    const std::size_t n_k = inst.n_k();
    const std::size_t d_v = inst.d_v();

    Matrix out(n_q, d_v);
    std::vector<double> logits(n_k);
    for (std::size_t i = 0; i < n_q; ++i) {
        query_logits(inst.queries.row(i), inst.keys, &pad, logits.data());
        double mx = kNegInf;
        for (double lg : logits) mx = std::max(mx, lg);
        double sum = 0.0;
        for (double& lg : logits) {
            lg = std::exp(lg - mx);
            sum += lg;
        }
        double* out_row = out.row(i).data();
        for (std::size_t j = 0; j < n_k; ++j) {
            const double w = logits[j] / sum;
            const double* v = inst.values.row(j).data();
            for (std::size_t e = 0; e < d_v; ++e) out_row[e] += w * v[e];
        }
    }
    ops::add_attention_pairs(static_cast<std::uint64_t>(n_q) * n_k * inst.d());
    ops::add_value(static_cast<std::uint64_t>(n_q) * n_k * d_v);
    return out;
}

Matrix mask_product(const Matrix& p, const ClusterAssignment& assign, const MaskParams& mask) {
    assign.validate();
    if (assign.query_cluster.size() != p.rows() || assign.key_cluster.size() != p.cols()) {
        throw ShapeError("mask_product: assignment does not cover the product matrix");
    }
    const double masked = mask.mask_logit();
    Matrix out(p.rows(), p.cols());
    for (std::size_t i = 0; i < p.rows(); ++i) {
        const auto ci = assign.query_cluster[i];
        for (std::size_t j = 0; j < p.cols(); ++j) {
            out(i, j) = assign.key_cluster[j] == ci ? p(i, j) : masked;
        }
    }
    return out;
}

Matrix clustered_attention(const AttentionInstance& inst, const ClusterAssignment& assign) {
    inst.validate();
    Matrix out;
    detail::clustered_attention_core(inst, assign, nullptr, out, nullptr, nullptr);
    return out;
}

double frobenius_objective(const AttentionInstance& inst, const ClusterAssignment& assign) {
    return frobenius_objective(inst, assign, PadInfo{inst.n_q(), inst.n_k()});
}

double frobenius_objective(const AttentionInstance& inst, const ClusterAssignment& assign,
                           const PadInfo& pad) {
    inst.validate();
    assign.validate();
    if (assign.query_cluster.size() != inst.n_q() || assign.key_cluster.size() != inst.n_k()) {
        throw ShapeError("frobenius_objective: assignment does not cover the instance");
    }

    const std::size_t n_k = inst.n_k();
    std::vector<double> logits(n_k);
    double total = 0.0;
    for (std::size_t i = 0; i < pad.original_queries; ++i) {
        query_logits(inst.queries.row(i), inst.keys, &pad, logits.data());
        const auto ci = assign.query_cluster[i];

        double mx_dense = kNegInf;
        double mx_cluster = kNegInf;
        for (std::size_t j = 0; j < n_k; ++j) {
            mx_dense = std::max(mx_dense, logits[j]);
            if (assign.key_cluster[j] == ci) mx_cluster = std::max(mx_cluster, logits[j]);
        }
        double sum_dense = 0.0;
        double sum_cluster = 0.0;
        for (std::size_t j = 0; j < n_k; ++j) {
            sum_dense += std::exp(logits[j] - mx_dense);
            if (assign.key_cluster[j] == ci) sum_cluster += std::exp(logits[j] - mx_cluster);
        }
        for (std::size_t j = 0; j < n_k; ++j) {
            const double w_dense = std::exp(logits[j] - mx_dense) / sum_dense;
            const double w_cluster =
                assign.key_cluster[j] == ci ? std::exp(logits[j] - mx_cluster) / sum_cluster : 0.0;
            const double diff = w_cluster - w_dense;
            total += diff * diff;
        }
    }
    return std::sqrt(total);
}

}  // namespace smyrf
