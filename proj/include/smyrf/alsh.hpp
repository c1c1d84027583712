#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smyrf/matrix.hpp"
#include "smyrf/rng.hpp"

namespace smyrf {

// Upper bounds M_Q >= max ||q||_2 and M_K >= max ||k||_2. Exact maxima by
// default: any looser bound is valid but distorts the transform more.
struct NormBounds {
    double m_q = 0.0;
    double m_k = 0.0;

    static NormBounds exact(const Matrix& queries, const Matrix& keys);
};

enum class TransformFamily { smyrf, l2lsh, xbox, h2lsh };

const char* transform_family_name(TransformFamily f);
TransformFamily parse_transform_family(const std::string& name);

// Which asymmetric query/key transformation maps MIPS onto nearest-neighbor
// search. smyrf is the pipeline default; the other three are prior
// transformations kept for ablation.
struct TransformKind {
    TransformFamily family = TransformFamily::smyrf;

    // l2lsh only: number of appended coordinates m, and the key scaling u.
    // u == 0 asks the pipeline to scale keys so max ||u k||_2 == 0.75.
    std::size_t l2lsh_m = 3;
    double l2lsh_u = 0.0;

    static TransformKind smyrf() { return {}; }
    static TransformKind xbox() { return {TransformFamily::xbox}; }
    static TransformKind h2lsh() { return {TransformFamily::h2lsh}; }
    static TransformKind l2lsh(std::size_t m = 3, double u = 0.0) {
        return {TransformFamily::l2lsh, m, u};
    }

    std::size_t transformed_dim(std::size_t d) const;
};

// F(q) = [q; 0; sqrt(M_Q^2 + M_K^2 - ||q||^2)]   (output dim d + 2)
// G(k) = [k; sqrt(M_Q^2 + M_K^2 - ||k||^2); 0]
// Both land on the sphere of radius sqrt(M_Q^2 + M_K^2), and
// ||F(q) - G(k)||^2 == 2 (M_Q^2 + M_K^2 - q.k): transformed distance depends
// on the inner product only, not on the individual norms.
std::vector<double> transform_query_smyrf(std::span<const double> q, const NormBounds& bounds);
std::vector<double> transform_key_smyrf(std::span<const double> k, const NormBounds& bounds);

// Dispatch over all four families.
std::vector<double> transform_query(const TransformKind& kind, std::span<const double> q,
                                    const NormBounds& bounds);
std::vector<double> transform_key(const TransformKind& kind, std::span<const double> k,
                                  const NormBounds& bounds);

// Convenience: (F(q), G(k)) for one pair.
std::pair<std::vector<double>, std::vector<double>> transform_pair(
    const TransformKind& kind, std::span<const double> q, std::span<const double> k,
    const NormBounds& bounds);

// Key scaling for l2lsh such that max ||u k||_2 == 0.75 over the key set.
double l2lsh_auto_u(const Matrix& keys);

// One hashing round: h(u) = u . direction + offset, direction ~ N(0,1)^d',
// offset ~ U(0,1). This is E2LSH with the floor and bucket width dropped;
// sorting makes them redundant. The offset shifts queries and keys equally,
// so it cannot change the sort order; it is kept for fidelity.
struct HashRoundConfig {
    std::vector<double> direction;
    double offset = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t round_index = 0;

    static HashRoundConfig draw(std::uint64_t seed, std::uint64_t round_index, std::size_t dim);
};

double hash_scalar(std::span<const double> v, const HashRoundConfig& cfg);

// Row-wise transforms for a whole matrix, as used by the pipeline.
Matrix transform_queries(const Matrix& queries, const TransformKind& kind, const NormBounds& bounds);
Matrix transform_keys(const Matrix& keys, const TransformKind& kind, const NormBounds& bounds);

}  // namespace smyrf
