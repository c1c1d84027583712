#include "smyrf/alsh.hpp"

#include <cmath>
#include <string>

#include "smyrf/error.hpp"

namespace smyrf {

namespace {

// Norms may exceed the bound by rounding noise only.
void require_within(double norm, double bound, const char* what) {
    if (norm > bound * (1.0 + 1e-12) + 1e-300) {
        throw DomainError(std::string(what) + ": norm " + std::to_string(norm) +
                          " exceeds bound " + std::to_string(bound));
    }
}

double radicand(double bound_sq, double norm_sq) {
    return std::max(0.0, bound_sq - norm_sq);
}

}  // namespace

NormBounds NormBounds::exact(const Matrix& queries, const Matrix& keys) {
    NormBounds b;
    for (std::size_t i = 0; i < queries.rows(); ++i) b.m_q = std::max(b.m_q, l2_norm(queries.row(i)));
    for (std::size_t i = 0; i < keys.rows(); ++i) b.m_k = std::max(b.m_k, l2_norm(keys.row(i)));
    return b;
}

const char* transform_family_name(TransformFamily f) {
    switch (f) {
        case TransformFamily::smyrf: return "smyrf";
        case TransformFamily::l2lsh: return "l2lsh";
        case TransformFamily::xbox: return "xbox";
        case TransformFamily::h2lsh: return "h2lsh";
    }
    return "?";
}

TransformFamily parse_transform_family(const std::string& name) {
    if (name == "smyrf") return TransformFamily::smyrf;
    if (name == "l2lsh") return TransformFamily::l2lsh;
    if (name == "xbox") return TransformFamily::xbox;
    if (name == "h2lsh") return TransformFamily::h2lsh;
    throw UsageError("unknown transform '" + name + "' (smyrf|l2lsh|xbox|h2lsh)");
}

std::size_t TransformKind::transformed_dim(std::size_t d) const {
    switch (family) {
        case TransformFamily::smyrf: return d + 2;
        case TransformFamily::l2lsh: return d + l2lsh_m;
        case TransformFamily::xbox:
        case TransformFamily::h2lsh: return d + 1;
    }
    return d;
}

std::vector<double> transform_query_smyrf(std::span<const double> q, const NormBounds& bounds) {
    const double norm = l2_norm(q);
    require_within(norm, bounds.m_q, "transform_query_smyrf");
    const double bound_sq = bounds.m_q * bounds.m_q + bounds.m_k * bounds.m_k;
    std::vector<double> out(q.size() + 2);
    std::copy(q.begin(), q.end(), out.begin());
    out[q.size()] = 0.0;
    out[q.size() + 1] = std::sqrt(radicand(bound_sq, norm * norm));
    return out;
}

std::vector<double> transform_key_smyrf(std::span<const double> k, const NormBounds& bounds) {
    const double norm = l2_norm(k);
    require_within(norm, bounds.m_k, "transform_key_smyrf");
    const double bound_sq = bounds.m_q * bounds.m_q + bounds.m_k * bounds.m_k;
    std::vector<double> out(k.size() + 2);
    std::copy(k.begin(), k.end(), out.begin());
    out[k.size()] = std::sqrt(radicand(bound_sq, norm * norm));
    out[k.size() + 1] = 0.0;
    return out;
}

std::vector<double> transform_query(const TransformKind& kind, std::span<const double> q,
                                    const NormBounds& bounds) {
    switch (kind.family) {
        case TransformFamily::smyrf:
            return transform_query_smyrf(q, bounds);

        case TransformFamily::xbox: {
            // F(q) = [q; 0]
            std::vector<double> f(q.begin(), q.end());
            f.push_back(0.0);
            return f;
        }

        case TransformFamily::h2lsh: {
            // F(q) = (M_K/||q||) [q; 0]
            const double qn = l2_norm(q);
            if (qn == 0.0) throw DomainError("transform(h2lsh): zero query");
            const double scale = bounds.m_k / qn;
            std::vector<double> f(q.size() + 1);
            for (std::size_t i = 0; i < q.size(); ++i) f[i] = scale * q[i];
            f[q.size()] = 0.0;
            return f;
        }

        case TransformFamily::l2lsh: {
            // F(q) = [q; 1/2, ..., 1/2]
            if (kind.l2lsh_m == 0) throw DomainError("transform(l2lsh): m must be >= 1");
            std::vector<double> f(q.begin(), q.end());
            f.insert(f.end(), kind.l2lsh_m, 0.5);
            return f;
        }
    }
    throw DomainError("transform: unknown transform kind");
}

std::vector<double> transform_key(const TransformKind& kind, std::span<const double> k,
                                  const NormBounds& bounds) {
    switch (kind.family) {
        case TransformFamily::smyrf:
            return transform_key_smyrf(k, bounds);

        case TransformFamily::xbox:
        case TransformFamily::h2lsh: {
            // G(k) = [k; sqrt(M_K^2 - ||k||^2)]
            const double kn = l2_norm(k);
            require_within(kn, bounds.m_k, "transform_key");
            std::vector<double> g(k.begin(), k.end());
            g.push_back(std::sqrt(radicand(bounds.m_k * bounds.m_k, kn * kn)));
            return g;
        }

        case TransformFamily::l2lsh: {
            // G(k) = [u k; ||u k||^2; ||u k||^4; ...; ||u k||^(2^m)]
            // The distance identity picks up the residual ||u k||^(2^{m+1}).
            const std::size_t m = kind.l2lsh_m;
            if (m == 0) throw DomainError("transform(l2lsh): m must be >= 1");
            const double u = kind.l2lsh_u;
            if (!(u > 0.0)) throw DomainError("transform(l2lsh): u must be positive");
            std::vector<double> g(k.size() + m);
            for (std::size_t i = 0; i < k.size(); ++i) g[i] = u * k[i];
            double norm_sq = 0.0;
            for (std::size_t i = 0; i < k.size(); ++i) norm_sq += g[i] * g[i];
            double power = norm_sq;  // ||u k||^(2^1)
            for (std::size_t i = 0; i < m; ++i) {
                g[k.size() + i] = power;
                power = power * power;
            }
            return g;
        }
    }
    throw DomainError("transform: unknown transform kind");
}

std::pair<std::vector<double>, std::vector<double>> transform_pair(
    const TransformKind& kind, std::span<const double> q, std::span<const double> k,
    const NormBounds& bounds) {
    if (q.size() != k.size()) throw ShapeError("transform_pair: dimension mismatch");
    return {transform_query(kind, q, bounds), transform_key(kind, k, bounds)};
}

double l2lsh_auto_u(const Matrix& keys) {
    double mx = 0.0;
    for (std::size_t i = 0; i < keys.rows(); ++i) mx = std::max(mx, l2_norm(keys.row(i)));
    return mx > 0.0 ? 0.75 / mx : 1.0;
}

HashRoundConfig HashRoundConfig::draw(std::uint64_t seed, std::uint64_t round_index,
                                      std::size_t dim) {
    Rng rng = Rng::child(seed, round_index);
    HashRoundConfig cfg;
    cfg.direction = gaussian_vector(rng, dim);
    cfg.offset = rng.uniform();
    cfg.seed = seed;
    cfg.round_index = round_index;
    return cfg;
}

double hash_scalar(std::span<const double> v, const HashRoundConfig& cfg) {
    if (v.size() != cfg.direction.size()) {
        throw ShapeError("hash_scalar: vector dim " + std::to_string(v.size()) +
                         " != direction dim " + std::to_string(cfg.direction.size()));
    }
    return dot(v, cfg.direction) + cfg.offset;
}

Matrix transform_queries(const Matrix& queries, const TransformKind& kind,
                         const NormBounds& bounds) {
    Matrix out(queries.rows(), kind.transformed_dim(queries.cols()));
    for (std::size_t i = 0; i < queries.rows(); ++i) {
        const auto f = transform_query(kind, queries.row(i), bounds);
        std::copy(f.begin(), f.end(), out.row(i).begin());
    }
    return out;
}

Matrix transform_keys(const Matrix& keys, const TransformKind& kind, const NormBounds& bounds) {
    Matrix out(keys.rows(), kind.transformed_dim(keys.cols()));
    for (std::size_t i = 0; i < keys.rows(); ++i) {
        const auto g = transform_key(kind, keys.row(i), bounds);
        std::copy(g.begin(), g.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace smyrf
