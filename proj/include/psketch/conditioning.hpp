#pragma once

// Sketch-and-factor preconditioning and empirical (alpha, beta, p) conditioning.

#include <cmath>
#include <cstdint>
#include <string>

#include "json.hpp"

#include "psketch/distortion.hpp"
#include "psketch/embeddings.hpp"
#include "psketch/errors.hpp"
#include "psketch/linalg.hpp"
#include "psketch/numcore.hpp"

namespace psketch {

struct ConditioningReport {
    double alpha_hat = 0.0; // entrywise ||U||_p
    double beta_hat = 0.0;  // empirical max of ||x||_q / ||U x||_p; a lower bound on beta
    double p = 1.0;
    std::size_t witnesses = 0;

    double product() const { return alpha_hat * beta_hat; }
};

inline void to_json(nlohmann::json& j, const ConditioningReport& r)
{
    j = nlohmann::json{{"alpha_hat", r.alpha_hat},
                       {"beta_hat", r.beta_hat},
                       {"p", r.p},
                       {"witnesses", r.witnesses},
                       {"beta_estimate", "empirical lower bound"}};
}

struct ConditionedBasis {
    DenseMatrix u; // A R^-1
    DenseMatrix r; // from Pi A = Q R
};

/// Sketches A with the embedding described by spec (n, d taken from A), factors
/// Pi A = Q R and returns U = A R^-1 together with R.
inline ConditionedBasis sketch_and_factor(const DenseMatrix& a, double p, EmbeddingSpec spec, std::uint64_t seed)
{
    (void)PNorm{p};
    spec.n = a.rows();
    spec.d = a.cols();
    spec.seed = seed;
    if (spec.family != Family::countsketch && spec.family != Family::osnap && spec.family != Family::identity)
        spec.p = p;
    const Embedding e = build(spec);
    const DenseMatrix pia = apply(e, a);
    if (pia.rows() < pia.cols())
        throw ConditioningError("sketch has fewer rows (" + std::to_string(pia.rows()) + ") than d = " +
                                std::to_string(pia.cols()) + "; increase row_const");
    HouseholderQR qr(pia);
    if (!qr.full_rank())
        throw ConditioningError("sketched matrix Pi A is rank deficient; re-run with a different seed");
    DenseMatrix r = qr.r();
    return {solve_right_upper(a, r), std::move(r)};
}

inline DenseMatrix well_conditioned_basis(const DenseMatrix& a, double p, const EmbeddingSpec& spec,
                                          std::uint64_t seed)
{
    return sketch_and_factor(a, p, spec, seed).u;
}

/// alpha_hat and beta_hat of U. The first d witnesses are the coordinate vectors.
inline ConditioningReport measure_conditioning(const DenseMatrix& u, double p, std::size_t witnesses,
                                               std::uint64_t seed, SearchOptions opt = {})
{
    PNorm pn(p);
    const std::size_t d = u.cols();
    if (witnesses < d)
        throw ArgumentError("measure_conditioning needs at least d witnesses");
    for (std::size_t j = 0; j < d; ++j) {
        bool zero = true;
        for (std::size_t i = 0; i < u.rows() && zero; ++i)
            zero = u(i, j) == 0.0;
        if (zero)
            throw DegenerateInputError("column " + std::to_string(j) + " of U is zero");
    }
    opt.coordinates = true;
    opt.track_min = false;
    opt.track_max = true;
    RatioSearch search(DenseMatrix::identity(d), pn.dual(), u, p, opt);
    const SearchResult res = search.run(witnesses, seed);
    ConditioningReport rep;
    rep.p = p;
    rep.alpha_hat = entrywise_norm(u, p);
    rep.beta_hat = res.max.ratio;
    rep.witnesses = witnesses;
    return rep;
}

} // namespace psketch
