#pragma once

#include <cstdint>

#include "spme/domain.hpp"

namespace spme {

struct EmbeddingResult {
    double gamma = 0.0;      ///< 1 / quotient
    double quotient = 0.0;   ///< best ||u||_{-1} / |u|_{m+1} found
    Field maximizer;         ///< normalized to |u|_{m+1} = 1
    int starts = 0;
    int converged_starts = 0;
    int iterations = 0;      ///< total over all starts
};

/// Discrete embedding constant gamma with gamma^{-1} = sup ||u||_{-1} / |u|_{m+1}
/// over grid functions (mean-zero ones on periodic boxes), m in (0, 1].
///
/// Each start runs the ascent u <- argmax_{|v|_p <= 1} <(-Delta)^{-1} u, v>,
/// p = m + 1, which in closed form is the normalized |g|^{q-2} g with
/// g = (-Delta)^{-1} u and q the conjugate exponent. The quotient is
/// nondecreasing along the iteration because the objective is convex. On
/// periodic boxes the update is projected to mean zero and damped until the
/// quotient does not decrease.
///
/// The returned quotient is attained by `maximizer`, so it is a lower bound
/// for the discrete supremum and gamma is an upper bound for the discrete constant.
/// Throws NonConvergence if no start stagnates (relative change < tol) within `budget`.
EmbeddingResult embedding_constant(const GridPtr& grid, double m, int starts = 8, std::uint64_t seed = 20240601,
                                   int budget = 20000, double tol = 1e-8);

}  // namespace spme
