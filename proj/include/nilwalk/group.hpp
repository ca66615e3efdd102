#pragma once

#include <cmath>
#include <vector>

#include "nilwalk/algebra.hpp"
#include "nilwalk/errors.hpp"

namespace nilwalk {

/// Element of the simply connected group of a GradedAlgebra, stored in
/// exponential coordinates of the first kind: g = exp(z), z in g.
/// log and exp are the identity on coordinates under this choice.
struct GroupElement {
    Vec z;

    GroupElement() = default;
    explicit GroupElement(Vec coords) : z(std::move(coords)) {}
    int dim() const { return static_cast<int>(z.size()); }
};

/// Selects the group law: Dot is the given product (full bracket), Star the
/// stratified limit product (graded bracket). They agree on layers 1 and 2,
/// and coincide entirely for step <= 2.
enum class Product { Dot, Star };

inline GroupElement identity(const GradedAlgebra& alg) {
    return GroupElement(Vec::Zero(alg.dim()));
}

namespace detail {

// Scratch buffers for the truncated product; reusable across calls so the
// samplers do not allocate per step.
struct BchWorkspace {
    std::vector<double> w1, w2, w3, w4;
    void resize(int d) {
        if (static_cast<int>(w1.size()) != d) {
            w1.assign(d, 0.0);
            w2.assign(d, 0.0);
            w3.assign(d, 0.0);
            w4.assign(d, 0.0);
        }
    }
};

// out = log(exp(x) exp(y)) for a nilpotent algebra of step r <= 4, via the
// closed form of the series truncated at commutator depth 4:
//   x + y + 1/2 [x,y] + 1/12 [x,[x,y]] - 1/12 [y,[x,y]] - 1/24 [y,[x,[x,y]]].
// Exact for step <= 4 since all deeper nested brackets vanish.
inline void bch_into(const GradedAlgebra& alg, Product kind, const double* x,
                     const double* y, double* out, BchWorkspace& ws) {
    const int d = alg.dim();
    const int r = alg.step();
    if (r > 4)
        throw ValidationError("group product: step > 4 not supported");
    const bool graded = (kind == Product::Star);
    for (int i = 0; i < d; ++i)
        out[i] = x[i] + y[i];
    if (r < 2 || !alg.has_brackets())
        return;
    ws.resize(d);
    std::fill(ws.w1.begin(), ws.w1.end(), 0.0);
    alg.bracket_into(x, y, ws.w1.data(), graded);
    for (int i = 0; i < d; ++i)
        out[i] += 0.5 * ws.w1[i];
    if (r < 3)
        return;
    std::fill(ws.w2.begin(), ws.w2.end(), 0.0);
    std::fill(ws.w3.begin(), ws.w3.end(), 0.0);
    alg.bracket_into(x, ws.w1.data(), ws.w2.data(), graded);
    alg.bracket_into(y, ws.w1.data(), ws.w3.data(), graded);
    for (int i = 0; i < d; ++i)
        out[i] += (ws.w2[i] - ws.w3[i]) / 12.0;
    if (r < 4)
        return;
    std::fill(ws.w4.begin(), ws.w4.end(), 0.0);
    alg.bracket_into(y, ws.w2.data(), ws.w4.data(), graded);
    for (int i = 0; i < d; ++i)
        out[i] -= ws.w4[i] / 24.0;
}

} // namespace detail

inline GroupElement group_mul(const GroupElement& g, const GroupElement& h,
                              const GradedAlgebra& alg,
                              Product kind = Product::Dot) {
    if (g.dim() != alg.dim() || h.dim() != alg.dim())
        throw ValidationError("group_mul: element dimension mismatch");
    thread_local detail::BchWorkspace ws;
    GroupElement out(Vec::Zero(alg.dim()));
    detail::bch_into(alg, kind, g.z.data(), h.z.data(), out.z.data(), ws);
    return out;
}

/// exp(z)^{-1} = exp(-z), for either product.
inline GroupElement inverse(const GroupElement& g) {
    return GroupElement(-g.z);
}

/// Dilation: scales the layer-k block by eps^k. A group automorphism of the
/// Star product; an automorphism of Dot only at eps = 1.
inline GroupElement dilate(const GroupElement& g, double eps,
                           const GradedAlgebra& alg) {
    if (eps < 0.0)
        throw ValidationError("dilate: eps must be nonnegative");
    GroupElement out(Vec(alg.dim()));
    double scale = 1.0;
    for (int k = 1; k <= alg.step(); ++k) {
        scale *= eps;
        out.z.segment(alg.layer_offset(k), alg.layer_dim(k)) =
            scale * g.z.segment(alg.layer_offset(k), alg.layer_dim(k));
    }
    return out;
}

/// Homogeneous norm: sum over layers of the Euclidean layer norm to the
/// power 1/k. Satisfies |tau_eps g| = eps |g|.
inline double hom_norm(const GroupElement& g, const GradedAlgebra& alg) {
    double total = 0.0;
    for (int k = 1; k <= alg.step(); ++k) {
        double layer =
            g.z.segment(alg.layer_offset(k), alg.layer_dim(k)).norm();
        total += std::pow(layer, 1.0 / k);
    }
    return total;
}

/// |log(g^{-1} * h)|_Hom, a left-*-invariant surrogate equivalent to the
/// Carnot-Caratheodory metric (constants absorbed into tolerances).
inline double dist_surrogate(const GroupElement& g, const GroupElement& h,
                             const GradedAlgebra& alg) {
    return hom_norm(group_mul(inverse(g), h, alg, Product::Star), alg);
}

} // namespace nilwalk
