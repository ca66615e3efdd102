#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "nilwalk/errors.hpp"
#include "nilwalk/graph.hpp"
#include "nilwalk/group.hpp"

namespace nilwalk {

/// Gamma-equivariant realization of the cover, stored as one group element
/// per fundamental-domain vertex. The extension to the cover is implicit:
/// positions in other domains differ by the left action of the deck group,
/// so the increment along an edge is the quotient-level quantity
///   dPhi(e) = Phi(o(e))^{-1} . voltage(e) . Phi(t(e))
/// and the reverse edge carries the exact group inverse.
struct PeriodicRealization {
    std::vector<GroupElement> phi;
};

inline GroupElement d_phi(const QuotientGraph& g,
                          const PeriodicRealization& real, int edge_id) {
    const GradedAlgebra& alg = g.algebra();
    GroupElement step = group_mul(inverse(real.phi[g.edge_origin(edge_id)]),
                                  g.edge_voltage(edge_id), alg);
    return group_mul(step, real.phi[g.edge_terminus(edge_id)], alg);
}

/// Fixes the kernel of the harmonic system. MeanZero pins the m-weighted mean
/// of the layer-1 coordinates to a prescribed constant (the same constant at
/// every eps keeps the family mean-stationary); BasePoint pins one vertex to
/// the identity, the conventional normalization of the hexagonal example.
struct Gauge {
    enum class Kind { MeanZero, BasePoint };
    Kind kind = Kind::MeanZero;
    Vec mean;            // MeanZero target; zero vector if empty
    int base_vertex = 0; // BasePoint anchor

    static Gauge mean_zero() { return Gauge{}; }
    static Gauge mean_value(Vec target) {
        Gauge g;
        g.mean = std::move(target);
        return g;
    }
    static Gauge base_point(int vertex = 0) {
        Gauge g;
        g.kind = Kind::BasePoint;
        g.base_vertex = vertex;
        return g;
    }
};

/// Asymptotic direction rho(gamma_p) in g^(1). Increments of any realization
/// telescope out of the sum, leaving the voltage abelianizations:
///   rho = sum_pairs (m~(e) - m~(rev e)) * voltage(e)|_1.
inline Vec asymptotic_direction(const QuotientGraph& g,
                                const TransitionKernel& kernel,
                                const InvariantMeasure& m) {
    const GradedAlgebra& alg = g.algebra();
    const int d1 = alg.layer_dim(1);
    Vec rho = Vec::Zero(d1);
    for (int k = 0; k < g.num_pairs(); ++k) {
        int e = QuotientGraph::forward_edge(k);
        double w = tilde_m(g, kernel, m, e) -
                   tilde_m(g, kernel, m, QuotientGraph::involution(e));
        rho += w * g.pair(k).voltage.z.head(d1);
    }
    return rho;
}

/// Same functional evaluated through a realization's increments; equals the
/// voltage formula for every realization (used as a cross-check).
inline Vec asymptotic_direction(const QuotientGraph& g,
                                const TransitionKernel& kernel,
                                const InvariantMeasure& m,
                                const PeriodicRealization& real) {
    const int d1 = g.algebra().layer_dim(1);
    Vec rho = Vec::Zero(d1);
    for (int e = 0; e < g.num_edges(); ++e)
        rho += tilde_m(g, kernel, m, e) * d_phi(g, real, e).z.head(d1);
    return rho;
}

/// Max over vertices of | sum_{e in E_x} p(e) log dPhi(e)|_1 - target |.
inline double harmonicity_residual(const QuotientGraph& g,
                                   const TransitionKernel& kernel,
                                   const PeriodicRealization& real,
                                   const Vec& target) {
    const int d1 = g.algebra().layer_dim(1);
    double worst = 0.0;
    for (int x = 0; x < g.num_vertices(); ++x) {
        Vec acc = -target;
        for (int e : g.out_edges(x))
            acc += kernel(e) * d_phi(g, real, e).z.head(d1);
        worst = std::max(worst, acc.lpNorm<Eigen::Infinity>());
    }
    return worst;
}

/// Solves for the realization whose layer-1 edge increments have constant
/// expectation at every vertex:
///   sum_{e in E_x} p(e) log dPhi(e)|_1 = rho(gamma_p)   for all x.
/// The right-hand side must be the kernel's own asymptotic direction (summing
/// the equations against m forces it); `expected_target`, when given, is
/// checked against it. Layers >= 2 are set to zero on the fundamental domain.
/// One vertex equation is implied by the others through stationarity, so it
/// is replaced by the gauge row and the full residual is verified afterwards.
inline PeriodicRealization solve_modified_harmonic(
    const QuotientGraph& g, const TransitionKernel& kernel,
    const InvariantMeasure& m, const Gauge& gauge = Gauge::mean_zero(),
    const std::optional<Vec>& expected_target = std::nullopt,
    double residual_tol = 1e-12) {
    const GradedAlgebra& alg = g.algebra();
    const int n = g.num_vertices();
    const int d1 = alg.layer_dim(1);

    int ncomp = 0;
    auto comp = detail::strong_components(g, kernel, &ncomp);
    if (ncomp != 1)
        throw ValidationError("solve_modified_harmonic: kernel not irreducible: " +
                              detail::scc_diagnostic(g, comp, ncomp));
    require_invariant(g, kernel, m);

    Vec target = asymptotic_direction(g, kernel, m);
    if (expected_target) {
        if (expected_target->size() != d1)
            throw ValidationError("solve_modified_harmonic: target dimension mismatch");
        if ((*expected_target - target).lpNorm<Eigen::Infinity>() > 1e-10)
            throw ValidationError(
                "solve_modified_harmonic: prescribed direction is not the "
                "kernel's asymptotic direction; the system would be unsolvable");
    }

    // (I - P) phi = b per layer-1 coordinate, P the transition operator and
    // b(x) = sum_{e in E_x} p(e) voltage(e)|_1 - target.
    Mat a = Mat::Zero(n, n);
    Mat b = Mat::Zero(n, d1);
    for (int x = 0; x < n; ++x) {
        a(x, x) += 1.0;
        b.row(x) = -target.transpose();
        for (int e : g.out_edges(x)) {
            a(x, g.edge_terminus(e)) -= kernel(e);
            b.row(x) += kernel(e) * g.edge_voltage(e).z.head(d1).transpose();
        }
    }
    // Replace the last vertex's equation with the gauge row.
    if (gauge.kind == Gauge::Kind::MeanZero) {
        for (int y = 0; y < n; ++y)
            a(n - 1, y) = m(y);
        Vec mean = gauge.mean.size() ? gauge.mean : Vec::Zero(d1);
        if (mean.size() != d1)
            throw ValidationError("gauge: mean target dimension mismatch");
        b.row(n - 1) = mean.transpose();
    } else {
        if (gauge.base_vertex < 0 || gauge.base_vertex >= n)
            throw ValidationError("gauge: base vertex out of range");
        a.row(n - 1).setZero();
        a(n - 1, gauge.base_vertex) = 1.0;
        b.row(n - 1).setZero();
    }
    Eigen::PartialPivLU<Mat> lu(a);
    Mat phi1 = lu.solve(b);
    if (!phi1.allFinite())
        throw NumericError("solve_modified_harmonic: singular system");

    PeriodicRealization real;
    real.phi.reserve(n);
    for (int x = 0; x < n; ++x) {
        Vec z = Vec::Zero(alg.dim());
        z.head(d1) = phi1.row(x).transpose();
        real.phi.emplace_back(std::move(z));
    }
    double res = harmonicity_residual(g, kernel, real, target);
    if (res > residual_tol)
        throw NumericError("solve_modified_harmonic: residual " +
                           std::to_string(res) + " exceeds tolerance");
    return real;
}

/// The d1 modified harmonic 1-forms w_i(e) = <x_i, log dPhi(e)|_1> read off a
/// modified harmonic realization.
inline std::vector<Chain1> modified_harmonic_forms(
    const QuotientGraph& g, const PeriodicRealization& real) {
    const int d1 = g.algebra().layer_dim(1);
    std::vector<Chain1> forms(
        d1, Chain1{std::vector<double>(g.num_pairs(), 0.0)});
    for (int k = 0; k < g.num_pairs(); ++k) {
        Vec inc = d_phi(g, real, QuotientGraph::forward_edge(k)).z.head(d1);
        for (int i = 0; i < d1; ++i)
            forms[i].c[k] = inc[i];
    }
    return forms;
}

/// Max residual of the modified harmonicity condition for 1-forms:
///   sum_{e in E_x} p(e) w(e) = <gamma_p, w>  at every vertex.
inline double form_harmonicity_residual(const QuotientGraph& g,
                                        const TransitionKernel& kernel,
                                        const InvariantMeasure& m,
                                        const std::vector<Chain1>& forms) {
    Chain1 gamma = homological_direction(g, kernel, m);
    double worst = 0.0;
    for (const Chain1& w : forms) {
        double rhs = chain_form_pairing(gamma, w);
        for (int x = 0; x < g.num_vertices(); ++x) {
            double acc = -rhs;
            for (int e : g.out_edges(x))
                acc += kernel(e) * w.coefficient(e);
            worst = std::max(worst, std::abs(acc));
        }
    }
    return worst;
}

/// Gram matrix of modified harmonic forms under
///   <<w1, w2>> = sum_e m~(e) w1(e) w2(e) - <gamma_p, w1><gamma_p, w2>,
/// the edge sum running over both orientations. Must be SPD.
inline Mat albanese_gram(const QuotientGraph& g, const TransitionKernel& kernel,
                         const InvariantMeasure& m,
                         const std::vector<Chain1>& forms) {
    const int d1 = static_cast<int>(forms.size());
    Chain1 gamma = homological_direction(g, kernel, m);
    Vec pairings(d1);
    for (int i = 0; i < d1; ++i)
        pairings[i] = chain_form_pairing(gamma, forms[i]);
    Mat gram = Mat::Zero(d1, d1);
    for (int k = 0; k < g.num_pairs(); ++k) {
        int e = QuotientGraph::forward_edge(k);
        double weight = tilde_m(g, kernel, m, e) +
                        tilde_m(g, kernel, m, QuotientGraph::involution(e));
        for (int i = 0; i < d1; ++i)
            for (int j = 0; j < d1; ++j)
                gram(i, j) += weight * forms[i].c[k] * forms[j].c[k];
    }
    gram -= pairings * pairings.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    if (eig.eigenvalues().minCoeff() <= 0.0)
        throw NumericError("albanese_gram: matrix is not positive definite "
                           "(degenerate lattice)");
    return gram;
}

/// Albanese metric (inverse Gram in the X-basis), unit covolume, and an
/// orthonormal frame. The frame is triangular from the top: V_i lies in
/// span{X_i, ..., X_d1} with positive leading X_i coefficient, i.e.
/// Gram-Schmidt run from the last basis vector down. For the hexagonal
/// lattice this makes V2 proportional to X2 and puts the whole X2 correction
/// into V1, matching the closed-form frame of that example.
struct AlbaneseMetric {
    Mat metric;         // inner products <X_i, X_j>
    Mat frame;          // columns are the orthonormal V_i in X-coordinates
    double vol_inverse; // sqrt(det gram) = inverse Albanese covolume
};

inline AlbaneseMetric albanese_metric(const Mat& gram) {
    const int d1 = static_cast<int>(gram.rows());
    Eigen::LLT<Mat> llt(gram);
    if (llt.info() != Eigen::Success)
        throw NumericError("albanese_metric: gram matrix not SPD");
    AlbaneseMetric out;
    out.metric = llt.solve(Mat::Identity(d1, d1));
    out.vol_inverse = std::sqrt(gram.determinant());
    out.frame = Mat::Zero(d1, d1);
    for (int i = d1 - 1; i >= 0; --i) {
        Vec v = Vec::Zero(d1);
        v[i] = 1.0;
        for (int j = i + 1; j < d1; ++j) {
            Vec vj = out.frame.col(j);
            v -= (vj.transpose() * out.metric * v)(0) * vj;
        }
        double norm = std::sqrt((v.transpose() * out.metric * v)(0));
        if (!(norm > 0.0))
            throw NumericError("albanese_metric: frame construction degenerate");
        v /= norm;
        if (v[i] < 0.0)
            v = -v;
        out.frame.col(i) = v;
    }
    return out;
}

/// g^(2)-valued drift functional of a realization:
///   beta = sum_e m~(e) log dPhi(e~)|_2
/// over both orientations; reverse edges contribute the negated layer-2 log.
inline Vec beta_functional(const QuotientGraph& g,
                           const TransitionKernel& kernel,
                           const InvariantMeasure& m,
                           const PeriodicRealization& real) {
    const GradedAlgebra& alg = g.algebra();
    if (alg.step() < 2)
        return Vec::Zero(0);
    const int d2 = alg.layer_dim(2);
    const int off = alg.layer_offset(2);
    Vec beta = Vec::Zero(d2);
    for (int k = 0; k < g.num_pairs(); ++k) {
        int e = QuotientGraph::forward_edge(k);
        double w = tilde_m(g, kernel, m, e) -
                   tilde_m(g, kernel, m, QuotientGraph::involution(e));
        beta += w * d_phi(g, real, e).z.segment(off, d2);
    }
    return beta;
}

/// Layer-1 gap between an arbitrary realization and a reference one,
/// vertex by vertex: Cor(x) = log Phi(x)|_1 - log Phi_0(x)|_1.
struct CorrectorReport {
    std::vector<Vec> values; // per fundamental vertex, in g^(1)
    double max_norm = 0.0;
};

inline CorrectorReport corrector(const QuotientGraph& g,
                                 const PeriodicRealization& phi,
                                 const PeriodicRealization& phi0) {
    if (phi.phi.size() != phi0.phi.size() ||
        static_cast<int>(phi.phi.size()) != g.num_vertices())
        throw ValidationError("corrector: realizations live on different graphs");
    const int d1 = g.algebra().layer_dim(1);
    CorrectorReport report;
    report.values.reserve(g.num_vertices());
    for (int x = 0; x < g.num_vertices(); ++x) {
        Vec cor = phi.phi[x].z.head(d1) - phi0.phi[x].z.head(d1);
        report.max_norm = std::max(report.max_norm, cor.norm());
        report.values.push_back(std::move(cor));
    }
    return report;
}

/// m-weighted difference of two correctors; zero across a mean-stationary
/// family.
inline Vec corrector_mean_difference(const InvariantMeasure& m,
                                     const CorrectorReport& cor_eps,
                                     const CorrectorReport& cor_0) {
    if (cor_eps.values.size() != cor_0.values.size())
        throw ValidationError("corrector difference: size mismatch");
    Vec acc = Vec::Zero(cor_eps.values.empty() ? 0 : cor_eps.values[0].size());
    for (size_t x = 0; x < cor_eps.values.size(); ++x)
        acc += m(static_cast<int>(x)) * (cor_eps.values[x] - cor_0.values[x]);
    return acc;
}

/// Coordinates of a g^(1) vector in an orthonormal frame (columns of V).
inline Vec frame_coefficients(const Mat& frame, const Vec& rho) {
    if (frame.rows() != rho.size())
        throw ValidationError("frame_coefficients: dimension mismatch");
    Vec c = frame.colPivHouseholderQr().solve(rho);
    if ((frame * c - rho).lpNorm<Eigen::Infinity>() > 1e-10)
        throw NumericError("frame_coefficients: frame is singular");
    return c;
}

/// The one-parameter family eps -> modified harmonic realization for
/// p_eps = p0 + eps q, solved lazily under a fixed gauge. Holding the gauge
/// fixed across eps keeps the family mean-stationary: the m-weighted layer-1
/// mean of log(Phi_eps(x)^{-1} . Phi_0(x)) vanishes for every produced eps.
class RealizationFamily {
public:
    RealizationFamily(const QuotientGraph& graph, SymmetrizedKernel family,
                      InvariantMeasure m, Gauge gauge = Gauge::mean_zero())
        : graph_(&graph),
          family_(std::move(family)),
          m_(std::move(m)),
          gauge_(std::move(gauge)) {}

    const PeriodicRealization& at(double eps) const {
        auto it = cache_.find(eps);
        if (it != cache_.end())
            return it->second;
        TransitionKernel kernel = interpolate(family_, eps);
        PeriodicRealization real =
            solve_modified_harmonic(*graph_, kernel, m_, gauge_);
        return cache_.emplace(eps, std::move(real)).first->second;
    }

    TransitionKernel kernel_at(double eps) const {
        return interpolate(family_, eps);
    }

    const QuotientGraph& graph() const { return *graph_; }
    const InvariantMeasure& measure() const { return m_; }
    const Gauge& gauge() const { return gauge_; }

    /// Max over produced eps of the m-weighted layer-1 mean of
    /// log(Phi_eps(x)^{-1} . Phi_0(x)); layer-1 logs subtract, so this is the
    /// mean-stationarity defect of the family.
    double mean_stationarity_defect() const {
        const PeriodicRealization& base = at(0.0);
        const int d1 = graph_->algebra().layer_dim(1);
        double worst = 0.0;
        for (const auto& [eps, real] : cache_) {
            Vec acc = Vec::Zero(d1);
            for (int x = 0; x < graph_->num_vertices(); ++x)
                acc += m_(x) * (base.phi[x].z.head(d1) - real.phi[x].z.head(d1));
            worst = std::max(worst, acc.lpNorm<Eigen::Infinity>());
        }
        return worst;
    }

    /// Sup over produced eps and vertices of the layer >= 2 norms of
    /// log(Phi_eps(x)^{-1} . Phi_0(x)): the higher-layer drift of the family.
    double higher_layer_bound() const {
        const GradedAlgebra& alg = graph_->algebra();
        const PeriodicRealization& base = at(0.0);
        double worst = 0.0;
        for (const auto& [eps, real] : cache_) {
            for (int x = 0; x < graph_->num_vertices(); ++x) {
                GroupElement diff =
                    group_mul(inverse(real.phi[x]), base.phi[x], alg);
                for (int k = 2; k <= alg.step(); ++k)
                    worst = std::max(
                        worst, diff.z.segment(alg.layer_offset(k), alg.layer_dim(k))
                                   .norm());
            }
        }
        return worst;
    }

    /// Sup-norm of dPhi_eps increments relative to eps = 0, over produced eps.
    double sup_dphi_ratio() const {
        double base = sup_dphi(at(0.0));
        double worst = 0.0;
        for (const auto& [eps, real] : cache_)
            worst = std::max(worst, sup_dphi(real));
        if (!(base > 0.0))
            throw NumericError("sup_dphi_ratio: degenerate base realization");
        return worst / base;
    }

private:
    double sup_dphi(const PeriodicRealization& real) const {
        const GradedAlgebra& alg = graph_->algebra();
        double worst = 0.0;
        for (int k = 0; k < graph_->num_pairs(); ++k) {
            GroupElement inc =
                d_phi(*graph_, real, QuotientGraph::forward_edge(k));
            for (int layer = 1; layer <= alg.step(); ++layer) {
                double v = inc.z
                               .segment(alg.layer_offset(layer),
                                        alg.layer_dim(layer))
                               .norm();
                worst = std::max(worst, std::pow(v, 1.0 / layer));
            }
        }
        return worst;
    }

    const QuotientGraph* graph_;
    SymmetrizedKernel family_;
    InvariantMeasure m_;
    Gauge gauge_;
    mutable std::map<double, PeriodicRealization> cache_;
};

} // namespace nilwalk
