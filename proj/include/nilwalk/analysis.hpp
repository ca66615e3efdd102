#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nilwalk/graph.hpp"
#include "nilwalk/harmonic.hpp"
#include "nilwalk/version.hpp"

namespace nilwalk {

/// Full pipeline output for one graph/kernel at one interpolation parameter:
/// invariant measure, homological data, the modified harmonic realization at
/// eps, Albanese data, and the generator pieces (orthonormal frame of the
/// eps = 0 Albanese metric plus the drift expanded in that frame).
struct AnalysisResult {
    InvariantMeasure m;
    Chain1 gamma_p;                      // of the input kernel (eps = 1)
    std::vector<Chain1> cycles;          // cycle basis used for coordinates
    Vec gamma_p_cycle_coords;
    Vec rho;                             // asymptotic direction, g^(1)
    double eps = 1.0;
    Mat gram_eps;                        // Albanese Gram matrix at eps
    Mat gram_0;
    AlbaneseMetric albanese_eps;
    AlbaneseMetric albanese_0;
    Vec beta_eps;                        // g^(2) drift functional at eps
    Vec drift_frame_coefficients;        // rho in the eps = 0 frame
    PeriodicRealization realization_eps;
};

inline AnalysisResult analyze(const QuotientGraph& graph,
                              const TransitionKernel& kernel, double eps,
                              const Gauge& gauge = Gauge::mean_zero(),
                              std::optional<std::vector<Chain1>> cycles =
                                  std::nullopt) {
    ValidationReport report = validate(graph, kernel);
    if (!report.all_pass) {
        std::string msg = "validation failed:";
        for (const auto& f : report.failures)
            msg += "\n  - " + f;
        throw ValidationError(msg);
    }
    AnalysisResult out;
    out.eps = eps;
    out.m = invariant_measure(graph, kernel);
    out.gamma_p = homological_direction(graph, kernel, out.m);
    out.cycles = cycles ? std::move(*cycles) : cycle_basis(graph);
    out.gamma_p_cycle_coords =
        out.cycles.empty()
            ? Vec::Zero(0)
            : expand_in_cycle_basis(graph, out.gamma_p, out.cycles);
    out.rho = asymptotic_direction(graph, kernel, out.m);

    SymmetrizedKernel family = symmetrize(graph, kernel, out.m);
    RealizationFamily realizations(graph, family, out.m, gauge);

    TransitionKernel kernel_eps = interpolate(family, eps);
    out.realization_eps = realizations.at(eps);
    auto forms_eps = modified_harmonic_forms(graph, out.realization_eps);
    out.gram_eps = albanese_gram(graph, kernel_eps, out.m, forms_eps);
    out.albanese_eps = albanese_metric(out.gram_eps);

    const PeriodicRealization& real0 = realizations.at(0.0);
    auto forms_0 = modified_harmonic_forms(graph, real0);
    out.gram_0 = albanese_gram(graph, family.p0, out.m, forms_0);
    out.albanese_0 = albanese_metric(out.gram_0);

    out.beta_eps = beta_functional(graph, kernel_eps, out.m, out.realization_eps);
    out.drift_frame_coefficients =
        frame_coefficients(out.albanese_0.frame, out.rho);
    return out;
}

namespace detail {

inline nlohmann::json vec_json(const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline nlohmann::json mat_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        std::vector<double> row(m.cols());
        for (int j = 0; j < m.cols(); ++j)
            row[j] = m(i, j);
        rows.push_back(row);
    }
    return rows;
}

} // namespace detail

inline nlohmann::json analysis_to_json(const QuotientGraph& graph,
                                       const AnalysisResult& a) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["eps"] = a.eps;
    nlohmann::json m = nlohmann::json::object();
    for (int v = 0; v < graph.num_vertices(); ++v)
        m[graph.vertex_name(v)] = a.m(v);
    j["invariant_measure"] = m;
    j["gamma_p"] = {{"edge_pair_coefficients", a.gamma_p.c},
                    {"cycle_coefficients", detail::vec_json(a.gamma_p_cycle_coords)}};
    nlohmann::json cycles = nlohmann::json::array();
    for (const auto& c : a.cycles)
        cycles.push_back(c.c);
    j["cycles"] = cycles;
    j["asymptotic_direction"] = detail::vec_json(a.rho);
    j["gram"] = detail::mat_json(a.gram_eps);
    j["gram_0"] = detail::mat_json(a.gram_0);
    j["albanese_metric"] = detail::mat_json(a.albanese_eps.metric);
    j["albanese_vol_inverse"] = a.albanese_eps.vol_inverse;
    j["frame"] = detail::mat_json(a.albanese_0.frame);
    j["beta"] = detail::vec_json(a.beta_eps);
    j["drift_frame_coefficients"] = detail::vec_json(a.drift_frame_coefficients);
    nlohmann::json phi = nlohmann::json::object();
    for (int v = 0; v < graph.num_vertices(); ++v)
        phi[graph.vertex_name(v)] = detail::vec_json(a.realization_eps.phi[v].z);
    j["realization"] = phi;
    return j;
}

} // namespace nilwalk
