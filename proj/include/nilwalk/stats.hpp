#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nilwalk/errors.hpp"
#include "nilwalk/simulate.hpp"

namespace nilwalk {

struct LayerMoments {
    Vec mean;
    Mat covariance;
    Vec mean_se;
    Mat covariance_se;
    int num_samples = 0;
};

/// Unbiased sample mean and covariance of the layer-k log coordinates at a
/// grid time (log is the identity in exponential coordinates). Covariance
/// standard errors use the Gaussian approximation
/// sqrt((C_ii C_jj + C_ij^2) / (N - 1)).
inline LayerMoments layer_moments(const PathSampleSet& samples, int layer,
                                  double t) {
    if (samples.num_paths < 2)
        throw ValidationError("layer_moments: need at least two paths");
    if (layer < 1 || layer > static_cast<int>(samples.layer_dims.size()))
        throw ValidationError("layer_moments: layer out of range");
    const int ti = samples.time_index(t);
    const int dk = samples.layer_dims[layer - 1];
    const int off = samples.layer_offset(layer);
    const int n = samples.num_paths;

    LayerMoments out;
    out.num_samples = n;
    out.mean = Vec::Zero(dk);
    std::vector<double> column(n);
    for (int i = 0; i < dk; ++i) {
        for (int p = 0; p < n; ++p)
            column[p] = samples.at(ti, p)[off + i];
        out.mean[i] = pairwise_mean(column);
    }
    out.covariance = Mat::Zero(dk, dk);
    std::vector<double> prod(n);
    for (int i = 0; i < dk; ++i)
        for (int j = i; j < dk; ++j) {
            for (int p = 0; p < n; ++p) {
                const double* row = samples.at(ti, p);
                prod[p] = (row[off + i] - out.mean[i]) *
                          (row[off + j] - out.mean[j]);
            }
            double c = pairwise_sum(prod.data(), prod.size()) / (n - 1);
            out.covariance(i, j) = c;
            out.covariance(j, i) = c;
        }
    out.mean_se = Vec(dk);
    for (int i = 0; i < dk; ++i)
        out.mean_se[i] = std::sqrt(out.covariance(i, i) / n);
    out.covariance_se = Mat(dk, dk);
    for (int i = 0; i < dk; ++i)
        for (int j = 0; j < dk; ++j)
            out.covariance_se(i, j) =
                std::sqrt((out.covariance(i, i) * out.covariance(j, j) +
                           out.covariance(i, j) * out.covariance(i, j)) /
                          (n - 1));
    return out;
}

/// One coordinate of every path at a grid time.
inline std::vector<double> coordinate_slice(const PathSampleSet& samples,
                                            double t, int coordinate) {
    if (coordinate < 0 || coordinate >= samples.dim())
        throw ValidationError("coordinate_slice: index out of range");
    const int ti = samples.time_index(t);
    std::vector<double> out(samples.num_paths);
    for (int p = 0; p < samples.num_paths; ++p)
        out[p] = samples.at(ti, p)[coordinate];
    return out;
}

/// Two-sample Kolmogorov-Smirnov statistic: sup-distance of empirical CDFs.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty())
        throw ValidationError("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    size_t ia = 0, ib = 0;
    double d = 0.0;
    while (ia < a.size() && ib < b.size()) {
        double x = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] <= x)
            ++ia;
        while (ib < b.size() && b[ib] <= x)
            ++ib;
        d = std::max(d, std::abs(ia / na - ib / nb));
    }
    return d;
}

/// Asymptotic two-sample flag threshold at the 1% level.
inline double ks_flag_threshold(size_t na, size_t nb) {
    return 1.63 * std::sqrt(static_cast<double>(na + nb) /
                            (static_cast<double>(na) * static_cast<double>(nb)));
}

struct ExponentFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    std::vector<double> gaps;        // gaps used by the fit, ascending
    std::vector<double> log_moments; // matching log E[dist^power]
    std::vector<double> dropped_gaps;
};

/// Least-squares slope of log E[dist(Y_s, Y_t)^power] against log(t - s).
/// Distances use the homogeneous-norm surrogate, whose multiplicative
/// equivalence constants shift only the intercept. The two largest distinct
/// gaps are dropped to reduce boundary bias.
inline ExponentFit moment_exponent_fit(
    const GradedAlgebra& alg, const PathSampleSet& samples,
    const std::vector<std::pair<double, double>>& pairs, double power) {
    if (alg.layer_dims() != samples.layer_dims)
        throw ValidationError("moment_exponent_fit: algebra/sample shape mismatch");
    if (samples.num_paths < 1)
        throw ValidationError("moment_exponent_fit: empty sample set");
    const int d = alg.dim();
    std::map<double, std::vector<double>> moments_by_gap;
    std::vector<double> powers(samples.num_paths);
    for (const auto& [s, t] : pairs) {
        if (!(t > s))
            throw ValidationError("moment_exponent_fit: need t > s in every pair");
        int si = samples.time_index(s);
        int ti = samples.time_index(t);
        for (int p = 0; p < samples.num_paths; ++p) {
            GroupElement gs(Eigen::Map<const Vec>(samples.at(si, p), d));
            GroupElement gt(Eigen::Map<const Vec>(samples.at(ti, p), d));
            powers[p] = std::pow(dist_surrogate(gs, gt, alg), power);
        }
        moments_by_gap[t - s].push_back(pairwise_mean(powers));
    }
    if (moments_by_gap.size() < 3)
        throw ValidationError("moment_exponent_fit: need at least 3 distinct gaps");

    ExponentFit fit;
    std::vector<std::pair<double, double>> points; // (log gap, log moment)
    {
        size_t idx = 0;
        const size_t keep = moments_by_gap.size() - 2;
        for (const auto& [gap, values] : moments_by_gap) {
            double mean = pairwise_mean(values);
            if (idx < keep) {
                if (!(mean > 0.0))
                    throw NumericError("moment_exponent_fit: zero moment at gap " +
                                       std::to_string(gap));
                points.emplace_back(std::log(gap), std::log(mean));
                fit.gaps.push_back(gap);
                fit.log_moments.push_back(std::log(mean));
            } else {
                fit.dropped_gaps.push_back(gap);
            }
            ++idx;
        }
    }
    if (points.size() < 2)
        throw ValidationError("moment_exponent_fit: too few gaps after dropping "
                              "the two largest");
    const double n = static_cast<double>(points.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : points) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-14)
        throw NumericError("moment_exponent_fit: degenerate gaps");
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0.0;
    for (const auto& [x, y] : points) {
        double r = y - (fit.intercept + fit.slope * x);
        ss_res += r * r;
    }
    if (points.size() > 2)
        fit.slope_se = std::sqrt(ss_res / (n - 2) / (sxx - sx * sx / n));
    return fit;
}

// ---------------------------------------------------------------------------
// Comparison of two sample sets.
// ---------------------------------------------------------------------------

struct ComparisonReport {
    struct KsEntry {
        int coordinate;
        double t;
        double distance;
        double threshold;
        bool flagged;
    };
    struct MomentEntry {
        int layer;
        double t;
        Vec mean_a, mean_b, mean_se_a, mean_se_b;
        Mat cov_a, cov_b;
    };
    std::vector<KsEntry> ks;
    std::vector<MomentEntry> moments;
    bool all_pass = true;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["all_pass"] = all_pass;
        j["ks"] = nlohmann::json::array();
        for (const auto& e : ks)
            j["ks"].push_back({{"coordinate", e.coordinate},
                               {"t", e.t},
                               {"distance", e.distance},
                               {"threshold", e.threshold},
                               {"flagged", e.flagged}});
        j["moments"] = nlohmann::json::array();
        for (const auto& e : moments) {
            auto vec = [](const Vec& v) {
                return std::vector<double>(v.data(), v.data() + v.size());
            };
            auto mat = [](const Mat& m) {
                std::vector<std::vector<double>> rows;
                for (int i = 0; i < m.rows(); ++i)
                    rows.emplace_back(m.row(i).data(),
                                      m.row(i).data() + m.cols());
                return rows;
            };
            j["moments"].push_back({{"layer", e.layer},
                                    {"t", e.t},
                                    {"mean_a", vec(e.mean_a)},
                                    {"mean_b", vec(e.mean_b)},
                                    {"mean_se_a", vec(e.mean_se_a)},
                                    {"mean_se_b", vec(e.mean_se_b)},
                                    {"cov_a", mat(e.cov_a)},
                                    {"cov_b", mat(e.cov_b)}});
        }
        return j;
    }
};

/// KS distances per coordinate and per-layer moments at the requested times.
/// KS entries are flagged at the sample-size-calibrated threshold.
inline ComparisonReport compare_samples(const PathSampleSet& a,
                                        const PathSampleSet& b,
                                        const std::vector<double>& times) {
    if (a.layer_dims != b.layer_dims)
        throw ValidationError("compare_samples: sample sets live on different "
                              "algebras (layer dimensions differ)");
    ComparisonReport report;
    const int d = a.dim();
    for (double t : times) {
        for (int coord = 0; coord < d; ++coord) {
            double dist = ks_distance(coordinate_slice(a, t, coord),
                                      coordinate_slice(b, t, coord));
            double threshold = ks_flag_threshold(a.num_paths, b.num_paths);
            bool flagged = dist > threshold;
            report.all_pass = report.all_pass && !flagged;
            report.ks.push_back({coord, t, dist, threshold, flagged});
        }
        for (int layer = 1; layer <= static_cast<int>(a.layer_dims.size());
             ++layer) {
            LayerMoments ma = layer_moments(a, layer, t);
            LayerMoments mb = layer_moments(b, layer, t);
            report.moments.push_back({layer, t, ma.mean, mb.mean, ma.mean_se,
                                      mb.mean_se, ma.covariance,
                                      mb.covariance});
        }
    }
    return report;
}

/// Flat ECDF table (coordinate, t, value, cdf) for external plotting.
inline void write_ecdf_csv(const PathSampleSet& samples,
                           const std::vector<double>& times,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot open '" + path + "' for writing");
    out << "coordinate,t,value,cdf\n";
    char buf[96];
    for (double t : times)
        for (int coord = 0; coord < samples.dim(); ++coord) {
            auto xs = coordinate_slice(samples, t, coord);
            std::sort(xs.begin(), xs.end());
            for (size_t i = 0; i < xs.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", coord,
                              t, xs[i],
                              static_cast<double>(i + 1) / xs.size());
                out << buf;
            }
        }
}

} // namespace nilwalk
