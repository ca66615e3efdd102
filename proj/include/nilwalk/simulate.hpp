#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "nilwalk/errors.hpp"
#include "nilwalk/graph.hpp"
#include "nilwalk/harmonic.hpp"
#include "nilwalk/rng.hpp"

namespace nilwalk {

/// Grid-time x path array of group coordinates for sampled processes.
/// data layout: [time][path][coordinate].
struct PathSampleSet {
    std::vector<int> layer_dims;
    std::vector<double> grid;
    int num_paths = 0;
    std::vector<double> data;

    long n = 0;       // walk steps, or SDE step count
    double eps = 0.0; // dilation scale of the recorded samples
    std::uint64_t seed = 0;
    std::string scheme;

    int dim() const {
        int d = 0;
        for (int dk : layer_dims)
            d += dk;
        return d;
    }
    int num_times() const { return static_cast<int>(grid.size()); }

    const double* at(int t_idx, int path) const {
        return data.data() +
               (static_cast<size_t>(t_idx) * num_paths + path) * dim();
    }
    double* at(int t_idx, int path) {
        return data.data() +
               (static_cast<size_t>(t_idx) * num_paths + path) * dim();
    }

    int time_index(double t, double tol = 1e-9) const {
        for (int i = 0; i < num_times(); ++i)
            if (std::abs(grid[i] - t) <= tol)
                return i;
        throw ValidationError("sample set has no grid time " + std::to_string(t));
    }

    int layer_offset(int k) const {
        int off = 0;
        for (int i = 1; i < k; ++i)
            off += layer_dims[i - 1];
        return off;
    }

    void validate_grid() const {
        if (grid.empty())
            throw ValidationError("sample grid is empty");
        for (size_t i = 1; i < grid.size(); ++i)
            if (!(grid[i] > grid[i - 1]))
                throw ValidationError("sample grid must be strictly increasing");
    }
};

namespace detail {

inline void run_over_paths(int num_paths, int workers,
                           const std::function<void(int)>& body) {
    if (workers <= 1) {
        for (int p = 0; p < num_paths; ++p)
            body(p);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            while (true) {
                int p = next.fetch_add(1);
                if (p >= num_paths)
                    return;
                body(p);
            }
        });
    for (auto& t : pool)
        t.join();
}

} // namespace detail

struct WalkOptions {
    int start_vertex = 0;
    bool subtract_origin = false; // record Phi(x*)^{-1} . position instead
    int workers = 1;
};

/// Dilation-scaled random walk on the cover. Steps follow the kernel on the
/// quotient; the group position accumulates the edge increments dPhi(e) under
/// the Dot product, and tau_{n^{-1/2}}(position) is recorded at grid times.
/// The kernel/realization pair must be the family evaluated at eps = n^{-1/2}
/// (the convenience overload below does that). Grid times must be exact
/// multiples of 1/n; no interpolation is performed. Deterministic given
/// (seed, path id) regardless of worker count.
inline PathSampleSet sample_walk(const QuotientGraph& g,
                                 const TransitionKernel& kernel,
                                 const PeriodicRealization& realization,
                                 long n, const std::vector<double>& grid,
                                 int num_paths, std::uint64_t seed,
                                 const WalkOptions& options = {}) {
    const GradedAlgebra& alg = g.algebra();
    if (n < 1)
        throw ValidationError("sample_walk: n must be >= 1");
    if (num_paths < 1)
        throw ValidationError("sample_walk: need at least one path");
    if (options.start_vertex < 0 || options.start_vertex >= g.num_vertices())
        throw ValidationError("sample_walk: start vertex out of range");

    PathSampleSet out;
    out.layer_dims = alg.layer_dims();
    out.grid = grid;
    out.validate_grid();
    out.num_paths = num_paths;
    out.n = n;
    out.eps = 1.0 / std::sqrt(static_cast<double>(n));
    out.seed = seed;
    out.scheme = "walk";
    out.data.assign(static_cast<size_t>(grid.size()) * num_paths * alg.dim(),
                    0.0);

    // Map grid times to step indices; reject off-grid times.
    std::vector<long> grid_steps;
    for (double t : grid) {
        double k = t * static_cast<double>(n);
        long k_round = std::lround(k);
        if (std::abs(k - static_cast<double>(k_round)) > 1e-9 || k_round < 0 ||
            k_round > n)
            throw ValidationError("sample_walk: grid time " + std::to_string(t) +
                                  " is not a multiple of 1/n in [0, 1]");
        grid_steps.push_back(k_round);
    }
    const long last_step = grid_steps.back();

    // Per-vertex sampling tables and per-edge increments.
    const int d = alg.dim();
    std::vector<std::vector<double>> cdf(g.num_vertices());
    for (int v = 0; v < g.num_vertices(); ++v) {
        double acc = 0.0;
        for (int e : g.out_edges(v)) {
            acc += kernel(e);
            cdf[v].push_back(acc);
        }
        if (std::abs(acc - 1.0) > 1e-9)
            throw ValidationError("sample_walk: kernel rows must sum to 1");
    }
    std::vector<Vec> increment;
    increment.reserve(g.num_edges());
    for (int e = 0; e < g.num_edges(); ++e)
        increment.push_back(d_phi(g, realization, e).z);

    Vec start = options.subtract_origin
                    ? Vec(Vec::Zero(d))
                    : realization.phi[options.start_vertex].z;
    const double scale = out.eps;

    detail::run_over_paths(num_paths, options.workers, [&](int path) {
        StreamRng rng(seed, static_cast<std::uint64_t>(path));
        detail::BchWorkspace ws;
        std::vector<double> pos(start.data(), start.data() + d);
        std::vector<double> next(d, 0.0);
        int vertex = options.start_vertex;
        size_t grid_pos = 0;
        auto record = [&](long step) {
            while (grid_pos < grid_steps.size() && grid_steps[grid_pos] == step) {
                double* dst = out.at(static_cast<int>(grid_pos), path);
                double s = 1.0;
                for (int k = 1; k <= alg.step(); ++k) {
                    s *= scale;
                    for (int i = 0; i < alg.layer_dim(k); ++i)
                        dst[alg.layer_offset(k) + i] =
                            s * pos[alg.layer_offset(k) + i];
                }
                ++grid_pos;
            }
        };
        record(0);
        for (long step = 1; step <= last_step; ++step) {
            double u = rng.uniform();
            const auto& edges = g.out_edges(vertex);
            const auto& table = cdf[vertex];
            size_t pick = 0;
            while (pick + 1 < table.size() && u >= table[pick])
                ++pick;
            int e = edges[pick];
            detail::bch_into(alg, Product::Dot, pos.data(),
                             increment[e].data(), next.data(), ws);
            pos.swap(next);
            vertex = g.edge_terminus(e);
            record(step);
        }
    });
    return out;
}

/// Family-level wrapper: evaluates kernel and realization at eps = n^{-1/2}.
inline PathSampleSet sample_walk(const RealizationFamily& family, long n,
                                 const std::vector<double>& grid, int num_paths,
                                 std::uint64_t seed,
                                 const WalkOptions& options = {}) {
    double eps = 1.0 / std::sqrt(static_cast<double>(n));
    TransitionKernel kernel = family.kernel_at(eps);
    return sample_walk(family.graph(), kernel, family.at(eps), n, grid,
                       num_paths, seed, options);
}

/// Exponential Euler scheme for the limit diffusion on (G, *):
///   Y_{k+1} = Y_k * exp(sum_i V_i dB_i + rho h),   h = 1 / stepcount.
/// Increments live in layer 1 (columns of `frame`); the scheme stays on the
/// group exactly. Grid times must be multiples of h.
inline PathSampleSet sample_diffusion(const GradedAlgebra& alg,
                                      const Mat& frame, const Vec& rho,
                                      const std::vector<double>& grid,
                                      long stepcount, int num_paths,
                                      std::uint64_t seed, int workers = 1) {
    const int d1 = alg.layer_dim(1);
    if (frame.rows() != d1 || frame.cols() != d1 || rho.size() != d1)
        throw ValidationError("sample_diffusion: frame/drift must live in layer 1");
    if (stepcount < 1)
        throw ValidationError("sample_diffusion: stepcount must be >= 1");

    PathSampleSet out;
    out.layer_dims = alg.layer_dims();
    out.grid = grid;
    out.validate_grid();
    out.num_paths = num_paths;
    out.n = stepcount;
    out.eps = 0.0;
    out.seed = seed;
    out.scheme = "sde";
    out.data.assign(static_cast<size_t>(grid.size()) * num_paths * alg.dim(),
                    0.0);

    std::vector<long> grid_steps;
    for (double t : grid) {
        double k = t * static_cast<double>(stepcount);
        long k_round = std::lround(k);
        if (std::abs(k - static_cast<double>(k_round)) > 1e-9 || k_round < 0 ||
            k_round > stepcount)
            throw ValidationError("sample_diffusion: grid time " +
                                  std::to_string(t) +
                                  " is not a multiple of 1/stepcount in [0, 1]");
        grid_steps.push_back(k_round);
    }
    const long last_step = grid_steps.back();
    const double h = 1.0 / static_cast<double>(stepcount);
    const double sqrt_h = std::sqrt(h);
    const int d = alg.dim();

    detail::run_over_paths(num_paths, workers, [&](int path) {
        StreamRng rng(seed, static_cast<std::uint64_t>(path));
        detail::BchWorkspace ws;
        std::vector<double> pos(d, 0.0), next(d, 0.0), inc(d, 0.0);
        size_t grid_pos = 0;
        auto record = [&](long step) {
            while (grid_pos < grid_steps.size() && grid_steps[grid_pos] == step) {
                double* dst = out.at(static_cast<int>(grid_pos), path);
                for (int i = 0; i < d; ++i)
                    dst[i] = pos[i];
                ++grid_pos;
            }
        };
        record(0);
        Vec noise(d1);
        for (long step = 1; step <= last_step; ++step) {
            for (int i = 0; i < d1; ++i)
                noise[i] = rng.normal();
            Vec z1 = frame * (sqrt_h * noise) + h * rho;
            std::fill(inc.begin(), inc.end(), 0.0);
            for (int i = 0; i < d1; ++i)
                inc[i] = z1[i];
            detail::bch_into(alg, Product::Star, pos.data(), inc.data(),
                             next.data(), ws);
            pos.swap(next);
            record(step);
        }
    });
    return out;
}

struct Estimate {
    double value = 0.0;
    double standard_error = 0.0;
};

/// Pairwise (cascade) summation; the merge order of parallel reductions then
/// cannot move results beyond floating reassociation.
inline double pairwise_sum(const double* x, size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i)
            s += x[i];
        return s;
    }
    size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

inline double pairwise_mean(const std::vector<double>& x) {
    if (x.empty())
        throw ValidationError("mean of empty sample");
    return pairwise_sum(x.data(), x.size()) / static_cast<double>(x.size());
}

/// Monte Carlo estimate of E[f(process at time t)] from a sample set.
inline Estimate semigroup_expectation(
    const std::function<double(Eigen::Ref<const Vec>)>& f,
    const PathSampleSet& samples, double t) {
    if (samples.num_paths == 0)
        throw ValidationError("semigroup_expectation: empty sample set");
    int ti = samples.time_index(t);
    const int d = samples.dim();
    std::vector<double> values(samples.num_paths);
    for (int p = 0; p < samples.num_paths; ++p)
        values[p] = f(Eigen::Map<const Vec>(samples.at(ti, p), d));
    double mean = pairwise_mean(values);
    if (samples.num_paths < 2)
        return {mean, 0.0};
    std::vector<double> sq(samples.num_paths);
    for (int p = 0; p < samples.num_paths; ++p)
        sq[p] = (values[p] - mean) * (values[p] - mean);
    double var = pairwise_sum(sq.data(), sq.size()) /
                 static_cast<double>(samples.num_paths - 1);
    return {mean, std::sqrt(var / samples.num_paths)};
}

// ---------------------------------------------------------------------------
// Sample files: CSV with columns path_id, t, then one column per graded
// coordinate named g{layer}_{index}; rows grouped by path, grid order within
// a path. A JSON sidecar echoes the configuration.
// ---------------------------------------------------------------------------

inline std::string sample_csv_header(const std::vector<int>& layer_dims) {
    std::string header = "path_id,t";
    for (size_t k = 0; k < layer_dims.size(); ++k)
        for (int i = 1; i <= layer_dims[k]; ++i)
            header += ",g" + std::to_string(k + 1) + "_" + std::to_string(i);
    return header;
}

inline void write_sample_csv(const PathSampleSet& samples,
                             const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot open '" + path + "' for writing");
    out << sample_csv_header(samples.layer_dims) << "\n";
    char buf[64];
    const int d = samples.dim();
    for (int p = 0; p < samples.num_paths; ++p)
        for (int ti = 0; ti < samples.num_times(); ++ti) {
            out << p;
            std::snprintf(buf, sizeof(buf), ",%.17g", samples.grid[ti]);
            out << buf;
            const double* row = samples.at(ti, p);
            for (int i = 0; i < d; ++i) {
                std::snprintf(buf, sizeof(buf), ",%.17g", row[i]);
                out << buf;
            }
            out << "\n";
        }
}

inline nlohmann::json sample_sidecar_json(const PathSampleSet& samples) {
    nlohmann::json j;
    j["scheme"] = samples.scheme;
    j["seed"] = samples.seed;
    j["n"] = samples.n;
    j["eps"] = samples.eps;
    j["paths"] = samples.num_paths;
    j["grid"] = samples.grid;
    j["layer_dims"] = samples.layer_dims;
    return j;
}

inline PathSampleSet read_sample_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header))
        throw ValidationError("'" + path + "' is empty");
    // Recover layer dimensions from the g{k}_{i} column names.
    std::vector<int> layer_dims;
    {
        std::stringstream ss(header);
        std::string col;
        int idx = 0;
        while (std::getline(ss, col, ',')) {
            if (idx == 0 && col != "path_id")
                throw ValidationError("'" + path + "': first column must be path_id");
            if (idx == 1 && col != "t")
                throw ValidationError("'" + path + "': second column must be t");
            if (idx >= 2) {
                size_t underscore = col.rfind('_');
                if (col.size() < 4 || col[0] != 'g' ||
                    underscore == std::string::npos)
                    throw ValidationError("'" + path + "': bad coordinate column '" +
                                          col + "'");
                int layer = std::stoi(col.substr(1, underscore - 1));
                if (layer < 1)
                    throw ValidationError("'" + path + "': bad layer in '" + col + "'");
                if (static_cast<int>(layer_dims.size()) < layer)
                    layer_dims.resize(layer, 0);
                layer_dims[layer - 1]++;
            }
            ++idx;
        }
    }
    int d = 0;
    for (int dk : layer_dims)
        d += dk;
    if (d == 0)
        throw ValidationError("'" + path + "': no coordinate columns");

    std::vector<double> grid;
    std::vector<std::vector<double>> rows; // flattened per data row
    std::vector<int> path_ids;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        int col = 0;
        int path_id = 0;
        double t = 0;
        while (std::getline(ss, cell, ',')) {
            if (col == 0)
                path_id = std::stoi(cell);
            else if (col == 1)
                t = std::stod(cell);
            else
                row.push_back(std::stod(cell));
            ++col;
        }
        if (static_cast<int>(row.size()) != d)
            throw ValidationError("'" + path + "': row with wrong column count");
        path_ids.push_back(path_id);
        if (path_id == 0)
            grid.push_back(t);
        rows.push_back(std::move(row));
    }
    if (grid.empty())
        throw ValidationError("'" + path + "': no samples for path 0");
    int num_times = static_cast<int>(grid.size());
    if (rows.size() % num_times != 0)
        throw ValidationError("'" + path + "': ragged sample file");
    int num_paths = static_cast<int>(rows.size()) / num_times;

    PathSampleSet out;
    out.layer_dims = layer_dims;
    out.grid = grid;
    out.num_paths = num_paths;
    out.scheme = "file";
    out.data.assign(static_cast<size_t>(num_times) * num_paths * d, 0.0);
    for (size_t r = 0; r < rows.size(); ++r) {
        int p = static_cast<int>(r) / num_times;
        int ti = static_cast<int>(r) % num_times;
        if (path_ids[r] != p)
            throw ValidationError("'" + path + "': rows must be grouped by path id");
        std::copy(rows[r].begin(), rows[r].end(), out.at(ti, p));
    }
    out.validate_grid();
    return out;
}

} // namespace nilwalk
