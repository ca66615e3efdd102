// Command-line front end: analyze a quotient-graph spec, sample scaled walks
// and the limit diffusion, and compare sample files.
//
// Exit codes: 0 success, 1 validation/input failure, 2 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "nilwalk/nilwalk.hpp"

namespace fs = std::filesystem;
using namespace nilwalk;

namespace {

struct GraphInput {
    std::string graph_file;
    std::string preset;
    double alpha = 1.0 / 3, beta = 1.0 / 3, gamma = 1.0 / 3;
    double alphap = 1.0 / 3, betap = 1.0 / 3, gammap = 1.0 / 3;

    void add_flags(CLI::App* cmd) {
        auto* graph = cmd->add_option("--graph", graph_file,
                                      "Path to a graph-spec JSON file");
        auto* preset_opt =
            cmd->add_option("--preset", preset,
                            "Built-in lattice: hex (hexagonal Heisenberg)")
                ->check(CLI::IsMember({"hex"}));
        cmd->add_option("--alpha", alpha, "Hex preset: p(e1)");
        cmd->add_option("--beta", beta, "Hex preset: p(e2)");
        cmd->add_option("--gamma", gamma, "Hex preset: p(e3)");
        cmd->add_option("--alphap", alphap, "Hex preset: p(reversed e1)");
        cmd->add_option("--betap", betap, "Hex preset: p(reversed e2)");
        cmd->add_option("--gammap", gammap, "Hex preset: p(reversed e3)");
        graph->excludes(preset_opt);
    }

    struct Loaded {
        GraphSpec spec;
        std::optional<std::vector<Chain1>> cycles;
        nlohmann::json echo;
    };

    Loaded load() const {
        if (preset == "hex") {
            HexLattice lattice = build_hexagonal_heisenberg(
                alpha, beta, gamma, alphap, betap, gammap);
            nlohmann::json echo = {{"preset", "hex"},
                                   {"alpha", alpha},
                                   {"beta", beta},
                                   {"gamma", gamma},
                                   {"alphap", alphap},
                                   {"betap", betap},
                                   {"gammap", gammap}};
            return Loaded{GraphSpec{std::move(lattice.graph),
                                    std::move(lattice.kernel)},
                          std::move(lattice.cycles), std::move(echo)};
        }
        if (graph_file.empty())
            throw ValidationError("provide either --graph FILE or --preset-hex");
        std::ifstream in(graph_file);
        if (!in)
            throw ValidationError("cannot open graph spec '" + graph_file + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("graph spec '" + graph_file +
                                  "' is not valid JSON: " + e.what());
        }
        return Loaded{load_graph_spec(j), std::nullopt,
                      nlohmann::json{{"graph_file", graph_file}}};
    }
};

Gauge parse_gauge(const std::string& name) {
    if (name == "meanzero")
        return Gauge::mean_zero();
    if (name == "basepoint")
        return Gauge::base_point();
    throw ValidationError("unknown gauge '" + name +
                          "' (expected meanzero or basepoint)");
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (!cell.empty())
            grid.push_back(std::stod(cell));
    if (grid.empty())
        throw ValidationError("empty time grid");
    return grid;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot open '" + path.string() + "' for writing");
    out << text;
}

void emit(const nlohmann::json& j, const std::string& out_dir,
          const std::string& filename) {
    if (out_dir.empty()) {
        std::cout << j.dump(2) << "\n";
        return;
    }
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / filename, j.dump(2) + "\n");
}

int run(int argc, char** argv) {
    CLI::App app{"Random walks on nilpotent covering graphs: analysis, "
                 "scaled-walk and limit-diffusion sampling, and sample "
                 "comparison"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // analyze
    auto* analyze_cmd = app.add_subcommand(
        "analyze", "Invariant measure, homological data, Albanese metric, "
                   "frame and drift for a graph spec");
    GraphInput analyze_input;
    analyze_input.add_flags(analyze_cmd);
    double analyze_eps = 1.0;
    std::string analyze_gauge = "meanzero";
    std::string analyze_out;
    analyze_cmd->add_option("--eps", analyze_eps,
                            "Interpolation parameter in [0, 1]");
    analyze_cmd->add_option("--gauge", analyze_gauge,
                            "Realization gauge: meanzero | basepoint");
    analyze_cmd->add_option("--out", analyze_out,
                            "Output directory (default: stdout)");

    // simulate
    auto* simulate_cmd = app.add_subcommand(
        "simulate", "Sample the dilation-scaled walk or the limit diffusion");
    GraphInput simulate_input;
    simulate_input.add_flags(simulate_cmd);
    std::string kind = "walk";
    long sim_n = 1024;
    long sim_steps = 256;
    int sim_paths = 1000;
    std::string sim_grid = "1";
    std::uint64_t sim_seed = 1;
    double sim_eps = -1.0;
    std::string sim_gauge = "meanzero";
    std::string sim_origin = "keep";
    std::string sim_out;
    int sim_workers = 1;
    simulate_cmd->add_option("--kind", kind, "walk | sde")
        ->check(CLI::IsMember({"walk", "sde"}));
    simulate_cmd->add_option("--n", sim_n, "Walk steps per unit time");
    simulate_cmd->add_option("--steps", sim_steps, "Diffusion steps (sde)");
    simulate_cmd->add_option("--paths", sim_paths, "Number of sample paths");
    simulate_cmd->add_option("--grid", sim_grid,
                             "Comma-separated record times in [0, 1]");
    simulate_cmd->add_option("--seed", sim_seed, "Master seed");
    simulate_cmd->add_option(
        "--eps", sim_eps,
        "Walk interpolation parameter (default n^{-1/2})");
    simulate_cmd->add_option("--gauge", sim_gauge,
                             "Realization gauge: meanzero | basepoint");
    simulate_cmd->add_option("--origin", sim_origin,
                             "walk start handling: keep | zero")
        ->check(CLI::IsMember({"keep", "zero"}));
    simulate_cmd->add_option("--workers", sim_workers,
                             "Worker threads (result-invariant)");
    simulate_cmd->add_option("--out", sim_out, "Output directory")->required();

    // compare
    auto* compare_cmd = app.add_subcommand(
        "compare", "Compare two sample files (KS distances and moments)");
    std::string file_a, file_b;
    std::string compare_times = "1";
    std::string compare_out;
    bool compare_ecdf = false;
    compare_cmd->add_option("fileA", file_a, "First sample CSV")->required();
    compare_cmd->add_option("fileB", file_b, "Second sample CSV")->required();
    compare_cmd->add_option("--t", compare_times,
                            "Comma-separated comparison times");
    compare_cmd->add_option("--out", compare_out,
                            "Output directory (default: stdout)");
    compare_cmd->add_flag("--ecdf", compare_ecdf,
                          "Also write ECDF tables for both inputs");

    CLI11_PARSE(app, argc, argv);

    if (analyze_cmd->parsed()) {
        auto loaded = analyze_input.load();
        AnalysisResult result =
            analyze(loaded.spec.graph, loaded.spec.kernel, analyze_eps,
                    parse_gauge(analyze_gauge), loaded.cycles);
        nlohmann::json j = analysis_to_json(loaded.spec.graph, result);
        j["input"] = loaded.echo;
        emit(j, analyze_out, "analysis.json");
        return 0;
    }

    if (simulate_cmd->parsed()) {
        auto loaded = simulate_input.load();
        const QuotientGraph& graph = loaded.spec.graph;
        std::vector<double> grid = parse_grid(sim_grid);
        InvariantMeasure m = invariant_measure(graph, loaded.spec.kernel);
        SymmetrizedKernel sym = symmetrize(graph, loaded.spec.kernel, m);
        RealizationFamily family(graph, sym, m, parse_gauge(sim_gauge));

        PathSampleSet samples;
        if (kind == "walk") {
            WalkOptions options;
            options.workers = sim_workers;
            options.subtract_origin = (sim_origin == "zero");
            if (sim_eps < 0.0) {
                samples = sample_walk(family, sim_n, grid, sim_paths, sim_seed,
                                      options);
            } else {
                TransitionKernel kernel = interpolate(sym, sim_eps);
                samples = sample_walk(graph, kernel, family.at(sim_eps), sim_n,
                                      grid, sim_paths, sim_seed, options);
                samples.eps = sim_eps;
            }
        } else {
            AnalysisResult a = analyze(graph, loaded.spec.kernel, 0.0,
                                       parse_gauge(sim_gauge), loaded.cycles);
            samples = sample_diffusion(graph.algebra(), a.albanese_0.frame,
                                       a.rho, grid, sim_steps, sim_paths,
                                       sim_seed, sim_workers);
        }
        fs::create_directories(sim_out);
        write_sample_csv(samples, (fs::path(sim_out) / (kind + ".csv")).string());
        nlohmann::json sidecar = sample_sidecar_json(samples);
        sidecar["version"] = kVersion;
        sidecar["input"] = loaded.echo;
        sidecar["gauge"] = sim_gauge;
        if (kind == "walk")
            sidecar["origin"] = sim_origin;
        write_text(fs::path(sim_out) / (kind + ".json"),
                   sidecar.dump(2) + "\n");
        return 0;
    }

    // compare
    PathSampleSet a = read_sample_csv(file_a);
    PathSampleSet b = read_sample_csv(file_b);
    std::vector<double> times = parse_grid(compare_times);
    ComparisonReport report = compare_samples(a, b, times);
    nlohmann::json j = report.to_json();
    j["version"] = kVersion;
    j["file_a"] = file_a;
    j["file_b"] = file_b;
    emit(j, compare_out, "report.json");
    if (compare_ecdf) {
        if (compare_out.empty())
            throw ValidationError("--ecdf requires --out");
        write_ecdf_csv(a, times, (fs::path(compare_out) / "ecdf_a.csv").string());
        write_ecdf_csv(b, times, (fs::path(compare_out) / "ecdf_b.csv").string());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << nlohmann::json{{"error", e.what()},
                                    {"kind", "validation"}}
                         .dump()
                  << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "numeric"}}
                         .dump()
                  << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}, {"kind", "internal"}}
                         .dump()
                  << "\n";
        return 2;
    }
}
