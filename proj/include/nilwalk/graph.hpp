#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nilwalk/algebra.hpp"
#include "nilwalk/errors.hpp"
#include "nilwalk/group.hpp"

namespace nilwalk {

/// Finite quotient graph of a nilpotent cover, stored as edge pairs with
/// group-valued voltages. Directed edge ids: pair k owns the forward edge 2k
/// (origin -> terminus, voltage v) and the reverse edge 2k+1 (voltage v^{-1}).
/// The involution is id ^ 1, fixed-point-free by construction; the forward
/// edge is the canonical orientation of its pair. The infinite cover is never
/// materialized: a cycle's voltage is the deck transformation its lift picks
/// up, so all covering data lives on the quotient.
class QuotientGraph {
public:
    struct EdgePair {
        int origin;
        int terminus;
        GroupElement voltage;
    };

    QuotientGraph(GradedAlgebra alg, std::vector<std::string> vertex_names,
                  std::vector<EdgePair> pairs)
        : alg_(std::move(alg)),
          vertex_names_(std::move(vertex_names)),
          pairs_(std::move(pairs)) {
        if (vertex_names_.empty())
            throw ValidationError("graph: at least one vertex required");
        for (const auto& p : pairs_) {
            if (p.origin < 0 || p.origin >= num_vertices() || p.terminus < 0 ||
                p.terminus >= num_vertices())
                throw ValidationError("graph: edge endpoint out of range");
            if (p.voltage.dim() != alg_.dim())
                throw ValidationError("graph: voltage dimension mismatch");
        }
        out_edges_.assign(num_vertices(), {});
        for (int e = 0; e < num_edges(); ++e)
            out_edges_[edge_origin(e)].push_back(e);
    }

    const GradedAlgebra& algebra() const { return alg_; }
    int num_vertices() const { return static_cast<int>(vertex_names_.size()); }
    int num_pairs() const { return static_cast<int>(pairs_.size()); }
    int num_edges() const { return 2 * num_pairs(); }
    const std::string& vertex_name(int v) const { return vertex_names_[v]; }
    const std::vector<int>& out_edges(int v) const { return out_edges_[v]; }
    const EdgePair& pair(int k) const { return pairs_[k]; }

    static int pair_of(int e) { return e / 2; }
    static bool is_forward(int e) { return (e & 1) == 0; }
    static int involution(int e) { return e ^ 1; }
    static int forward_edge(int k) { return 2 * k; }

    int edge_origin(int e) const {
        const EdgePair& p = pairs_[pair_of(e)];
        return is_forward(e) ? p.origin : p.terminus;
    }
    int edge_terminus(int e) const {
        const EdgePair& p = pairs_[pair_of(e)];
        return is_forward(e) ? p.terminus : p.origin;
    }
    GroupElement edge_voltage(int e) const {
        const EdgePair& p = pairs_[pair_of(e)];
        return is_forward(e) ? p.voltage : inverse(p.voltage);
    }

    /// Connectivity of the underlying undirected graph.
    bool is_connected() const {
        std::vector<char> seen(num_vertices(), 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int e : out_edges_[v]) {
                int w = edge_terminus(e);
                if (!seen[w]) {
                    seen[w] = 1;
                    ++count;
                    stack.push_back(w);
                }
            }
        }
        return count == num_vertices();
    }

private:
    GradedAlgebra alg_;
    std::vector<std::string> vertex_names_;
    std::vector<EdgePair> pairs_;
    std::vector<std::vector<int>> out_edges_;
};

/// Transition probabilities indexed by directed edge id.
struct TransitionKernel {
    std::vector<double> p;

    double operator()(int e) const { return p[e]; }
    int num_edges() const { return static_cast<int>(p.size()); }
};

/// Stationary vertex distribution of the quotient walk.
struct InvariantMeasure {
    std::vector<double> m;

    double operator()(int v) const { return m[v]; }
};

/// Antisymmetric edge function (1-chain / 1-form data). Stores one value per
/// edge pair, on the canonical (forward) orientation; the reverse edge
/// carries the negated value. A chain with coefficient c_k on pair k is
/// sum_k c_k * e_k in the one-edge-per-pair writing; the writing that sums
/// over every oriented edge halves these coefficients across e and its
/// reverse.
struct Chain1 {
    std::vector<double> c;

    double coefficient(int edge_id) const {
        double v = c[QuotientGraph::pair_of(edge_id)];
        return QuotientGraph::is_forward(edge_id) ? v : -v;
    }
    int num_pairs() const { return static_cast<int>(c.size()); }
};

inline double tilde_m(const QuotientGraph& g, const TransitionKernel& p,
                      const InvariantMeasure& m, int e) {
    return p(e) * m(g.edge_origin(e));
}

/// <chain, form> with both stored per pair: sum_k c_k w(e_k). Equals the
/// sum over every oriented edge of the halved antisymmetric writings.
inline double chain_form_pairing(const Chain1& chain, const Chain1& form) {
    double s = 0.0;
    for (size_t k = 0; k < chain.c.size(); ++k)
        s += chain.c[k] * form.c[k];
    return s;
}

/// Boundary of a 1-chain as a vertex vector: sum_k c_k (t_k - o_k).
inline Vec chain_boundary(const QuotientGraph& g, const Chain1& chain) {
    Vec b = Vec::Zero(g.num_vertices());
    for (int k = 0; k < chain.num_pairs(); ++k) {
        b[g.pair(k).terminus] += chain.c[k];
        b[g.pair(k).origin] -= chain.c[k];
    }
    return b;
}

namespace detail {

/// Strongly connected components of the positive-probability subgraph
/// (iterative Tarjan). Returns component index per vertex.
inline std::vector<int> strong_components(const QuotientGraph& g,
                                          const TransitionKernel& p,
                                          int* num_components) {
    const int n = g.num_vertices();
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<char> on_stack(n, 0);
    std::vector<int> stack;
    int next_index = 0, next_comp = 0;

    struct Frame {
        int v;
        size_t edge_pos;
    };
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1)
            continue;
        std::vector<Frame> call{{root, 0}};
        index[root] = low[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            const auto& edges = g.out_edges(f.v);
            bool descended = false;
            while (f.edge_pos < edges.size()) {
                int e = edges[f.edge_pos++];
                if (p(e) <= 0.0)
                    continue;
                int w = g.edge_terminus(e);
                if (index[w] == -1) {
                    index[w] = low[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (on_stack[w])
                    low[f.v] = std::min(low[f.v], index[w]);
            }
            if (descended)
                continue;
            if (low[f.v] == index[f.v]) {
                while (true) {
                    int w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = next_comp;
                    if (w == f.v)
                        break;
                }
                ++next_comp;
            }
            int v = f.v;
            call.pop_back();
            if (!call.empty())
                low[call.back().v] = std::min(low[call.back().v], low[v]);
        }
    }
    if (num_components)
        *num_components = next_comp;
    return comp;
}

inline std::string scc_diagnostic(const QuotientGraph& g,
                                  const std::vector<int>& comp,
                                  int num_components) {
    std::ostringstream os;
    os << num_components << " strongly connected components:";
    for (int c = 0; c < num_components; ++c) {
        os << " {";
        bool first = true;
        for (int v = 0; v < g.num_vertices(); ++v)
            if (comp[v] == c) {
                if (!first)
                    os << ",";
                os << g.vertex_name(v);
                first = false;
            }
        os << "}";
    }
    return os.str();
}

} // namespace detail

struct ValidationReport {
    bool all_pass = true;
    std::vector<std::string> failures;

    void fail(std::string msg) {
        all_pass = false;
        failures.push_back(std::move(msg));
    }
};

/// Structural and stochastic checks. Reports every failure; never repairs.
inline ValidationReport validate(const QuotientGraph& g,
                                 const TransitionKernel& kernel,
                                 double tol = 1e-12) {
    ValidationReport report;
    try {
        g.algebra().validate();
    } catch (const ValidationError& err) {
        report.fail(err.what());
    }
    if (kernel.num_edges() != g.num_edges()) {
        report.fail("kernel has " + std::to_string(kernel.num_edges()) +
                    " entries, graph has " + std::to_string(g.num_edges()) +
                    " directed edges");
        return report;
    }
    if (!g.is_connected())
        report.fail("graph is not connected");
    for (int v = 0; v < g.num_vertices(); ++v) {
        double row = 0.0;
        for (int e : g.out_edges(v)) {
            if (kernel(e) < 0.0)
                report.fail("negative probability on edge " + std::to_string(e));
            row += kernel(e);
        }
        if (std::abs(row - 1.0) > tol)
            report.fail("row sum at vertex '" + g.vertex_name(v) + "' is " +
                        std::to_string(row) + ", not 1");
    }
    for (int k = 0; k < g.num_pairs(); ++k) {
        int e = QuotientGraph::forward_edge(k);
        if (kernel(e) + kernel(QuotientGraph::involution(e)) <= 0.0)
            report.fail("edge pair " + std::to_string(k) +
                        " has p(e) + p(rev e) = 0");
    }
    int ncomp = 0;
    auto comp = detail::strong_components(g, kernel, &ncomp);
    if (ncomp != 1)
        report.fail("walk is not irreducible: " +
                    detail::scc_diagnostic(g, comp, ncomp));
    return report;
}

/// Unique stationary distribution of an irreducible kernel, by a dense solve
/// of the stationarity equations with a normalization row. Power iteration is
/// deliberately not used here; it serves as an independent oracle in tests.
inline InvariantMeasure invariant_measure(const QuotientGraph& g,
                                          const TransitionKernel& kernel,
                                          double tol = 1e-12) {
    int ncomp = 0;
    auto comp = detail::strong_components(g, kernel, &ncomp);
    if (ncomp != 1)
        throw ValidationError("invariant_measure: kernel not irreducible: " +
                              detail::scc_diagnostic(g, comp, ncomp));
    const int n = g.num_vertices();
    // Stationarity m(x) = sum_{e in E_x} p(rev e) m(t(e)), one row per vertex;
    // the last row is replaced by the normalization sum m = 1.
    Mat a = Mat::Zero(n, n);
    for (int x = 0; x < n; ++x) {
        a(x, x) -= 1.0;
        for (int e : g.out_edges(x))
            a(x, g.edge_terminus(e)) += kernel(QuotientGraph::involution(e));
    }
    Vec rhs = Vec::Zero(n);
    a.row(n - 1).setOnes();
    rhs[n - 1] = 1.0;
    Eigen::PartialPivLU<Mat> lu(a);
    Vec m = lu.solve(rhs);
    // Verify the solve, including the replaced stationarity row.
    for (int x = 0; x < n; ++x) {
        double acc = -m[x];
        for (int e : g.out_edges(x))
            acc += kernel(QuotientGraph::involution(e)) * m[g.edge_terminus(e)];
        if (std::abs(acc) > tol)
            throw NumericError("invariant_measure: stationarity residual " +
                               std::to_string(acc) + " at vertex " +
                               g.vertex_name(x));
        if (!(m[x] > 0.0))
            throw NumericError("invariant_measure: nonpositive mass at vertex " +
                               g.vertex_name(x));
    }
    return InvariantMeasure{std::vector<double>(m.data(), m.data() + n)};
}

inline void require_invariant(const QuotientGraph& g,
                              const TransitionKernel& kernel,
                              const InvariantMeasure& m, double tol = 1e-9) {
    double total = 0.0;
    for (int x = 0; x < g.num_vertices(); ++x) {
        double acc = -m(x);
        for (int e : g.out_edges(x))
            acc += kernel(QuotientGraph::involution(e)) * m(g.edge_terminus(e));
        if (std::abs(acc) > tol)
            throw ValidationError(
                "measure is not invariant for this kernel (residual " +
                std::to_string(acc) + " at vertex " + g.vertex_name(x) + ")");
        total += m(x);
    }
    if (std::abs(total - 1.0) > tol)
        throw ValidationError("measure does not sum to 1");
}

/// m-symmetric part and signed remainder of a kernel:
///   p0(e) = (p(e) + m(t(e)) p(rev e) / m(o(e))) / 2,   q = p - p0.
/// p0 is a stochastic kernel with the same invariant measure, and
/// m(o(e)) q(e) is antisymmetric under the involution.
struct SymmetrizedKernel {
    TransitionKernel p0;
    std::vector<double> q;
};

inline SymmetrizedKernel symmetrize(const QuotientGraph& g,
                                    const TransitionKernel& kernel,
                                    const InvariantMeasure& m) {
    require_invariant(g, kernel, m);
    SymmetrizedKernel out;
    out.p0.p.resize(g.num_edges());
    out.q.resize(g.num_edges());
    for (int e = 0; e < g.num_edges(); ++e) {
        int rev = QuotientGraph::involution(e);
        double balanced = m(g.edge_terminus(e)) * kernel(rev) /
                          m(g.edge_origin(e));
        out.p0.p[e] = 0.5 * (kernel(e) + balanced);
        out.q[e] = 0.5 * (kernel(e) - balanced);
    }
    return out;
}

/// p_eps = p0 + eps q, the segment between the symmetrization (eps = 0) and
/// the original kernel (eps = 1). Nonnegativity holds exactly on [0, 1].
inline TransitionKernel interpolate(const SymmetrizedKernel& family,
                                    double eps) {
    if (!(eps >= 0.0 && eps <= 1.0))
        throw ValidationError("interpolate: eps must lie in [0, 1]");
    TransitionKernel out;
    out.p.resize(family.p0.p.size());
    for (size_t e = 0; e < out.p.size(); ++e) {
        double v = family.p0.p[e] + eps * family.q[e];
        out.p[e] = (v < 0.0 && v > -1e-15) ? 0.0 : v;
    }
    return out;
}

/// Fundamental cycles of a BFS spanning tree rooted at vertex 0. Vertices are
/// visited in index order and tree edges are the first-discovered ones, so
/// the basis is reproducible. One cycle per non-tree pair: the chord followed
/// by the tree path back; the chord's pair coefficient is +1.
inline std::vector<Chain1> cycle_basis(const QuotientGraph& g) {
    if (!g.is_connected())
        throw ValidationError("cycle_basis: graph must be connected");
    const int n = g.num_vertices();
    std::vector<int> parent_edge(n, -1); // directed edge id into the vertex
    std::vector<char> visited(n, 0);
    std::vector<char> tree_pair(g.num_pairs(), 0);
    std::vector<int> order{0};
    visited[0] = 1;
    for (size_t head = 0; head < order.size(); ++head) {
        int v = order[head];
        for (int e : g.out_edges(v)) {
            int w = g.edge_terminus(e);
            if (!visited[w]) {
                visited[w] = 1;
                parent_edge[w] = e;
                tree_pair[QuotientGraph::pair_of(e)] = 1;
                order.push_back(w);
            }
        }
    }
    // Pair coefficients of the tree path from v back to the root.
    auto path_to_root = [&](int v, Chain1& chain, double sign) {
        while (parent_edge[v] != -1) {
            int e = parent_edge[v]; // points from parent to v
            chain.c[QuotientGraph::pair_of(e)] -=
                sign * (QuotientGraph::is_forward(e) ? 1.0 : -1.0);
            v = g.edge_origin(e);
        }
    };
    std::vector<Chain1> basis;
    for (int k = 0; k < g.num_pairs(); ++k) {
        if (tree_pair[k])
            continue;
        Chain1 cycle{std::vector<double>(g.num_pairs(), 0.0)};
        cycle.c[k] = 1.0;
        // chord o -> t, then tree path t -> root -> o
        path_to_root(g.pair(k).terminus, cycle, 1.0);
        path_to_root(g.pair(k).origin, cycle, -1.0);
        basis.push_back(std::move(cycle));
    }
    return basis;
}

/// Coordinates of a cycle in a fundamental-cycle basis. Each basis element
/// owns its chord pair, so the expansion is read off the chord coefficients;
/// the expansion is verified exactly and rejected if the chain lies outside
/// the span.
inline Vec expand_in_cycle_basis(const QuotientGraph& g, const Chain1& chain,
                                 const std::vector<Chain1>& basis,
                                 double tol = 1e-10) {
    Mat a(g.num_pairs(), basis.size());
    for (size_t j = 0; j < basis.size(); ++j)
        for (int k = 0; k < g.num_pairs(); ++k)
            a(k, j) = basis[j].c[k];
    Vec b(g.num_pairs());
    for (int k = 0; k < g.num_pairs(); ++k)
        b[k] = chain.c[k];
    Vec x = a.colPivHouseholderQr().solve(b);
    if ((a * x - b).lpNorm<Eigen::Infinity>() > tol)
        throw NumericError("chain does not lie in the span of the given cycles");
    return x;
}

/// Homological direction gamma_p: pair-k coefficient m~(e_k) - m~(rev e_k).
/// A 1-cycle (zero boundary); vanishes exactly when the walk is m-symmetric.
inline Chain1 homological_direction(const QuotientGraph& g,
                                    const TransitionKernel& kernel,
                                    const InvariantMeasure& m) {
    Chain1 gamma{std::vector<double>(g.num_pairs(), 0.0)};
    for (int k = 0; k < g.num_pairs(); ++k) {
        int e = QuotientGraph::forward_edge(k);
        gamma.c[k] =
            tilde_m(g, kernel, m, e) - tilde_m(g, kernel, m, QuotientGraph::involution(e));
    }
    return gamma;
}

/// Hexagonal lattice over the Heisenberg group: two vertices x, y joined by
/// three edge pairs e1, e2, e3 with voltages exp(X1), 1, exp(X2). The two
/// hexagon cycles c1 = e1 - e2 and c2 = e3 - e2 then carry voltages whose
/// abelianizations are X1 and X2.
struct HexLattice {
    QuotientGraph graph;
    TransitionKernel kernel;
    std::vector<Chain1> cycles; // {c1, c2}
};

inline HexLattice build_hexagonal_heisenberg(double alpha, double beta,
                                             double gamma, double alpha_rev,
                                             double beta_rev, double gamma_rev,
                                             double tol = 1e-12) {
    auto positive = [](double v) { return v > 0.0; };
    if (!positive(alpha) || !positive(beta) || !positive(gamma) ||
        !positive(alpha_rev) || !positive(beta_rev) || !positive(gamma_rev))
        throw ValidationError("hexagonal lattice: all six probabilities must be positive");
    if (std::abs(alpha + beta + gamma - 1.0) > tol ||
        std::abs(alpha_rev + beta_rev + gamma_rev - 1.0) > tol)
        throw ValidationError("hexagonal lattice: each probability triple must sum to 1");
    GradedAlgebra alg = GradedAlgebra::heisenberg();
    auto elem = [&](double x, double y) {
        Vec z = Vec::Zero(3);
        z[0] = x;
        z[1] = y;
        return GroupElement(z);
    };
    std::vector<QuotientGraph::EdgePair> pairs = {
        {0, 1, elem(1, 0)}, // e1
        {0, 1, elem(0, 0)}, // e2
        {0, 1, elem(0, 1)}, // e3
    };
    QuotientGraph graph(alg, {"x", "y"}, std::move(pairs));
    TransitionKernel kernel{{alpha, alpha_rev, beta, beta_rev, gamma, gamma_rev}};
    std::vector<Chain1> cycles = {Chain1{{1.0, -1.0, 0.0}},
                                  Chain1{{0.0, -1.0, 1.0}}};
    return HexLattice{std::move(graph), std::move(kernel), std::move(cycles)};
}

// ---------------------------------------------------------------------------
// Graph-spec JSON:
// {
//   "algebra": {"dims": [...], "brackets": [...]} | {"preset": "heisenberg"},
//   "vertices": ["x", "y", ...],
//   "edge_pairs": [{"o": "x", "t": "y", "voltage": [..d..],
//                   "p": 0.5, "p_rev": 0.2}, ...]
// }
// The reversed edge of each pair is implicit (voltage inverted, p_rev).
// Endpoints may be given by name or by index.
// ---------------------------------------------------------------------------

struct GraphSpec {
    QuotientGraph graph;
    TransitionKernel kernel;
};

inline GraphSpec load_graph_spec(const nlohmann::json& j) {
    if (!j.contains("algebra") || !j.contains("vertices") ||
        !j.contains("edge_pairs"))
        throw ValidationError(
            "graph spec: expected keys 'algebra', 'vertices', 'edge_pairs'");
    GradedAlgebra alg = GradedAlgebra::from_json(j.at("algebra"));
    std::vector<std::string> names;
    for (const auto& v : j.at("vertices")) {
        if (v.is_string())
            names.push_back(v.get<std::string>());
        else
            names.push_back(std::to_string(v.get<long>()));
    }
    auto vertex_index = [&](const nlohmann::json& v) -> int {
        std::string key =
            v.is_string() ? v.get<std::string>() : std::to_string(v.get<long>());
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == key)
                return static_cast<int>(i);
        throw ValidationError("graph spec: unknown vertex '" + key + "'");
    };
    std::vector<QuotientGraph::EdgePair> pairs;
    std::vector<double> probabilities;
    for (const auto& ep : j.at("edge_pairs")) {
        auto coords = ep.at("voltage").get<std::vector<double>>();
        if (static_cast<int>(coords.size()) != alg.dim())
            throw ValidationError("graph spec: voltage must have " +
                                  std::to_string(alg.dim()) + " coordinates");
        GroupElement voltage(
            Eigen::Map<const Vec>(coords.data(), coords.size()));
        pairs.push_back(
            {vertex_index(ep.at("o")), vertex_index(ep.at("t")), voltage});
        probabilities.push_back(ep.at("p").get<double>());
        probabilities.push_back(ep.at("p_rev").get<double>());
    }
    QuotientGraph graph(std::move(alg), std::move(names), std::move(pairs));
    return GraphSpec{std::move(graph), TransitionKernel{std::move(probabilities)}};
}

inline nlohmann::json graph_spec_to_json(const QuotientGraph& g,
                                         const TransitionKernel& kernel) {
    nlohmann::json j;
    j["algebra"] = g.algebra().to_json();
    nlohmann::json verts = nlohmann::json::array();
    for (int v = 0; v < g.num_vertices(); ++v)
        verts.push_back(g.vertex_name(v));
    j["vertices"] = verts;
    nlohmann::json eps = nlohmann::json::array();
    for (int k = 0; k < g.num_pairs(); ++k) {
        const auto& p = g.pair(k);
        std::vector<double> coords(p.voltage.z.data(),
                                   p.voltage.z.data() + p.voltage.dim());
        eps.push_back({{"o", g.vertex_name(p.origin)},
                       {"t", g.vertex_name(p.terminus)},
                       {"voltage", coords},
                       {"p", kernel(QuotientGraph::forward_edge(k))},
                       {"p_rev", kernel(QuotientGraph::involution(
                                     QuotientGraph::forward_edge(k)))}});
    }
    j["edge_pairs"] = eps;
    return j;
}

} // namespace nilwalk
