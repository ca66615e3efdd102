#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "nilwalk/errors.hpp"

namespace nilwalk {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Graded nilpotent Lie algebra g = g^(1) + ... + g^(r), given by layer
/// dimensions and structure constants in a fixed graded basis.
///
/// Basis elements are indexed flat across layers: layer 1 first. The grading
/// convention is [g^(i), g^(j)] contained in the sum of g^(k) with k >= i+j
/// (equal to 0 whenever i+j exceeds the step). The bracket need not be layer
/// homogeneous; graded_bracket() projects each [g^(i),g^(j)] contribution onto
/// g^(i+j), which yields the stratified bracket of the blow-up limit.
class GradedAlgebra {
public:
    struct Term {
        int left;    // flat basis index
        int right;   // flat basis index
        int out;     // flat basis index
        double coeff;
    };

    explicit GradedAlgebra(std::vector<int> layer_dims)
        : dims_(std::move(layer_dims)) {
        if (dims_.empty())
            throw ValidationError("algebra: at least one layer required");
        offsets_.resize(dims_.size() + 1, 0);
        for (size_t k = 0; k < dims_.size(); ++k) {
            if (dims_[k] <= 0)
                throw ValidationError("algebra: layer dimensions must be positive");
            offsets_[k + 1] = offsets_[k] + dims_[k];
        }
        layer_of_.resize(offsets_.back());
        for (int k = 1; k <= step(); ++k)
            for (int i = layer_offset(k); i < layer_offset(k) + layer_dim(k); ++i)
                layer_of_[i] = k;
    }

    int step() const { return static_cast<int>(dims_.size()); }
    int dim() const { return offsets_.back(); }
    int layer_dim(int k) const { return dims_[k - 1]; }          // k is 1-based
    int layer_offset(int k) const { return offsets_[k - 1]; }
    int layer_of(int flat_index) const { return layer_of_[flat_index]; }
    const std::vector<int>& layer_dims() const { return dims_; }

    int flat_index(int layer, int index_in_layer) const {
        if (layer < 1 || layer > step() || index_in_layer < 1 ||
            index_in_layer > layer_dim(layer))
            throw ValidationError("algebra: basis index [" + std::to_string(layer) +
                                  "," + std::to_string(index_in_layer) +
                                  "] out of range");
        return layer_offset(layer) + index_in_layer - 1;
    }

    /// Registers [X_a, X_b] += c * X_out (flat indices). The mirrored entry
    /// for (b, a) is added automatically; conflicting duplicates are rejected.
    void add_bracket(int a, int b, int out, double c) {
        if (a < 0 || a >= dim() || b < 0 || b >= dim() || out < 0 || out >= dim())
            throw ValidationError("algebra: bracket index out of range");
        if (a == b && c != 0.0)
            throw ValidationError("algebra: [X,X] must vanish");
        insert_entry(a, b, out, c);
        insert_entry(b, a, out, -c);
        finalized_ = false;
    }

    /// Structural checks: antisymmetry (by construction), the grading rule,
    /// and the Jacobi identity on all basis triples.
    void validate(double tol = 1e-12) const {
        for (const auto& [key, c] : entries_) {
            auto [a, b, out] = key;
            auto mirror = entries_.find(std::make_tuple(b, a, out));
            if (mirror == entries_.end() || std::abs(mirror->second + c) > tol)
                throw ValidationError("algebra: structure constants not antisymmetric");
            if (c == 0.0)
                continue;
            int la = layer_of(a), lb = layer_of(b), lo = layer_of(out);
            if (la + lb > step())
                throw ValidationError(
                    "algebra: bracket of layers " + std::to_string(la) + "," +
                    std::to_string(lb) + " must vanish (step " +
                    std::to_string(step()) + ")");
            if (lo < la + lb)
                throw ValidationError(
                    "algebra: bracket of layers " + std::to_string(la) + "," +
                    std::to_string(lb) + " has a component in layer " +
                    std::to_string(lo) + " below the grading");
        }
        // Jacobi on basis triples.
        const int d = dim();
        Vec ea = Vec::Zero(d), eb = Vec::Zero(d), ec = Vec::Zero(d);
        for (int a = 0; a < d; ++a)
            for (int b = a + 1; b < d; ++b)
                for (int c = b + 1; c < d; ++c) {
                    ea.setZero(); eb.setZero(); ec.setZero();
                    ea[a] = 1; eb[b] = 1; ec[c] = 1;
                    Vec j = bracket(ea, bracket(eb, ec)) +
                            bracket(eb, bracket(ec, ea)) +
                            bracket(ec, bracket(ea, eb));
                    if (j.lpNorm<Eigen::Infinity>() > tol)
                        throw ValidationError(
                            "algebra: Jacobi identity fails on basis triple (" +
                            std::to_string(a) + "," + std::to_string(b) + "," +
                            std::to_string(c) + "), residual " +
                            std::to_string(j.lpNorm<Eigen::Infinity>()));
                }
    }

    Vec bracket(const Vec& z1, const Vec& z2) const {
        check_dim(z1); check_dim(z2);
        Vec out = Vec::Zero(dim());
        bracket_into(z1.data(), z2.data(), out.data(), /*graded=*/false);
        return out;
    }

    /// Keeps only the g^(i+j) component of each [g^(i), g^(j)] contribution.
    Vec graded_bracket(const Vec& z1, const Vec& z2) const {
        check_dim(z1); check_dim(z2);
        Vec out = Vec::Zero(dim());
        bracket_into(z1.data(), z2.data(), out.data(), /*graded=*/true);
        return out;
    }

    // Raw-pointer core used by the samplers; `out` must be zero-initialized.
    void bracket_into(const double* z1, const double* z2, double* out,
                      bool graded) const {
        finalize();
        const auto& terms = graded ? graded_terms_ : terms_;
        for (const Term& t : terms)
            out[t.out] += t.coeff * z1[t.left] * z2[t.right];
    }

    bool has_brackets() const { finalize(); return !terms_.empty(); }

    static GradedAlgebra heisenberg() {
        GradedAlgebra alg({2, 1});
        alg.add_bracket(0, 1, 2, 1.0); // [X1, X2] = X3
        return alg;
    }

    static GradedAlgebra from_json(const nlohmann::json& j) {
        if (j.contains("preset")) {
            const std::string name = j.at("preset").get<std::string>();
            if (name == "heisenberg")
                return heisenberg();
            throw ValidationError("algebra: unknown preset '" + name + "'");
        }
        if (!j.contains("dims"))
            throw ValidationError("algebra: missing 'dims'");
        GradedAlgebra alg(j.at("dims").get<std::vector<int>>());
        if (j.contains("brackets")) {
            for (const auto& b : j.at("brackets")) {
                auto a = b.at("a").get<std::vector<int>>();
                auto bb = b.at("b").get<std::vector<int>>();
                auto out = b.at("out").get<std::vector<int>>();
                if (a.size() != 2 || bb.size() != 2 || out.size() != 2)
                    throw ValidationError("algebra: bracket indices are [layer, index] pairs");
                alg.add_bracket(alg.flat_index(a[0], a[1]),
                                alg.flat_index(bb[0], bb[1]),
                                alg.flat_index(out[0], out[1]),
                                b.at("c").get<double>());
            }
        }
        alg.validate();
        return alg;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["dims"] = dims_;
        nlohmann::json brackets = nlohmann::json::array();
        for (const auto& [key, c] : entries_) {
            auto [a, b, out] = key;
            if (a > b || c == 0.0)
                continue; // emit each antisymmetric pair once
            brackets.push_back({{"a", {layer_of(a), a - layer_offset(layer_of(a)) + 1}},
                                {"b", {layer_of(b), b - layer_offset(layer_of(b)) + 1}},
                                {"out", {layer_of(out), out - layer_offset(layer_of(out)) + 1}},
                                {"c", c}});
        }
        j["brackets"] = brackets;
        return j;
    }

    bool same_shape(const GradedAlgebra& other) const {
        return dims_ == other.dims_;
    }

private:
    void check_dim(const Vec& z) const {
        if (z.size() != dim())
            throw ValidationError("algebra: vector dimension " +
                                  std::to_string(z.size()) + " != " +
                                  std::to_string(dim()));
    }

    void insert_entry(int a, int b, int out, double c) {
        auto key = std::make_tuple(a, b, out);
        auto it = entries_.find(key);
        if (it != entries_.end()) {
            if (std::abs(it->second - c) > 0)
                throw ValidationError("algebra: conflicting structure constant for ([" +
                                      std::to_string(a) + "," + std::to_string(b) +
                                      "] -> " + std::to_string(out) + ")");
            return;
        }
        entries_[key] = c;
    }

    void finalize() const {
        if (finalized_)
            return;
        terms_.clear();
        graded_terms_.clear();
        for (const auto& [key, c] : entries_) {
            if (c == 0.0)
                continue;
            auto [a, b, out] = key;
            terms_.push_back({a, b, out, c});
            if (layer_of(out) == layer_of(a) + layer_of(b))
                graded_terms_.push_back({a, b, out, c});
        }
        finalized_ = true;
    }

    std::vector<int> dims_;
    std::vector<int> offsets_;
    std::vector<int> layer_of_;
    std::map<std::tuple<int, int, int>, double> entries_;
    mutable std::vector<Term> terms_;
    mutable std::vector<Term> graded_terms_;
    mutable bool finalized_ = false;
};

} // namespace nilwalk
