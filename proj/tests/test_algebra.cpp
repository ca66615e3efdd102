#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace nilwalk;
using namespace nilwalk::testing;

TEST(Algebra, HeisenbergBracket) {
    GradedAlgebra alg = GradedAlgebra::heisenberg();
    alg.validate();
    Vec x1 = Vec::Zero(3), x2 = Vec::Zero(3);
    x1[0] = 1;
    x2[1] = 1;
    Vec b = alg.bracket(x1, x2);
    EXPECT_DOUBLE_EQ(b[2], 1.0); // [X1, X2] = X3
    EXPECT_DOUBLE_EQ(b[0], 0.0);
    EXPECT_DOUBLE_EQ(b[1], 0.0);
    // graded and full brackets agree on a stratified algebra
    EXPECT_EQ((alg.graded_bracket(x1, x2) - b).norm(), 0.0);
}

TEST(Algebra, BracketOfElementWithItselfVanishes) {
    GradedAlgebra alg = filiform5();
    StreamRng rng(7, 0);
    for (int i = 0; i < 100; ++i) {
        Vec z = random_vec(rng, alg.dim());
        EXPECT_LT(alg.bracket(z, z).lpNorm<Eigen::Infinity>(), 1e-14);
    }
}

TEST(Algebra, GradedBracketDropsHigherLayerLeak) {
    GradedAlgebra alg = leaky3();
    alg.validate();
    Vec x1 = Vec::Zero(4), x2 = Vec::Zero(4);
    x1[0] = 1;
    x2[1] = 1;
    Vec full = alg.bracket(x1, x2);
    EXPECT_DOUBLE_EQ(full[2], 1.0);
    EXPECT_DOUBLE_EQ(full[3], 1.0); // layer-3 leak present in the full bracket
    Vec graded = alg.graded_bracket(x1, x2);
    EXPECT_DOUBLE_EQ(graded[2], 1.0);
    EXPECT_DOUBLE_EQ(graded[3], 0.0); // dropped by the graded projection
}

TEST(Algebra, ValidateRejectsJacobiFailure) {
    // dims (3,1,1): [X1,X2] = W, [X2,X3] = W, [X3,W] = Z. Then
    // Jacobi(X1,X2,X3) = [X1,W] + 0 + [X3,W] = Z, which is nonzero.
    GradedAlgebra broken({3, 1, 1});
    broken.add_bracket(0, 1, 3, 1.0);
    broken.add_bracket(1, 2, 3, 1.0);
    broken.add_bracket(2, 3, 4, 1.0);
    EXPECT_THROW(broken.validate(), ValidationError);
}

TEST(Algebra, ValidateRejectsGradingViolation) {
    GradedAlgebra alg({1, 1});
    EXPECT_THROW(alg.add_bracket(0, 0, 1, 1.0), ValidationError); // [X,X] != 0
    GradedAlgebra below({2, 1});
    below.add_bracket(0, 1, 0, 0.5); // layer 1+1 output landing in layer 1
    EXPECT_THROW(below.validate(), ValidationError);
    GradedAlgebra beyond({2, 1});
    beyond.add_bracket(0, 2, 2, 1.0); // layers 1+2 > step 2 must vanish
    EXPECT_THROW(beyond.validate(), ValidationError);
}

TEST(Algebra, JsonRoundTrip) {
    GradedAlgebra alg = filiform5();
    nlohmann::json j = alg.to_json();
    GradedAlgebra back = GradedAlgebra::from_json(j);
    StreamRng rng(11, 3);
    for (int i = 0; i < 50; ++i) {
        Vec a = random_vec(rng, alg.dim());
        Vec b = random_vec(rng, alg.dim());
        EXPECT_LT((alg.bracket(a, b) - back.bracket(a, b)).norm(), 1e-15);
    }
}

TEST(Algebra, JsonPresetAndErrors) {
    auto heis = GradedAlgebra::from_json({{"preset", "heisenberg"}});
    EXPECT_EQ(heis.dim(), 3);
    EXPECT_THROW(GradedAlgebra::from_json({{"preset", "unknown"}}),
                 ValidationError);
    EXPECT_THROW(GradedAlgebra::from_json(nlohmann::json::object()),
                 ValidationError);
    // 1-based [layer, index] addressing
    nlohmann::json j = {{"dims", {2, 1}},
                        {"brackets",
                         {{{"a", {1, 1}}, {"b", {1, 2}}, {"out", {2, 1}}, {"c", 2.5}}}}};
    GradedAlgebra alg = GradedAlgebra::from_json(j);
    Vec x1 = Vec::Zero(3), x2 = Vec::Zero(3);
    x1[0] = 1;
    x2[1] = 1;
    EXPECT_DOUBLE_EQ(alg.bracket(x1, x2)[2], 2.5);
}

TEST(Algebra, DimensionMismatchRejected) {
    GradedAlgebra alg = GradedAlgebra::heisenberg();
    Vec wrong = Vec::Zero(4);
    EXPECT_THROW(alg.bracket(wrong, wrong), ValidationError);
}
