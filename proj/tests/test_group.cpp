#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace nilwalk;
using namespace nilwalk::testing;

namespace {

std::vector<GradedAlgebra> test_algebras() {
    return {GradedAlgebra::heisenberg(), engel(), filiform5(), leaky3()};
}

} // namespace

// The closed-form product coefficients against the truncated free associative
// algebra, where log(exp(x) exp(y)) needs no Lie theory. Agreement there
// implies agreement on every algebra of step <= 4 by universality.
TEST(Group, ClosedFormMatchesAssociativeOracle) {
    FreeElem reference = free_bch_reference();
    FreeElem closed = free_bch_closed_form();
    FreeElem diff = free_add(reference, closed, -1.0);
    for (const auto& [word, coeff] : diff)
        EXPECT_NEAR(coeff, 0.0, 1e-14) << "word '" << word << "'";
    // and the reference has the expected low-order coefficients
    EXPECT_NEAR(reference.at("x"), 1.0, 1e-15);
    EXPECT_NEAR(reference.at("xy"), 0.5, 1e-15);
    EXPECT_NEAR(reference.at("yx"), -0.5, 1e-15);
}

TEST(Group, HeisenbergProductExample) {
    GradedAlgebra alg = GradedAlgebra::heisenberg();
    GroupElement g(Vec(3)), h(Vec(3));
    g.z << 1, 0, 0;
    h.z << 0, 1, 0;
    GroupElement gh = group_mul(g, h, alg);
    EXPECT_NEAR(gh.z[0], 1.0, 1e-15);
    EXPECT_NEAR(gh.z[1], 1.0, 1e-15);
    EXPECT_NEAR(gh.z[2], 0.5, 1e-15); // z1 + z2 + [z1,z2]/2
}

TEST(Group, IdentityLaws) {
    for (const auto& alg : test_algebras()) {
        StreamRng rng(3, 1);
        GroupElement e = identity(alg);
        for (int i = 0; i < 50; ++i) {
            GroupElement g = random_element(rng, alg);
            for (auto kind : {Product::Dot, Product::Star}) {
                EXPECT_LT((group_mul(g, e, alg, kind).z - g.z).norm(), 1e-15);
                EXPECT_LT((group_mul(e, g, alg, kind).z - g.z).norm(), 1e-15);
            }
        }
    }
}

TEST(Group, InverseLaws) {
    EXPECT_EQ(inverse(identity(GradedAlgebra::heisenberg())).z.norm(), 0.0);
    GradedAlgebra heis = GradedAlgebra::heisenberg();
    GroupElement g(Vec(3));
    g.z << 1, 1, 0.5;
    EXPECT_LT((inverse(g).z - Vec(-g.z)).norm(), 1e-15);
    // multiply-out check for (1,1,1/2)^{-1} = (-1,-1,-1/2)
    EXPECT_LT(group_mul(g, inverse(g), heis).z.norm(), 1e-15);
    for (const auto& alg : test_algebras()) {
        StreamRng rng(5, 2);
        for (int i = 0; i < 200; ++i) {
            GroupElement a = random_element(rng, alg);
            EXPECT_LT((inverse(inverse(a)).z - a.z).norm(), 1e-15);
            for (auto kind : {Product::Dot, Product::Star}) {
                EXPECT_LT(group_mul(a, inverse(a), alg, kind).z
                              .lpNorm<Eigen::Infinity>(),
                          1e-12);
                EXPECT_LT(group_mul(inverse(a), a, alg, kind).z
                              .lpNorm<Eigen::Infinity>(),
                          1e-12);
            }
        }
    }
}

TEST(Group, AssociativityBothProducts) {
    for (const auto& alg : test_algebras()) {
        StreamRng rng(9, 4);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            GroupElement a = random_element(rng, alg);
            GroupElement b = random_element(rng, alg);
            GroupElement c = random_element(rng, alg);
            for (auto kind : {Product::Dot, Product::Star}) {
                Vec left = group_mul(group_mul(a, b, alg, kind), c, alg, kind).z;
                Vec right = group_mul(a, group_mul(b, c, alg, kind), alg, kind).z;
                worst = std::max(worst, (left - right).lpNorm<Eigen::Infinity>());
            }
        }
        EXPECT_LT(worst, 1e-10);
    }
}

TEST(Group, DilationScalesLayersAndComposes) {
    GradedAlgebra heis = GradedAlgebra::heisenberg();
    GroupElement g(Vec(3));
    g.z << 2, -3, 5;
    GroupElement tg = dilate(g, 0.5, heis);
    EXPECT_DOUBLE_EQ(tg.z[0], 1.0);
    EXPECT_DOUBLE_EQ(tg.z[1], -1.5);
    EXPECT_DOUBLE_EQ(tg.z[2], 1.25); // eps^2 on layer 2
    for (const auto& alg : test_algebras()) {
        StreamRng rng(13, 5);
        for (int i = 0; i < 200; ++i) {
            GroupElement a = random_element(rng, alg);
            EXPECT_LT((dilate(a, 1.0, alg).z - a.z).norm(), 1e-15);
            double e1 = rng.uniform() + 0.1, e2 = rng.uniform() + 0.1;
            Vec composed = dilate(dilate(a, e1, alg), e2, alg).z;
            Vec direct = dilate(a, e1 * e2, alg).z;
            EXPECT_LT((composed - direct).lpNorm<Eigen::Infinity>(), 1e-12);
        }
    }
    EXPECT_THROW(dilate(g, -0.1, heis), ValidationError);
}

TEST(Group, DilationIsStarAutomorphism) {
    for (const auto& alg : test_algebras()) {
        StreamRng rng(17, 6);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            GroupElement a = random_element(rng, alg);
            GroupElement b = random_element(rng, alg);
            double eps = 2.0 * rng.uniform();
            Vec lhs = dilate(group_mul(a, b, alg, Product::Star), eps, alg).z;
            Vec rhs = group_mul(dilate(a, eps, alg), dilate(b, eps, alg), alg,
                                Product::Star)
                          .z;
            worst = std::max(worst, (lhs - rhs).lpNorm<Eigen::Infinity>());
        }
        EXPECT_LT(worst, 1e-10);
    }
}

// Layers 1 and 2 of the two products agree on every element pair; for step-2
// algebras the products coincide entirely.
TEST(Group, LayerAgreementBetweenProducts) {
    for (const auto& alg : test_algebras()) {
        StreamRng rng(21, 7);
        double worst = 0.0;
        int d12 = alg.layer_dim(1) + (alg.step() >= 2 ? alg.layer_dim(2) : 0);
        for (int i = 0; i < 1000; ++i) {
            GroupElement a = random_element(rng, alg);
            GroupElement b = random_element(rng, alg);
            Vec dot = group_mul(a, b, alg, Product::Dot).z;
            Vec star = group_mul(a, b, alg, Product::Star).z;
            worst = std::max(worst,
                             (dot.head(d12) - star.head(d12)).lpNorm<Eigen::Infinity>());
        }
        EXPECT_LT(worst, 1e-10);
    }
    GradedAlgebra heis = GradedAlgebra::heisenberg();
    StreamRng rng(23, 8);
    for (int i = 0; i < 100; ++i) {
        GroupElement a = random_element(rng, heis);
        GroupElement b = random_element(rng, heis);
        EXPECT_EQ((group_mul(a, b, heis, Product::Dot).z -
                   group_mul(a, b, heis, Product::Star).z)
                      .norm(),
                  0.0);
    }
}

// Layer-1 blocks add under either product.
TEST(Group, AbelianizedLayerAdds) {
    for (const auto& alg : test_algebras()) {
        StreamRng rng(29, 9);
        int d1 = alg.layer_dim(1);
        for (int i = 0; i < 200; ++i) {
            GroupElement a = random_element(rng, alg);
            GroupElement b = random_element(rng, alg);
            Vec sum = a.z.head(d1) + b.z.head(d1);
            EXPECT_LT((group_mul(a, b, alg).z.head(d1) - sum).norm(), 1e-13);
        }
    }
}

// Depth-(r+1) nested brackets vanish by nilpotency, so extending the series
// past the step changes nothing.
TEST(Group, TruncationExactness) {
    for (const auto& alg : test_algebras()) {
        StreamRng rng(31, 10);
        const int r = alg.step();
        for (int i = 0; i < 200; ++i) {
            Vec nested = random_vec(rng, alg.dim());
            for (int depth = 1; depth <= r; ++depth)
                nested = alg.bracket(random_vec(rng, alg.dim()), nested);
            // nested is now an (r+1)-fold bracket
            EXPECT_LT(nested.lpNorm<Eigen::Infinity>(), 1e-12);
        }
    }
}

TEST(Group, HomNormExamples) {
    GradedAlgebra heis = GradedAlgebra::heisenberg();
    EXPECT_DOUBLE_EQ(hom_norm(identity(heis), heis), 0.0);
    GroupElement g(Vec(3));
    g.z << 3, 4, 0;
    EXPECT_DOUBLE_EQ(hom_norm(g, heis), 5.0); // Euclidean on layer 1
    GroupElement h(Vec(3));
    h.z << 0, 0, 4;
    EXPECT_DOUBLE_EQ(hom_norm(h, heis), 2.0); // 4^(1/2) on layer 2
    for (const auto& alg : test_algebras()) {
        StreamRng rng(37, 11);
        double worst = 0.0;
        for (int i = 0; i < 500; ++i) {
            GroupElement a = random_element(rng, alg);
            double eps = 2.0 * rng.uniform();
            worst = std::max(worst, std::abs(hom_norm(dilate(a, eps, alg), alg) -
                                             eps * hom_norm(a, alg)));
        }
        EXPECT_LT(worst, 1e-10);
    }
}

TEST(Group, DistSurrogate) {
    for (const auto& alg : test_algebras()) {
        StreamRng rng(41, 12);
        GroupElement one = identity(alg);
        for (int i = 0; i < 300; ++i) {
            GroupElement g = random_element(rng, alg);
            GroupElement h = random_element(rng, alg);
            GroupElement a = random_element(rng, alg);
            EXPECT_NEAR(dist_surrogate(g, g, alg), 0.0, 1e-12);
            double eps = 2.0 * rng.uniform();
            EXPECT_NEAR(dist_surrogate(one, dilate(g, eps, alg), alg),
                        eps * dist_surrogate(one, g, alg), 1e-10);
            // left invariance under the limit product
            Vec ag = group_mul(a, g, alg, Product::Star).z;
            Vec ah = group_mul(a, h, alg, Product::Star).z;
            EXPECT_NEAR(dist_surrogate(GroupElement(ag), GroupElement(ah), alg),
                        dist_surrogate(g, h, alg), 1e-9);
        }
    }
}

TEST(Group, StepAboveFourRejected) {
    GradedAlgebra alg({1, 1, 1, 1, 1});
    GroupElement g = identity(alg);
    EXPECT_THROW(group_mul(g, g, alg), ValidationError);
}
