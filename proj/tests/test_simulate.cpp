#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "test_util.hpp"

using namespace nilwalk;
using namespace nilwalk::testing;

namespace {

HexLattice hex_skew() {
    return build_hexagonal_heisenberg(0.5, 0.3, 0.2, 0.2, 0.3, 0.5);
}

HexLattice hex_uniform() {
    double t = 1.0 / 3;
    return build_hexagonal_heisenberg(t, t, t, t, t, t);
}

RealizationFamily make_family(const HexLattice& lattice, const Gauge& gauge,
                              InvariantMeasure& m) {
    m = invariant_measure(lattice.graph, lattice.kernel);
    SymmetrizedKernel sym = symmetrize(lattice.graph, lattice.kernel, m);
    return RealizationFamily(lattice.graph, sym, m, gauge);
}

} // namespace

TEST(Simulate, WalkIsReproducibleAndWorkerIndependent) {
    HexLattice lattice = hex_skew();
    InvariantMeasure m;
    RealizationFamily family = make_family(lattice, Gauge::base_point(), m);
    WalkOptions serial;
    PathSampleSet a = sample_walk(family, 64, {0.5, 1.0}, 50, 42, serial);
    PathSampleSet b = sample_walk(family, 64, {0.5, 1.0}, 50, 42, serial);
    EXPECT_EQ(a.data, b.data); // bit identical
    WalkOptions parallel;
    parallel.workers = 4;
    PathSampleSet c = sample_walk(family, 64, {0.5, 1.0}, 50, 42, parallel);
    EXPECT_EQ(a.data, c.data);
    PathSampleSet d = sample_walk(family, 64, {0.5, 1.0}, 50, 43, serial);
    EXPECT_NE(a.data, d.data);
}

TEST(Simulate, SingleStepWalkEnumeratesIncrements) {
    HexLattice lattice = hex_skew();
    InvariantMeasure m;
    RealizationFamily family = make_family(lattice, Gauge::base_point(), m);
    const PeriodicRealization& real = family.at(1.0); // eps = n^{-1/2} = 1
    PathSampleSet samples = sample_walk(family, 1, {1.0}, 200, 7);
    // tau_1 = identity, start position is the identity under this gauge, so
    // each sample equals one of the three out-edge increments of vertex x.
    std::vector<Vec> increments;
    for (int e : lattice.graph.out_edges(0))
        increments.push_back(d_phi(lattice.graph, real, e).z);
    for (int p = 0; p < samples.num_paths; ++p) {
        Eigen::Map<const Vec> z(samples.at(0, p), samples.dim());
        double best = 1e9;
        for (const Vec& inc : increments)
            best = std::min(best, (z - inc).lpNorm<Eigen::Infinity>());
        EXPECT_LT(best, 1e-14);
    }
}

TEST(Simulate, WalkRejectsOffGridTimes) {
    HexLattice lattice = hex_skew();
    InvariantMeasure m;
    RealizationFamily family = make_family(lattice, Gauge::base_point(), m);
    EXPECT_THROW(sample_walk(family, 4, {0.3}, 2, 1), ValidationError);
    EXPECT_THROW(sample_walk(family, 4, {0.5, 0.25}, 2, 1), ValidationError);
    EXPECT_THROW(sample_walk(family, 4, {1.25}, 2, 1), ValidationError);
    EXPECT_NO_THROW(sample_walk(family, 4, {0.25, 0.5, 1.0}, 2, 1));
}

TEST(Simulate, SymmetricWalkLayer1MeanNearZero) {
    HexLattice lattice = hex_uniform();
    InvariantMeasure m;
    RealizationFamily family = make_family(lattice, Gauge::base_point(), m);
    PathSampleSet samples = sample_walk(family, 1024, {1.0}, 4000, 11);
    LayerMoments moments = layer_moments(samples, 1, 1.0);
    for (int i = 0; i < 2; ++i)
        EXPECT_LT(std::abs(moments.mean[i]), 4 * moments.mean_se[i]);
}

TEST(Simulate, DriftedWalkLayer1MeanNearRho) {
    HexLattice lattice = hex_skew();
    InvariantMeasure m;
    RealizationFamily family = make_family(lattice, Gauge::base_point(), m);
    Vec rho = asymptotic_direction(lattice.graph, lattice.kernel, m);
    PathSampleSet samples = sample_walk(family, 1024, {1.0}, 4000, 13);
    LayerMoments moments = layer_moments(samples, 1, 1.0);
    for (int i = 0; i < 2; ++i)
        EXPECT_LT(std::abs(moments.mean[i] - rho[i]), 4 * moments.mean_se[i]);
}

TEST(Simulate, WalkScalingConsistency) {
    // Doubling n twice and rescaling leaves the layer-1 covariance at t = 1
    // unchanged within Monte Carlo error.
    HexLattice lattice = hex_uniform();
    InvariantMeasure m;
    RealizationFamily family = make_family(lattice, Gauge::base_point(), m);
    PathSampleSet coarse = sample_walk(family, 256, {1.0}, 6000, 17);
    PathSampleSet fine = sample_walk(family, 1024, {1.0}, 6000, 19);
    Mat cov_coarse = layer_moments(coarse, 1, 1.0).covariance;
    Mat cov_fine = layer_moments(fine, 1, 1.0).covariance;
    double rel = (cov_coarse - cov_fine).norm() / cov_fine.norm();
    EXPECT_LT(rel, 0.1);
}

TEST(Simulate, DiffusionLayer1CovarianceIsIdentityTimesT) {
    GradedAlgebra heis = GradedAlgebra::heisenberg();
    Mat frame = Mat::Identity(2, 2);
    Vec rho = Vec::Zero(2);
    PathSampleSet samples =
        sample_diffusion(heis, frame, rho, {0.5, 1.0}, 64, 20000, 23);
    for (double t : {0.5, 1.0}) {
        LayerMoments moments = layer_moments(samples, 1, t);
        Mat expected = t * Mat::Identity(2, 2);
        EXPECT_LT((moments.covariance - expected).norm() / expected.norm(),
                  0.05);
        EXPECT_LT(moments.mean.lpNorm<Eigen::Infinity>(),
                  4 * moments.mean_se.lpNorm<Eigen::Infinity>());
    }
}

TEST(Simulate, DiffusionDriftOnlyFollowsExponentialFlow) {
    GradedAlgebra heis = GradedAlgebra::heisenberg();
    Mat frame = 1e-8 * Mat::Identity(2, 2); // vanishing noise
    Vec rho(2);
    rho << 0.5, -0.25;
    PathSampleSet samples =
        sample_diffusion(heis, frame, rho, {0.5, 1.0}, 128, 10, 29);
    for (double t : {0.5, 1.0}) {
        LayerMoments moments = layer_moments(samples, 1, t);
        EXPECT_LT((moments.mean - t * rho).lpNorm<Eigen::Infinity>(), 1e-6);
    }
}

TEST(Simulate, DiffusionSelfRefinementKs) {
    // Halving the step size leaves the layer-2 marginal unchanged within the
    // scheme-refinement tolerance.
    GradedAlgebra heis = GradedAlgebra::heisenberg();
    Mat frame = Mat::Identity(2, 2);
    Vec rho = Vec::Zero(2);
    PathSampleSet coarse =
        sample_diffusion(heis, frame, rho, {1.0}, 256, 20000, 31);
    PathSampleSet fine =
        sample_diffusion(heis, frame, rho, {1.0}, 512, 20000, 37);
    double d = ks_distance(coordinate_slice(coarse, 1.0, 2),
                           coordinate_slice(fine, 1.0, 2));
    EXPECT_LT(d, 0.02);
}

TEST(Simulate, DiffusionRejectsBadInput) {
    GradedAlgebra heis = GradedAlgebra::heisenberg();
    Mat frame = Mat::Identity(2, 2);
    Vec rho = Vec::Zero(2);
    EXPECT_THROW(sample_diffusion(heis, frame, rho, {0.3}, 4, 2, 1),
                 ValidationError);
    EXPECT_THROW(sample_diffusion(heis, frame, rho, {1.0}, 0, 2, 1),
                 ValidationError);
    EXPECT_THROW(sample_diffusion(heis, Mat::Identity(3, 3), Vec::Zero(3),
                                  {1.0}, 4, 2, 1),
                 ValidationError);
}

TEST(Simulate, SemigroupExpectationBasics) {
    HexLattice lattice = hex_uniform();
    InvariantMeasure m;
    RealizationFamily family = make_family(lattice, Gauge::base_point(), m);
    PathSampleSet samples = sample_walk(family, 256, {1.0}, 2000, 41);
    auto one = [](Eigen::Ref<const Vec>) { return 1.0; };
    Estimate e1 = semigroup_expectation(one, samples, 1.0);
    EXPECT_DOUBLE_EQ(e1.value, 1.0);
    EXPECT_DOUBLE_EQ(e1.standard_error, 0.0);
    // clipped first coordinate has mean 0 for the symmetric kernel
    auto clipped = [](Eigen::Ref<const Vec> z) {
        return std::clamp(z[0], -10.0, 10.0);
    };
    Estimate e2 = semigroup_expectation(clipped, samples, 1.0);
    EXPECT_LT(std::abs(e2.value), 4 * e2.standard_error);
    PathSampleSet empty;
    empty.layer_dims = {2, 1};
    empty.grid = {1.0};
    EXPECT_THROW(semigroup_expectation(one, empty, 1.0), ValidationError);
}

TEST(Simulate, WalkAndDiffusionExpectationsAgree) {
    HexLattice lattice = hex_uniform();
    AnalysisResult a = analyze(lattice.graph, lattice.kernel, 1.0,
                               Gauge::base_point(), lattice.cycles);
    InvariantMeasure m;
    RealizationFamily family = make_family(lattice, Gauge::base_point(), m);
    PathSampleSet walk = sample_walk(family, 1024, {1.0}, 8000, 43);
    PathSampleSet sde =
        sample_diffusion(lattice.graph.algebra(), a.albanese_0.frame, a.rho,
                         {1.0}, 256, 8000, 47);
    auto f = [](Eigen::Ref<const Vec> z) {
        return std::exp(-(z[0] * z[0] + z[1] * z[1] + z[2] * z[2]));
    };
    Estimate ew = semigroup_expectation(f, walk, 1.0);
    Estimate es = semigroup_expectation(f, sde, 1.0);
    double combined = std::hypot(ew.standard_error, es.standard_error);
    EXPECT_LT(std::abs(ew.value - es.value), 4 * combined);
}

TEST(Simulate, CsvRoundTripAndShape) {
    HexLattice lattice = hex_skew();
    InvariantMeasure m;
    RealizationFamily family = make_family(lattice, Gauge::base_point(), m);
    PathSampleSet samples = sample_walk(family, 4, {0.25, 0.5, 1.0}, 2, 53);
    std::string path = ::testing::TempDir() + "walk_roundtrip.csv";
    write_sample_csv(samples, path);

    // 2 paths x 3 grid times data rows plus the header
    std::ifstream in(path);
    std::string line;
    int lines = 0;
    while (std::getline(in, line))
        ++lines;
    EXPECT_EQ(lines, 1 + 2 * 3);

    PathSampleSet back = read_sample_csv(path);
    EXPECT_EQ(back.layer_dims, samples.layer_dims);
    EXPECT_EQ(back.num_paths, samples.num_paths);
    ASSERT_EQ(back.grid.size(), samples.grid.size());
    for (size_t i = 0; i < samples.grid.size(); ++i)
        EXPECT_DOUBLE_EQ(back.grid[i], samples.grid[i]);
    ASSERT_EQ(back.data.size(), samples.data.size());
    for (size_t i = 0; i < samples.data.size(); ++i)
        EXPECT_DOUBLE_EQ(back.data[i], samples.data[i]);
    std::remove(path.c_str());
}

TEST(Simulate, SubtractOriginStartsAtIdentity) {
    HexLattice lattice = hex_skew();
    InvariantMeasure m;
    // mean-zero gauge has a nonzero base position; subtracting the origin
    // left-translates every path back to the identity at time 0
    RealizationFamily family = make_family(lattice, Gauge::mean_zero(), m);
    WalkOptions keep;
    PathSampleSet kept = sample_walk(family, 16, {0.0, 1.0}, 5, 59, keep);
    Eigen::Map<const Vec> start(kept.at(0, 0), kept.dim());
    EXPECT_GT(start.norm(), 1e-3);
    WalkOptions zeroed;
    zeroed.subtract_origin = true;
    PathSampleSet origin = sample_walk(family, 16, {0.0, 1.0}, 5, 59, zeroed);
    Eigen::Map<const Vec> start0(origin.at(0, 0), origin.dim());
    EXPECT_EQ(start0.norm(), 0.0);
}
