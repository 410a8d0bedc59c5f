#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "mfs/randfield/basis_io.hpp"
#include "mfs/randfield/kl_basis.hpp"

using namespace mfs;
using namespace mfs::randfield;

namespace {

CovarianceSpec default_spec() { return {0.0, 2.0, 19.0, Kernel::Exponential}; }

double max_orthonormality_error(const KlBasis& b) {
  const Eigen::MatrixXd gram =
      b.grid.cell_measure() * (b.eigenvectors.transpose() * b.eigenvectors);
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Covariance, KernelShape) {
  const auto spec = default_spec();
  EXPECT_DOUBLE_EQ(spec(0.0), 2.0);
  EXPECT_DOUBLE_EQ(spec(5.0), spec(-5.0));
  double prev = spec(0.0);
  for (double r = 0.5; r < 200.0; r += 0.5) {
    EXPECT_LE(spec(r), prev);
    prev = spec(r);
  }
  EXPECT_THROW((CovarianceSpec{0.0, -1.0, 19.0}.validate()), ArgumentError);
  EXPECT_THROW((CovarianceSpec{0.0, 1.0, 0.0}.validate()), ArgumentError);
}

TEST(StandardNormals, EmptyAndDeterministic) {
  EXPECT_TRUE(draw_standard_normals(7, 0).empty());
  EXPECT_EQ(draw_standard_normals(7, 31), draw_standard_normals(7, 31));
  EXPECT_NE(draw_standard_normals(7, 31), draw_standard_normals(8, 31));
}

TEST(StandardNormals, MomentsOfAMillionDraws) {
  const auto x = draw_standard_normals(7, 1'000'000);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size() - 1;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(KlBasis, RejectsTooManyModes) {
  EXPECT_THROW(build_kl_basis(default_spec(), Grid::line(10), 11), ArgumentError);
  EXPECT_THROW(build_kl_basis(default_spec(), Grid::line(10), 0), ArgumentError);
}

TEST(KlBasis, FullExpansionCapturesTotalVariance) {
  const Grid g = Grid::line(150);
  const auto b = build_kl_basis(default_spec(), g, 150);
  // Oracle: direct trace of the weighted covariance matrix.
  const double trace = covariance_matrix(default_spec(), g).trace() * g.cell_measure();
  EXPECT_NEAR(trace, 2.0 * 150.0, 1e-9);
  EXPECT_NEAR(b.eigenvalues.sum(), trace, 0.01 * trace);
  EXPECT_LT(max_orthonormality_error(b), 1e-8);
}

TEST(KlBasis, InvariantsOnLine) {
  const auto b = build_kl_basis(default_spec(), Grid::line(150), 31);
  ASSERT_EQ(b.num_modes(), 31);
  for (int m = 0; m + 1 < b.num_modes(); ++m) EXPECT_GE(b.eigenvalues(m), b.eigenvalues(m + 1));
  EXPECT_GE(b.eigenvalues.minCoeff(), 0.0);
  EXPECT_LE(b.eigenvalues.sum(), 2.0 * b.grid.measure());
  EXPECT_LT(max_orthonormality_error(b), 1e-8);
  for (int m = 0; m < b.num_modes(); ++m) {
    Eigen::Index arg;
    b.eigenvectors.col(m).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(b.eigenvectors(arg, m), 0.0);
  }
}

TEST(KlBasis, ZeroVarianceIsDegenerate) {
  CovarianceSpec spec{0.7, 0.0, 19.0};
  const auto b = build_kl_basis(spec, Grid::square(16), 31);
  EXPECT_EQ(b.eigenvalues.cwiseAbs().maxCoeff(), 0.0);
  const auto f = sample_field(b, draw_standard_normals(3, 31));
  for (double k : f.values) EXPECT_DOUBLE_EQ(k, std::exp(0.7));
}

TEST(KlBasis, IterativeSolverMatchesDenseOracle) {
  const Grid g = Grid::rect(36, 28);
  const auto dense = build_kl_basis(default_spec(), g, 31);
  KlSolverOptions opt;
  opt.dense_limit = 0;
  const auto iter = build_kl_basis(default_spec(), g, 31, opt);
  for (int m = 0; m < 31; ++m)
    EXPECT_NEAR(iter.eigenvalues(m), dense.eigenvalues(m), 1e-8 * dense.eigenvalues(0)) << m;
  EXPECT_LT(max_orthonormality_error(iter), 1e-8);
  // Compare spectral projectors, which are insensitive to rotations within
  // degenerate eigenspaces.
  const double w = g.cell_measure();
  const Eigen::MatrixXd pd = dense.eigenvectors * dense.eigenvalues.asDiagonal() *
                             dense.eigenvectors.transpose() * w;
  const Eigen::MatrixXd pi = iter.eigenvectors * iter.eigenvalues.asDiagonal() *
                             iter.eigenvectors.transpose() * w;
  EXPECT_LT((pd - pi).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(KlBasis, PaperScaleSquareGrid) {
  const auto start = std::chrono::steady_clock::now();
  const auto b = build_kl_basis(default_spec(), Grid::square(150), 31);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  RecordProperty("seconds", std::to_string(secs));
  EXPECT_EQ(b.num_modes(), 31);
  EXPECT_LT(max_orthonormality_error(b), 1e-8);
  EXPECT_LE(b.eigenvalues.sum(), 2.0 * 150.0 * 150.0);
  for (int m = 0; m + 1 < 31; ++m) EXPECT_GE(b.eigenvalues(m), b.eigenvalues(m + 1));
}

TEST(KlBasis, ReconstructionErrorShrinksWithModes) {
  const Grid g = Grid::square(24);
  const Eigen::MatrixXd c = covariance_matrix(default_spec(), g);
  const auto full = build_kl_basis(default_spec(), g, 200);
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::size_t> cell(0, g.cells() - 1);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (int i = 0; i < 20; ++i) pairs.emplace_back(cell(rng), cell(rng));

  double prev = std::numeric_limits<double>::infinity();
  for (int p : {5, 10, 31, 80, 200}) {
    KlBasis b = full;
    b.eigenvalues = full.eigenvalues.head(p);
    b.eigenvectors = full.eigenvectors.leftCols(p);
    double err = 0.0;
    for (auto [a, z] : pairs) err += std::abs(b.truncated_covariance(a, z) - c(a, z));
    EXPECT_LE(err, prev + 1e-12) << "p=" << p;
    prev = err;
  }
}

TEST(SampleField, ZeroCoefficientsGiveTheMean) {
  CovarianceSpec spec{0.3, 2.0, 19.0};
  const auto b = build_kl_basis(spec, Grid::line(150), 31);
  const auto f = sample_field(b, std::vector<double>(31, 0.0));
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    EXPECT_DOUBLE_EQ(f.log_values[i], 0.3);
    EXPECT_DOUBLE_EQ(f.values[i], std::exp(0.3));
  }
}

TEST(SampleField, DeterministicAndChecked) {
  const auto b = build_kl_basis(default_spec(), Grid::line(150), 31);
  const auto xi = draw_standard_normals(5, 31);
  const auto f1 = sample_field(b, xi);
  const auto f2 = sample_field(b, xi);
  EXPECT_EQ(f1.values, f2.values);
  EXPECT_EQ(f1.log_values, f2.log_values);
  for (std::size_t i = 0; i < f1.values.size(); ++i) {
    EXPECT_GT(f1.values[i], 0.0);
    EXPECT_DOUBLE_EQ(f1.values[i], std::exp(f1.log_values[i]));
  }
  EXPECT_THROW(sample_field(b, std::vector<double>(30, 0.0)), ArgumentError);
}

TEST(SampleField, MonteCarloVarianceMatchesTruncatedVariance) {
  const auto b = build_kl_basis(default_spec(), Grid::line(150), 31);
  const int n = 10'000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(150), sum2 = Eigen::VectorXd::Zero(150);
  for (int s = 0; s < n; ++s) {
    const auto f = sample_field(b, derive_seed(99, s));
    const Eigen::Map<const Eigen::VectorXd> y(f.log_values.data(), 150);
    sum += y;
    sum2 += y.cwiseProduct(y);
  }
  const Eigen::VectorXd mean = sum / n;
  const Eigen::VectorXd var = (sum2 / n - mean.cwiseProduct(mean)) * n / (n - 1.0);
  const Eigen::VectorXd expected = b.truncated_variance();
  for (int i = 0; i < 150; ++i) EXPECT_NEAR(var(i), expected(i), 0.05 * expected(i)) << i;
}

TEST(BasisFile, RoundTripAndCorruption) {
  const auto b = build_kl_basis(default_spec(), Grid::rect(12, 10), 7);
  const auto path = (std::filesystem::temp_directory_path() / "mfs_basis_test.klb").string();
  save_basis(b, path);
  const auto back = load_basis(path);
  EXPECT_EQ(back.grid, b.grid);
  EXPECT_EQ(back.spec, b.spec);
  EXPECT_EQ(back.eigenvalues, b.eigenvalues);
  EXPECT_EQ(back.eigenvectors, b.eigenvectors);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XLB1", 4);
  }
  EXPECT_THROW(load_basis(path), FormatError);
  std::filesystem::remove(path);
}
