#include <gtest/gtest.h>

#include <random>

#include "opttolls/ellipsoid.hpp"

namespace opttolls {
namespace {

Eigen::MatrixXd random_factor(std::mt19937_64& rng, int D) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd A(D, D);
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) A(i, j) = n(rng);
  return A + 2.0 * Eigen::MatrixXd::Identity(D, D);
}

TEST(Ellipsoid, UnitBallHalfSpace) {
  auto E = Ellipsoid::ball(Eigen::Vector2d::Zero(), 1.0).cut_keep_geq(Eigen::Vector2d(1, 0));
  EXPECT_NEAR(E.center()[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(E.center()[1], 0.0, 1e-15);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(E.shape());
  EXPECT_NEAR(std::sqrt(eig.eigenvalues()[0]), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(std::sqrt(eig.eigenvalues()[1]), 2.0 / std::sqrt(3.0), 1e-12);
}

TEST(Ellipsoid, MatchesShapeMatrixFormulas) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int D = 2; D <= 8; ++D) {
    Ellipsoid E(Eigen::VectorXd::Random(D), random_factor(rng, D));
    Eigen::VectorXd g(D);
    for (auto& x : g) x = n(rng);
    auto next = E.cut_keep_geq(g);
    Eigen::MatrixXd B = E.shape();
    Eigen::VectorXd Bg = B * g;
    double gBg = g.dot(Bg);
    double d = D;
    Eigen::VectorXd c = E.center() + Bg / std::sqrt(gBg) / (d + 1);
    Eigen::MatrixXd Bn = d * d / (d * d - 1) * (B - 2.0 / (d + 1) * Bg * Bg.transpose() / gBg);
    EXPECT_LE((next.center() - c).norm(), 1e-12 * (1 + c.norm()));
    EXPECT_LE((next.shape() - Bn).norm(), 1e-10 * Bn.norm());
  }
}

TEST(Ellipsoid, VolumeRatioIdentity) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int D = 2; D <= 8; ++D)
    for (int trial = 0; trial < 20; ++trial) {
      Ellipsoid E(Eigen::VectorXd::Zero(D), random_factor(rng, D));
      Eigen::VectorXd g(D);
      for (auto& x : g) x = n(rng);
      auto next = E.cut_keep_geq(g);
      const double measured = std::exp(std::log(std::abs(next.factor().determinant())) -
                                       std::log(std::abs(E.factor().determinant())));
      const double d = D;
      const double analytic = d / (d + 1) * std::pow(d * d / (d * d - 1), (d - 1) / 2);
      EXPECT_NEAR(measured, analytic, 1e-9);
      EXPECT_NEAR(std::exp(next.log_volume_ratio() - E.log_volume_ratio()), analytic, 1e-9);
      EXPECT_LE(analytic, std::exp(-1.0 / (2 * (d + 1))));
    }
}

TEST(Ellipsoid, AlternatingCutsShrink) {
  auto E = Ellipsoid::ball(Eigen::Vector3d::Zero(), 1.0);
  double prev = E.log_volume();
  for (int i = 0; i < 40; ++i) {
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    g[0] = i % 2 ? 1.0 : -1.0;
    E = E.cut_keep_geq(g);
    EXPECT_LT(E.log_volume(), prev);
    prev = E.log_volume();
  }
}

TEST(Ellipsoid, KeepsHalfSpacePoints) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const int D = 5;
  Ellipsoid E(Eigen::VectorXd::Zero(D), random_factor(rng, D));
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd u(D), g(D);
    for (auto& x : u) x = n(rng);
    for (auto& x : g) x = n(rng);
    u *= std::pow(std::uniform_real_distribution<double>(0, 1)(rng), 1.0 / D) / u.norm();
    Eigen::VectorXd x = E.center() + E.factor() * u;
    if (g.dot(x - E.center()) < 0) g = -g;
    EXPECT_TRUE(E.cut_keep_geq(g).contains(x));
  }
}

TEST(Ellipsoid, OneDimensionHalves) {
  auto E = Ellipsoid::ball(Eigen::VectorXd::Zero(1), 1.0).cut_keep_geq(Eigen::VectorXd::Ones(1));
  EXPECT_DOUBLE_EQ(E.center()[0], 0.5);
  EXPECT_DOUBLE_EQ(E.factor()(0, 0), 0.5);
}

TEST(Ellipsoid, ZeroCutBreaksDown) {
  auto E = Ellipsoid::ball(Eigen::Vector2d::Zero(), 1.0);
  EXPECT_THROW(E.cut_keep_geq(Eigen::Vector2d::Zero()), NumericBreakdown);
}

}  // namespace
}  // namespace opttolls
