#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "abpower/errors.hpp"
#include "abpower/ols.hpp"

using namespace abpower;

namespace {

// Least squares through Eigen's SVD as an independent oracle.
Eigen::VectorXd svd_solve(const Matrix& x, const std::vector<double>& y) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  Eigen::VectorXd b(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    a(i, 0) = 1.0;
    for (std::size_t j = 0; j < x.cols(); ++j) a(i, j + 1) = x(i, j);
    b(i) = y[i];
  }
  return a.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
}

}  // namespace

TEST(Ols, MatchesSvdOracleOnRandomSystems) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z;
  for (std::size_t p : {1u, 2u, 5u}) {
    Matrix x(80, p);
    std::vector<double> y(80);
    for (std::size_t i = 0; i < 80; ++i) {
      for (std::size_t j = 0; j < p; ++j) x(i, j) = z(gen) * (j + 1) + 3.0;
      y[i] = z(gen);
    }
    const OlsFit fit = fit_ols(x, y);
    const Eigen::VectorXd beta = svd_solve(x, y);
    for (std::size_t k = 0; k <= p; ++k) {
      EXPECT_NEAR(fit.coefficients[k], beta(k), 1e-10 * (1 + std::fabs(beta(k))));
    }
    EXPECT_EQ(fit.df, 80 - p - 1);
  }
}

TEST(Ols, ResidualsOrthogonalToDesign) {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> z;
  Matrix x(40, 2);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    x(i, 0) = z(gen);
    x(i, 1) = z(gen);
    y[i] = 1 + x(i, 0) + z(gen);
  }
  const OlsFit fit = fit_ols(x, y);
  double s0 = 0, s1 = 0, s2 = 0, ss = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    s0 += fit.residuals[i];
    s1 += fit.residuals[i] * x(i, 0);
    s2 += fit.residuals[i] * x(i, 1);
    ss += fit.residuals[i] * fit.residuals[i];
    EXPECT_NEAR(fit.fitted[i] + fit.residuals[i], y[i], 1e-12);
  }
  EXPECT_NEAR(s0, 0.0, 1e-12);
  EXPECT_NEAR(s1, 0.0, 1e-12);
  EXPECT_NEAR(s2, 0.0, 1e-12);
  EXPECT_NEAR(fit.residual_ss, ss, 1e-12);
}

TEST(Ols, PredictAtPoint) {
  Matrix x(4, 1);
  std::vector<double> y = {1, 3, 5, 7};
  for (std::size_t i = 0; i < 4; ++i) x(i, 0) = static_cast<double>(i);
  const OlsFit fit = fit_ols(x, y);
  const std::vector<double> at = {10.0};
  EXPECT_NEAR(fit.predict(at), 21.0, 1e-12);
}

TEST(Ols, CollinearColumnIsNamed) {
  Matrix x(10, 3);
  std::vector<double> y(10);
  for (std::size_t i = 0; i < 10; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = static_cast<double>(i * i);
    x(i, 2) = 3.0 * x(i, 0) + 1.0;
    y[i] = static_cast<double>(i % 3);
  }
  try {
    fit_ols(x, y);
    FAIL() << "expected CollinearityError";
  } catch (const CollinearityError& e) {
    EXPECT_EQ(e.column(), 2u);
  }
}

TEST(Ols, ConstantCovariateIsCollinearWithIntercept) {
  Matrix x(5, 1);
  std::vector<double> y = {1, 2, 3, 4, 5};
  for (std::size_t i = 0; i < 5; ++i) x(i, 0) = 7.0;
  EXPECT_THROW(fit_ols(x, y), CollinearityError);
}

TEST(Ols, TooFewRows) {
  Matrix x(2, 1);
  std::vector<double> y = {1, 2};
  EXPECT_THROW(fit_ols(x, y), InsufficientDataError);
}
