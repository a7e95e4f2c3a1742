#include "abpower/ols.hpp"

#include <cmath>
#include <string>

#include "abpower/errors.hpp"

namespace abpower {

double OlsFit::predict(std::span<const double> x) const {
  if (x.size() + 1 != coefficients.size()) {
    throw SchemaError("prediction point has " + std::to_string(x.size()) +
                      " covariates, model has " +
                      std::to_string(coefficients.size() - 1));
  }
  double value = coefficients[0];
  for (std::size_t j = 0; j < x.size(); ++j) value += coefficients[j + 1] * x[j];
  return value;
}

OlsFit fit_ols(const Matrix& covariates, std::span<const double> response) {
  const std::size_t n = covariates.rows();
  const std::size_t p = covariates.cols();
  const std::size_t k = p + 1;
  if (response.size() != n) {
    throw SchemaError("response has " + std::to_string(response.size()) +
                      " rows, design has " + std::to_string(n));
  }
  if (n < p + 2) {
    throw InsufficientDataError("OLS with " + std::to_string(p) +
                                " covariates needs at least " +
                                std::to_string(p + 2) + " rows, got " +
                                std::to_string(n));
  }

  // Column-major working copy of [1 | X]; reflections are applied in place.
  std::vector<double> a(n * k);
  auto col = [&](std::size_t j) { return a.data() + j * n; };
  for (std::size_t i = 0; i < n; ++i) {
    col(0)[i] = 1.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double v = covariates(i, j);
      if (!std::isfinite(v)) {
        throw DataError("non-finite covariate in row " + std::to_string(i));
      }
      col(j + 1)[i] = v;
    }
  }
  std::vector<double> qty(response.begin(), response.end());

  std::vector<double> diag(k);
  for (std::size_t j = 0; j < k; ++j) {
    double* c = col(j);
    // Full column norm: the part already captured in R plus what remains.
    double captured = 0.0;
    for (std::size_t i = 0; i < j; ++i) captured += c[i] * c[i];
    double remaining = 0.0;
    for (std::size_t i = j; i < n; ++i) remaining += c[i] * c[i];
    const double full = std::sqrt(captured + remaining);
    const double alpha_norm = std::sqrt(remaining);
    if (full == 0.0 || alpha_norm <= kRankTolerance * full) {
      const std::size_t cov_index = j == 0 ? 0 : j - 1;
      throw CollinearityError(
          cov_index, "covariate column " + std::to_string(cov_index) +
                         (j == 0 ? " (intercept)" : "") +
                         " is collinear with the preceding columns");
    }

    // Householder vector v = x + sign(x0)|x| e0, stored over c[j..n).
    const double alpha = c[j] >= 0.0 ? -alpha_norm : alpha_norm;
    c[j] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = j; i < n; ++i) vnorm2 += c[i] * c[i];

    auto reflect = [&](double* target) {
      double dot = 0.0;
      for (std::size_t i = j; i < n; ++i) dot += c[i] * target[i];
      const double scale = 2.0 * dot / vnorm2;
      for (std::size_t i = j; i < n; ++i) target[i] -= scale * c[i];
    };
    for (std::size_t m = j + 1; m < k; ++m) reflect(col(m));
    reflect(qty.data());
    diag[j] = alpha;
  }

  // Back substitution on R beta = Q^T y. R's strict upper triangle lives in
  // rows [0, j) of each column; its diagonal is in `diag`.
  std::vector<double> beta(k);
  for (std::size_t jj = k; jj-- > 0;) {
    double s = qty[jj];
    for (std::size_t m = jj + 1; m < k; ++m) s -= col(m)[jj] * beta[m];
    beta[jj] = s / diag[jj];
  }

  OlsFit fit;
  fit.coefficients = std::move(beta);
  fit.fitted.resize(n);
  fit.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double yhat = fit.coefficients[0];
    for (std::size_t j = 0; j < p; ++j) {
      yhat += fit.coefficients[j + 1] * covariates(i, j);
    }
    fit.fitted[i] = yhat;
    fit.residuals[i] = response[i] - yhat;
    fit.residual_ss += fit.residuals[i] * fit.residuals[i];
  }
  fit.df = n - k;
  fit.rank_ok = true;
  return fit;
}

}  // namespace abpower
