#pragma once

#include <span>
#include <vector>

namespace abpower {

// Dense row-major matrix; just enough structure to carry a design.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct OlsFit {
  // Intercept first, then one slope per covariate column.
  std::vector<double> coefficients;
  std::vector<double> fitted;
  std::vector<double> residuals;
  double residual_ss = 0.0;
  std::size_t df = 0;  // n - p - 1
  bool rank_ok = false;

  // Prediction at a covariate point, e.g. the common covariate mean.
  double predict(std::span<const double> x) const;
};

// Relative pivot tolerance: a column whose component orthogonal to the
// preceding columns is below this fraction of its own norm is collinear.
inline constexpr double kRankTolerance = 1e-10;

// Least squares of `response` on [1, covariates] by Householder QR; the normal
// equations are never formed. Throws InsufficientDataError when n <= p + 1
// and CollinearityError (naming the covariate column) for a rank-deficient
// design.
OlsFit fit_ols(const Matrix& covariates, std::span<const double> response);

}  // namespace abpower
