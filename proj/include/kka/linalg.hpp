#pragma once

#include <cstddef>
#include <vector>

#include "kka/common.hpp"

namespace kka {

// Dense row-major matrix, sized for feature/weight dimensions (tens, not
// thousands).
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return a_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return a_[r * cols_ + c];
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::vector<double>& data() { return a_; }
  const std::vector<double>& data() const { return a_; }

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
};

Vec matvec(const Mat& m, const Vec& x);
// m^T x
Vec matvec_transposed(const Mat& m, const Vec& x);

double dot(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec add(const Vec& a, const Vec& b);
void scale_inplace(Vec& v, double s);
double norm2(const Vec& v);
double squared_distance(const Vec& a, const Vec& b);

// x^T A x for square A
double quadratic_form(const Mat& a, const Vec& x);

double trace(const Mat& m);
double frobenius_norm_squared(const Mat& m);

// Inverse of a symmetric positive definite matrix via Cholesky
// factorization. Throws std::invalid_argument if the matrix is not PD.
Mat spd_inverse(const Mat& a);

// Eigen decomposition of a symmetric matrix by cyclic Jacobi rotations.
// Eigenvalues sorted descending; vectors.col(i) is the i-th eigenvector.
struct EigenSym {
  Vec values;
  Mat vectors;
};
EigenSym jacobi_eigen(const Mat& sym);

}  // namespace kka
