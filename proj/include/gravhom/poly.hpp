#pragma once

// Small polynomial toolkit used by the minimal solvers: dense univariate
// polynomials of bounded degree, their real roots, determinants of
// polynomial matrices, SVD nullspaces and a bivariate helper for the
// hidden-variable eliminations.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gravhom/error.hpp"

namespace gravhom {

/// Dense univariate polynomial, coefficients in ascending degree.
class UniPoly {
 public:
  static constexpr int kMaxDegree = 8;

  UniPoly() = default;
  UniPoly(std::initializer_list<double> ascending) {
    if (static_cast<int>(ascending.size()) > kMaxDegree + 1) {
      throw Error(ErrorCode::kPrecondition, "UniPoly degree exceeds 8");
    }
    for (double c : ascending) c_[size_++] = c;
  }

  static UniPoly constant(double c) { return UniPoly{c}; }
  static UniPoly linear(double c0, double c1) { return UniPoly{c0, c1}; }

  /// Formal degree (number of stored coefficients - 1); -1 for the empty
  /// polynomial. Call trimmed() first for the numerical degree.
  int degree() const { return size_ - 1; }
  int size() const { return size_; }

  double operator[](int i) const { return i < size_ ? c_[i] : 0.0; }
  double& coeff(int i) {
    if (i > kMaxDegree) {
      throw Error(ErrorCode::kPrecondition, "UniPoly degree exceeds 8");
    }
    while (size_ <= i) c_[size_++] = 0.0;
    return c_[i];
  }

  template <typename T>
  T eval(T x) const {
    T acc(0.0);
    for (int i = size_ - 1; i >= 0; --i) acc = acc * x + c_[i];
    return acc;
  }
  double operator()(double x) const { return eval(x); }

  UniPoly derivative() const {
    UniPoly d;
    for (int i = 1; i < size_; ++i) d.coeff(i - 1) = i * c_[i];
    return d;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (int i = 0; i < size_; ++i) m = std::max(m, std::abs(c_[i]));
    return m;
  }

  /// Drops trailing coefficients below rel_tol * max|coeff|.
  UniPoly trimmed(double rel_tol = 1e-14) const {
    UniPoly out = *this;
    const double thresh = rel_tol * max_abs_coeff();
    while (out.size_ > 0 && std::abs(out.c_[out.size_ - 1]) <= thresh) {
      --out.size_;
    }
    return out;
  }

  UniPoly truncated(int max_degree) const {
    UniPoly out = *this;
    out.size_ = std::min(size_, max_degree + 1);
    return out;
  }

  bool is_zero() const { return max_abs_coeff() == 0.0; }

  friend UniPoly operator+(const UniPoly& a, const UniPoly& b) {
    UniPoly out;
    const int n = std::max(a.size_, b.size_);
    for (int i = 0; i < n; ++i) out.coeff(i) = a[i] + b[i];
    return out;
  }
  friend UniPoly operator-(const UniPoly& a, const UniPoly& b) {
    UniPoly out;
    const int n = std::max(a.size_, b.size_);
    for (int i = 0; i < n; ++i) out.coeff(i) = a[i] - b[i];
    return out;
  }
  friend UniPoly operator-(const UniPoly& a) { return UniPoly() - a; }
  friend UniPoly operator*(const UniPoly& a, const UniPoly& b) {
    UniPoly out;
    if (a.size_ == 0 || b.size_ == 0) return out;
    if (a.size_ + b.size_ - 2 > kMaxDegree) {
      throw Error(ErrorCode::kPrecondition, "UniPoly product exceeds degree 8");
    }
    out.size_ = a.size_ + b.size_ - 1;
    for (int i = 0; i < a.size_; ++i) {
      for (int j = 0; j < b.size_; ++j) out.c_[i + j] += a.c_[i] * b.c_[j];
    }
    return out;
  }
  friend UniPoly operator*(double s, const UniPoly& a) {
    UniPoly out = a;
    for (int i = 0; i < out.size_; ++i) out.c_[i] *= s;
    return out;
  }
  UniPoly& operator+=(const UniPoly& o) { return *this = *this + o; }
  UniPoly& operator-=(const UniPoly& o) { return *this = *this - o; }

 private:
  std::array<double, kMaxDegree + 1> c_{};
  int size_ = 0;
};

struct RootOptions {
  double polish_tol = 1e-12;     // Newton stops once |step| <= tol (1 + |x|)
  double imag_tol = 1e-8;        // |Im z| <= imag_tol (1 + |z|) counts as real
  double cluster_tol = 1e-8;     // roots closer than this collapse to one
  double trim_tol = 1e-14;       // relative trailing-coefficient trim
  int max_polish_steps = 20;
};

namespace detail {

inline double polish_real_root(const UniPoly& p, const UniPoly& dp, double x,
                               const RootOptions& opt) {
  double fx = p(x);
  for (int it = 0; it < opt.max_polish_steps; ++it) {
    const double d = dp(x);
    if (d == 0.0 || fx == 0.0) break;
    double step = fx / d;
    // Damped: halve the step until |p| does not grow.
    double x_new = x - step;
    double f_new = p(x_new);
    int halvings = 0;
    while (std::abs(f_new) > std::abs(fx) && halvings < 8) {
      step *= 0.5;
      x_new = x - step;
      f_new = p(x_new);
      ++halvings;
    }
    if (std::abs(f_new) > std::abs(fx)) break;
    x = x_new;
    fx = f_new;
    if (std::abs(step) <= opt.polish_tol * (1.0 + std::abs(x))) break;
  }
  return x;
}

inline std::complex<double> polish_complex_root(const UniPoly& p,
                                                const UniPoly& dp,
                                                std::complex<double> z,
                                                int steps) {
  for (int it = 0; it < steps; ++it) {
    const std::complex<double> fz = p.eval(z);
    const std::complex<double> d = dp.eval(z);
    if (std::abs(d) == 0.0) break;
    const std::complex<double> step = fz / d;
    const std::complex<double> z_new = z - step;
    if (std::abs(p.eval(z_new)) > std::abs(fz)) break;
    z = z_new;
    if (std::abs(step) <= 1e-14 * (1.0 + std::abs(z))) break;
  }
  return z;
}

}  // namespace detail

/// Real roots of `poly`, ascending. Companion-matrix eigenvalues are polished
/// by Newton iterations; near-coincident roots are reported once.
inline std::vector<double> real_roots(const UniPoly& poly,
                                      const RootOptions& opt = {}) {
  const UniPoly p = poly.trimmed(opt.trim_tol);
  if (p.size() == 0) {
    throw Error(ErrorCode::kDegenerateInput, "polynomial is identically zero");
  }
  std::vector<double> roots;
  const int n = p.degree();
  if (n == 0) return roots;
  const UniPoly dp = p.derivative();

  if (n == 1) {
    roots.push_back(-p[0] / p[1]);
    return roots;
  }

  using Companion = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0,
                                  UniPoly::kMaxDegree, UniPoly::kMaxDegree>;
  Companion c = Companion::Zero(n, n);
  const double lead = p[n];
  for (int i = 0; i < n; ++i) c(0, i) = -p[n - 1 - i] / lead;
  for (int i = 1; i < n; ++i) c(i, i - 1) = 1.0;

  Eigen::EigenSolver<Companion> es(c, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::kDegenerateInput, "companion eigensolver failed");
  }
  for (int i = 0; i < n; ++i) {
    std::complex<double> z = es.eigenvalues()[i];
    z = detail::polish_complex_root(p, dp, z, 6);
    if (std::abs(z.imag()) > opt.imag_tol * (1.0 + std::abs(z))) continue;
    roots.push_back(detail::polish_real_root(p, dp, z.real(), opt));
  }
  std::sort(roots.begin(), roots.end());
  std::vector<double> unique;
  for (double r : roots) {
    if (!unique.empty() &&
        std::abs(r - unique.back()) <= opt.cluster_tol * (1.0 + std::abs(r))) {
      continue;
    }
    unique.push_back(r);
  }
  return unique;
}

/// Square or rectangular matrix (at most 4x4) of univariate polynomials in a
/// single hidden variable.
class PolyMatrix {
 public:
  static constexpr int kMaxDim = 4;

  PolyMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1 || rows > kMaxDim || cols > kMaxDim) {
      throw Error(ErrorCode::kPrecondition, "PolyMatrix must be at most 4x4");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  UniPoly& operator()(int r, int c) { return entries_[r * kMaxDim + c]; }
  const UniPoly& operator()(int r, int c) const {
    return entries_[r * kMaxDim + c];
  }

  Eigen::MatrixXd evaluate(double x) const {
    Eigen::MatrixXd m(rows_, cols_);
    for (int r = 0; r < rows_; ++r) {
      for (int c = 0; c < cols_; ++c) m(r, c) = (*this)(r, c)(x);
    }
    return m;
  }

 private:
  int rows_;
  int cols_;
  std::array<UniPoly, kMaxDim * kMaxDim> entries_{};
};

namespace detail {

inline UniPoly cofactor_det(const PolyMatrix& m, int row, unsigned used_cols) {
  const int n = m.rows();
  if (row == n - 1) {
    for (int c = 0; c < n; ++c) {
      if (!(used_cols & (1u << c))) return m(row, c);
    }
  }
  UniPoly acc;
  int sign = 1;
  for (int c = 0; c < n; ++c) {
    if (used_cols & (1u << c)) continue;
    const UniPoly& e = m(row, c);
    if (!e.is_zero()) {
      const UniPoly term = e * cofactor_det(m, row + 1, used_cols | (1u << c));
      acc = sign > 0 ? acc + term : acc - term;
    }
    sign = -sign;
  }
  return acc;
}

}  // namespace detail

/// Exact (coefficient-arithmetic) determinant by cofactor expansion.
inline UniPoly det_polymatrix(const PolyMatrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kPrecondition, "det_polymatrix needs a square matrix");
  }
  return detail::cofactor_det(m, 0, 0u);
}

struct Nullspace {
  Eigen::VectorXd vector;      // unit norm
  double singular_value = 0;   // smallest singular value (0 if cols > rows)
};

/// Unit vector minimizing ||A v|| via a full SVD.
template <typename Derived>
Nullspace nullspace_min(const Eigen::MatrixBase<Derived>& a) {
  const Eigen::MatrixXd m = a;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  Nullspace out;
  const Eigen::Index n = m.cols();
  out.vector = svd.matrixV().col(n - 1);
  const auto& s = svd.singularValues();
  out.singular_value = (m.rows() >= n) ? s(n - 1) : 0.0;
  return out;
}

/// Bivariate polynomial in (p, q) of total degree <= 4, c(i, j) multiplies
/// p^i q^j.
class BiPoly {
 public:
  static constexpr int kMaxDegree = 4;

  BiPoly() { c_.fill(0.0); }

  /// a0 + a1 p + a2 q.
  static BiPoly affine(double a0, double a1, double a2) {
    BiPoly b;
    b.at(0, 0) = a0;
    b.at(1, 0) = a1;
    b.at(0, 1) = a2;
    return b;
  }
  static BiPoly affine(const Eigen::Vector3d& a) {
    return affine(a(0), a(1), a(2));
  }
  static BiPoly constant(double a0) { return affine(a0, 0.0, 0.0); }

  double& at(int i, int j) { return c_[i * (kMaxDegree + 1) + j]; }
  double at(int i, int j) const { return c_[i * (kMaxDegree + 1) + j]; }

  int total_degree() const {
    int d = -1;
    for (int i = 0; i <= kMaxDegree; ++i) {
      for (int j = 0; i + j <= kMaxDegree; ++j) {
        if (at(i, j) != 0.0) d = std::max(d, i + j);
      }
    }
    return d;
  }

  double eval(double p, double q) const {
    double acc = 0.0;
    double pi = 1.0;
    for (int i = 0; i <= kMaxDegree; ++i) {
      double qj = 1.0;
      for (int j = 0; i + j <= kMaxDegree; ++j) {
        acc += at(i, j) * pi * qj;
        qj *= q;
      }
      pi *= p;
    }
    return acc;
  }

  BiPoly d_dp() const {
    BiPoly out;
    for (int i = 1; i <= kMaxDegree; ++i) {
      for (int j = 0; i + j <= kMaxDegree; ++j) out.at(i - 1, j) = i * at(i, j);
    }
    return out;
  }
  BiPoly d_dq() const {
    BiPoly out;
    for (int i = 0; i <= kMaxDegree; ++i) {
      for (int j = 1; i + j <= kMaxDegree; ++j) out.at(i, j - 1) = j * at(i, j);
    }
    return out;
  }

  /// Keeps monomials of total degree <= d.
  BiPoly truncated(int d) const {
    BiPoly out;
    for (int i = 0; i <= kMaxDegree; ++i) {
      for (int j = 0; i + j <= std::min(d, kMaxDegree); ++j) {
        out.at(i, j) = at(i, j);
      }
    }
    return out;
  }

  /// Coefficient of q^k as a polynomial in p.
  UniPoly coefficient_of_q(int k) const {
    UniPoly out;
    for (int i = 0; i + k <= kMaxDegree; ++i) {
      if (at(i, k) != 0.0) out.coeff(i) = at(i, k);
    }
    return out;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
  }

  friend BiPoly operator+(const BiPoly& a, const BiPoly& b) {
    BiPoly out;
    for (std::size_t k = 0; k < a.c_.size(); ++k) out.c_[k] = a.c_[k] + b.c_[k];
    return out;
  }
  friend BiPoly operator-(const BiPoly& a, const BiPoly& b) {
    BiPoly out;
    for (std::size_t k = 0; k < a.c_.size(); ++k) out.c_[k] = a.c_[k] - b.c_[k];
    return out;
  }
  friend BiPoly operator*(double s, const BiPoly& a) {
    BiPoly out;
    for (std::size_t k = 0; k < a.c_.size(); ++k) out.c_[k] = s * a.c_[k];
    return out;
  }
  friend BiPoly operator*(const BiPoly& a, const BiPoly& b) {
    BiPoly out;
    for (int i = 0; i <= kMaxDegree; ++i) {
      for (int j = 0; i + j <= kMaxDegree; ++j) {
        const double x = a.at(i, j);
        if (x == 0.0) continue;
        for (int k = 0; k <= kMaxDegree; ++k) {
          for (int l = 0; k + l <= kMaxDegree; ++l) {
            const double y = b.at(k, l);
            if (y == 0.0) continue;
            if (i + j + k + l > kMaxDegree) {
              throw Error(ErrorCode::kPrecondition,
                          "BiPoly product exceeds total degree 4");
            }
            out.at(i + k, j + l) += x * y;
          }
        }
      }
    }
    return out;
  }

 private:
  std::array<double, (kMaxDegree + 1) * (kMaxDegree + 1)> c_;
};

}  // namespace gravhom
