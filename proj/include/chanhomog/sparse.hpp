#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "chanhomog/error.hpp"

namespace chanhomog {

/// Compressed sparse row matrix with sorted, duplicate-free columns.
class CsrMatrix {
 public:
  CsrMatrix() = default;

  struct Triplet {
    int row;
    int col;
    double value;
  };

  static CsrMatrix from_triplets(std::size_t n, std::vector<Triplet> entries) {
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    CsrMatrix m;
    m.n_ = n;
    m.row_ptr_.assign(n + 1, 0);
    for (std::size_t k = 0; k < entries.size();) {
      std::size_t l = k;
      double v = 0.0;
      while (l < entries.size() && entries[l].row == entries[k].row && entries[l].col == entries[k].col) {
        v += entries[l].value;
        ++l;
      }
      m.cols_.push_back(entries[k].col);
      m.vals_.push_back(v);
      ++m.row_ptr_[static_cast<std::size_t>(entries[k].row) + 1];
      k = l;
    }
    for (std::size_t i = 0; i < n; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
    return m;
  }

  std::size_t size() const { return n_; }
  std::size_t nonzeros() const { return vals_.size(); }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += vals_[k] * x[static_cast<std::size_t>(cols_[k])];
      y[i] = s;
    }
  }

  double at(std::size_t i, std::size_t j) const {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (static_cast<std::size_t>(cols_[k]) == j) return vals_[k];
    }
    return 0.0;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) d[i] = at(i, i);
    return d;
  }

  double row_sum(std::size_t i) const {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += vals_[k];
    return s;
  }

  /// diag(d) + scale * this
  CsrMatrix scaled_plus_diagonal(double scale, std::span<const double> d) const {
    std::vector<Triplet> t;
    t.reserve(vals_.size() + n_);
    for (std::size_t i = 0; i < n_; ++i) {
      t.push_back({static_cast<int>(i), static_cast<int>(i), d[i]});
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        t.push_back({static_cast<int>(i), cols_[k], scale * vals_[k]});
      }
    }
    return from_triplets(n_, std::move(t));
  }

  bool is_symmetric(double tol) const {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        if (std::abs(vals_[k] - at(static_cast<std::size_t>(cols_[k]), i)) > tol) return false;
      }
    }
    return true;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<int> cols_;
  std::vector<double> vals_;
};

struct CgResult {
  int iterations = 0;
  double residual = 0.0;  // final preconditioned residual norm relative to the rhs
};

/// Jacobi-preconditioned conjugate gradients for SPD systems. Converged when
/// sqrt(r' D^-1 r) <= tol * sqrt(b' D^-1 b). `x` holds the initial guess.
inline CgResult conjugate_gradient(const CsrMatrix& A, std::span<const double> diag, std::span<const double> b,
                                   std::span<double> x, double tol, int maxit) {
  const std::size_t n = A.size();
  std::vector<double> r(n), z(n), p(n), q(n);
  A.multiply(x, q);
  double bnorm2 = 0.0;
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = b[i] - q[i];
    z[i] = r[i] / diag[i];
    p[i] = z[i];
    rz += r[i] * z[i];
    bnorm2 += b[i] * b[i] / diag[i];
  }
  CgResult res;
  const double target = tol * tol * bnorm2;
  if (bnorm2 == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return res;
  }
  while (rz > target) {
    if (res.iterations >= maxit || !std::isfinite(rz)) {
      throw Error(ErrorCode::LinearSolveDiverged,
                  "CG did not reach tolerance after " + std::to_string(res.iterations) + " iterations");
    }
    A.multiply(p, q);
    double pq = 0.0;
    for (std::size_t i = 0; i < n; ++i) pq += p[i] * q[i];
    if (!(pq > 0.0)) throw Error(ErrorCode::LinearSolveDiverged, "matrix is not positive definite");
    double alpha = rz / pq;
    double rz_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      z[i] = r[i] / diag[i];
      rz_new += r[i] * z[i];
    }
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    ++res.iterations;
  }
  res.residual = std::sqrt(rz / bnorm2);
  return res;
}

}  // namespace chanhomog
