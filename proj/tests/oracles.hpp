#pragma once

// Test-side oracles, independent of the library's differentiation and solve
// paths: central finite differences, dense KKT solves and active-set
// enumeration via Eigen, and a plain QCQP enumeration loop.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "pdl/tensor.hpp"

namespace oracle {

// Central finite differences with step h on every coordinate.
inline std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double fp = f(x);
    x[i] = xi - h;
    const double fm = f(x);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat to_eigen(const pdl::Tensor& t) {
  Mat m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t.at(i, j);
  return m;
}

inline Vec to_eigen_vec(const pdl::Tensor& t) {
  Vec v(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) v(i) = t[i];
  return v;
}

// Solves the equality-constrained QP  min 1/2 y'Qy + r'y  s.t. Ay = x
// through the KKT linear system [[Q A']; [A 0]] [y; nu] = [-r; x].
inline Vec kkt_solve(const Mat& Q, const Vec& r, const Mat& A, const Vec& x) {
  const Eigen::Index n = Q.rows(), m = A.rows();
  Mat kkt = Mat::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = Q;
  kkt.topRightCorner(n, m) = A.transpose();
  kkt.bottomLeftCorner(m, n) = A;
  Vec rhs(n + m);
  rhs.head(n) = -r;
  rhs.tail(m) = x;
  const Vec sol = kkt.fullPivLu().solve(rhs);
  return sol.head(n);
}

// Global optimum of  min 1/2 y'Qy + r'y  s.t. Ay = x, Gy <= h  by trying
// every subset of inequalities as the active set. Exponential: tiny QPs only.
struct ActiveSetSolution {
  Vec y;
  double f = 0.0;
  bool found = false;
};

inline ActiveSetSolution active_set_enumerate(const Mat& Q, const Vec& r,
                                              const Mat& A, const Vec& x,
                                              const Mat& G, const Vec& h) {
  const Eigen::Index n = Q.rows(), meq = A.rows(), mineq = G.rows();
  ActiveSetSolution best;
  const double tol = 1e-8;
  for (std::uint64_t mask = 0; mask < (1ULL << mineq); ++mask) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index j = 0; j < mineq; ++j) {
      if (mask & (1ULL << j)) act.push_back(j);
    }
    const Eigen::Index ma = meq + static_cast<Eigen::Index>(act.size());
    Mat C(ma, n);
    Vec d(ma);
    C.topRows(meq) = A;
    d.head(meq) = x;
    for (std::size_t t = 0; t < act.size(); ++t) {
      C.row(meq + static_cast<Eigen::Index>(t)) = G.row(act[t]);
      d(meq + static_cast<Eigen::Index>(t)) = h(act[t]);
    }
    Mat kkt = Mat::Zero(n + ma, n + ma);
    kkt.topLeftCorner(n, n) = Q;
    kkt.topRightCorner(n, ma) = C.transpose();
    kkt.bottomLeftCorner(ma, n) = C;
    Vec rhs(n + ma);
    rhs.head(n) = -r;
    rhs.tail(ma) = d;
    Eigen::FullPivLU<Mat> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vec sol = lu.solve(rhs);
    const Vec y = sol.head(n);
    const Vec mult = sol.tail(ma);
    // primal feasibility on inactive rows, dual feasibility on active ones
    bool ok = true;
    for (Eigen::Index j = 0; j < mineq && ok; ++j) {
      if (!(mask & (1ULL << j)) && G.row(j).dot(y) > h(j) + tol) ok = false;
    }
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(act.size()) && ok; ++t) {
      if (mult(meq + t) < -tol) ok = false;
    }
    if (!ok) continue;
    const double f = 0.5 * y.dot(Q * y) + r.dot(y);
    if (!best.found || f < best.f) {
      best.y = y;
      best.f = f;
      best.found = true;
    }
  }
  return best;
}

// Exhaustive scan over {-1, 1}^n for min (Ay - x)'(Ay - x) -- written as the
// most literal loop possible, deliberately distinct from the library path.
struct EnumSolution {
  std::vector<double> y;
  double f = 0.0;
};

inline EnumSolution qcqp_enumerate(const Mat& A, const Vec& x) {
  const Eigen::Index n = A.cols();
  EnumSolution best;
  best.f = std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < (1ULL << n); ++s) {
    Vec y(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      y(j) = (s >> (n - 1 - j)) & 1 ? 1.0 : -1.0;
    }
    const double f = (A * y - x).squaredNorm();
    if (f < best.f) {
      best.f = f;
      best.y.assign(y.data(), y.data() + n);
    }
  }
  return best;
}

}  // namespace oracle
