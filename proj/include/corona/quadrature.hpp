#pragma once

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "corona/common.hpp"

namespace corona {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Jacobi rule on [-1,1] for the weight (1-x)^a (1+x)^b, by Golub-Welsch.
inline Rule gauss_jacobi(int n, double a, double b) {
  if (n < 1) throw DomainError("gauss_jacobi: n must be positive");
  if (a <= -1.0 || b <= -1.0) throw DomainError("gauss_jacobi: exponents must exceed -1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  const double ab = a + b;
  for (int k = 0; k < n; ++k) {
    const double s = 2.0 * k + ab;
    J(k, k) = (k == 0) ? (b - a) / (ab + 2.0) : (b * b - a * a) / (s * (s + 2.0));
    if (k + 1 < n) {
      const double m = k + 1.0;
      const double t = 2.0 * m + ab;
      double beta;
      if (m == 1.0)
        beta = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
      else
        beta = 4.0 * m * (m + a) * (m + b) * (m + ab) / (t * t * (t + 1.0) * (t - 1.0));
      J(k, k + 1) = J(k + 1, k) = std::sqrt(beta);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                              std::lgamma(ab + 2.0));
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    r.nodes[k] = es.eigenvalues()(k);
    r.weights[k] = mu0 * sqr(es.eigenvectors()(0, k));
  }
  return r;
}

inline Rule gauss_legendre(int n) { return gauss_jacobi(n, 0.0, 0.0); }

// Rule mapped to [lo, hi].
inline Rule mapped(const Rule& ref, double lo, double hi) {
  Rule r = ref;
  const double h = 0.5 * (hi - lo);
  for (std::size_t k = 0; k < r.nodes.size(); ++k) {
    r.nodes[k] = lo + h * (ref.nodes[k] + 1.0);
    r.weights[k] *= h;
  }
  return r;
}

struct AdaptiveResult {
  double value;
  double error;
};

// Adaptive Gauss-Kronrod (15 point) on a possibly infinite interval.
inline AdaptiveResult adaptive_integrate(const std::function<double(double)>& f, double lo, double hi,
                                         double tol = 1e-12, unsigned depth = 12) {
  double err = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, lo, hi, depth, tol, &err);
  return {v, err};
}

// Barycentric Lagrange interpolation at Gauss nodes on [-1,1].
struct LagrangeBasis {
  std::vector<double> nodes;
  std::vector<double> bary;

  explicit LagrangeBasis(std::vector<double> x) : nodes(std::move(x)), bary(nodes.size(), 1.0) {
    for (std::size_t j = 0; j < nodes.size(); ++j)
      for (std::size_t k = 0; k < nodes.size(); ++k)
        if (k != j) bary[j] /= (nodes[j] - nodes[k]);
  }

  // Fills out[j] = l_j(t).
  void eval(double t, double* out) const {
    const std::size_t n = nodes.size();
    for (std::size_t j = 0; j < n; ++j) {
      if (t == nodes[j]) {
        for (std::size_t k = 0; k < n; ++k) out[k] = (k == j) ? 1.0 : 0.0;
        return;
      }
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = bary[j] / (t - nodes[j]);
      s += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= s;
  }
};

}  // namespace corona
