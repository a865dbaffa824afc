#pragma once

// Gradients of scalar losses. `grad` runs forward-mode dual numbers in chunks
// of kChunk directions; `finite_diff` is the central-difference oracle it is
// checked against.
//
// A differentiable function is any callable accepting std::span<const S> for
// S = double and S = Jet and returning S; write it as a generic lambda and
// recover the scalar type with scalar_of<decltype(x)>.

#include <ceres/jet.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <span>
#include <type_traits>
#include <vector>

#include "symtrack/errors.hpp"

namespace symtrack {

inline constexpr int kChunk = 8;
using Jet = ceres::Jet<double, kChunk>;

template <class Span>
using scalar_of = std::remove_cv_t<typename Span::element_type>;

/// Primal value of a double or Jet.
inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.a; }

template <class F>
Eigen::VectorXd grad(F&& f, std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<Jet> xs(n);
  Eigen::VectorXd g(static_cast<Eigen::Index>(n));
  for (std::size_t base = 0; base < n; base += kChunk) {
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = Jet(x[i]);
      if (i >= base && i < base + kChunk) xs[i].v[static_cast<int>(i - base)] = 1.0;
    }
    const Jet y = f(std::span<const Jet>(xs));
    for (std::size_t i = base; i < std::min(n, base + kChunk); ++i) {
      g[static_cast<Eigen::Index>(i)] = y.v[static_cast<int>(i - base)];
    }
  }
  if (!g.allFinite()) throw NonDifferentiablePoint("gradient is not finite");
  return g;
}

template <class F>
Eigen::VectorXd grad(F&& f, const Eigen::VectorXd& x) {
  return grad(std::forward<F>(f), std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Value and gradient from the same dual-number sweep.
template <class F>
double value_and_grad(F&& f, std::span<const double> x, Eigen::VectorXd& g) {
  g = grad(f, x);
  return value_of(f(x));
}

/// Central differences (f(x + h e_i) - f(x - h e_i)) / (2h).
template <class F>
Eigen::VectorXd finite_diff(F&& f, std::span<const double> x, double step) {
  std::vector<double> xs(x.begin(), x.end());
  Eigen::VectorXd g(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x0 = xs[i];
    xs[i] = x0 + step;
    const double fp = f(std::span<const double>(xs));
    xs[i] = x0 - step;
    const double fm = f(std::span<const double>(xs));
    xs[i] = x0;
    g[static_cast<Eigen::Index>(i)] = (fp - fm) / (2.0 * step);
  }
  return g;
}

template <class F>
Eigen::VectorXd finite_diff(F&& f, const Eigen::VectorXd& x, double step) {
  return finite_diff(std::forward<F>(f), std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                     step);
}

/// Largest componentwise |a - b| / max(|a|, |b|, floor).
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / d);
  }
  return worst;
}

}  // namespace symtrack
