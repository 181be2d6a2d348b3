#ifndef MOB_GAUSSIAN_HPP
#define MOB_GAUSSIAN_HPP

#include <cmath>
#include <span>

#include "mob/errors.hpp"

namespace mob::nd {

inline constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

// Sum over dimensions of log N(y_k; mu_k, sigma_k^2). sigma holds standard
// deviations and must be strictly positive.
inline double gaussian_log_pdf(std::span<const double> y,
                               std::span<const double> mu,
                               std::span<const double> sigma) {
  if (y.size() != mu.size() || y.size() != sigma.size())
    throw ContractError("gaussian_log_pdf: dimension mismatch");
  double lp = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (!(sigma[k] > 0.0))
      throw ContractError("gaussian_log_pdf: sigma must be positive");
    double r = (y[k] - mu[k]) / sigma[k];
    lp += -kHalfLog2Pi - std::log(sigma[k]) - 0.5 * r * r;
  }
  return lp;
}

inline double gaussian_log_pdf(double y, double mu, double sigma) {
  return gaussian_log_pdf(std::span<const double>(&y, 1),
                          std::span<const double>(&mu, 1),
                          std::span<const double>(&sigma, 1));
}

// Numerically stable log(sum(exp(v))) over a contiguous range.
inline double log_sum_exp(std::span<const double> v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace mob::nd

#endif
