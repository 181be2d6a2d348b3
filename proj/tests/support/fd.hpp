#ifndef MOB_TESTS_FD_HPP
#define MOB_TESTS_FD_HPP

#include <algorithm>
#include <cmath>
#include <vector>

// Central-difference oracle for gradient checks, independent of the
// reverse-mode implementation it validates.
namespace fdcheck {

template <typename F>
double central_diff(std::vector<double>& params, std::size_t i, F&& f,
                    double h = 1e-5) {
  double keep = params[i];
  params[i] = keep + h;
  double up = f();
  params[i] = keep - h;
  double down = f();
  params[i] = keep;
  return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

template <typename F>
double max_grad_rel_err(std::vector<double>& params,
                        const std::vector<double>& analytic, F&& f,
                        double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double fd = central_diff(params, i, f, h);
    worst = std::max(worst, rel_err(analytic[i], fd));
  }
  return worst;
}

}  // namespace fdcheck

#endif
