#include "mob/pca.hpp"

#include <cmath>

#include "mob/errors.hpp"
#include "mob/rng.hpp"

namespace mob::exp {

PcaResult pca_top(const std::vector<std::vector<double>>& rows, int q,
                  double tol, int max_iters) {
  if (rows.empty()) throw ContractError("pca_top: no samples");
  std::size_t d = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != d) throw ContractError("pca_top: ragged rows");
  std::size_t n = rows.size();

  PcaResult result;
  result.rank_warning = n < d;

  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < d; ++k) mean[k] += r[k];
  for (auto& m : mean) m /= static_cast<double>(n);

  // covariance (biased normalization; only ratios matter here)
  std::vector<double> cov(d * d, 0.0);
  std::vector<double> centered(d);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < d; ++k) centered[k] = r[k] - mean[k];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        cov[i * d + j] += centered[i] * centered[j];
  }
  for (auto& c : cov) c /= static_cast<double>(n);

  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov[i * d + i];

  std::vector<std::vector<double>> dirs;
  std::vector<double> lambdas;
  std::vector<double> v(d), cv(d);
  for (int comp = 0; comp < q; ++comp) {
    nd::Rng rng(0xC0FFEE + static_cast<std::uint64_t>(comp));
    for (auto& x : v) x = rng.normal();
    double norm = 0.0;
    for (double x : v) norm += x * x;
    for (auto& x : v) x /= std::sqrt(norm);

    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += cov[i * d + j] * v[j];
        cv[i] = s;
      }
      lambda = 0.0;
      for (std::size_t i = 0; i < d; ++i) lambda += v[i] * cv[i];
      double cn = 0.0;
      for (double x : cv) cn += x * x;
      cn = std::sqrt(cn);
      if (cn < 1e-300) break;  // exhausted variance
      double delta = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double next = cv[i] / cn;
        // compare sign-aligned
        delta = std::max(delta, std::abs(std::abs(next) - std::abs(v[i])));
        v[i] = next;
      }
      if (delta < tol) break;
    }
    // fix the sign: largest-magnitude component positive
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0)
      for (auto& x : v) x = -x;

    dirs.push_back(v);
    lambdas.push_back(std::max(0.0, lambda));
    // deflate
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        cov[i * d + j] -= lambda * v[i] * v[j];
  }

  result.directions = dirs;
  result.explained.resize(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    result.explained[i] = trace > 0.0 ? lambdas[i] / trace : 0.0;

  result.coords.reserve(n);
  for (const auto& r : rows) {
    std::vector<double> proj(dirs.size(), 0.0);
    for (std::size_t c = 0; c < dirs.size(); ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += (r[k] - mean[k]) * dirs[c][k];
      proj[c] = s;
    }
    result.coords.push_back(std::move(proj));
  }
  return result;
}

}  // namespace mob::exp
