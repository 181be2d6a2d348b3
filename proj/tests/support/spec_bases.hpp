#ifndef MOB_TESTS_SPEC_BASES_HPP
#define MOB_TESTS_SPEC_BASES_HPP

#include <cmath>
#include <vector>

#include "mob/basis.hpp"

// Constant-head ensemble members for exact-arithmetic oracles: widths {1, 2}
// with zero weights, so mu and sigma are set purely by the biases.
namespace testutil {

inline mob::nd::Mlp const_head(double mu, double sigma_target, double floor) {
  mob::nd::Mlp net;
  net.widths = {1, 2};
  double raw = std::log(std::exp(sigma_target - floor) - 1.0);
  net.params = {0.0, 0.0, mu, raw};
  return net;
}

inline mob::basis::EnsembleBasis const_basis(std::vector<double> mus,
                                             std::vector<double> sigmas) {
  mob::basis::EnsembleBasis b;
  for (std::size_t j = 0; j < mus.size(); ++j)
    b.members.push_back(const_head(mus[j], sigmas[j], b.sigma_floor));
  return b;
}

}  // namespace testutil

#endif
