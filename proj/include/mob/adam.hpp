#ifndef MOB_ADAM_HPP
#define MOB_ADAM_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mob::nd {

// Adam with bias correction. beta1/beta2/eps are the standard companions to
// the configured learning rate.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<double> m, v;

  explicit AdamState(double learning_rate = 1e-4, std::size_t n = 0)
      : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}

  // Insert `count` zeroed moment slots at `pos` (parameter growth).
  void insert(std::size_t pos, std::size_t count);
};

// One update step in place. Throws ContractError naming `name` if any
// gradient is non-finite or shapes mismatch.
void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads,
               const std::string& name = "params");

}  // namespace mob::nd

#endif
