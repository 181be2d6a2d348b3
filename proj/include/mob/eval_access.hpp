#ifndef MOB_EVAL_ACCESS_HPP
#define MOB_EVAL_ACCESS_HPP

#include "mob/domains.hpp"

namespace mob::domains {

// Evaluation-only view of a trajectory's hidden task labels. Only metrics,
// reporting and dataset-export code may include this header; learning code
// works purely with (x, y).
struct EvalAccess {
  static const std::vector<int>& labels(const Trajectory& t) {
    return t.tasks_;
  }
};

}  // namespace mob::domains

#endif
