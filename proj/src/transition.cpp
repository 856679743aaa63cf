#include "ssr/transition.hpp"

#include <string>

#include "ssr/error.hpp"

namespace ssr {

ExplicitTransitions::ExplicitTransitions(std::size_t states, std::size_t inputs, std::size_t disturbances)
    : states_(states), inputs_(inputs), disturbances_(disturbances), rows_(states * inputs * disturbances) {
  require(states > 0 && inputs > 0 && disturbances > 0, "explicit transitions need nonzero sizes");
}

std::size_t ExplicitTransitions::slot(std::size_t state, std::size_t input, std::size_t disturbance) const {
  require(state < states_ && input < inputs_ && disturbance < disturbances_, "transition row index out of range");
  return (state * inputs_ + input) * disturbances_ + disturbance;
}

void ExplicitTransitions::set(std::size_t state, std::size_t input, std::size_t disturbance, Entries entries) {
  double total = 0.0;
  for (const auto& [target, p] : entries) {
    require(target < states_, "transition target out of range");
    require(p >= 0.0 && p <= 1.0, "transition probability outside [0, 1]");
    total += p;
  }
  require(total <= 1.0 + 1e-12, "transition row sums to " + std::to_string(total));
  rows_[slot(state, input, disturbance)] = std::move(entries);
}

void ExplicitTransitions::expectations(std::size_t state, std::size_t input, std::size_t disturbance,
                                       const std::vector<const double*>& values, double* out) const {
  const Entries& r = rows_[slot(state, input, disturbance)];
  for (std::size_t j = 0; j < values.size(); ++j) {
    double acc = 0.0;
    for (const auto& [target, p] : r) acc += p * values[j][target];
    out[j] = acc;
  }
}

std::vector<double> ExplicitTransitions::row(std::size_t state, std::size_t input, std::size_t disturbance) const {
  std::vector<double> dense(states_ + 1, 0.0);
  double total = 0.0;
  for (const auto& [target, p] : rows_[slot(state, input, disturbance)]) {
    dense[target] += p;
    total += p;
  }
  dense[states_] = total >= 1.0 ? 0.0 : 1.0 - total;
  return dense;
}

}  // namespace ssr
