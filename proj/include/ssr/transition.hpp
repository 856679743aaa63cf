#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace ssr {

/// Finite robust MDP seen by synthesis: states (the failure sink is
/// implicit and not counted), controller inputs, and adversarial
/// disturbances (internal-input points; one when there are none).
class TransitionModel {
 public:
  virtual ~TransitionModel() = default;

  virtual std::size_t states() const = 0;
  virtual std::size_t inputs() const = 0;
  virtual std::size_t disturbances() const = 0;

  /// out[j] = sum_s' P(s' | state, input, disturbance) * values[j][s'].
  /// The sink carries value 0.
  virtual void expectations(std::size_t state, std::size_t input, std::size_t disturbance,
                            const std::vector<const double*>& values, double* out) const = 0;

  /// Dense successor distribution: states() entries, then the sink.
  virtual std::vector<double> row(std::size_t state, std::size_t input, std::size_t disturbance) const = 0;
};

/// Sparse explicitly listed transitions, for small hand-built models.
class ExplicitTransitions : public TransitionModel {
 public:
  using Entries = std::vector<std::pair<std::size_t, double>>;

  ExplicitTransitions(std::size_t states, std::size_t inputs, std::size_t disturbances = 1);

  /// Sets one row; probability not listed goes to the sink. Entries must be
  /// in [0, 1] and sum to at most 1 + 1e-12.
  void set(std::size_t state, std::size_t input, std::size_t disturbance, Entries entries);

  std::size_t states() const override { return states_; }
  std::size_t inputs() const override { return inputs_; }
  std::size_t disturbances() const override { return disturbances_; }
  void expectations(std::size_t state, std::size_t input, std::size_t disturbance,
                    const std::vector<const double*>& values, double* out) const override;
  std::vector<double> row(std::size_t state, std::size_t input, std::size_t disturbance) const override;

 private:
  std::size_t states_, inputs_, disturbances_;
  std::vector<Entries> rows_;

  std::size_t slot(std::size_t state, std::size_t input, std::size_t disturbance) const;
};

}  // namespace ssr
