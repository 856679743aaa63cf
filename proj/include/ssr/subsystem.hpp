#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssr/expr.hpp"
#include "ssr/gmm.hpp"

namespace ssr {

/// Axis-aligned box [lower, upper] (closed).
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lower_, Vector upper_);

  Eigen::Index dimension() const noexcept { return lower.size(); }
  bool contains(const Vector& x, double slack = 0.0) const;
  bool contains(const Box& other, double slack = 0.0) const;
  bool has_volume() const;
  Vector center() const { return 0.5 * (lower + upper); }
  Vector widths() const { return upper - lower; }
  /// Euclidean distance from a point to the box (0 inside).
  double distance(const Vector& x) const;
};

/// One scalar internal input, fed by output coordinate `output` of
/// subsystem `source`.
struct InternalInput {
  std::string source;
  int output = 0;
};

/// Affine output map y = C x + d.
struct OutputMap {
  Matrix matrix;
  Vector offset;

  static OutputMap identity(Eigen::Index n);
  Vector operator()(const Vector& x) const { return matrix * x + offset; }
  /// Tight image of a box under the affine map.
  Box image(const Box& box) const;
  bool is_identity() const;
};

/// Gaussian-mixture noise whose means may depend on parameters.
///
/// Weights and covariances are fixed; every mean coordinate is an expression
/// over theta[i] (constants are plain numbers).
struct NoiseModel {
  std::vector<double> weights;
  std::vector<std::vector<Expression>> means;
  std::vector<Matrix> covariances;

  std::size_t size() const noexcept { return weights.size(); }
  std::vector<Vector> means_at(const Vector& theta) const;
  GaussianMixture at(const Vector& theta) const;
};

/// Parametric subsystem x+ = f(x, u; theta) + w, y = h(x), with inputs
/// ordered as [external..., internal...].
struct Subsystem {
  std::string id;
  int state_dim = 0;
  int external_inputs = 0;
  std::vector<InternalInput> internal_inputs;
  std::vector<Expression> dynamics;
  OutputMap output;
  NoiseModel noise;
  Box theta_box;
  Vector theta_nominal;
  Box state_box;
  Box input_box;
  Box output_box;
  /// Range of the internal inputs (empty when there are none).
  Box internal_box;

  int input_dim() const noexcept { return external_inputs + static_cast<int>(internal_inputs.size()); }
  int parameter_dim() const noexcept { return static_cast<int>(theta_nominal.size()); }

  /// Checks every structural invariant; throws ContractViolation.
  void validate() const;

  /// Noise mixture at the nominal parameter.
  GaussianMixture nominal_noise() const { return noise.at(theta_nominal); }
};

/// Deterministic part f(x, u; theta). Division by zero or a non-finite
/// value throws EvaluationError naming the coordinate.
Vector eval_dynamics(const Subsystem& s, const Vector& x, const Vector& u, const Vector& theta);

/// gamma = f(x, u; theta) - f(x, u; theta_nominal).
Vector gamma_offset(const Subsystem& s, const Vector& x, const Vector& u, const Vector& theta);

/// Abstract successor under the identity relation:
/// x_hat+ = x+ - f(x, u; theta_nominal) + f(x_hat, u_hat; theta_nominal).
/// Never reads the true parameter.
Vector refine_state(const Subsystem& s, const Vector& x_next, const Vector& x, const Vector& x_hat,
                    const Vector& u, const Vector& u_hat);

struct SupSearchOptions {
  bool vertices = true;
  int lattice_points = 3;
};

/// Candidate parameters for the supremum over the box: all 2^p vertices
/// plus a uniform lattice. Vertex enumeration is refused for p > 20.
std::vector<Vector> parameter_candidates(const Box& box, const SupSearchOptions& options);

struct SupGamma {
  /// Per mixture component: sup over theta of |L_k^{-1} beta_k(theta)|.
  std::vector<double> norms;
  std::vector<Vector> maximizers;
};

/// Precomputed search over the parameter box for one subsystem. Reused
/// across many (x, u) points.
class ParameterSearch {
 public:
  ParameterSearch(const Subsystem& s, const SupSearchOptions& options = {});

  SupGamma sup_whitened_offsets(const Vector& x, const Vector& u) const;
  /// Same norms without the maximizers; `norms` gets one entry per component.
  void sup_norms(const Vector& x, const Vector& u, double* norms) const;
  const std::vector<Vector>& candidates() const noexcept { return candidates_; }
  std::size_t components() const noexcept { return components_; }

 private:
  const Subsystem* system_;
  std::vector<Vector> candidates_;
  std::size_t components_ = 0;
  int n_ = 0;
  // Whitened mean offsets L_k^{-1}(mu_k(theta_c) - mu_k(theta_nominal)),
  // flattened as [(c * K + k) * n + i].
  std::vector<double> whitened_means_;
  // Distinct restrictions of the candidates to the dynamics' parameter
  // coordinates, and the index of each candidate's restriction.
  std::vector<Vector> dynamics_thetas_;
  std::vector<std::size_t> dynamics_slot_;
  std::vector<int> theta_dependent_coords_;
  // Row-major inverse Cholesky factors, n * n per component.
  std::vector<double> inverse_factors_;

  std::size_t search(const Vector& x, const Vector& u, double* norms) const;
};

SupGamma sup_gamma_norm(const Subsystem& s, const Vector& x, const Vector& u,
                        const SupSearchOptions& options = {});

}  // namespace ssr
