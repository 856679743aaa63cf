#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ssr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Standard normal cumulative distribution function.
///
/// Evaluated as 0.5 * erfc(-z / sqrt(2)). The complementary error function
/// keeps full relative precision in the lower tail, so the absolute error is
/// bounded by a few ulp of the result (well below 1e-12) and the upper tail
/// is not rounded to exactly 1 before roughly 8.3 standard deviations.
double normal_cdf(double z) noexcept;

/// Finite Gaussian mixture sum_k pi_k N(mu_k, Sigma_k).
///
/// Components may be stored with diagonal covariances (the fast path used by
/// grid abstractions) or full symmetric positive-definite ones. The Cholesky
/// factor of every component is computed once at construction.
class GaussianMixture {
 public:
  GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                  std::vector<Matrix> covariances);

  /// Diagonal-covariance constructor; `variances[k]` holds diag(Sigma_k).
  static GaussianMixture diagonal(std::vector<double> weights,
                                  std::vector<Vector> means,
                                  std::vector<Vector> variances);

  std::size_t size() const noexcept { return weights_.size(); }
  Eigen::Index dimension() const noexcept { return means_.front().size(); }
  bool is_diagonal() const noexcept { return diagonal_; }

  const std::vector<double>& weights() const noexcept { return weights_; }
  const std::vector<Vector>& means() const noexcept { return means_; }
  const std::vector<Matrix>& covariances() const noexcept { return covariances_; }
  const Matrix& cholesky(std::size_t k) const { return factors_.at(k); }

  /// Per-coordinate standard deviations of component k (sqrt of diag Sigma_k).
  Vector standard_deviations(std::size_t k) const;

  /// L_k^{-1} v for the Cholesky factor Sigma_k = L_k L_k^T.
  Vector whiten(std::size_t k, const Vector& v) const;

  /// Same weights and covariances, new means.
  GaussianMixture with_means(std::vector<Vector> means) const;

  /// Same mixture with every mean moved by `offset`.
  GaussianMixture shifted(const Vector& offset) const;

  double density(const Vector& x) const;
  double log_component_density(std::size_t k, const Vector& x) const;

  /// Independent draws; the same seed always yields the same sequence.
  std::vector<Vector> sample(std::uint64_t seed, std::size_t count) const;

 private:
  std::vector<double> weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covariances_;
  std::vector<Matrix> factors_;
  std::vector<double> log_norms_;
  bool diagonal_ = false;

  void validate_and_factor();
};

/// A pair of mixtures whose components are coupled one-to-one.
///
/// `left` is the noise of the true system, `right` the noise of the nominal
/// model, and `shift` the offset gamma subtracted from the right means. The
/// two mixtures must have the same component count and identical
/// covariances component by component.
struct CouplingPair {
  GaussianMixture left;
  GaussianMixture right;
  Vector shift;

  CouplingPair(GaussianMixture left, GaussianMixture right, Vector shift);

  /// The right mixture with means mu_hat_k - shift.
  GaussianMixture right_shifted() const;

  /// Whitened component offset L_k^{-1}(mu_k - mu_hat_k + shift).
  Vector whitened_offset(std::size_t k) const;
};

/// Mass of min{w N(b e_1, I), w_hat N(0, I)} for Gaussians whose means are
/// `separation` apart in whitened coordinates. Exact; zero weights give zero
/// mass and zero separation gives min(w, w_hat).
double component_coupled_mass(double weight, double weight_hat, double separation);

/// Lower bound on the coupled mass sum_k component_coupled_mass(...), turned
/// into the coupling deficit 1 - mass and clamped to [0, 1].
double coupling_delta(const CouplingPair& pair);

struct OracleOptions {
  /// Maximum number of refinement rounds. Each round halves the initial
  /// panel width and tightens the per-panel tolerance by 4x.
  int max_rounds = 6;
  double target = 1e-7;
};

struct OracleResult {
  double mass = 0.0;
  double last_change = 0.0;
  int rounds = 0;
  bool converged = false;
  std::optional<std::string> warning;
};

/// Numerical value of the integral of min{left(w), right_shifted(w)} over
/// R^n for n <= 3, by nested adaptive Gauss-Kronrod quadrature over the
/// union of per-component +-10 sigma boxes. Independent of coupling_delta.
OracleResult coupling_mass_oracle(const CouplingPair& pair, OracleOptions options = {});

/// Diagonal mass of the completion term that turns the sub-coupling into a
/// full coupling, for one-dimensional pairs discretized into `bins` equal
/// bins over +-12 sigma: sum_i P_i P_hat_i / (1 - W) where P and P_hat are
/// the binned positive parts of left - right_shifted and right_shifted - left.
double completion_diagonal_mass(const CouplingPair& pair, std::size_t bins);

}  // namespace ssr
