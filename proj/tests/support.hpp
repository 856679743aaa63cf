#pragma once

// Shared helpers for the unit and acceptance suites.

#include <cmath>
#include <initializer_list>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ssr/gmm.hpp"
#include "ssr/subsystem.hpp"

namespace ssr {

inline Vector Vector1(double a) {
  Vector v(1);
  v << a;
  return v;
}

inline Vector Vector2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

inline Vector Vector3(double a, double b, double c) {
  Vector v(3);
  v << a, b, c;
  return v;
}

namespace test {

inline std::vector<double> random_weights(std::mt19937_64& rng, std::size_t count) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> w(count);
  double total = 0.0;
  for (auto& x : w) total += (x = u(rng));
  for (auto& x : w) x /= total;
  // Push the rounding residue into the last weight so the sum is exactly 1.
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < count; ++i) head += w[i];
  w.back() = 1.0 - head;
  return w;
}

/// Random coupling pair with shared diagonal covariances, independent
/// weights on both sides and a random shift.
inline CouplingPair random_pair(std::mt19937_64& rng, int dimension, int components) {
  std::uniform_real_distribution<double> mean(-2.0, 2.0);
  std::uniform_real_distribution<double> var(0.3, 2.0);
  std::uniform_real_distribution<double> shift(-1.5, 1.5);
  std::vector<Vector> mu(components), mu_hat(components), variances(components);
  for (int k = 0; k < components; ++k) {
    mu[k] = Vector(dimension);
    mu_hat[k] = Vector(dimension);
    variances[k] = Vector(dimension);
    for (int d = 0; d < dimension; ++d) {
      mu[k][d] = mean(rng);
      mu_hat[k][d] = mu[k][d] + 0.5 * shift(rng);
      variances[k][d] = var(rng);
    }
  }
  Vector gamma(dimension);
  for (int d = 0; d < dimension; ++d) gamma[d] = shift(rng);
  auto left = GaussianMixture::diagonal(random_weights(rng, components), mu, variances);
  auto right = GaussianMixture::diagonal(random_weights(rng, components), mu_hat, variances);
  return CouplingPair(std::move(left), std::move(right), gamma);
}

/// Single Gaussian with a random full covariance and a random offset.
inline std::pair<GaussianMixture, Vector> random_single_component(std::mt19937_64& rng, int dimension) {
  std::normal_distribution<double> normal;
  Matrix a(dimension, dimension);
  for (int i = 0; i < dimension; ++i)
    for (int j = 0; j < dimension; ++j) a(i, j) = normal(rng);
  Matrix cov = a * a.transpose() + 0.2 * Matrix::Identity(dimension, dimension);
  cov = 0.5 * (cov + cov.transpose()).eval();
  Vector gamma(dimension);
  for (int d = 0; d < dimension; ++d) gamma[d] = 2.0 * normal(rng);
  return {GaussianMixture({1.0}, {Vector::Zero(dimension)}, {cov}), gamma};
}


inline std::vector<Expression> parse_all(std::initializer_list<const char*> texts) {
  std::vector<Expression> out;
  for (const char* t : texts) out.push_back(Expression::parse(t));
  return out;
}

/// Scalar system x+ = <dynamics> + w with Gaussian noise of the given
/// variance and a single unit parameter.
inline Subsystem scalar_system(const char* dynamics, Box state, double variance = 1.0) {
  Subsystem s;
  s.id = "scalar";
  s.state_dim = 1;
  s.external_inputs = 1;
  s.dynamics = {Expression::parse(dynamics)};
  s.output = OutputMap::identity(1);
  s.noise.weights = {1.0};
  s.noise.means = {{Expression::constant(0.0)}};
  s.noise.covariances = {Matrix::Constant(1, 1, variance)};
  s.theta_box = Box(Vector1(1.0), Vector1(1.0));
  s.theta_nominal = Vector1(1.0);
  s.state_box = state;
  s.input_box = Box(Vector1(-1), Vector1(1));
  s.output_box = state;
  s.internal_box = Box(Vector(0), Vector(0));
  return s;
}

/// Package-delivery agent; theta = (gain, mu1x, mu1y, mu2x, mu2y).
inline Subsystem package_delivery(bool tight = false) {
  Subsystem s;
  s.id = "agent";
  s.state_dim = 2;
  s.external_inputs = 2;
  s.dynamics = parse_all({"0.9*x[0] + 0.6*sin(0.1*x[1]) + 1.7*theta[0]*u[0]", "0.9*x[1] + 1.7*u[1]"});
  s.output = OutputMap::identity(2);
  const double v = std::sqrt(0.2);
  s.noise.weights = {0.8, 0.2};
  s.noise.means = {parse_all({"theta[1]", "theta[2]"}), parse_all({"theta[3]", "theta[4]"})};
  s.noise.covariances = {Matrix(Vector2(v, v).asDiagonal()), Matrix(Vector2(v, v).asDiagonal())};
  const double g = tight ? 0.001 : 0.05;
  const double m = tight ? 0.001 : 0.01;
  Vector lo(5), hi(5), nominal(5);
  lo << 1.0 - g, -m, 0.8 - m, -0.8 - m, -0.8 - m;
  hi << 1.0 + g, m, 0.8 + m, -0.8 + m, -0.8 + m;
  nominal << (tight ? 1.0 : 0.99), 0.0, 0.8, -0.8, -0.8;
  s.theta_box = Box(lo, hi);
  s.theta_nominal = nominal;
  s.state_box = Box(Vector2(-6, -6), Vector2(6, 6));
  s.input_box = Box(Vector2(-1, -1), Vector2(1, 1));
  s.output_box = s.state_box;
  s.internal_box = Box(Vector(0), Vector(0));
  return s;
}

/// Leading car; theta = (mass, mu1s, mu1v, mu2s, mu2v).
inline Subsystem platoon_leader(const char* velocity_gain = "0.5/theta[0]") {
  Subsystem s;
  s.id = "leader";
  s.state_dim = 2;
  s.external_inputs = 1;
  s.dynamics = {Expression::parse("x[0] + 0.5*x[1]"),
                Expression::parse(std::string("0.9*x[1] + ") + velocity_gain + "*u[0]")};
  s.output = OutputMap::identity(2);
  s.noise.weights = {0.3, 0.7};
  s.noise.means = {parse_all({"theta[1]", "theta[2]"}), parse_all({"theta[3]", "theta[4]"})};
  const Matrix cov = Vector2(0.05, 0.025).asDiagonal();
  s.noise.covariances = {cov, cov};
  Vector lo(5), hi(5), nominal(5);
  lo << 3.9, 0.09, -0.01, -0.01, -0.01;
  hi << 4.1, 0.11, 0.01, 0.01, 0.01;
  nominal << 4.0, 0.1, 0.0, 0.0, 0.0;
  s.theta_box = Box(lo, hi);
  s.theta_nominal = nominal;
  s.state_box = Box(Vector2(0, 0.95), Vector2(5, 1.05));
  s.input_box = Box(Vector1(0.3), Vector1(1.0));
  s.output_box = s.state_box;
  s.internal_box = Box(Vector(0), Vector(0));
  return s;
}

}  // namespace test
}  // namespace ssr
