#include "ssr/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ssr/error.hpp"

namespace ssr {

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                                 std::vector<Matrix> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances)) {
  validate_and_factor();
}

GaussianMixture GaussianMixture::diagonal(std::vector<double> weights, std::vector<Vector> means,
                                          std::vector<Vector> variances) {
  std::vector<Matrix> covariances;
  covariances.reserve(variances.size());
  for (const auto& v : variances) {
    require(v.size() > 0 && (v.array() > 0.0).all(),
            "diagonal covariance entries must be positive");
    covariances.emplace_back(v.asDiagonal());
  }
  return GaussianMixture(std::move(weights), std::move(means), std::move(covariances));
}

void GaussianMixture::validate_and_factor() {
  const std::size_t count = weights_.size();
  require(count > 0, "a Gaussian mixture needs at least one component");
  require(means_.size() == count && covariances_.size() == count,
          "weights, means and covariances must have the same length");
  double total = 0.0;
  for (double w : weights_) {
    require(std::isfinite(w) && w >= 0.0 && w <= 1.0, "mixture weights must lie in [0, 1]");
    total += w;
  }
  require(std::abs(total - 1.0) <= 1e-12, "mixture weights must sum to 1");

  const Eigen::Index n = means_.front().size();
  require(n > 0, "mixture dimension must be positive");
  diagonal_ = true;
  factors_.clear();
  log_norms_.clear();
  for (std::size_t k = 0; k < count; ++k) {
    require(means_[k].size() == n, "all mixture means must share one dimension");
    require(means_[k].allFinite(), "mixture means must be finite");
    const Matrix& cov = covariances_[k];
    require(cov.rows() == n && cov.cols() == n, "covariance shape must match the mean dimension");
    require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff()),
            "covariances must be symmetric");
    const Matrix off = cov - Matrix(cov.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() != 0.0) diagonal_ = false;

    Eigen::LLT<Matrix> llt(cov);
    require(llt.info() == Eigen::Success && (cov.diagonal().array() > 0.0).all(),
            "covariances must be positive definite");
    Matrix factor = llt.matrixL();
    double log_det = 2.0 * factor.diagonal().array().log().sum();
    log_norms_.push_back(-0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + log_det));
    factors_.push_back(std::move(factor));
  }
}

Vector GaussianMixture::standard_deviations(std::size_t k) const {
  return covariances_.at(k).diagonal().cwiseSqrt();
}

Vector GaussianMixture::whiten(std::size_t k, const Vector& v) const {
  require(v.size() == dimension(), "whiten: dimension mismatch");
  return factors_.at(k).triangularView<Eigen::Lower>().solve(v);
}

GaussianMixture GaussianMixture::with_means(std::vector<Vector> means) const {
  return GaussianMixture(weights_, std::move(means), covariances_);
}

GaussianMixture GaussianMixture::shifted(const Vector& offset) const {
  require(offset.size() == dimension(), "shift: dimension mismatch");
  std::vector<Vector> moved = means_;
  for (auto& m : moved) m += offset;
  return with_means(std::move(moved));
}

double GaussianMixture::log_component_density(std::size_t k, const Vector& x) const {
  const Vector z = whiten(k, x - means_[k]);
  return log_norms_[k] - 0.5 * z.squaredNorm();
}

double GaussianMixture::density(const Vector& x) const {
  require(x.size() == dimension(), "density: dimension mismatch");
  double value = 0.0;
  for (std::size_t k = 0; k < size(); ++k) {
    if (weights_[k] == 0.0) continue;
    value += weights_[k] * std::exp(log_component_density(k, x));
  }
  return value;
}

std::vector<Vector> GaussianMixture::sample(std::uint64_t seed, std::size_t count) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6d6978u};
  std::mt19937_64 rng(seq);
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  std::normal_distribution<double> normal;
  std::vector<Vector> out;
  out.reserve(count);
  const Eigen::Index n = dimension();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = pick(rng);
    Vector z(n);
    for (Eigen::Index d = 0; d < n; ++d) z[d] = normal(rng);
    out.push_back(means_[k] + factors_[k] * z);
  }
  return out;
}

CouplingPair::CouplingPair(GaussianMixture left_, GaussianMixture right_, Vector shift_)
    : left(std::move(left_)), right(std::move(right_)), shift(std::move(shift_)) {
  require(left.size() == right.size(), "coupled mixtures must have the same number of components");
  require(left.dimension() == right.dimension() && shift.size() == left.dimension(),
          "coupled mixtures and shift must share one dimension");
  for (std::size_t k = 0; k < left.size(); ++k) {
    const double gap = (left.covariances()[k] - right.covariances()[k]).cwiseAbs().maxCoeff();
    require(gap <= 1e-12 * std::max(1.0, left.covariances()[k].cwiseAbs().maxCoeff()),
            "coupled mixtures must share covariances component by component");
  }
}

GaussianMixture CouplingPair::right_shifted() const { return right.shifted(-shift); }

Vector CouplingPair::whitened_offset(std::size_t k) const {
  return left.whiten(k, left.means()[k] - right.means()[k] + shift);
}

double component_coupled_mass(double weight, double weight_hat, double separation) {
  if (weight <= 0.0 || weight_hat <= 0.0) return 0.0;
  if (separation == 0.0) return std::min(weight, weight_hat);
  // min{w phi(t - b), w_hat phi(t)} switches at t* = b/2 - log(w/w_hat)/b;
  // below t* the left term is the smaller one.
  const double b = separation;
  const double ratio = std::log(weight / weight_hat) / b;
  return weight * normal_cdf(-0.5 * b - ratio) + weight_hat * normal_cdf(-0.5 * b + ratio);
}

double coupling_delta(const CouplingPair& pair) {
  double mass = 0.0;
  for (std::size_t k = 0; k < pair.left.size(); ++k) {
    const double b = pair.whitened_offset(k).norm();
    mass += component_coupled_mass(pair.left.weights()[k], pair.right.weights()[k], b);
  }
  return std::clamp(1.0 - mass, 0.0, 1.0);
}

}  // namespace ssr
