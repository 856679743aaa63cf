// Numerical cross-checks for the closed-form coupling bound. Nothing in here
// is used by coupling_delta itself.
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ssr/error.hpp"
#include "ssr/gmm.hpp"

namespace ssr {
namespace {

constexpr double kBoxHalfWidth = 10.0;

struct Interval {
  double lo;
  double hi;
};

// Segments of the real line (per dimension) covered by at least one
// component box, split at every box boundary.
std::vector<Interval> covered_segments(const std::vector<Interval>& boxes) {
  std::vector<double> cuts;
  for (const auto& b : boxes) {
    cuts.push_back(b.lo);
    cuts.push_back(b.hi);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<Interval> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    const bool covered = std::any_of(boxes.begin(), boxes.end(),
                                     [&](const Interval& b) { return b.lo <= mid && mid <= b.hi; });
    if (covered) out.push_back({cuts[i], cuts[i + 1]});
  }
  return out;
}

std::vector<Interval> split_panels(const std::vector<Interval>& segments, double width) {
  std::vector<Interval> panels;
  for (const auto& s : segments) {
    const auto count = static_cast<std::size_t>(std::max(1.0, std::ceil((s.hi - s.lo) / width)));
    const double h = (s.hi - s.lo) / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double lo = s.lo + h * static_cast<double>(i);
      panels.push_back({lo, i + 1 == count ? s.hi : lo + h});
    }
  }
  return panels;
}

// Allocation-free density evaluation for the quadrature inner loop.
class FastMixture {
 public:
  explicit FastMixture(const GaussianMixture& g) : n_(static_cast<int>(g.dimension())) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g.weights()[k] == 0.0) continue;
      Component c;
      const Matrix inverse = g.cholesky(k).triangularView<Eigen::Lower>().solve(
          Matrix::Identity(g.dimension(), g.dimension()));
      for (int i = 0; i < n_; ++i) {
        c.mean[i] = g.means()[k][i];
        for (int j = 0; j < n_; ++j) c.inverse_factor[i][j] = inverse(i, j);
      }
      const double log_det = 2.0 * g.cholesky(k).diagonal().array().log().sum();
      c.scale = g.weights()[k] * std::exp(-0.5 * (n_ * std::log(2.0 * std::numbers::pi) + log_det));
      components_.push_back(c);
    }
  }

  double operator()(const double* x) const {
    double value = 0.0;
    for (const auto& c : components_) {
      double d[3];
      for (int i = 0; i < n_; ++i) d[i] = x[i] - c.mean[i];
      double q = 0.0;
      for (int i = 0; i < n_; ++i) {
        double z = 0.0;
        for (int j = 0; j <= i; ++j) z += c.inverse_factor[i][j] * d[j];
        q += z * z;
      }
      value += c.scale * std::exp(-0.5 * q);
    }
    return value;
  }

 private:
  struct Component {
    double mean[3] = {};
    double inverse_factor[3][3] = {};
    double scale = 0.0;
  };
  int n_;
  std::vector<Component> components_;
};

class MinDensityIntegrator {
 public:
  MinDensityIntegrator(const GaussianMixture& a, const GaussianMixture& b) : a_(a), b_(b) {
    const auto n = static_cast<std::size_t>(a.dimension());
    segments_.resize(n);
    min_sigma_.assign(n, std::numeric_limits<double>::infinity());
    for (std::size_t d = 0; d < n; ++d) {
      std::vector<Interval> boxes;
      for (const GaussianMixture* g : {&a, &b}) {
        for (std::size_t k = 0; k < g->size(); ++k) {
          const double sigma = g->standard_deviations(k)[static_cast<Eigen::Index>(d)];
          const double mu = g->means()[k][static_cast<Eigen::Index>(d)];
          boxes.push_back({mu - kBoxHalfWidth * sigma, mu + kBoxHalfWidth * sigma});
          min_sigma_[d] = std::min(min_sigma_[d], sigma);
        }
      }
      segments_[d] = covered_segments(boxes);
    }
  }

  double integrate(int round) {
    const auto n = segments_.size();
    panels_.resize(n);
    for (std::size_t d = 0; d < n; ++d) {
      panels_[d] = split_panels(segments_[d], min_sigma_[d] * std::ldexp(1.0, -round));
    }
    tolerance_ = 1e-8 * std::ldexp(1.0, -2 * round);
    std::fill(std::begin(point_), std::end(point_), 0.0);
    return integrate_dimension(0);
  }

 private:
  FastMixture a_;
  FastMixture b_;
  std::vector<std::vector<Interval>> segments_;
  std::vector<std::vector<Interval>> panels_;
  std::vector<double> min_sigma_;
  double tolerance_ = 1e-10;
  double point_[3] = {};

  double integrate_dimension(std::size_t d) {
    using boost::math::quadrature::gauss_kronrod;
    const bool innermost = d + 1 == panels_.size();
    auto f = [&](double t) {
      point_[d] = t;
      if (innermost) return std::min(a_(point_), b_(point_));
      return integrate_dimension(d + 1);
    };
    // Inner integrals are solved more tightly than the outer ones so that
    // their quadrature noise does not force the outer levels to bisect.
    const double scale = std::pow(1e-2, static_cast<double>(panels_.size() - 1 - d));
    const unsigned depth = innermost ? 15 : 8;
    double total = 0.0;
    for (const auto& p : panels_[d]) {
      total += gauss_kronrod<double, 15>::integrate(f, p.lo, p.hi, depth, tolerance_ * scale);
    }
    return total;
  }
};

}  // namespace

OracleResult coupling_mass_oracle(const CouplingPair& pair, OracleOptions options) {
  require(pair.left.dimension() <= 3, "coupling_mass_oracle supports dimension <= 3 only");
  require(options.max_rounds >= 1, "coupling_mass_oracle needs at least one refinement round");
  const GaussianMixture right = pair.right_shifted();
  MinDensityIntegrator integrator(pair.left, right);

  OracleResult result;
  double previous = integrator.integrate(0);
  result.mass = previous;
  for (int round = 1; round <= options.max_rounds; ++round) {
    const double current = integrator.integrate(round);
    result.rounds = round;
    result.last_change = std::abs(current - previous);
    result.mass = current;
    if (result.last_change <= options.target) {
      result.converged = true;
      break;
    }
    previous = current;
  }
  result.mass = std::clamp(result.mass, 0.0, 1.0);
  if (!result.converged) {
    result.warning = "quadrature did not reach the accuracy target; last change " +
                     std::to_string(result.last_change);
  }
  return result;
}

double completion_diagonal_mass(const CouplingPair& pair, std::size_t bins) {
  require(pair.left.dimension() == 1, "completion_diagonal_mass is defined for scalar noise");
  require(bins >= 2, "completion_diagonal_mass needs at least two bins");
  const GaussianMixture right = pair.right_shifted();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const GaussianMixture* g : {&pair.left, &right}) {
    for (std::size_t k = 0; k < g->size(); ++k) {
      const double sigma = g->standard_deviations(k)[0];
      lo = std::min(lo, g->means()[k][0] - 12.0 * sigma);
      hi = std::max(hi, g->means()[k][0] + 12.0 * sigma);
    }
  }
  using Rule = boost::math::quadrature::gauss<double, 10>;
  const double h = (hi - lo) / static_cast<double>(bins);
  Vector w(1);
  double coupled = 0.0;
  std::vector<double> excess(bins), deficit(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    const double a = lo + h * static_cast<double>(i);
    auto diff = [&](double t) {
      w[0] = t;
      return pair.left.density(w) - right.density(w);
    };
    auto lower = [&](double t) {
      w[0] = t;
      return std::min(pair.left.density(w), right.density(w));
    };
    excess[i] = Rule::integrate([&](double t) { return std::max(0.0, diff(t)); }, a, a + h);
    deficit[i] = Rule::integrate([&](double t) { return std::max(0.0, -diff(t)); }, a, a + h);
    coupled += Rule::integrate(lower, a, a + h);
  }
  const double residual = 1.0 - coupled;
  if (residual <= 0.0) return 0.0;
  double diagonal = 0.0;
  for (std::size_t i = 0; i < bins; ++i) diagonal += excess[i] * deficit[i];
  return diagonal / residual;
}

}  // namespace ssr
