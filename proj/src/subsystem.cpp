#include "ssr/subsystem.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "ssr/error.hpp"

namespace ssr {

Box::Box(Vector lower_, Vector upper_) : lower(std::move(lower_)), upper(std::move(upper_)) {
  require(lower.size() == upper.size(), "box bounds must have the same dimension");
  require((lower.array() <= upper.array()).all(), "box lower bound exceeds upper bound");
}

bool Box::contains(const Vector& x, double slack) const {
  require(x.size() == dimension(), "box containment: dimension mismatch");
  return ((x.array() >= lower.array() - slack) && (x.array() <= upper.array() + slack)).all();
}

bool Box::contains(const Box& other, double slack) const {
  require(other.dimension() == dimension(), "box inclusion: dimension mismatch");
  return ((other.lower.array() >= lower.array() - slack) && (other.upper.array() <= upper.array() + slack)).all();
}

bool Box::has_volume() const { return dimension() > 0 && (upper.array() > lower.array()).all(); }

double Box::distance(const Vector& x) const {
  const Vector below = (lower - x).cwiseMax(0.0);
  const Vector above = (x - upper).cwiseMax(0.0);
  return (below + above).norm();
}

OutputMap OutputMap::identity(Eigen::Index n) { return {Matrix::Identity(n, n), Vector::Zero(n)}; }

Box OutputMap::image(const Box& box) const {
  const Vector c = matrix * box.center() + offset;
  const Vector r = matrix.cwiseAbs() * (0.5 * box.widths());
  return Box(c - r, c + r);
}

bool OutputMap::is_identity() const {
  return matrix.rows() == matrix.cols() && matrix.isIdentity(0.0) && offset.isZero(0.0);
}

std::vector<Vector> NoiseModel::means_at(const Vector& theta) const {
  std::vector<Vector> out;
  out.reserve(means.size());
  const std::span<const double> th(theta.data(), static_cast<std::size_t>(theta.size()));
  for (const auto& coords : means) {
    Vector m(static_cast<Eigen::Index>(coords.size()));
    for (std::size_t d = 0; d < coords.size(); ++d) {
      m[static_cast<Eigen::Index>(d)] = coords[d].evaluate({}, {}, th);
    }
    out.push_back(std::move(m));
  }
  return out;
}

GaussianMixture NoiseModel::at(const Vector& theta) const {
  return GaussianMixture(weights, means_at(theta), covariances);
}

void Subsystem::validate() const {
  const std::string where = "subsystem '" + id + "': ";
  require(state_dim > 0, where + "state dimension must be positive");
  require(external_inputs >= 0, where + "negative external input count");
  require(static_cast<int>(dynamics.size()) == state_dim, where + "one dynamics expression per state coordinate");
  for (std::size_t i = 0; i < dynamics.size(); ++i) {
    const auto& e = dynamics[i];
    require(e.max_index(Variable::State) < state_dim,
            where + "dynamics[" + std::to_string(i) + "] references x beyond the state dimension");
    require(e.max_index(Variable::Input) < input_dim(),
            where + "dynamics[" + std::to_string(i) + "] references u beyond the input dimension");
    require(e.max_index(Variable::Parameter) < parameter_dim(),
            where + "dynamics[" + std::to_string(i) + "] references theta beyond the parameter dimension");
  }
  require(state_box.dimension() == state_dim && state_box.has_volume(), where + "state box must be a nondegenerate box of the state dimension");
  require(input_box.dimension() == external_inputs, where + "input box dimension must equal the external input count");
  require(internal_box.dimension() == static_cast<Eigen::Index>(internal_inputs.size()),
          where + "internal input box dimension must equal the internal input count");
  require(output.matrix.cols() == state_dim && output.offset.size() == output.matrix.rows(),
          where + "output map shape does not match the state dimension");
  require(output_box.dimension() == output.matrix.rows(), where + "output box dimension must equal the output dimension");
  require(output_box.contains(output.image(state_box), 1e-12), where + "output map image of the state box must lie in the output box");
  require(theta_box.dimension() == parameter_dim(), where + "parameter box and nominal parameter differ in dimension");
  require(theta_box.contains(theta_nominal), where + "nominal parameter must lie in the parameter box");

  require(!noise.weights.empty(), where + "noise needs at least one component");
  require(noise.means.size() == noise.size() && noise.covariances.size() == noise.size(),
          where + "noise weights, means and covariances differ in length");
  for (const auto& m : noise.means) {
    require(static_cast<int>(m.size()) == state_dim, where + "noise means must have the state dimension");
    for (const auto& e : m) {
      require(!e.depends_on(Variable::State) && !e.depends_on(Variable::Input),
              where + "noise means may depend on theta only");
      require(e.max_index(Variable::Parameter) < parameter_dim(), where + "noise mean references theta beyond the parameter dimension");
    }
  }
  // Constructing the mixture checks weights and covariances.
  (void)nominal_noise();
}

namespace {

std::span<const double> view(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

double eval_coordinate(const Subsystem& s, std::size_t i, const Vector& x, const Vector& u, const Vector& theta) {
  try {
    return s.dynamics[i].evaluate(view(x), view(u), view(theta));
  } catch (const std::domain_error& e) {
    throw EvaluationError("subsystem '" + s.id + "', coordinate " + std::to_string(i) + ": " + e.what(), i);
  }
}

}  // namespace

Vector eval_dynamics(const Subsystem& s, const Vector& x, const Vector& u, const Vector& theta) {
  require(x.size() == s.state_dim, "eval_dynamics: state dimension mismatch");
  require(u.size() == s.input_dim(), "eval_dynamics: input dimension mismatch");
  require(theta.size() == s.parameter_dim(), "eval_dynamics: parameter dimension mismatch");
  Vector out(s.state_dim);
  for (int i = 0; i < s.state_dim; ++i) out[i] = eval_coordinate(s, static_cast<std::size_t>(i), x, u, theta);
  return out;
}

Vector gamma_offset(const Subsystem& s, const Vector& x, const Vector& u, const Vector& theta) {
  return eval_dynamics(s, x, u, theta) - eval_dynamics(s, x, u, s.theta_nominal);
}

Vector refine_state(const Subsystem& s, const Vector& x_next, const Vector& x, const Vector& x_hat,
                    const Vector& u, const Vector& u_hat) {
  require(x_next.size() == s.state_dim && x_hat.size() == s.state_dim, "refine_state: state dimension mismatch");
  return x_next - eval_dynamics(s, x, u, s.theta_nominal) + eval_dynamics(s, x_hat, u_hat, s.theta_nominal);
}

std::vector<Vector> parameter_candidates(const Box& box, const SupSearchOptions& options) {
  const auto p = static_cast<int>(box.dimension());
  std::vector<Vector> out;
  if (p == 0) {
    out.emplace_back(0);
    return out;
  }
  if (options.vertices) {
    require(p <= 20, "parameter dimension above 20: vertex enumeration refused, configure a lattice instead");
    const std::size_t count = std::size_t{1} << p;
    for (std::size_t mask = 0; mask < count; ++mask) {
      Vector v(p);
      for (int d = 0; d < p; ++d) v[d] = (mask >> d) & 1u ? box.upper[d] : box.lower[d];
      out.push_back(std::move(v));
    }
  }
  if (options.lattice_points >= 1) {
    const int m = options.lattice_points;
    const double total = std::pow(static_cast<double>(m), p);
    require(total <= 5e6, "parameter lattice too large");
    std::vector<int> idx(static_cast<std::size_t>(p), 0);
    while (true) {
      Vector v(p);
      for (int d = 0; d < p; ++d) {
        v[d] = m == 1 ? 0.5 * (box.lower[d] + box.upper[d])
                      : box.lower[d] + (box.upper[d] - box.lower[d]) * idx[static_cast<std::size_t>(d)] / (m - 1);
      }
      out.push_back(std::move(v));
      int d = 0;
      while (d < p && ++idx[static_cast<std::size_t>(d)] == m) idx[static_cast<std::size_t>(d++)] = 0;
      if (d == p) break;
    }
  }
  require(!out.empty(), "parameter search has no candidates");
  return out;
}

ParameterSearch::ParameterSearch(const Subsystem& s, const SupSearchOptions& options)
    : system_(&s), candidates_(parameter_candidates(s.theta_box, options)), n_(s.state_dim) {
  const GaussianMixture nominal = s.nominal_noise();
  components_ = nominal.size();
  const auto n = static_cast<std::size_t>(n_);
  std::vector<Matrix> inverses;
  for (std::size_t k = 0; k < components_; ++k) {
    inverses.push_back(nominal.cholesky(k).triangularView<Eigen::Lower>().solve(Matrix::Identity(n_, n_)));
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) inverse_factors_.push_back(inverses.back()(i, j));
  }

  whitened_means_.reserve(candidates_.size() * components_ * n);
  for (const auto& theta : candidates_) {
    const std::vector<Vector> means = s.noise.means_at(theta);
    for (std::size_t k = 0; k < components_; ++k) {
      const Vector w = inverses[k] * (means[k] - nominal.means()[k]);
      whitened_means_.insert(whitened_means_.end(), w.data(), w.data() + n_);
    }
  }

  std::set<int> used;
  for (int i = 0; i < s.state_dim; ++i) {
    const auto indices = s.dynamics[static_cast<std::size_t>(i)].indices(Variable::Parameter);
    if (indices.empty()) continue;
    theta_dependent_coords_.push_back(i);
    used.insert(indices.begin(), indices.end());
  }
  std::map<std::vector<double>, std::size_t> slots;
  dynamics_slot_.reserve(candidates_.size());
  for (const auto& theta : candidates_) {
    std::vector<double> key;
    for (int j : used) key.push_back(theta[j]);
    auto [it, inserted] = slots.emplace(key, dynamics_thetas_.size());
    if (inserted) {
      Vector restricted = s.theta_nominal;
      for (int j : used) restricted[j] = theta[j];
      dynamics_thetas_.push_back(std::move(restricted));
    }
    dynamics_slot_.push_back(it->second);
  }
}

std::size_t ParameterSearch::search(const Vector& x, const Vector& u, double* norms) const {
  const Subsystem& s = *system_;
  require(x.size() == s.state_dim && u.size() == s.input_dim(), "sup_gamma_norm: dimension mismatch");
  const auto n = static_cast<std::size_t>(n_);

  // Whitened dynamics offsets per slot and component: [(slot * K + k) * n + i].
  std::vector<double> gammas(dynamics_thetas_.size() * components_ * n, 0.0);
  if (!theta_dependent_coords_.empty()) {
    std::vector<double> nominal(n, 0.0), raw(n);
    for (int i : theta_dependent_coords_) nominal[static_cast<std::size_t>(i)] = eval_coordinate(s, static_cast<std::size_t>(i), x, u, s.theta_nominal);
    for (std::size_t slot = 0; slot < dynamics_thetas_.size(); ++slot) {
      std::fill(raw.begin(), raw.end(), 0.0);
      for (int i : theta_dependent_coords_) {
        const auto c = static_cast<std::size_t>(i);
        raw[c] = eval_coordinate(s, c, x, u, dynamics_thetas_[slot]) - nominal[c];
      }
      for (std::size_t k = 0; k < components_; ++k) {
        const double* inv = &inverse_factors_[k * n * n];
        double* out = &gammas[(slot * components_ + k) * n];
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j <= i; ++j) acc += inv[i * n + j] * raw[j];
          out[i] = acc;
        }
      }
    }
  }

  std::fill(norms, norms + components_, -1.0);
  std::size_t best = 0;
  double best_total = -1.0;
  for (std::size_t c = 0; c < candidates_.size(); ++c) {
    const std::size_t slot = dynamics_slot_[c];
    double total = 0.0;
    for (std::size_t k = 0; k < components_; ++k) {
      const double* m = &whitened_means_[(c * components_ + k) * n];
      const double* g = &gammas[(slot * components_ + k) * n];
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double b = m[i] + g[i];
        sq += b * b;
      }
      const double norm = std::sqrt(sq);
      norms[k] = std::max(norms[k], norm);
      total += norm;
    }
    if (total > best_total) {
      best_total = total;
      best = c;
    }
  }
  return best;
}

void ParameterSearch::sup_norms(const Vector& x, const Vector& u, double* norms) const { search(x, u, norms); }

SupGamma ParameterSearch::sup_whitened_offsets(const Vector& x, const Vector& u) const {
  SupGamma out;
  out.norms.resize(components_);
  search(x, u, out.norms.data());
  // Per-component maximizers; a second pass keeps the hot path free of copies.
  out.maximizers.assign(components_, Vector());
  const auto n = static_cast<std::size_t>(n_);
  for (std::size_t k = 0; k < components_; ++k) {
    for (std::size_t c = 0; c < candidates_.size() && out.maximizers[k].size() == 0; ++c) {
      const Vector g = gamma_offset(*system_, x, u, dynamics_thetas_[dynamics_slot_[c]]);
      const double* inv = &inverse_factors_[k * n * n];
      const double* m = &whitened_means_[(c * components_ + k) * n];
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j <= i; ++j) acc += inv[i * n + j] * g[static_cast<Eigen::Index>(j)];
        sq += (m[i] + acc) * (m[i] + acc);
      }
      if (std::sqrt(sq) >= out.norms[k] * (1.0 - 1e-12)) out.maximizers[k] = candidates_[c];
    }
  }
  return out;
}

SupGamma sup_gamma_norm(const Subsystem& s, const Vector& x, const Vector& u, const SupSearchOptions& options) {
  return ParameterSearch(s, options).sup_whitened_offsets(x, u);
}

}  // namespace ssr
