#include "ssr/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ssr/error.hpp"

namespace ssr {

int Axis::locate(double x) const noexcept {
  if (!(x >= lower && x <= upper)) return -1;
  const int i = static_cast<int>(std::floor((x - lower) / width()));
  return std::clamp(i, 0, count - 1);
}

double Lattice::spacing(int d) const {
  const int m = counts[static_cast<std::size_t>(d)];
  return m <= 1 ? 0.0 : (box.upper[d] - box.lower[d]) / (m - 1);
}

std::size_t Lattice::nearest(const Vector& v) const {
  require(v.size() == box.dimension(), "lattice lookup: dimension mismatch");
  std::size_t index = 0;
  for (Eigen::Index d = 0; d < v.size(); ++d) {
    const int m = counts[static_cast<std::size_t>(d)];
    int i = 0;
    if (m > 1) {
      i = static_cast<int>(std::lround((v[d] - box.lower[d]) / spacing(static_cast<int>(d))));
      i = std::clamp(i, 0, m - 1);
    }
    index = index * static_cast<std::size_t>(m) + static_cast<std::size_t>(i);
  }
  return index;
}

Lattice make_lattice(const Box& box, const std::vector<int>& counts) {
  require(static_cast<Eigen::Index>(counts.size()) == box.dimension(), "lattice counts must match the box dimension");
  Lattice l;
  l.box = box;
  l.counts = counts;
  std::size_t total = 1;
  for (int c : counts) {
    require(c >= 1, "lattice needs at least one point per axis");
    total *= static_cast<std::size_t>(c);
  }
  const auto n = box.dimension();
  std::vector<int> idx(counts.size(), 0);
  for (std::size_t p = 0; p < total; ++p) {
    // Last axis varies fastest.
    std::size_t rest = p;
    for (Eigen::Index d = n - 1; d >= 0; --d) {
      const auto m = static_cast<std::size_t>(counts[static_cast<std::size_t>(d)]);
      idx[static_cast<std::size_t>(d)] = static_cast<int>(rest % m);
      rest /= m;
    }
    Vector v(n);
    for (Eigen::Index d = 0; d < n; ++d) {
      const int m = counts[static_cast<std::size_t>(d)];
      const int i = idx[static_cast<std::size_t>(d)];
      v[d] = m == 1 ? 0.5 * (box.lower[d] + box.upper[d])
                    : i == m - 1 ? box.upper[d] : box.lower[d] + i * (box.upper[d] - box.lower[d]) / (m - 1);
    }
    l.points.push_back(std::move(v));
  }
  return l;
}

namespace {

// Phi(b) - Phi(a) for a <= b without cancellation in the upper tail.
double normal_mass(double a, double b) {
  return a > 0.0 ? normal_cdf(-a) - normal_cdf(-b) : normal_cdf(b) - normal_cdf(a);
}

std::string join_counts(const std::vector<int>& counts) {
  std::ostringstream os;
  for (std::size_t i = 0; i < counts.size(); ++i) os << (i ? "x" : "") << counts[i];
  if (counts.empty()) os << "1";
  return os.str();
}

}  // namespace

GridAbstraction GridAbstraction::build(const Subsystem& s, const GridOptions& options) {
  require(static_cast<int>(options.cells.size()) == s.state_dim, "grid: one cell count per state dimension");
  require(static_cast<int>(options.inputs.size()) == s.external_inputs, "grid: one input count per external input");
  require(options.internal.size() == s.internal_inputs.size(), "grid: one point count per internal input");
  require(s.state_box.has_volume(), "grid: state box has zero volume");
  require(options.window > 0.0, "grid: window must be positive");

  GridAbstraction g;
  g.options_ = options;
  g.cells_ = 1;
  for (int d = 0; d < s.state_dim; ++d) {
    const int c = options.cells[static_cast<std::size_t>(d)];
    require(c >= 1, "grid: cell counts must be positive");
    g.axes_.push_back({s.state_box.lower[d], s.state_box.upper[d], c});
    g.cells_ *= static_cast<std::size_t>(c);
  }
  g.strides_.assign(g.axes_.size(), 1);
  for (int d = s.state_dim - 2; d >= 0; --d) {
    g.strides_[static_cast<std::size_t>(d)] =
        g.strides_[static_cast<std::size_t>(d) + 1] * static_cast<std::size_t>(g.axes_[static_cast<std::size_t>(d) + 1].count);
  }
  if (s.external_inputs > 0) {
    for (Eigen::Index d = 0; d < s.input_box.dimension(); ++d) {
      require(options.inputs[static_cast<std::size_t>(d)] == 1 || s.input_box.upper[d] > s.input_box.lower[d],
              "grid: input box has zero width along an axis with several points");
    }
  }
  g.inputs_ = make_lattice(s.input_box, options.inputs);
  g.internal_ = make_lattice(s.internal_box, options.internal);
  g.signature_ = s.id + "/grid:" + join_counts(options.cells) + "/u:" + join_counts(options.inputs) + "/v:" +
                 join_counts(options.internal);
  return g;
}

std::vector<int> GridAbstraction::multi_index(std::size_t cell) const {
  std::vector<int> out(axes_.size());
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    out[d] = static_cast<int>(cell / strides_[d]);
    cell %= strides_[d];
  }
  return out;
}

std::size_t GridAbstraction::flat_index(const std::vector<int>& multi) const {
  std::size_t cell = 0;
  for (std::size_t d = 0; d < axes_.size(); ++d) cell += static_cast<std::size_t>(multi[d]) * strides_[d];
  return cell;
}

Vector GridAbstraction::representative(std::size_t cell) const {
  const auto idx = multi_index(cell);
  Vector x(dimension());
  for (std::size_t d = 0; d < axes_.size(); ++d) x[static_cast<Eigen::Index>(d)] = axes_[d].center(idx[d]);
  return x;
}

Box GridAbstraction::cell_box(std::size_t cell) const {
  const auto idx = multi_index(cell);
  Vector lo(dimension()), hi(dimension());
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    lo[static_cast<Eigen::Index>(d)] = axes_[d].edge(idx[d]);
    hi[static_cast<Eigen::Index>(d)] = axes_[d].edge(idx[d] + 1);
  }
  return Box(lo, hi);
}

std::optional<std::size_t> GridAbstraction::locate(const Vector& x) const {
  require(x.size() == dimension(), "grid lookup: dimension mismatch");
  std::size_t cell = 0;
  for (std::size_t d = 0; d < axes_.size(); ++d) {
    const int i = axes_[d].locate(x[static_cast<Eigen::Index>(d)]);
    if (i < 0) return std::nullopt;
    cell += static_cast<std::size_t>(i) * strides_[d];
  }
  return cell;
}

Vector GridAbstraction::joint_input(std::size_t input, std::size_t disturbance) const {
  const Vector& u = inputs_.points.at(input);
  const Vector& v = internal_.points.at(disturbance);
  Vector joint(u.size() + v.size());
  joint << u, v;
  return joint;
}

std::size_t GridAbstraction::row_index(std::size_t state, std::size_t input, std::size_t disturbance) const {
  require(state < cells_ && input < inputs_.size() && disturbance < internal_.size(), "grid row index out of range");
  return (state * inputs_.size() + input) * internal_.size() + disturbance;
}

void GridAbstraction::fill_transitions(const Subsystem& s) {
  const GaussianMixture noise = s.nominal_noise();
  if (!noise.is_diagonal()) {
    throw UnsupportedConfiguration("subsystem '" + s.id +
                                   "': grid transitions need diagonal noise covariances (axis-aligned cells)");
  }
  weights_ = noise.weights();
  components_ = noise.size();
  const auto n = axes_.size();
  std::vector<Vector> sigma;
  for (std::size_t k = 0; k < components_; ++k) sigma.push_back(noise.standard_deviations(k));

  const std::size_t rows = cells_ * inputs_.size() * internal_.size();
  factors_.assign(rows * components_ * n, Factor{});
  pool_.clear();
  for (std::size_t cell = 0; cell < cells_; ++cell) {
    const Vector x = representative(cell);
    for (std::size_t a = 0; a < inputs_.size(); ++a) {
      for (std::size_t v = 0; v < internal_.size(); ++v) {
        const Vector f = eval_dynamics(s, x, joint_input(a, v), s.theta_nominal);
        const std::size_t r = row_index(cell, a, v);
        for (std::size_t k = 0; k < components_; ++k) {
          for (std::size_t d = 0; d < n; ++d) {
            const auto di = static_cast<Eigen::Index>(d);
            const double mean = f[di] + noise.means()[k][di];
            const double sd = sigma[k][di];
            const Axis& axis = axes_[d];
            Factor& fac = factors_[(r * components_ + k) * n + d];
            const double lo = mean - options_.window * sd;
            const double hi = mean + options_.window * sd;
            if (hi < axis.lower || lo > axis.upper) continue;  // whole row goes to the sink
            const int first = std::clamp(static_cast<int>(std::floor((lo - axis.lower) / axis.width())), 0, axis.count - 1);
            const int last = std::clamp(static_cast<int>(std::floor((hi - axis.lower) / axis.width())), 0, axis.count - 1);
            fac.start = first;
            fac.length = last - first + 1;
            fac.offset = pool_.size();
            for (int i = first; i <= last; ++i) {
              pool_.push_back(normal_mass((axis.edge(i) - mean) / sd, (axis.edge(i + 1) - mean) / sd));
            }
          }
        }
      }
    }
  }
}

void GridAbstraction::expectations(std::size_t state, std::size_t input, std::size_t disturbance,
                                   const std::vector<const double*>& values, double* out) const {
  require(has_transitions(), "grid transitions have not been computed");
  const std::size_t r = row_index(state, input, disturbance);
  const std::size_t n = axes_.size();
  const std::size_t m = values.size();
  std::fill(out, out + m, 0.0);
  int idx[8];
  require(n <= 8, "grid dimension above 8 is not supported");
  for (std::size_t k = 0; k < components_; ++k) {
    const Factor* f = &factors_[(r * components_ + k) * n];
    bool empty = false;
    for (std::size_t d = 0; d < n; ++d) empty = empty || f[d].length == 0;
    if (empty) continue;
    // Odometer over all axes but the last; the last axis is a dot product.
    for (std::size_t d = 0; d + 1 < n; ++d) idx[d] = 0;
    const Factor& inner = f[n - 1];
    const double* pin = &pool_[inner.offset];
    while (true) {
      double w = weights_[k];
      std::size_t base = 0;
      for (std::size_t d = 0; d + 1 < n; ++d) {
        w *= pool_[f[d].offset + static_cast<std::size_t>(idx[d])];
        base += static_cast<std::size_t>(f[d].start + idx[d]) * strides_[d];
      }
      base += static_cast<std::size_t>(inner.start);
      for (std::size_t j = 0; j < m; ++j) {
        const double* target = values[j] + base;
        double acc = 0.0;
        for (int i = 0; i < inner.length; ++i) acc += pin[i] * target[i];
        out[j] += w * acc;
      }
      bool done = true;
      for (std::size_t d = n - 1; d-- > 0;) {
        if (++idx[d] < f[d].length) {
          done = false;
          break;
        }
        idx[d] = 0;
      }
      if (done) break;
    }
  }
}

std::vector<double> GridAbstraction::row(std::size_t state, std::size_t input, std::size_t disturbance) const {
  // One expectation per unit vector would be quadratic; expand directly.
  std::vector<double> dense(cells_ + 1, 0.0);
  std::vector<double> indicator(cells_, 0.0);
  std::vector<const double*> one{indicator.data()};
  double total = 0.0;
  for (std::size_t c = 0; c < cells_; ++c) {
    indicator[c] = 1.0;
    expectations(state, input, disturbance, one, &dense[c]);
    indicator[c] = 0.0;
    total += dense[c];
  }
  dense[cells_] = std::max(0.0, 1.0 - total);
  return dense;
}

std::vector<Vector> GridAbstraction::cell_probe_points(std::size_t cell) const {
  const Box b = cell_box(cell);
  const auto n = b.dimension();
  std::vector<Vector> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    Vector x(n);
    for (Eigen::Index d = 0; d < n; ++d) x[d] = (mask >> d) & 1u ? b.upper[d] : b.lower[d];
    out.push_back(std::move(x));
  }
  out.push_back(b.center());
  return out;
}

std::vector<Vector> GridAbstraction::internal_probe_points(std::size_t disturbance) const {
  const Vector& center = internal_.points.at(disturbance);
  const auto n = center.size();
  std::vector<Vector> out;
  std::size_t total = 1;
  for (Eigen::Index d = 0; d < n; ++d) total *= 3;
  for (std::size_t p = 0; p < total; ++p) {
    Vector v = center;
    std::size_t rest = p;
    for (Eigen::Index d = 0; d < n; ++d) {
      const int step = static_cast<int>(rest % 3) - 1;
      rest /= 3;
      const double h = 0.5 * internal_.spacing(static_cast<int>(d));
      v[d] = std::clamp(center[d] + step * h, internal_.box.lower[d], internal_.box.upper[d]);
    }
    out.push_back(std::move(v));
  }
  return out;
}

SsrCertificate discretization_certificate(const GridAbstraction& g, const Subsystem& s) {
  const GaussianMixture noise = s.nominal_noise();
  const std::size_t K = noise.size();
  std::vector<Matrix> inverse;
  for (std::size_t k = 0; k < K; ++k) {
    inverse.push_back(noise.cholesky(k).triangularView<Eigen::Lower>().solve(Matrix::Identity(s.state_dim, s.state_dim)));
  }

  // Output deviation within a cell is the same for every cell of a uniform grid.
  double epsilon = 0.0;
  {
    Vector half(g.dimension());
    for (int d = 0; d < g.dimension(); ++d) half[d] = 0.5 * g.axes()[static_cast<std::size_t>(d)].width();
    for (std::size_t mask = 0; mask < (std::size_t{1} << g.dimension()); ++mask) {
      Vector dev = half;
      for (int d = 0; d < g.dimension(); ++d) {
        if ((mask >> d) & 1u) dev[d] = -dev[d];
      }
      epsilon = std::max(epsilon, (s.output.matrix * dev).norm());
    }
  }

  const std::size_t cols = g.inputs() * g.disturbances();
  std::vector<double> values(g.cells() * cols, 0.0);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    const Vector xhat = g.representative(cell);
    const auto probes = g.cell_probe_points(cell);
    for (std::size_t a = 0; a < g.inputs(); ++a) {
      for (std::size_t v = 0; v < g.disturbances(); ++v) {
        const Vector uhat = g.joint_input(a, v);
        const Vector fhat = eval_dynamics(s, xhat, uhat, s.theta_nominal);
        std::vector<double> worst(K, 0.0);
        for (const Vector& vin : g.internal_probe_points(v)) {
          Vector u = uhat;
          u.tail(vin.size()) = vin;
          for (const Vector& x : probes) {
            const Vector diff = eval_dynamics(s, x, u, s.theta_nominal) - fhat;
            for (std::size_t k = 0; k < K; ++k) {
              worst[k] = std::max(worst[k], (inverse[k].triangularView<Eigen::Lower>() * diff).norm());
            }
          }
        }
        double deficit = 0.0;
        for (std::size_t k = 0; k < K; ++k) deficit += noise.weights()[k] * (1.0 - 2.0 * normal_cdf(-0.5 * worst[k]));
        values[cell * cols + a * g.disturbances() + v] = std::clamp(deficit, 0.0, 1.0);
      }
    }
  }

  SsrCertificate c;
  c.id = s.id + "/grid";
  c.kind = RelationKind::Grid;
  c.abstract_model = s.id + "/grid";
  c.concrete_model = s.id + "/nominal";
  c.epsilon = epsilon;
  c.delta = DeltaProfile::table(g.cells(), cols, std::move(values), g.signature());
  c.validate();
  return c;
}

SsrCertificate grid_model_uncertainty_certificate(const GridAbstraction& g, const Subsystem& s,
                                                  const SupSearchOptions& options) {
  const ParameterSearch search(s, options);
  const std::size_t cols = g.inputs() * g.disturbances();
  std::vector<double> values(g.cells() * cols, 0.0);
  for (std::size_t cell = 0; cell < g.cells(); ++cell) {
    const auto probes = g.cell_probe_points(cell);
    for (std::size_t a = 0; a < g.inputs(); ++a) {
      for (std::size_t v = 0; v < g.disturbances(); ++v) {
        Vector u = g.joint_input(a, v);
        double worst = 0.0;
        for (const Vector& vin : g.internal_probe_points(v)) {
          u.tail(vin.size()) = vin;
          for (const Vector& x : probes) worst = std::max(worst, model_uncertainty_delta(search, s, x, u));
        }
        values[cell * cols + a * g.disturbances() + v] = worst;
      }
    }
  }
  SsrCertificate c;
  c.id = s.id + "/model";
  c.kind = RelationKind::Identity;
  c.abstract_model = s.id + "/nominal";
  c.concrete_model = s.id + "/true";
  c.epsilon = 0.0;
  c.delta = DeltaProfile::table(g.cells(), cols, std::move(values), g.signature());
  c.validate();
  return c;
}

}  // namespace ssr
