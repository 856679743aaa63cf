#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssr/certificate.hpp"
#include "ssr/subsystem.hpp"
#include "ssr/transition.hpp"

namespace ssr {

/// Uniform partition of [lower, upper] into `count` cells.
struct Axis {
  double lower = 0.0;
  double upper = 1.0;
  int count = 1;

  double width() const noexcept { return (upper - lower) / count; }
  double edge(int i) const noexcept { return i == count ? upper : lower + i * width(); }
  double center(int i) const noexcept { return 0.5 * (edge(i) + edge(i + 1)); }
  /// Cell containing x (the upper bound belongs to the last cell), or -1.
  int locate(double x) const noexcept;
};

/// Evenly spaced points over a box, endpoints included; one point per axis
/// means the center. A zero-dimensional box yields one empty point.
struct Lattice {
  Box box;
  std::vector<int> counts;
  std::vector<Vector> points;

  std::size_t size() const noexcept { return points.size(); }
  /// Distance between neighbouring points along axis d (0 for one point).
  double spacing(int d) const;
  /// Index of the closest lattice point (per axis rounding).
  std::size_t nearest(const Vector& v) const;
};

Lattice make_lattice(const Box& box, const std::vector<int>& counts);

struct GridOptions {
  std::vector<int> cells;
  std::vector<int> inputs;
  /// Points per internal-input axis; empty when there are none.
  std::vector<int> internal;
  /// Per-axis Gaussian window half-width in standard deviations. Mass
  /// beyond the window is assigned to the sink.
  double window = 8.3;
};

/// Rectangular abstraction of the nominal model. Rows are indexed by
/// (cell, input, disturbance) where disturbances are internal-input lattice
/// points. Transition kernels are stored per row, component and axis as
/// windows of one-dimensional cell probabilities (diagonal covariances).
class GridAbstraction : public TransitionModel {
 public:
  /// Geometry and lattices only; call fill_transitions before use as a
  /// transition model.
  static GridAbstraction build(const Subsystem& s, const GridOptions& options);

  /// Computes the kernel at the nominal parameter. Throws
  /// UnsupportedConfiguration for non-diagonal covariances.
  void fill_transitions(const Subsystem& s);
  bool has_transitions() const noexcept { return !factors_.empty(); }

  std::size_t cells() const noexcept { return cells_; }
  int dimension() const noexcept { return static_cast<int>(axes_.size()); }
  const std::vector<Axis>& axes() const noexcept { return axes_; }
  const Lattice& input_lattice() const noexcept { return inputs_; }
  const Lattice& internal_lattice() const noexcept { return internal_; }
  const GridOptions& options() const noexcept { return options_; }

  std::vector<int> multi_index(std::size_t cell) const;
  std::size_t flat_index(const std::vector<int>& multi) const;
  Vector representative(std::size_t cell) const;
  Box cell_box(std::size_t cell) const;
  std::optional<std::size_t> locate(const Vector& x) const;

  /// Concatenated input [u; v] for lattice indices.
  Vector joint_input(std::size_t input, std::size_t disturbance) const;

  /// Name of the (cell, input x disturbance) index set for delta tables.
  std::string signature() const { return signature_; }

  std::size_t states() const override { return cells_; }
  std::size_t inputs() const override { return inputs_.size(); }
  std::size_t disturbances() const override { return internal_.size(); }
  void expectations(std::size_t state, std::size_t input, std::size_t disturbance,
                    const std::vector<const double*>& values, double* out) const override;
  std::vector<double> row(std::size_t state, std::size_t input, std::size_t disturbance) const override;

  /// Points searched for suprema over a cell: all corners and the center.
  std::vector<Vector> cell_probe_points(std::size_t cell) const;
  /// Internal inputs within half a lattice spacing of point `disturbance`
  /// (clamped to the internal box): per-axis {-h, 0, +h} combinations.
  std::vector<Vector> internal_probe_points(std::size_t disturbance) const;

 private:
  struct Factor {
    int start = 0;
    int length = 0;
    std::size_t offset = 0;
  };

  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t cells_ = 0;
  Lattice inputs_;
  Lattice internal_;
  GridOptions options_;
  std::string signature_;
  std::vector<double> weights_;
  std::size_t components_ = 0;
  // factors_[(row * K + k) * n + d], probabilities in pool_.
  std::vector<Factor> factors_;
  std::vector<double> pool_;

  std::size_t row_index(std::size_t state, std::size_t input, std::size_t disturbance) const;
};

/// Grid-relation certificate (x in cell(x_hat)) between the grid and the
/// nominal model: epsilon is the largest output deviation within a cell,
/// delta the per-component shifted-noise deficit maximised over the cell
/// probes and internal-input probes.
SsrCertificate discretization_certificate(const GridAbstraction& g, const Subsystem& s);

/// Identity-relation certificate between the nominal and the true model,
/// tabulated over the grid's (cell, input x disturbance) index with the
/// supremum over cell and internal-input probes.
SsrCertificate grid_model_uncertainty_certificate(const GridAbstraction& g, const Subsystem& s,
                                                  const SupSearchOptions& options = {});

}  // namespace ssr
