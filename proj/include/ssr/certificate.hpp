#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ssr/subsystem.hpp"

namespace ssr {

enum class RelationKind { Identity, Grid };

const char* to_string(RelationKind kind) noexcept;

/// A coupling deficit that is either one constant or a dense table over
/// (abstract state, abstract action) pairs. `index` names the index set so
/// that tables built over different grids are never mixed.
struct DeltaProfile {
  double constant = 0.0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::string index;

  static DeltaProfile uniform(double value);
  static DeltaProfile table(std::size_t rows, std::size_t cols, std::vector<double> values, std::string index);

  bool is_constant() const noexcept { return values.empty(); }
  double at(std::size_t row, std::size_t col) const noexcept {
    return values.empty() ? constant : values[row * cols + col];
  }
  double max() const noexcept;
};

/// (epsilon, delta) sub-simulation relation between an abstract model and
/// a concrete one.
struct SsrCertificate {
  std::string id;
  RelationKind kind = RelationKind::Identity;
  /// Names of the related models: `abstract_model` is simulated by
  /// `concrete_model`.
  std::string abstract_model;
  std::string concrete_model;
  double epsilon = 0.0;
  DeltaProfile delta;
  /// Ids of the certificates this one was composed from (empty for leaves).
  std::vector<std::string> provenance;

  /// epsilon >= 0, delta entries in [0, 1], table shape consistent,
  /// provenance free of repeats.
  void validate() const;
};

struct StateInput {
  Vector x;
  Vector u;
};

/// Deficit of the identity relation between the nominal model and the true
/// model at one (x, u): 1 - sum_k m_k with every component evaluated at its
/// own worst-case offset over the parameter box. Since the coupled mass of a
/// component decreases in the offset, this bounds the supremum over theta.
double model_uncertainty_delta(const ParameterSearch& search, const Subsystem& s, const Vector& x, const Vector& u);

/// Identity-relation certificate with epsilon = 0 and one delta entry per
/// evaluation point (a rows x 1 table).
SsrCertificate model_uncertainty_certificate(const Subsystem& s, const std::vector<StateInput>& points,
                                             const SupSearchOptions& options = {});

/// Chains a (abstract -> middle) with b (middle -> concrete): epsilons and
/// deltas add, deltas are clamped to [0, 1]. Tables broadcast against
/// constants; two tables must share shape and index.
SsrCertificate compose_transitive(const SsrCertificate& a, const SsrCertificate& b);

}  // namespace ssr
