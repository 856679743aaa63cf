#include "ssr/certificate.hpp"

#include <algorithm>
#include <set>

#include "ssr/error.hpp"

namespace ssr {

const char* to_string(RelationKind kind) noexcept {
  return kind == RelationKind::Identity ? "identity" : "grid";
}

DeltaProfile DeltaProfile::uniform(double value) {
  DeltaProfile d;
  d.constant = value;
  return d;
}

DeltaProfile DeltaProfile::table(std::size_t rows, std::size_t cols, std::vector<double> values, std::string index) {
  require(values.size() == rows * cols, "delta table size does not match its shape");
  require(!values.empty(), "delta table must not be empty");
  DeltaProfile d;
  d.rows = rows;
  d.cols = cols;
  d.values = std::move(values);
  d.index = std::move(index);
  return d;
}

double DeltaProfile::max() const noexcept {
  return values.empty() ? constant : *std::max_element(values.begin(), values.end());
}

void SsrCertificate::validate() const {
  require(epsilon >= 0.0, "certificate '" + id + "': negative epsilon");
  if (delta.is_constant()) {
    require(delta.constant >= 0.0 && delta.constant <= 1.0, "certificate '" + id + "': delta outside [0, 1]");
  } else {
    require(delta.values.size() == delta.rows * delta.cols, "certificate '" + id + "': delta table shape mismatch");
    for (double v : delta.values) {
      require(v >= 0.0 && v <= 1.0, "certificate '" + id + "': delta entry outside [0, 1]");
    }
  }
  std::set<std::string> seen;
  for (const auto& p : provenance) {
    require(p != id && seen.insert(p).second, "certificate '" + id + "': provenance repeats '" + p + "'");
  }
}

double model_uncertainty_delta(const ParameterSearch& search, const Subsystem& s, const Vector& x, const Vector& u) {
  double norms[16];
  std::vector<double> heap;
  double* out = norms;
  if (search.components() > 16) {
    heap.resize(search.components());
    out = heap.data();
  }
  search.sup_norms(x, u, out);
  double mass = 0.0;
  for (std::size_t k = 0; k < search.components(); ++k) {
    const double w = s.noise.weights[k];
    mass += component_coupled_mass(w, w, out[k]);
  }
  return std::clamp(1.0 - mass, 0.0, 1.0);
}

SsrCertificate model_uncertainty_certificate(const Subsystem& s, const std::vector<StateInput>& points,
                                             const SupSearchOptions& options) {
  require(!points.empty(), "model_uncertainty_certificate needs at least one evaluation point");
  const ParameterSearch search(s, options);
  std::vector<double> values;
  values.reserve(points.size());
  for (const auto& p : points) values.push_back(model_uncertainty_delta(search, s, p.x, p.u));
  SsrCertificate c;
  c.id = s.id + "/model";
  c.kind = RelationKind::Identity;
  c.abstract_model = s.id + "/nominal";
  c.concrete_model = s.id + "/true";
  c.epsilon = 0.0;
  c.delta = DeltaProfile::table(points.size(), 1, std::move(values), s.id + "/points");
  return c;
}

SsrCertificate compose_transitive(const SsrCertificate& a, const SsrCertificate& b) {
  a.validate();
  b.validate();
  require(a.concrete_model == b.abstract_model,
          "compose_transitive: '" + a.id + "' relates to '" + a.concrete_model + "' but '" + b.id + "' starts from '" +
              b.abstract_model + "'");
  SsrCertificate c;
  c.id = a.id + "+" + b.id;
  c.kind = a.kind == RelationKind::Grid || b.kind == RelationKind::Grid ? RelationKind::Grid : RelationKind::Identity;
  c.abstract_model = a.abstract_model;
  c.concrete_model = b.concrete_model;
  c.epsilon = a.epsilon + b.epsilon;
  for (const auto* part : {&a, &b}) {
    c.provenance.push_back(part->id);
    c.provenance.insert(c.provenance.end(), part->provenance.begin(), part->provenance.end());
  }

  if (a.delta.is_constant() && b.delta.is_constant()) {
    c.delta = DeltaProfile::uniform(std::min(1.0, a.delta.constant + b.delta.constant));
  } else {
    const DeltaProfile& shape = a.delta.is_constant() ? b.delta : a.delta;
    if (!a.delta.is_constant() && !b.delta.is_constant()) {
      require(a.delta.rows == b.delta.rows && a.delta.cols == b.delta.cols && a.delta.index == b.delta.index,
              "compose_transitive: delta tables of '" + a.id + "' and '" + b.id + "' have incompatible index sets");
    }
    std::vector<double> values(shape.values.size());
    for (std::size_t r = 0; r < shape.rows; ++r) {
      for (std::size_t col = 0; col < shape.cols; ++col) {
        values[r * shape.cols + col] = std::min(1.0, a.delta.at(r, col) + b.delta.at(r, col));
      }
    }
    c.delta = DeltaProfile::table(shape.rows, shape.cols, std::move(values), shape.index);
  }
  c.validate();
  return c;
}

}  // namespace ssr
