#include "ssr/network.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "ssr/error.hpp"

namespace ssr {

const char* to_string(Topology t) noexcept { return t == Topology::Cascaded ? "cascaded" : "cyclic"; }

Network::Network(std::vector<std::string> ids, std::vector<Edge> edges, std::vector<std::optional<Box>> safe_sets)
    : ids_(std::move(ids)), edges_(std::move(edges)), safe_sets_(std::move(safe_sets)) {
  if (safe_sets_.empty()) safe_sets_.resize(ids_.size());
  require(safe_sets_.size() == ids_.size(), "one safe-set slot per node");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) require(ids_[i] != ids_[j], "duplicate subsystem id '" + ids_[i] + "'");
  }
  for (const auto& e : edges_) require(e.from < ids_.size() && e.to < ids_.size(), "edge endpoint out of range");
}

Network Network::from_subsystems(const std::vector<Subsystem>& subsystems, const std::map<std::string, Box>& safe_sets) {
  std::vector<std::string> ids;
  for (const auto& s : subsystems) ids.push_back(s.id);
  std::vector<std::optional<Box>> safe(ids.size());
  for (const auto& [id, box] : safe_sets) {
    const auto it = std::find(ids.begin(), ids.end(), id);
    require(it != ids.end(), "safe set for unknown subsystem '" + id + "'");
    safe[static_cast<std::size_t>(it - ids.begin())] = box;
  }
  std::vector<Edge> edges;
  for (std::size_t to = 0; to < subsystems.size(); ++to) {
    const auto& internal = subsystems[to].internal_inputs;
    for (std::size_t slot = 0; slot < internal.size(); ++slot) {
      const auto it = std::find(ids.begin(), ids.end(), internal[slot].source);
      require(it != ids.end(),
              "subsystem '" + ids[to] + "' reads from unknown subsystem '" + internal[slot].source + "'");
      edges.push_back({static_cast<std::size_t>(it - ids.begin()), to, internal[slot].output, slot});
    }
  }
  return Network(std::move(ids), std::move(edges), std::move(safe));
}

std::size_t Network::index(const std::string& id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  require(it != ids_.end(), "unknown subsystem '" + id + "'");
  return static_cast<std::size_t>(it - ids_.begin());
}

std::vector<std::size_t> Network::predecessors(std::size_t node) const {
  std::vector<std::size_t> out;
  for (const auto& e : edges_) {
    if (e.to == node) out.push_back(e.from);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool Network::reaches(std::size_t from, std::size_t to) const {
  std::vector<char> seen(ids_.size());
  std::vector<std::size_t> stack{from};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (v == to) return true;
    for (const auto& e : edges_) {
      if (e.from == v && !seen[e.to]) {
        seen[e.to] = 1;
        stack.push_back(e.to);
      }
    }
  }
  return false;
}

bool Network::on_cycle(const Edge& e) const { return reaches(e.to, e.from); }

Topology Network::topology() const {
  for (const auto& e : edges_) {
    if (on_cycle(e)) return Topology::Cyclic;
  }
  return Topology::Cascaded;
}

std::vector<std::size_t> Network::order() const {
  require(topology() == Topology::Cascaded, "cyclic networks have no topological order");
  std::vector<std::size_t> indegree(ids_.size(), 0), out;
  for (const auto& e : edges_) ++indegree[e.to];
  // Kahn's algorithm, lowest index first for a stable order.
  while (out.size() < ids_.size()) {
    for (std::size_t v = 0; v < ids_.size(); ++v) {
      if (indegree[v] != 0) continue;
      indegree[v] = static_cast<std::size_t>(-1);
      out.push_back(v);
      for (const auto& e : edges_) {
        if (e.from == v) --indegree[e.to];
      }
      break;
    }
  }
  return out;
}

InterconnectionReport validate_interconnection(const Network& n, const std::vector<Subsystem>& subsystems) {
  InterconnectionReport r;
  if (subsystems.size() != n.size()) {
    r.ok = false;
    r.violations.push_back("network has " + std::to_string(n.size()) + " nodes but " +
                           std::to_string(subsystems.size()) + " subsystems were given");
    return r;
  }
  for (const auto& e : n.edges()) {
    const Subsystem& from = subsystems[e.from];
    const Subsystem& to = subsystems[e.to];
    const std::string name = from.id + " -> " + to.id + " (output " + std::to_string(e.output) + ", slot " +
                             std::to_string(e.slot) + ")";
    if (e.output < 0 || e.output >= from.output_box.dimension()) {
      r.violations.push_back(name + ": sender has no such output coordinate");
      continue;
    }
    if (e.slot >= to.internal_inputs.size() || to.internal_box.dimension() <= static_cast<Eigen::Index>(e.slot)) {
      r.violations.push_back(name + ": receiver has no such internal input");
      continue;
    }
    const auto& safe = n.safe_set(e.from);
    const Box& sent = safe ? *safe : from.output_box;
    if (sent.dimension() != from.output_box.dimension()) {
      r.violations.push_back(name + ": safe set dimension differs from the sender's output dimension");
      continue;
    }
    const double lo = sent.lower[e.output], hi = sent.upper[e.output];
    const double rlo = to.internal_box.lower[static_cast<Eigen::Index>(e.slot)];
    const double rhi = to.internal_box.upper[static_cast<Eigen::Index>(e.slot)];
    std::ostringstream range;
    range << "[" << lo << ", " << hi << "] vs [" << rlo << ", " << rhi << "]";
    if (lo < rlo - 1e-12 || hi > rhi + 1e-12) {
      r.violations.push_back(name + ": sent range " + range.str() + " is not inside the receiver's internal range");
    } else {
      r.notes.push_back(name + ": " + range.str() + (safe ? " (from the declared safe set)" : " (from the output box)"));
    }
  }
  r.notes.push_back(
      "internal inputs use the identity interface, so equal abstract and concrete sender states give equal internal inputs");
  r.ok = r.violations.empty();
  return r;
}

SsrCertificate induced_ssr(const std::vector<SsrCertificate>& certificates, std::size_t max_entries) {
  require(!certificates.empty(), "induced_ssr needs at least one certificate");
  if (certificates.size() == 1) return certificates.front();
  SsrCertificate c;
  c.kind = RelationKind::Identity;
  std::size_t rows = 1, cols = 1;
  std::string index;
  std::vector<const SsrCertificate*> tables;
  for (const auto& part : certificates) {
    part.validate();
    c.id += (c.id.empty() ? "" : "*") + part.id;
    c.abstract_model += (c.abstract_model.empty() ? "" : "*") + part.abstract_model;
    c.concrete_model += (c.concrete_model.empty() ? "" : "*") + part.concrete_model;
    if (part.kind == RelationKind::Grid) c.kind = RelationKind::Grid;
    for (const auto& id : part.provenance) c.provenance.push_back(id);
    c.provenance.push_back(part.id);
    if (!part.delta.is_constant()) {
      if (rows > max_entries / part.delta.rows || cols > max_entries / part.delta.cols ||
          rows * part.delta.rows * cols * part.delta.cols > max_entries) {
        throw UnsupportedConfiguration("induced delta table would exceed " + std::to_string(max_entries) + " entries");
      }
      rows *= part.delta.rows;
      cols *= part.delta.cols;
      index += (index.empty() ? "" : "*") + part.delta.index;
      tables.push_back(&part);
    }
  }
  std::sort(c.provenance.begin(), c.provenance.end());
  c.provenance.erase(std::unique(c.provenance.begin(), c.provenance.end()), c.provenance.end());

  // Sums and products run in a canonical order so that permuting the
  // inputs gives bit-identical results.
  std::vector<const SsrCertificate*> canon;
  for (const auto& part : certificates) canon.push_back(&part);
  std::sort(canon.begin(), canon.end(), [](const SsrCertificate* a, const SsrCertificate* b) {
    return std::tie(a->id, a->epsilon, a->delta.constant) < std::tie(b->id, b->epsilon, b->delta.constant);
  });
  double constant_keep = 1.0;
  for (const auto* part : canon) {
    c.epsilon += part->epsilon;
    if (part->delta.is_constant()) constant_keep *= 1.0 - part->delta.constant;
  }
  if (tables.empty()) {
    c.delta = DeltaProfile::uniform(1.0 - constant_keep);
  } else {
    std::vector<double> values(rows * cols);
    std::vector<std::size_t> r_idx(tables.size()), c_idx(tables.size());
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t rest = r;
      for (std::size_t t = tables.size(); t-- > 0;) {
        r_idx[t] = rest % tables[t]->delta.rows;
        rest /= tables[t]->delta.rows;
      }
      for (std::size_t col = 0; col < cols; ++col) {
        std::size_t crest = col;
        double keep = constant_keep;
        for (std::size_t t = tables.size(); t-- > 0;) {
          c_idx[t] = crest % tables[t]->delta.cols;
          crest /= tables[t]->delta.cols;
          keep *= 1.0 - tables[t]->delta.at(r_idx[t], c_idx[t]);
        }
        values[r * cols + col] = 1.0 - keep;
      }
    }
    c.delta = DeltaProfile::table(rows, cols, std::move(values), index);
  }
  c.validate();
  return c;
}

namespace {

GlobalBound product(const Network& n, const std::vector<double>& local, Topology t, std::string audit) {
  require(local.size() == n.size(), "one local bound per subsystem");
  GlobalBound g;
  g.topology = t;
  g.ids = n.ids();
  g.local = local;
  g.combined = 1.0;
  for (double b : local) {
    require(b >= 0.0 && b <= 1.0, "local bounds must lie in [0, 1]");
    g.combined *= b;
  }
  g.audit = std::move(audit);
  return g;
}

}  // namespace

GlobalBound cascaded_bound(const Network& n, const std::vector<double>& local) {
  require(n.topology() == Topology::Cascaded, "network has a cycle; use cyclic_bound");
  return product(n, local, Topology::Cascaded,
                 "cascaded product of local bounds; each local bound is worst case over its predecessors' "
                 "admissible outputs (per-step adversarial internal inputs)");
}

GlobalBound cyclic_bound(const Network& n, const std::vector<double>& local) {
  for (const auto& e : n.edges()) {
    require(!n.on_cycle(e) || n.safe_set(e.from).has_value(),
            "edge " + n.ids()[e.from] + " -> " + n.ids()[e.to] + " lies on a cycle but its sender declares no safe set");
  }
  return product(n, local, Topology::Cyclic,
                 "cyclic product of local bounds for the local specification together with staying in the "
                 "sender's safe set; internal inputs adversarial over the neighbours' safe sets");
}

GlobalBound global_bound(const Network& n, const std::vector<double>& local) {
  return n.topology() == Topology::Cascaded ? cascaded_bound(n, local) : cyclic_bound(n, local);
}

}  // namespace ssr
