#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ssr/certificate.hpp"
#include "ssr/subsystem.hpp"

namespace ssr {

enum class Topology { Cascaded, Cyclic };

const char* to_string(Topology t) noexcept;

/// Internal input `slot` of node `to` reads output coordinate `output` of
/// node `from`.
struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  int output = 0;
  std::size_t slot = 0;
};

/// Interconnection graph. Safe sets C are boxes in a node's output space
/// that bound what it may send to its successors.
class Network {
 public:
  Network() = default;
  Network(std::vector<std::string> ids, std::vector<Edge> edges, std::vector<std::optional<Box>> safe_sets = {});

  /// Edges from the subsystems' internal inputs. Throws ContractViolation
  /// for an unknown source.
  static Network from_subsystems(const std::vector<Subsystem>& subsystems,
                                 const std::map<std::string, Box>& safe_sets = {});

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::size_t index(const std::string& id) const;
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::optional<Box>& safe_set(std::size_t node) const { return safe_sets_.at(node); }
  std::vector<std::size_t> predecessors(std::size_t node) const;

  /// Cyclic as soon as any directed cycle (self-loops included) exists.
  Topology topology() const;
  /// Nodes ordered so that every edge points forward. Throws for cyclic
  /// networks.
  std::vector<std::size_t> order() const;
  /// Whether the edge lies on a directed cycle.
  bool on_cycle(const Edge& e) const;

 private:
  std::vector<std::string> ids_;
  std::vector<Edge> edges_;
  std::vector<std::optional<Box>> safe_sets_;

  bool reaches(std::size_t from, std::size_t to) const;
};

struct InterconnectionReport {
  bool ok = true;
  std::vector<std::string> violations;
  std::vector<std::string> notes;
};

/// Checks every edge: output coordinate exists, and the set the sender may
/// emit (its safe set when declared, otherwise its output box) projected on
/// that coordinate lies inside the receiver's internal-input range.
InterconnectionReport validate_interconnection(const Network& n, const std::vector<Subsystem>& subsystems);

/// Certificate of the interconnected abstraction: epsilons add and
/// delta = 1 - prod(1 - delta_i). Tables combine over the product of their
/// index sets (first certificate slowest); constants broadcast. Throws
/// UnsupportedConfiguration when the product table would exceed
/// `max_entries`.
SsrCertificate induced_ssr(const std::vector<SsrCertificate>& certificates, std::size_t max_entries = 10000000);

struct GlobalBound {
  Topology topology = Topology::Cascaded;
  std::vector<std::string> ids;
  std::vector<double> local;
  double combined = 0.0;
  std::string audit;
};

/// Product of local bounds that are already worst case over the
/// predecessors' admissible outputs. Refuses cyclic networks.
GlobalBound cascaded_bound(const Network& n, const std::vector<double>& local);

/// Product of local bounds for psi_i together with staying in C_i. Every
/// edge on a cycle needs a safe set at its sender.
GlobalBound cyclic_bound(const Network& n, const std::vector<double>& local);

/// Picks cascaded_bound or cyclic_bound from the topology.
GlobalBound global_bound(const Network& n, const std::vector<double>& local);

}  // namespace ssr
