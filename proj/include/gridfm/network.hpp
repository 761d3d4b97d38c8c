#pragma once

// Electrical data model. Every quantity is per-unit on the network's
// base_mva and every angle is in radians; conversion from file units
// happens once, in the case parser.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gridfm {

enum class BusType { PQ, PV, Slack };

std::string_view to_string(BusType type);
/// Accepts "PQ", "PV" and "SLACK" (case-insensitive).
BusType bus_type_from_string(std::string_view text);

struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
    double pd = 0.0;
    double qd = 0.0;
    double gs = 0.0;
    double bs = 0.0;
    double vm_init = 1.0;
    double va_init = 0.0;
    double vmin = 0.9;
    double vmax = 1.1;
    // Auxiliary columns carried through for faithful case rewriting.
    int area = 1;
    int zone = 1;
    double base_kv = 0.0;

    bool operator==(const Bus&) const = default;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;
    double tap = 1.0;
    double shift = 0.0;
    double rate_a = 0.0;  ///< 0 means unlimited
    bool in_service = true;
    double rate_b = 0.0;
    double rate_c = 0.0;
    double angmin = 0.0;
    double angmax = 0.0;

    bool operator==(const Branch&) const = default;
};

/// Generator cost curve as stored in the case file. model 2 is polynomial
/// (highest order first); model 1 is piecewise linear (x, y) pairs.
struct GenCost {
    int model = 2;
    double startup = 0.0;
    double shutdown = 0.0;
    std::vector<double> coefficients;

    bool operator==(const GenCost&) const = default;
};

struct Generator {
    int bus = 0;
    double pg = 0.0;
    double qg = 0.0;
    double pmin = 0.0;
    double pmax = 0.0;
    double qmin = 0.0;
    double qmax = 0.0;
    double vg = 1.0;
    double mbase = 100.0;
    bool in_service = true;
    std::optional<GenCost> cost;

    bool operator==(const Generator&) const = default;
};

/// Per-bus node variables: net injections (generation minus demand) and
/// the complex voltage in polar form.
struct NodeState {
    double p = 0.0;
    double q = 0.0;
    double v = 1.0;
    double delta = 0.0;

    bool operator==(const NodeState&) const = default;
};

struct Injection {
    double p = 0.0;
    double q = 0.0;
};

/// Immutable electrical graph. The constructor validates the structural
/// invariants and throws SemanticError when one fails; the `with_*`
/// members return modified copies.
class Network {
public:
    Network(std::string name, double base_mva, std::vector<Bus> buses,
            std::vector<Branch> branches, std::vector<Generator> generators);

    const std::string& name() const noexcept { return name_; }
    double base_mva() const noexcept { return base_mva_; }
    std::span<const Bus> buses() const noexcept { return buses_; }
    std::span<const Branch> branches() const noexcept { return branches_; }
    std::span<const Generator> generators() const noexcept { return generators_; }

    std::size_t bus_count() const noexcept { return buses_.size(); }
    std::size_t branch_count() const noexcept { return branches_.size(); }
    std::size_t in_service_branch_count() const noexcept;

    /// Index of the bus with the given id; throws SemanticError if absent.
    std::size_t bus_index(int id) const;
    std::optional<std::size_t> find_bus(int id) const;
    std::size_t slack_index() const noexcept { return slack_; }

    /// Voltage magnitude the solver holds fixed at a PV or slack bus: the
    /// setpoint of the first in-service generator there.
    double voltage_setpoint(std::size_t bus) const;
    bool has_generation(std::size_t bus) const;

    Network with_branch_status(std::size_t branch, bool in_service) const;
    Network with_buses(std::vector<Bus> buses) const;
    Network with_generators(std::vector<Generator> generators) const;
    Network with_name(std::string name) const;

    bool operator==(const Network& other) const;

private:
    std::string name_;
    double base_mva_;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<Generator> generators_;
    std::unordered_map<int, std::size_t> index_;
    std::vector<int> setpoint_gen_;  // per bus, first in-service generator or -1
    std::size_t slack_ = 0;
};

/// Net specified injection per bus: in-service generation minus demand.
std::vector<Injection> net_injections(const Network& net);

/// Node states with the specified injections and the solver's initial
/// voltage guess (flat or from the case's stored voltages).
std::vector<NodeState> initial_states(const Network& net, bool flat_start);

}  // namespace gridfm
