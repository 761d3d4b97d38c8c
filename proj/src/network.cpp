#include "gridfm/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "gridfm/errors.hpp"

namespace gridfm {

std::string_view to_string(BusType type) {
    switch (type) {
        case BusType::PQ: return "PQ";
        case BusType::PV: return "PV";
        case BusType::Slack: return "SLACK";
    }
    return "PQ";
}

BusType bus_type_from_string(std::string_view text) {
    std::string upper(text);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper == "PQ") return BusType::PQ;
    if (upper == "PV") return BusType::PV;
    if (upper == "SLACK") return BusType::Slack;
    throw SemanticError("unknown bus type '" + std::string(text) + "'");
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw SemanticError(what);
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

Network::Network(std::string name, double base_mva, std::vector<Bus> buses,
                 std::vector<Branch> branches, std::vector<Generator> generators)
    : name_(std::move(name)),
      base_mva_(base_mva),
      buses_(std::move(buses)),
      branches_(std::move(branches)),
      generators_(std::move(generators)) {
    require(finite(base_mva_) && base_mva_ > 0.0, "base_mva must be positive");
    require(!buses_.empty(), "network has no buses");

    index_.reserve(buses_.size());
    std::optional<std::size_t> slack;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        const Bus& b = buses_[i];
        require(index_.emplace(b.id, i).second, "duplicate bus id " + std::to_string(b.id));
        require(finite(b.pd) && finite(b.qd) && finite(b.gs) && finite(b.bs) &&
                    finite(b.vm_init) && finite(b.va_init) && finite(b.vmin) && finite(b.vmax),
                "bus " + std::to_string(b.id) + " has a non-finite field");
        require(b.vmin <= b.vmax, "bus " + std::to_string(b.id) + " has vmin > vmax");
        require(b.vm_init > 0.0, "bus " + std::to_string(b.id) + " has non-positive vm");
        if (b.type == BusType::Slack) {
            require(!slack, "more than one slack bus (" + std::to_string(buses_[*slack].id) +
                                " and " + std::to_string(b.id) + ")");
            slack = i;
        }
    }
    require(slack.has_value(), "network has no slack bus");
    slack_ = *slack;

    for (std::size_t k = 0; k < branches_.size(); ++k) {
        const Branch& br = branches_[k];
        const std::string tag = "branch " + std::to_string(k);
        require(index_.contains(br.from_bus), tag + " references unknown bus " + std::to_string(br.from_bus));
        require(index_.contains(br.to_bus), tag + " references unknown bus " + std::to_string(br.to_bus));
        require(br.from_bus != br.to_bus, tag + " is a self-loop");
        require(finite(br.r) && finite(br.x) && finite(br.b_charging) && finite(br.tap) &&
                    finite(br.shift) && finite(br.rate_a),
                tag + " has a non-finite field");
        require(br.tap > 0.0, tag + " has non-positive tap");
    }

    setpoint_gen_.assign(buses_.size(), -1);
    for (std::size_t g = 0; g < generators_.size(); ++g) {
        const Generator& gen = generators_[g];
        const std::string tag = "generator " + std::to_string(g);
        require(index_.contains(gen.bus), tag + " references unknown bus " + std::to_string(gen.bus));
        require(finite(gen.pg) && finite(gen.qg) && finite(gen.vg), tag + " has a non-finite field");
        require(gen.pmin <= gen.pmax, tag + " has pmin > pmax");
        require(gen.qmin <= gen.qmax, tag + " has qmin > qmax");
        const std::size_t bus = index_.at(gen.bus);
        if (gen.in_service && setpoint_gen_[bus] < 0) setpoint_gen_[bus] = static_cast<int>(g);
    }
    require(setpoint_gen_[slack_] >= 0, "slack bus " + std::to_string(buses_[slack_].id) +
                                            " has no in-service generator");
}

std::size_t Network::in_service_branch_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(branches_.begin(), branches_.end(), [](const Branch& b) { return b.in_service; }));
}

std::size_t Network::bus_index(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw SemanticError("unknown bus id " + std::to_string(id));
    return it->second;
}

std::optional<std::size_t> Network::find_bus(int id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

double Network::voltage_setpoint(std::size_t bus) const {
    const int g = setpoint_gen_.at(bus);
    return g >= 0 ? generators_[static_cast<std::size_t>(g)].vg : buses_[bus].vm_init;
}

bool Network::has_generation(std::size_t bus) const { return setpoint_gen_.at(bus) >= 0; }

Network Network::with_branch_status(std::size_t branch, bool in_service) const {
    std::vector<Branch> branches = branches_;
    branches.at(branch).in_service = in_service;
    return Network(name_, base_mva_, buses_, std::move(branches), generators_);
}

Network Network::with_buses(std::vector<Bus> buses) const {
    return Network(name_, base_mva_, std::move(buses), branches_, generators_);
}

Network Network::with_generators(std::vector<Generator> generators) const {
    return Network(name_, base_mva_, buses_, branches_, std::move(generators));
}

Network Network::with_name(std::string name) const {
    return Network(std::move(name), base_mva_, buses_, branches_, generators_);
}

bool Network::operator==(const Network& other) const {
    return name_ == other.name_ && base_mva_ == other.base_mva_ && buses_ == other.buses_ &&
           branches_ == other.branches_ && generators_ == other.generators_;
}

std::vector<Injection> net_injections(const Network& net) {
    std::vector<Injection> out(net.bus_count());
    for (const Generator& g : net.generators()) {
        if (!g.in_service) continue;
        Injection& inj = out[net.bus_index(g.bus)];
        inj.p += g.pg;
        inj.q += g.qg;
    }
    const auto buses = net.buses();
    for (std::size_t i = 0; i < buses.size(); ++i) {
        out[i].p -= buses[i].pd;
        out[i].q -= buses[i].qd;
    }
    return out;
}

std::vector<NodeState> initial_states(const Network& net, bool flat_start) {
    const auto injections = net_injections(net);
    const auto buses = net.buses();
    std::vector<NodeState> states(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) {
        NodeState& s = states[i];
        s.p = injections[i].p;
        s.q = injections[i].q;
        switch (buses[i].type) {
            case BusType::Slack:
                s.v = net.voltage_setpoint(i);
                s.delta = buses[i].va_init;
                break;
            case BusType::PV:
                s.v = net.voltage_setpoint(i);
                s.delta = flat_start ? 0.0 : buses[i].va_init;
                break;
            case BusType::PQ:
                s.v = flat_start ? 1.0 : buses[i].vm_init;
                s.delta = flat_start ? 0.0 : buses[i].va_init;
                break;
        }
    }
    return states;
}

}  // namespace gridfm
