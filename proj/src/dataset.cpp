#include "gridfm/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <utility>

#include <json.hpp>

#include "gridfm/errors.hpp"

namespace gridfm {

namespace {

using Json = nlohmann::ordered_json;

std::uint64_t fnv1a(std::uint64_t hash, std::uint64_t value) {
    for (int i = 0; i < 8; ++i) {
        hash ^= (value >> (8 * i)) & 0xffu;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

Json node_to_json(const NodeRow& n) {
    return Json{{"bus_id", n.bus_id},     {"bus_type", std::string(to_string(n.bus_type))},
                {"p", n.p},               {"q", n.q},
                {"v", n.v},               {"delta", n.delta},
                {"pd", n.pd},             {"qd", n.qd},
                {"gs", n.gs},             {"bs", n.bs},
                {"vmin", n.vmin},         {"vmax", n.vmax},
                {"gen_count", n.gen_count}, {"gen_pmin", n.gen_pmin},
                {"gen_pmax", n.gen_pmax}, {"gen_qmin", n.gen_qmin},
                {"gen_qmax", n.gen_qmax}};
}

Json edge_to_json(const EdgeRow& e) {
    return Json{{"from", e.from},   {"to", e.to},       {"r", e.r},          {"x", e.x},
                {"b_charging", e.b_charging}, {"tap", e.tap}, {"shift", e.shift}, {"rate_a", e.rate_a},
                {"status", e.status ? 1 : 0}};
}

Json meta_to_json(const RecordMeta& m) {
    Json j{{"source_case", m.source_case},
           {"base_mva", m.base_mva},
           {"master_seed", m.master_seed},
           {"seed", m.seed},
           {"scenario", m.scenario},
           {"attempts", m.attempts},
           {"load_scale", m.load_scale},
           {"load_scale_lo", m.load_scale_lo},
           {"load_scale_hi", m.load_scale_hi},
           {"load_noise_sigma", m.load_noise_sigma},
           {"drop_k", m.drop_k},
           {"redispatch", m.redispatch},
           {"dropped_branches", m.dropped_branches},
           {"iterations", m.iterations},
           {"max_mismatch", m.max_mismatch},
           {"tol", m.tol},
           {"mismatch_norm", m.mismatch_norm}};
    if (m.mask_mode) j["mask_mode"] = *m.mask_mode;
    if (m.mask_ratio) j["mask_ratio"] = *m.mask_ratio;
    if (m.mask_seed) j["mask_seed"] = *m.mask_seed;
    return j;
}

// Field access that reports a structured error instead of a json exception.
class Reader {
public:
    Reader(const Json& object, std::size_t line, std::string context)
        : object_(object), line_(line), context_(std::move(context)) {}

    template <typename T>
    T get(const char* key) const {
        const auto it = object_.find(key);
        if (it == object_.end()) fail(std::string("missing field '") + key + "'");
        try {
            return it->template get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(std::string("field '") + key + "' has the wrong type");
        }
    }

    template <typename T>
    std::optional<T> optional(const char* key) const {
        if (!object_.contains(key)) return std::nullopt;
        return get<T>(key);
    }

    const Json& array(const char* key) const {
        const auto it = object_.find(key);
        if (it == object_.end() || !it->is_array()) fail(std::string("missing array '") + key + "'");
        return *it;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw IoError("record line " + std::to_string(line_) + " (" + context_ + "): " + what);
    }

private:
    const Json& object_;
    std::size_t line_;
    std::string context_;
};

NodeRow node_from_json(const Json& j, std::size_t line) {
    if (!j.is_object()) throw IoError("record line " + std::to_string(line) + ": node row is not an object");
    const Reader r(j, line, "node");
    NodeRow n;
    n.bus_id = r.get<int>("bus_id");
    try {
        n.bus_type = bus_type_from_string(r.get<std::string>("bus_type"));
    } catch (const SemanticError& e) {
        r.fail(e.what());
    }
    n.p = r.get<double>("p");
    n.q = r.get<double>("q");
    n.v = r.get<double>("v");
    n.delta = r.get<double>("delta");
    n.pd = r.get<double>("pd");
    n.qd = r.get<double>("qd");
    n.gs = r.get<double>("gs");
    n.bs = r.get<double>("bs");
    n.vmin = r.get<double>("vmin");
    n.vmax = r.get<double>("vmax");
    n.gen_count = r.optional<int>("gen_count").value_or(0);
    n.gen_pmin = r.optional<double>("gen_pmin").value_or(0.0);
    n.gen_pmax = r.optional<double>("gen_pmax").value_or(0.0);
    n.gen_qmin = r.optional<double>("gen_qmin").value_or(0.0);
    n.gen_qmax = r.optional<double>("gen_qmax").value_or(0.0);
    return n;
}

EdgeRow edge_from_json(const Json& j, std::size_t line) {
    if (!j.is_object()) throw IoError("record line " + std::to_string(line) + ": edge row is not an object");
    const Reader r(j, line, "edge");
    EdgeRow e;
    e.from = r.get<int>("from");
    e.to = r.get<int>("to");
    e.r = r.get<double>("r");
    e.x = r.get<double>("x");
    e.b_charging = r.get<double>("b_charging");
    e.tap = r.get<double>("tap");
    e.shift = r.get<double>("shift");
    e.rate_a = r.get<double>("rate_a");
    e.status = r.get<int>("status") != 0;
    return e;
}

RecordMeta meta_from_json(const Json& j, std::size_t line) {
    if (!j.is_object()) throw IoError("record line " + std::to_string(line) + ": meta is not an object");
    const Reader r(j, line, "meta");
    RecordMeta m;
    m.source_case = r.get<std::string>("source_case");
    m.base_mva = r.get<double>("base_mva");
    m.master_seed = r.get<std::uint64_t>("master_seed");
    m.seed = r.get<std::uint64_t>("seed");
    m.scenario = r.get<std::uint64_t>("scenario");
    m.attempts = r.get<int>("attempts");
    m.load_scale = r.get<double>("load_scale");
    m.load_scale_lo = r.get<double>("load_scale_lo");
    m.load_scale_hi = r.get<double>("load_scale_hi");
    m.load_noise_sigma = r.get<double>("load_noise_sigma");
    m.drop_k = r.get<int>("drop_k");
    m.redispatch = r.get<bool>("redispatch");
    m.dropped_branches = r.get<std::vector<int>>("dropped_branches");
    m.iterations = r.get<int>("iterations");
    m.max_mismatch = r.get<double>("max_mismatch");
    m.tol = r.get<double>("tol");
    m.mismatch_norm = r.get<std::string>("mismatch_norm");
    m.mask_mode = r.optional<std::string>("mask_mode");
    m.mask_ratio = r.optional<double>("mask_ratio");
    m.mask_seed = r.optional<std::uint64_t>("mask_seed");
    return m;
}

}  // namespace

std::string topology_id(const Network& net) {
    std::vector<std::pair<int, int>> pairs;
    for (const Branch& br : net.branches()) {
        if (br.in_service) pairs.emplace_back(br.from_bus, br.to_bus);
    }
    std::sort(pairs.begin(), pairs.end());
    std::uint64_t hash = 0xcbf29ce484222325ull;
    hash = fnv1a(hash, pairs.size());
    for (const auto& [f, t] : pairs) {
        hash = fnv1a(hash, static_cast<std::uint32_t>(f));
        hash = fnv1a(hash, static_cast<std::uint32_t>(t));
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

DatasetRecord make_record(const SolvedCase& solved, std::string case_id, RecordMeta meta) {
    const Network& net = solved.net;
    DatasetRecord rec;
    rec.case_id = std::move(case_id);
    rec.topology_id = topology_id(net);
    const auto buses = net.buses();
    rec.nodes.resize(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const Bus& b = buses[i];
        const NodeState& s = solved.states.at(i);
        rec.nodes[i] = NodeRow{.bus_id = b.id, .bus_type = b.type, .p = s.p, .q = s.q, .v = s.v,
                               .delta = s.delta, .pd = b.pd, .qd = b.qd, .gs = b.gs, .bs = b.bs,
                               .vmin = b.vmin, .vmax = b.vmax};
    }
    for (const Generator& g : net.generators()) {
        if (!g.in_service) continue;
        NodeRow& n = rec.nodes[net.bus_index(g.bus)];
        ++n.gen_count;
        n.gen_pmin += g.pmin;
        n.gen_pmax += g.pmax;
        n.gen_qmin += g.qmin;
        n.gen_qmax += g.qmax;
    }
    for (const Branch& br : net.branches()) {
        rec.edges.push_back(EdgeRow{.from = br.from_bus, .to = br.to_bus, .r = br.r, .x = br.x,
                                    .b_charging = br.b_charging, .tap = br.tap, .shift = br.shift,
                                    .rate_a = br.rate_a, .status = br.in_service});
    }
    rec.mask.assign(buses.size(), FieldMask{});
    meta.base_mva = net.base_mva();
    meta.iterations = solved.iterations;
    meta.max_mismatch = solved.max_mismatch;
    meta.tol = solved.tol;
    rec.meta = std::move(meta);
    return rec;
}

Network network_from_record(const DatasetRecord& record) {
    std::vector<Bus> buses;
    std::vector<Generator> generators;
    buses.reserve(record.nodes.size());
    for (const NodeRow& n : record.nodes) {
        buses.push_back(Bus{.id = n.bus_id, .type = n.bus_type, .pd = n.pd, .qd = n.qd, .gs = n.gs,
                            .bs = n.bs, .vm_init = n.v, .va_init = n.delta, .vmin = n.vmin, .vmax = n.vmax});
        if (n.gen_count > 0) {
            generators.push_back(Generator{.bus = n.bus_id, .pg = n.p + n.pd, .qg = n.q + n.qd,
                                           .pmin = n.gen_pmin, .pmax = n.gen_pmax, .qmin = n.gen_qmin,
                                           .qmax = n.gen_qmax, .vg = n.v, .mbase = record.meta.base_mva,
                                           .in_service = true, .cost = std::nullopt});
        }
    }
    std::vector<Branch> branches;
    branches.reserve(record.edges.size());
    for (const EdgeRow& e : record.edges) {
        branches.push_back(Branch{.from_bus = e.from, .to_bus = e.to, .r = e.r, .x = e.x,
                                  .b_charging = e.b_charging, .tap = e.tap, .shift = e.shift,
                                  .rate_a = e.rate_a, .in_service = e.status});
    }
    return Network(record.case_id, record.meta.base_mva, std::move(buses), std::move(branches),
                   std::move(generators));
}

std::vector<NodeState> states_from_record(const DatasetRecord& record) {
    std::vector<NodeState> states;
    states.reserve(record.nodes.size());
    for (const NodeRow& n : record.nodes) states.push_back(NodeState{n.p, n.q, n.v, n.delta});
    return states;
}

SolvedCase solved_case_from_record(const DatasetRecord& record) {
    return SolvedCase{.net = network_from_record(record), .states = states_from_record(record),
                      .iterations = record.meta.iterations, .max_mismatch = record.meta.max_mismatch,
                      .wall_time = 0.0, .tol = record.meta.tol};
}

std::string to_json_line(const DatasetRecord& record) {
    Json nodes = Json::array();
    for (const NodeRow& n : record.nodes) nodes.push_back(node_to_json(n));
    Json edges = Json::array();
    for (const EdgeRow& e : record.edges) edges.push_back(edge_to_json(e));
    Json mask = Json::array();
    for (std::size_t i = 0; i < record.mask.size(); ++i) {
        Json fields = Json::array();
        for (NodeField f : kNodeFields) {
            if (record.mask[i].test(f)) fields.push_back(std::string(field_name(f)));
        }
        const int bus = i < record.nodes.size() ? record.nodes[i].bus_id : 0;
        mask.push_back(Json{{"bus_id", bus}, {"masked", std::move(fields)}});
    }
    const Json j{{"schema_version", kSchemaVersion}, {"case_id", record.case_id},
                 {"topology_id", record.topology_id}, {"nodes", std::move(nodes)},
                 {"edges", std::move(edges)},        {"mask", std::move(mask)},
                 {"meta", meta_to_json(record.meta)}};
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

DatasetRecord from_json_line(std::string_view line, std::size_t line_number) {
    const Json j = Json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw IoError("record line " + std::to_string(line_number) + ": malformed JSON");
    }
    const auto version = j.find("schema_version");
    if (version == j.end() || !version->is_number_integer()) throw FormatVersionError(0, kSchemaVersion);
    const int found = version->get<int>();
    if (found != kSchemaVersion) throw FormatVersionError(found, kSchemaVersion);

    const Reader r(j, line_number, "record");
    DatasetRecord rec;
    rec.case_id = r.get<std::string>("case_id");
    rec.topology_id = r.get<std::string>("topology_id");
    for (const Json& n : r.array("nodes")) rec.nodes.push_back(node_from_json(n, line_number));
    for (const Json& e : r.array("edges")) rec.edges.push_back(edge_from_json(e, line_number));
    const Json& mask = r.array("mask");
    if (mask.size() != rec.nodes.size()) r.fail("mask table has a different length than the node table");
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i].is_object()) r.fail("mask row is not an object");
        const Reader mr(mask[i], line_number, "mask");
        if (mr.get<int>("bus_id") != rec.nodes[i].bus_id) r.fail("mask row bus_id does not match node row");
        FieldMask fm;
        for (const std::string& name : mr.get<std::vector<std::string>>("masked")) {
            const auto field = field_from_name(name);
            if (!field) r.fail("unknown masked field '" + name + "'");
            fm.set(*field);
        }
        rec.mask.push_back(fm);
    }
    const auto meta = j.find("meta");
    if (meta == j.end()) r.fail("missing field 'meta'");
    rec.meta = meta_from_json(*meta, line_number);
    return rec;
}

void RecordWriter::write(const DatasetRecord& record) {
    out_ << to_json_line(record) << '\n';
    if (!out_) throw IoError("failed writing dataset record");
    ++written_;
}

std::optional<DatasetRecord> RecordReader::next() {
    while (std::getline(in_, buffer_)) {
        ++line_;
        if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
        if (buffer_.find_first_not_of(" \t") == std::string::npos) continue;
        return from_json_line(buffer_, line_);
    }
    if (in_.bad()) throw IoError("failed reading dataset records");
    return std::nullopt;
}

void write_records(std::span<const DatasetRecord> records, std::ostream& sink) {
    RecordWriter writer(sink);
    for (const DatasetRecord& r : records) writer.write(r);
}

std::vector<DatasetRecord> read_records(std::istream& source) {
    RecordReader reader(source);
    std::vector<DatasetRecord> out;
    while (auto r = reader.next()) out.push_back(std::move(*r));
    return out;
}

}  // namespace gridfm
