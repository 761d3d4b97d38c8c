#pragma once

// Dataset records: one JSON object per line, UTF-8. Each record is a solved
// grid state (node and edge rows) plus a per-bus mask table and metadata.
// Lines with an unknown schema_version are rejected; unknown fields are
// ignored.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridfm/network.hpp"
#include "gridfm/node_fields.hpp"
#include "gridfm/powerflow.hpp"

namespace gridfm {

inline constexpr int kSchemaVersion = 1;

struct NodeRow {
    int bus_id = 0;
    BusType bus_type = BusType::PQ;
    double p = 0.0;
    double q = 0.0;
    double v = 1.0;
    double delta = 0.0;
    double pd = 0.0;
    double qd = 0.0;
    double gs = 0.0;
    double bs = 0.0;
    double vmin = 0.0;
    double vmax = 0.0;
    // Auxiliary: bus-aggregate in-service generator bounds.
    int gen_count = 0;
    double gen_pmin = 0.0;
    double gen_pmax = 0.0;
    double gen_qmin = 0.0;
    double gen_qmax = 0.0;

    bool operator==(const NodeRow&) const = default;
};

struct EdgeRow {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;
    double tap = 1.0;
    double shift = 0.0;
    double rate_a = 0.0;
    bool status = true;

    bool operator==(const EdgeRow&) const = default;
};

struct RecordMeta {
    std::string source_case;
    double base_mva = 100.0;
    std::uint64_t master_seed = 0;
    std::uint64_t seed = 0;  ///< per-scenario sub-seed
    std::uint64_t scenario = 0;
    int attempts = 1;
    double load_scale = 1.0;  ///< drawn global load factor
    double load_scale_lo = 1.0;
    double load_scale_hi = 1.0;
    double load_noise_sigma = 0.0;
    int drop_k = 0;
    bool redispatch = true;
    std::vector<int> dropped_branches;  ///< positions in the source case's branch table
    int iterations = 0;
    double max_mismatch = 0.0;
    double tol = 0.0;
    std::string mismatch_norm = kMismatchNorm;
    std::optional<std::string> mask_mode;
    std::optional<double> mask_ratio;
    std::optional<std::uint64_t> mask_seed;

    bool operator==(const RecordMeta&) const = default;
};

struct DatasetRecord {
    std::string case_id;
    std::string topology_id;
    std::vector<NodeRow> nodes;
    std::vector<EdgeRow> edges;
    std::vector<FieldMask> mask;  ///< one entry per node row
    RecordMeta meta;

    bool operator==(const DatasetRecord&) const = default;
};

/// Hash of the multiset of in-service (from, to) branch pairs: independent
/// of bus and branch ordering, sensitive to every status flip.
std::string topology_id(const Network& net);

DatasetRecord make_record(const SolvedCase& solved, std::string case_id, RecordMeta meta);

/// Network implied by a record. Generators at a bus are merged into one
/// whose output reproduces the recorded injection and whose bounds are the
/// recorded aggregates.
Network network_from_record(const DatasetRecord& record);
std::vector<NodeState> states_from_record(const DatasetRecord& record);
SolvedCase solved_case_from_record(const DatasetRecord& record);

std::string to_json_line(const DatasetRecord& record);
/// Throws FormatVersionError or IoError.
DatasetRecord from_json_line(std::string_view line, std::size_t line_number = 0);

class RecordWriter {
public:
    explicit RecordWriter(std::ostream& out) : out_(out) {}
    void write(const DatasetRecord& record);
    std::size_t written() const noexcept { return written_; }

private:
    std::ostream& out_;
    std::size_t written_ = 0;
};

/// Reads one record at a time; nothing beyond the current line is held.
class RecordReader {
public:
    explicit RecordReader(std::istream& in) : in_(in) {}
    std::optional<DatasetRecord> next();
    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::string buffer_;
    std::size_t line_ = 0;
};

void write_records(std::span<const DatasetRecord> records, std::ostream& sink);
std::vector<DatasetRecord> read_records(std::istream& source);

}  // namespace gridfm
