#include "gridfm/masking.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "gridfm/errors.hpp"
#include "gridfm/random.hpp"

namespace gridfm {

namespace {

std::uint64_t hash_id(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

std::string_view to_string(MaskMode mode) { return mode == MaskMode::PfTask ? "pf_task" : "random"; }

MaskMode mask_mode_from_string(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "pf" || lower == "pf_task") return MaskMode::PfTask;
    if (lower == "random") return MaskMode::Random;
    throw InvalidArgument("unknown mask mode '" + std::string(text) + "' (expected pf or random)");
}

void MaskSpec::validate() const {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw InvalidArgument("mask ratio must lie in [0, 1]");
}

FieldMask pf_task_mask(BusType type) {
    switch (type) {
        case BusType::PQ: return {NodeField::V, NodeField::Delta};
        case BusType::PV: return {NodeField::Q, NodeField::Delta};
        case BusType::Slack: return {NodeField::P, NodeField::Q};
    }
    return {};
}

std::vector<FieldMask> compute_mask(std::span<const BusType> bus_types, const MaskSpec& spec,
                                    std::string_view case_id) {
    spec.validate();
    std::vector<FieldMask> out(bus_types.size());
    if (spec.mode == MaskMode::PfTask) {
        std::transform(bus_types.begin(), bus_types.end(), out.begin(), pf_task_mask);
        return out;
    }
    Rng rng(mix_seed(spec.seed, hash_id(case_id)));
    for (FieldMask& m : out) {
        for (NodeField f : kNodeFields) m.set(f, rng.bernoulli(spec.ratio));
    }
    return out;
}

MaskedRecord apply_mask(const SolvedCase& solved, const MaskSpec& spec, std::string case_id) {
    std::vector<BusType> types;
    for (const Bus& b : solved.net.buses()) types.push_back(b.type);
    MaskedRecord out{.case_id = std::move(case_id), .truth = solved, .mask = {}, .mode = spec.mode};
    out.mask = compute_mask(types, spec, out.case_id);
    return out;
}

DatasetRecord apply_mask(DatasetRecord record, const MaskSpec& spec) {
    std::vector<BusType> types;
    for (const NodeRow& n : record.nodes) types.push_back(n.bus_type);
    record.mask = compute_mask(types, spec, record.case_id);
    record.meta.mask_mode = std::string(to_string(spec.mode));
    if (spec.mode == MaskMode::Random) {
        record.meta.mask_ratio = spec.ratio;
        record.meta.mask_seed = spec.seed;
    } else {
        record.meta.mask_ratio.reset();
        record.meta.mask_seed.reset();
    }
    return record;
}

namespace {

FeatureView make_view(std::vector<Feature> values, std::vector<FieldMask> mask) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (NodeField f : kNodeFields) {
            if (mask[i].test(f)) values[i][static_cast<std::size_t>(f)] = kMaskSentinel;
        }
    }
    return FeatureView{std::move(values), std::move(mask)};
}

}  // namespace

FeatureView feature_view(const MaskedRecord& record) {
    std::vector<Feature> values;
    for (const NodeState& s : record.truth.states) values.push_back(to_feature(s));
    return make_view(std::move(values), record.mask);
}

FeatureView feature_view(const DatasetRecord& record) {
    std::vector<Feature> values;
    for (const NodeRow& n : record.nodes) values.push_back({n.p, n.q, n.v, n.delta});
    return make_view(std::move(values), record.mask);
}

std::vector<NodeState> fill_masked(const FeatureView& view, std::span<const NodeState> truth) {
    if (truth.size() != view.values.size()) throw DimensionMismatch("fill_masked: row count mismatch");
    std::vector<NodeState> out;
    out.reserve(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        Feature x = view.values[i];
        const Feature t = to_feature(truth[i]);
        for (NodeField f : kNodeFields) {
            const auto k = static_cast<std::size_t>(f);
            if (view.mask[i].test(f)) x[k] = t[k];
        }
        out.push_back(from_feature(x));
    }
    return out;
}

void MaskStatistics::add(const DatasetRecord& record) {
    ++records;
    rows += record.nodes.size();
    for (const FieldMask& m : record.mask) {
        for (NodeField f : kNodeFields) masked[static_cast<std::size_t>(f)] += m.test(f) ? 1 : 0;
    }
}

void MaskStatistics::merge(const MaskStatistics& other) {
    records += other.records;
    rows += other.rows;
    for (std::size_t k = 0; k < 4; ++k) masked[k] += other.masked[k];
}

std::size_t MaskStatistics::total_masked() const { return masked[0] + masked[1] + masked[2] + masked[3]; }

double MaskStatistics::ratio(NodeField field) const {
    return rows == 0 ? 0.0 : static_cast<double>(masked[static_cast<std::size_t>(field)]) / static_cast<double>(rows);
}

double MaskStatistics::overall_ratio() const {
    return rows == 0 ? 0.0 : static_cast<double>(total_masked()) / static_cast<double>(4 * rows);
}

MaskStatistics mask_statistics(std::span<const DatasetRecord> records) {
    MaskStatistics stats;
    for (const DatasetRecord& r : records) stats.add(r);
    return stats;
}

}  // namespace gridfm
