#pragma once

// Masking of node variables for reconstruction pre-training.
//
// PF_TASK hides exactly the classical power-flow unknowns:
//   PQ bus: v, delta    PV bus: q, delta    slack: p, q
// so reconstructing the masked entries is solving the power flow.
// RANDOM hides each (bus, field) pair independently with probability ratio.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridfm/dataset.hpp"
#include "gridfm/node_fields.hpp"
#include "gridfm/powerflow.hpp"

namespace gridfm {

enum class MaskMode { PfTask, Random };

std::string_view to_string(MaskMode mode);
/// Accepts "pf", "pf_task", and "random".
MaskMode mask_mode_from_string(std::string_view text);

struct MaskSpec {
    MaskMode mode = MaskMode::PfTask;
    double ratio = 0.0;  ///< RANDOM only
    std::uint64_t seed = 0;

    void validate() const;
};

/// Value placed in masked slots of the feature view; the mask channel is
/// what marks them.
inline constexpr double kMaskSentinel = 0.0;

FieldMask pf_task_mask(BusType type);

/// Mask table for one record. RANDOM draws from a stream keyed by the mask
/// seed and the case id, so a record's mask does not depend on its position
/// in a file.
std::vector<FieldMask> compute_mask(std::span<const BusType> bus_types, const MaskSpec& spec,
                                    std::string_view case_id);

struct MaskedRecord {
    std::string case_id;
    SolvedCase truth;
    std::vector<FieldMask> mask;
    MaskMode mode = MaskMode::PfTask;
};

MaskedRecord apply_mask(const SolvedCase& solved, const MaskSpec& spec, std::string case_id);
/// Replaces the record's mask table and records the mask spec in its meta.
DatasetRecord apply_mask(DatasetRecord record, const MaskSpec& spec);

struct FeatureView {
    std::vector<Feature> values;  ///< masked slots hold kMaskSentinel
    std::vector<FieldMask> mask;
};

FeatureView feature_view(const MaskedRecord& record);
FeatureView feature_view(const DatasetRecord& record);

/// Masked slots taken from `truth`, the rest from the view.
std::vector<NodeState> fill_masked(const FeatureView& view, std::span<const NodeState> truth);

struct MaskStatistics {
    std::size_t records = 0;
    std::size_t rows = 0;
    std::array<std::size_t, 4> masked{};

    void add(const DatasetRecord& record);
    void merge(const MaskStatistics& other);
    std::size_t total_masked() const;
    /// Fraction of rows with the field masked; 0 for an empty stream.
    double ratio(NodeField field) const;
    /// Fraction of all (bus, field) entries masked.
    double overall_ratio() const;
};

MaskStatistics mask_statistics(std::span<const DatasetRecord> records);

}  // namespace gridfm
