#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string_view>

#include "gridfm/network.hpp"

namespace gridfm {

/// The four node variables, in feature order.
enum class NodeField : std::uint8_t { P = 0, Q = 1, V = 2, Delta = 3 };

inline constexpr std::array<NodeField, 4> kNodeFields{NodeField::P, NodeField::Q, NodeField::V, NodeField::Delta};

constexpr std::string_view field_name(NodeField f) {
    constexpr std::array<std::string_view, 4> names{"p", "q", "v", "delta"};
    return names[static_cast<std::size_t>(f)];
}

constexpr std::optional<NodeField> field_from_name(std::string_view name) {
    for (NodeField f : kNodeFields) {
        if (field_name(f) == name) return f;
    }
    return std::nullopt;
}

using Feature = std::array<double, 4>;

constexpr Feature to_feature(const NodeState& s) { return {s.p, s.q, s.v, s.delta}; }
constexpr NodeState from_feature(const Feature& f) { return {f[0], f[1], f[2], f[3]}; }

/// Set of masked fields of one bus.
class FieldMask {
public:
    constexpr FieldMask() = default;
    constexpr FieldMask(std::initializer_list<NodeField> fields) {
        for (NodeField f : fields) set(f);
    }

    constexpr bool test(NodeField f) const { return (bits_ >> static_cast<unsigned>(f)) & 1u; }
    constexpr void set(NodeField f, bool on = true) {
        const auto bit = static_cast<std::uint8_t>(1u << static_cast<unsigned>(f));
        bits_ = on ? static_cast<std::uint8_t>(bits_ | bit) : static_cast<std::uint8_t>(bits_ & ~bit);
    }
    constexpr bool any() const { return bits_ != 0; }
    constexpr int count() const {
        int n = 0;
        for (NodeField f : kNodeFields) n += test(f) ? 1 : 0;
        return n;
    }
    constexpr bool operator==(const FieldMask&) const = default;

private:
    std::uint8_t bits_ = 0;
};

}  // namespace gridfm
