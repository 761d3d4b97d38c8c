#pragma once

#include <vector>

#include "gridfm/network.hpp"

namespace gridfm {

/// Partition of bus ids induced by in-service branches. Blocks are listed in
/// order of their first bus in the bus table; ids inside a block follow the
/// bus table order.
std::vector<std::vector<int>> connected_components(const Network& net);

/// True when the component holding the slack bus contains every bus.
bool slack_spans_all_buses(const Network& net);

}  // namespace gridfm
