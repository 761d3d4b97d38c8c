#include "gridfm/topology.hpp"

#include <numeric>

namespace gridfm {

namespace {

// Union-find over bus positions.
class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<unsigned> rank_;
};

DisjointSets join_in_service(const Network& net) {
    DisjointSets sets(net.bus_count());
    for (const Branch& br : net.branches()) {
        if (br.in_service) sets.unite(net.bus_index(br.from_bus), net.bus_index(br.to_bus));
    }
    return sets;
}

}  // namespace

std::vector<std::vector<int>> connected_components(const Network& net) {
    DisjointSets sets = join_in_service(net);
    const auto buses = net.buses();
    std::vector<long> block_of_root(buses.size(), -1);
    std::vector<std::vector<int>> blocks;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const std::size_t root = sets.find(i);
        if (block_of_root[root] < 0) {
            block_of_root[root] = static_cast<long>(blocks.size());
            blocks.emplace_back();
        }
        blocks[static_cast<std::size_t>(block_of_root[root])].push_back(buses[i].id);
    }
    return blocks;
}

bool slack_spans_all_buses(const Network& net) {
    DisjointSets sets = join_in_service(net);
    const std::size_t root = sets.find(net.slack_index());
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        if (sets.find(i) != root) return false;
    }
    return true;
}

}  // namespace gridfm
