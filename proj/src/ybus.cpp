#include "gridfm/ybus.hpp"

#include <cmath>
#include <vector>

#include "gridfm/errors.hpp"

namespace gridfm {

BranchAdmittance branch_admittance(const Branch& br, std::size_t index) {
    if (br.r == 0.0 && br.x == 0.0) throw ZeroImpedanceBranch(index);
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex charging(0.0, br.b_charging / 2.0);
    const Complex tap = std::polar(br.tap, br.shift);
    const Complex ytt = ys + charging;
    return BranchAdmittance{
        .ff = ytt / (br.tap * br.tap),
        .ft = -ys / std::conj(tap),
        .tf = -ys / tap,
        .tt = ytt,
    };
}

AdmittanceMatrix build_ybus(const Network& net) {
    const auto n = static_cast<int>(net.bus_count());
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(4 * net.branch_count() + net.bus_count());

    const auto branches = net.branches();
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const Branch& br = branches[k];
        if (!br.in_service) continue;
        const BranchAdmittance y = branch_admittance(br, k);
        const auto f = static_cast<int>(net.bus_index(br.from_bus));
        const auto t = static_cast<int>(net.bus_index(br.to_bus));
        triplets.emplace_back(f, f, y.ff);
        triplets.emplace_back(f, t, y.ft);
        triplets.emplace_back(t, f, y.tf);
        triplets.emplace_back(t, t, y.tt);
    }
    const auto buses = net.buses();
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const auto d = static_cast<int>(i);
        // Diagonal always present so the pattern covers every bus.
        triplets.emplace_back(d, d, Complex(buses[i].gs, buses[i].bs));
    }

    SparseComplex y(n, n);
    y.setFromTriplets(triplets.begin(), triplets.end());
    return AdmittanceMatrix(std::move(y));
}

}  // namespace gridfm
