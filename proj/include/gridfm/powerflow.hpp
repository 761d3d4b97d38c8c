#pragma once

// AC power flow by full Newton-Raphson and the DC linear approximation.
//
// Calculated injections at bus i, with d_ij = d_i - d_j and Y = G + jB:
//   P_i = v_i sum_j v_j (G_ij cos d_ij + B_ij sin d_ij)
//   Q_i = v_i sum_j v_j (G_ij sin d_ij - B_ij cos d_ij)

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "gridfm/network.hpp"
#include "gridfm/ybus.hpp"

namespace gridfm {

struct SolverOptions {
    double tol = 1e-8;  ///< infinity norm of the PQ/PV power mismatch, per-unit
    int max_iter = 20;
    bool flat_start = true;

    /// Throws InvalidArgument unless tol > 0 and max_iter >= 1.
    void validate() const;
};

inline constexpr const char* kMismatchNorm = "inf";

struct SolvedCase {
    Network net;
    std::vector<NodeState> states;
    int iterations = 0;
    double max_mismatch = 0.0;
    double wall_time = 0.0;  ///< seconds
    double tol = 0.0;
};

struct Mismatch {
    std::vector<double> dp;
    std::vector<double> dq;
};

/// Calculated (P, Q) at every bus for the voltages in `states`.
void calculated_injections(const AdmittanceMatrix& ybus, std::span<const NodeState> states,
                           std::vector<double>& p, std::vector<double>& q);

/// dP_i = p_i - P_i(V, d) and dQ_i = q_i - Q_i(V, d) for every bus, where
/// p_i and q_i are the injections stored in the states. Callers select
/// rows by bus type. Throws DimensionMismatch on a size mismatch.
Mismatch compute_mismatch(const Network& net, std::span<const NodeState> states);
Mismatch compute_mismatch(const AdmittanceMatrix& ybus, std::span<const NodeState> states);

/// Largest |dP| over PV and PQ buses and |dQ| over PQ buses.
double max_specified_mismatch(const Network& net, const Mismatch& mismatch);

/// Unknown ordering of the Newton system: angles of PV and PQ buses (in
/// bus order), then magnitudes of PQ buses.
struct JacobianLayout {
    std::vector<std::size_t> angle_buses;
    std::vector<std::size_t> magnitude_buses;

    static JacobianLayout for_network(const Network& net);
    /// Every bus in both blocks: the 2n x 2n derivative of (P, Q) with
    /// respect to (d, v).
    static JacobianLayout all_buses(std::size_t n);
    std::size_t size() const noexcept { return angle_buses.size() + magnitude_buses.size(); }
};

/// Derivatives of the calculated injections [dP/dd dP/dv; dQ/dd dQ/dv]
/// restricted to the layout's rows and columns. Since the mismatch is
/// specified minus calculated, this is the negated mismatch derivative.
Eigen::SparseMatrix<double> build_jacobian(const AdmittanceMatrix& ybus, std::span<const NodeState> states,
                                           const JacobianLayout& layout);
Eigen::SparseMatrix<double> build_jacobian(const Network& net, std::span<const NodeState> states);

/// Throws NoConvergence, SingularJacobian, or Islanded (the slack's
/// component must contain every bus). Reactive limits are not enforced.
SolvedCase solve_ac_pf(const Network& net, const SolverOptions& opts = {});

struct DcSolution {
    std::vector<double> delta;        ///< per bus, radians
    std::vector<double> branch_flow;  ///< per branch, from-end active flow; 0 when out of service
};

/// B' d = p with the slack held at its specified angle. Susceptances are
/// 1/(x tap); phase shifters enter as equivalent injections. Throws
/// SingularMatrix for islanded input.
DcSolution solve_dc_pf(const Network& net);

}  // namespace gridfm
