#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/SparseCore>

#include "gridfm/network.hpp"

namespace gridfm {

using Complex = std::complex<double>;
using SparseComplex = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;

/// Nodal admittance matrix Y = G + jB, indexed by bus position.
class AdmittanceMatrix {
public:
    explicit AdmittanceMatrix(SparseComplex y) : y_(std::move(y)) { y_.makeCompressed(); }

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(y_.rows()); }
    Complex operator()(std::size_t i, std::size_t j) const {
        return y_.coeff(static_cast<int>(i), static_cast<int>(j));
    }
    const SparseComplex& matrix() const noexcept { return y_; }

private:
    SparseComplex y_;
};

/// Series and charging admittances of one branch in the pi model with the
/// tap and phase shift on the from side:
///   [I_f]   [ff ft] [V_f]
///   [I_t] = [tf tt] [V_t]
struct BranchAdmittance {
    Complex ff, ft, tf, tt;
};

/// Throws ZeroImpedanceBranch when r = x = 0.
BranchAdmittance branch_admittance(const Branch& branch, std::size_t index);

/// Out-of-service branches contribute nothing; bus shunts go on the diagonal.
AdmittanceMatrix build_ybus(const Network& net);

}  // namespace gridfm
