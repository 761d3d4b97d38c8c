#pragma once

// Reader and writer for matrix-style case files: a function header,
// `mpc.<name> = [ ... ];` numeric matrices with semicolon-terminated rows,
// and `%` comments. Cell arrays and unknown fields are skipped.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridfm/network.hpp"

namespace gridfm {

/// Rectangular numeric table in the file's own column conventions.
struct NumericTable {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major
    std::size_t line = 0;        // line of the opening bracket, 0 if absent

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values).subspan(i * cols, cols);
    }
};

struct CaseDocument {
    std::string name;
    double base_mva = 100.0;
    NumericTable bus_table;
    NumericTable gen_table;
    NumericTable branch_table;
    NumericTable gencost_table;
};

inline constexpr std::size_t kBusColumns = 13;
inline constexpr std::size_t kBranchColumns = 13;
inline constexpr std::size_t kGenColumns = 21;
inline constexpr std::size_t kLegacyGenColumns = 10;

/// Throws SyntaxError (with line number) for malformed text.
CaseDocument parse_case_document(std::string_view text);

/// Converts file units (MW, MVAr, degrees) to per-unit and radians.
/// Throws SemanticError for dangling references, short rows, or a missing
/// slack. A PV bus with no in-service generator is read as PQ.
Network to_network(const CaseDocument& doc);

Network parse_case(std::string_view text);
Network load_case(const std::string& path);

std::string write_case(const Network& net);

}  // namespace gridfm
