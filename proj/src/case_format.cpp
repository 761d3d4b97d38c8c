#include "gridfm/case_format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "gridfm/errors.hpp"

namespace gridfm {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

bool is_number_delim(char c) {
    return c == ' ' || c == '\t' || c == ',' || c == ';' || c == ']' || c == '\n' || c == '\r' ||
           c == '%';
}

std::optional<double> to_double(std::string_view token) {
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    if (token.empty()) return std::nullopt;
    double value = 0.0;
    const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || end != token.data() + token.size()) return std::nullopt;
    return value;
}

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }
    std::size_t line() const { return line_; }

    void advance() {
        if (text_[pos_] == '\n') ++line_;
        ++pos_;
    }

    void skip_to_eol() {
        while (!eof() && peek() != '\n') ++pos_;
    }

    void skip_blank_and_comments() {
        while (!eof()) {
            const char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ',') {
                advance();
            } else if (c == '%') {
                skip_to_eol();
            } else {
                break;
            }
        }
    }

    // Spaces and tabs only; a newline ends a statement line.
    void skip_inline_space() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
    }

    std::string_view identifier() {
        const std::size_t start = pos_;
        while (!eof() && (is_ident_char(peek()) || peek() == '.')) ++pos_;
        return text_.substr(start, pos_ - start);
    }

    std::string_view number_token() {
        const std::size_t start = pos_;
        while (!eof() && !is_number_delim(peek())) ++pos_;
        return text_.substr(start, pos_ - start);
    }

    bool starts_with(std::string_view s) const { return text_.substr(pos_).starts_with(s); }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

NumericTable parse_matrix(Lexer& lex) {
    NumericTable table;
    table.line = lex.line();
    lex.advance();  // '['
    std::vector<double> row;
    auto end_row = [&] {
        if (row.empty()) return;
        if (table.rows == 0) {
            table.cols = row.size();
        } else if (row.size() != table.cols) {
            throw SyntaxError(lex.line(), "matrix row has " + std::to_string(row.size()) +
                                              " columns, expected " + std::to_string(table.cols));
        }
        table.values.insert(table.values.end(), row.begin(), row.end());
        ++table.rows;
        row.clear();
    };
    while (true) {
        if (lex.eof()) throw SyntaxError(lex.line(), "unterminated matrix");
        const char c = lex.peek();
        if (c == ' ' || c == '\t' || c == '\r' || c == ',') {
            lex.advance();
        } else if (c == '%') {
            lex.skip_to_eol();
        } else if (c == '\n' || c == ';') {
            end_row();
            lex.advance();
        } else if (c == ']') {
            end_row();
            lex.advance();
            return table;
        } else if (lex.starts_with("...")) {
            lex.skip_to_eol();
            if (!lex.eof()) lex.advance();
        } else {
            const std::size_t line = lex.line();
            const std::string_view token = lex.number_token();
            const auto value = to_double(token);
            if (!value) throw SyntaxError(line, "invalid number '" + std::string(token) + "'");
            row.push_back(*value);
        }
    }
}

void skip_cell_array(Lexer& lex) {
    const std::size_t line = lex.line();
    lex.advance();  // '{'
    int depth = 1;
    while (depth > 0) {
        if (lex.eof()) throw SyntaxError(line, "unterminated cell array");
        const char c = lex.peek();
        if (c == '\'' || c == '"') {
            lex.advance();
            while (!lex.eof() && lex.peek() != c && lex.peek() != '\n') lex.advance();
            if (lex.eof() || lex.peek() == '\n') throw SyntaxError(lex.line(), "unterminated string");
            lex.advance();
        } else if (c == '%') {
            lex.skip_to_eol();
        } else {
            if (c == '{') ++depth;
            if (c == '}') --depth;
            lex.advance();
        }
    }
}

void skip_string(Lexer& lex) {
    const char quote = lex.peek();
    lex.advance();
    while (!lex.eof() && lex.peek() != quote && lex.peek() != '\n') lex.advance();
    if (lex.eof() || lex.peek() == '\n') throw SyntaxError(lex.line(), "unterminated string");
    lex.advance();
}

std::string_view field_of(std::string_view name) {
    const auto dot = name.rfind('.');
    return dot == std::string_view::npos ? name : name.substr(dot + 1);
}

int to_int(double value, const std::string& what) {
    if (!std::isfinite(value) || value != std::trunc(value) ||
        value < static_cast<double>(std::numeric_limits<int>::min()) ||
        value > static_cast<double>(std::numeric_limits<int>::max())) {
        throw SemanticError(what + " must be an integer, got " + std::to_string(value));
    }
    return static_cast<int>(value);
}

void require_columns(const NumericTable& table, std::size_t minimum, const char* name) {
    if (table.rows > 0 && table.cols < minimum) {
        throw SemanticError(std::string(name) + " rows have " + std::to_string(table.cols) +
                            " columns, at least " + std::to_string(minimum) + " required (line " +
                            std::to_string(table.line) + ")");
    }
}

std::string format_number(double value) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) return "0";
    std::string out(buf, end);
    if (out == "inf") return "Inf";
    if (out == "-inf") return "-Inf";
    if (out == "nan" || out == "-nan") return "NaN";
    return out;
}

std::string sanitize_name(const std::string& name) {
    std::string out;
    for (char c : name) out.push_back(is_ident_char(c) ? c : '_');
    if (out.empty() || !is_ident_start(out.front())) out.insert(out.begin(), 'c');
    return out;
}

}  // namespace

CaseDocument parse_case_document(std::string_view text) {
    CaseDocument doc;
    doc.name = "case";
    bool have_bus = false;
    bool have_gen = false;
    Lexer lex(text);
    while (true) {
        lex.skip_blank_and_comments();
        if (lex.eof()) break;
        const std::size_t line = lex.line();
        if (lex.peek() == ';') {
            lex.advance();
            continue;
        }
        if (!is_ident_start(lex.peek())) {
            throw SyntaxError(line, std::string("unexpected character '") + lex.peek() + "'");
        }
        const std::string_view name = lex.identifier();
        if (name == "function") {
            // function mpc = NAME   or   function [a, b] = NAME
            lex.skip_inline_space();
            while (!lex.eof() && lex.peek() != '=' && lex.peek() != '\n') lex.advance();
            if (lex.peek() == '=') {
                lex.advance();
                lex.skip_inline_space();
                if (is_ident_start(lex.peek())) doc.name = std::string(lex.identifier());
            }
            lex.skip_to_eol();
            continue;
        }
        if (name == "end" || name == "return") continue;

        lex.skip_inline_space();
        if (lex.peek() != '=') throw SyntaxError(line, "expected '=' after '" + std::string(name) + "'");
        lex.advance();
        lex.skip_inline_space();

        const std::string_view field = field_of(name);
        const char c = lex.peek();
        if (c == '[') {
            NumericTable table = parse_matrix(lex);
            if (field == "bus") {
                doc.bus_table = std::move(table);
                have_bus = true;
            } else if (field == "gen") {
                doc.gen_table = std::move(table);
                have_gen = true;
            } else if (field == "branch") {
                doc.branch_table = std::move(table);
            } else if (field == "gencost") {
                doc.gencost_table = std::move(table);
            }
        } else if (c == '{') {
            skip_cell_array(lex);
        } else if (c == '\'' || c == '"') {
            skip_string(lex);
        } else if (c != '\0' && c != '\n' && c != ';' && c != '%') {
            const std::string_view token = lex.number_token();
            const auto value = to_double(token);
            if (!value) throw SyntaxError(line, "invalid value '" + std::string(token) + "'");
            if (field == "baseMVA") doc.base_mva = *value;
        } else {
            throw SyntaxError(line, "missing value after '='");
        }
        lex.skip_inline_space();
        if (lex.peek() == ';') lex.advance();
        lex.skip_inline_space();
        if (lex.peek() == '%') lex.skip_to_eol();
        if (!lex.eof() && lex.peek() != '\n' && lex.peek() != '\r') {
            throw SyntaxError(lex.line(), std::string("unexpected '") + lex.peek() + "' after value");
        }
    }
    if (!have_bus) throw SemanticError("case has no bus matrix");
    if (!have_gen) throw SemanticError("case has no gen matrix");
    return doc;
}

Network to_network(const CaseDocument& doc) {
    const double base = doc.base_mva;
    if (!std::isfinite(base) || base <= 0.0) throw SemanticError("baseMVA must be positive");
    require_columns(doc.bus_table, kBusColumns, "bus");
    require_columns(doc.branch_table, kBranchColumns, "branch");
    require_columns(doc.gen_table, kLegacyGenColumns, "gen");
    require_columns(doc.gencost_table, 4, "gencost");

    std::vector<Bus> buses;
    buses.reserve(doc.bus_table.rows);
    for (std::size_t i = 0; i < doc.bus_table.rows; ++i) {
        const auto row = doc.bus_table.row(i);
        const std::string tag = "bus row " + std::to_string(i + 1);
        Bus b;
        b.id = to_int(row[0], tag + " id");
        switch (to_int(row[1], tag + " type")) {
            case 1: b.type = BusType::PQ; break;
            case 2: b.type = BusType::PV; break;
            case 3: b.type = BusType::Slack; break;
            default: throw SemanticError(tag + ": unsupported bus type " + std::to_string(row[1]));
        }
        b.pd = row[2] / base;
        b.qd = row[3] / base;
        b.gs = row[4] / base;
        b.bs = row[5] / base;
        b.area = to_int(row[6], tag + " area");
        b.vm_init = row[7];
        b.va_init = row[8] * kDegToRad;
        b.base_kv = row[9];
        b.zone = to_int(row[10], tag + " zone");
        b.vmax = row[11];
        b.vmin = row[12];
        buses.push_back(b);
    }

    std::vector<Branch> branches;
    branches.reserve(doc.branch_table.rows);
    for (std::size_t k = 0; k < doc.branch_table.rows; ++k) {
        const auto row = doc.branch_table.row(k);
        const std::string tag = "branch row " + std::to_string(k + 1);
        Branch br;
        br.from_bus = to_int(row[0], tag + " from bus");
        br.to_bus = to_int(row[1], tag + " to bus");
        br.r = row[2];
        br.x = row[3];
        br.b_charging = row[4];
        br.rate_a = row[5] / base;
        br.rate_b = row[6] / base;
        br.rate_c = row[7] / base;
        br.tap = row[8] == 0.0 ? 1.0 : row[8];
        br.shift = row[9] * kDegToRad;
        br.in_service = row[10] > 0.0;
        br.angmin = row[11] * kDegToRad;
        br.angmax = row[12] * kDegToRad;
        branches.push_back(br);
    }

    const std::size_t ngen = doc.gen_table.rows;
    const std::size_t ncost = doc.gencost_table.rows;
    if (ncost != 0 && ncost != ngen && ncost != 2 * ngen) {
        throw SemanticError("gencost has " + std::to_string(ncost) + " rows for " + std::to_string(ngen) +
                            " generators");
    }
    std::vector<Generator> generators;
    generators.reserve(ngen);
    for (std::size_t g = 0; g < ngen; ++g) {
        const auto row = doc.gen_table.row(g);
        const std::string tag = "gen row " + std::to_string(g + 1);
        Generator gen;
        gen.bus = to_int(row[0], tag + " bus");
        gen.pg = row[1] / base;
        gen.qg = row[2] / base;
        gen.qmax = row[3] / base;
        gen.qmin = row[4] / base;
        gen.vg = row[5];
        gen.mbase = row[6];
        gen.in_service = row[7] > 0.0;
        gen.pmax = row[8] / base;
        gen.pmin = row[9] / base;
        // Reactive cost rows (the second ngen rows) are not modeled.
        if (ncost != 0) {
            const auto c = doc.gencost_table.row(g);
            const std::string ctag = "gencost row " + std::to_string(g + 1);
            GenCost cost;
            cost.model = to_int(c[0], ctag + " model");
            cost.startup = c[1];
            cost.shutdown = c[2];
            const int n = to_int(c[3], ctag + " term count");
            if (cost.model != 1 && cost.model != 2) throw SemanticError(ctag + ": unknown cost model");
            const std::size_t terms = cost.model == 1 ? 2 * static_cast<std::size_t>(std::max(n, 0))
                                                      : static_cast<std::size_t>(std::max(n, 0));
            if (n < 0 || 4 + terms > doc.gencost_table.cols) {
                throw SemanticError(ctag + ": term count exceeds row length");
            }
            cost.coefficients.assign(c.begin() + 4, c.begin() + 4 + static_cast<std::ptrdiff_t>(terms));
            if (!(cost.model == 2 && terms == 0 && cost.startup == 0.0 && cost.shutdown == 0.0)) {
                gen.cost = std::move(cost);
            }
        }
        generators.push_back(std::move(gen));
    }

    // Resolve references before typing so dangling ids surface as such.
    std::unordered_map<int, std::size_t> index;
    for (std::size_t i = 0; i < buses.size(); ++i) index.emplace(buses[i].id, i);
    for (std::size_t k = 0; k < branches.size(); ++k) {
        for (int id : {branches[k].from_bus, branches[k].to_bus}) {
            if (!index.contains(id)) {
                throw SemanticError("branch row " + std::to_string(k + 1) + " references bus " +
                                    std::to_string(id) + " absent from the bus table");
            }
        }
    }
    std::vector<bool> generating(buses.size(), false);
    for (std::size_t g = 0; g < generators.size(); ++g) {
        auto it = index.find(generators[g].bus);
        if (it == index.end()) {
            throw SemanticError("gen row " + std::to_string(g + 1) + " references bus " +
                                std::to_string(generators[g].bus) + " absent from the bus table");
        }
        if (generators[g].in_service) generating[it->second] = true;
    }
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].type == BusType::PV && !generating[i]) buses[i].type = BusType::PQ;
    }

    return Network(doc.name, base, std::move(buses), std::move(branches), std::move(generators));
}

Network parse_case(std::string_view text) { return to_network(parse_case_document(text)); }

Network load_case(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open case file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("cannot read case file '" + path + "'");
    return parse_case(buffer.str());
}

std::string write_case(const Network& net) {
    const double base = net.base_mva();
    constexpr double kRadToDeg = 180.0 / std::numbers::pi;
    std::ostringstream out;
    auto row = [&out](std::initializer_list<double> values) {
        out << '\t';
        bool first = true;
        for (double v : values) {
            if (!first) out << '\t';
            out << format_number(v);
            first = false;
        }
        out << ";\n";
    };

    out << "function mpc = " << sanitize_name(net.name()) << "\n\n";
    out << "%% MATPOWER Case Format : Version 2\nmpc.version = '2';\n\n";
    out << "%% system MVA base\nmpc.baseMVA = " << format_number(base) << ";\n\n";

    out << "%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
    out << "mpc.bus = [\n";
    for (const Bus& b : net.buses()) {
        const double type = b.type == BusType::PQ ? 1 : b.type == BusType::PV ? 2 : 3;
        row({static_cast<double>(b.id), type, b.pd * base, b.qd * base, b.gs * base, b.bs * base,
             static_cast<double>(b.area), b.vm_init, b.va_init * kRadToDeg, b.base_kv,
             static_cast<double>(b.zone), b.vmax, b.vmin});
    }
    out << "];\n\n";

    out << "%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
    out << "mpc.gen = [\n";
    for (const Generator& g : net.generators()) {
        row({static_cast<double>(g.bus), g.pg * base, g.qg * base, g.qmax * base, g.qmin * base, g.vg,
             g.mbase, g.in_service ? 1.0 : 0.0, g.pmax * base, g.pmin * base, 0, 0, 0, 0, 0, 0, 0, 0,
             0, 0, 0});
    }
    out << "];\n\n";

    out << "%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
    out << "mpc.branch = [\n";
    for (const Branch& br : net.branches()) {
        row({static_cast<double>(br.from_bus), static_cast<double>(br.to_bus), br.r, br.x, br.b_charging,
             br.rate_a * base, br.rate_b * base, br.rate_c * base, br.tap, br.shift * kRadToDeg,
             br.in_service ? 1.0 : 0.0, br.angmin * kRadToDeg, br.angmax * kRadToDeg});
    }
    out << "];\n";

    const auto gens = net.generators();
    const bool any_cost =
        std::any_of(gens.begin(), gens.end(), [](const Generator& g) { return g.cost.has_value(); });
    if (any_cost) {
        std::size_t width = 4;
        for (const Generator& g : gens) {
            if (g.cost) width = std::max(width, 4 + g.cost->coefficients.size());
        }
        out << "\n%% generator cost data\n%\t1\tstartup\tshutdown\tn\tx1\ty1\t...\n"
               "%\t2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0\n";
        out << "mpc.gencost = [\n";
        for (const Generator& g : gens) {
            std::vector<double> values(width, 0.0);
            if (g.cost) {
                const GenCost& c = *g.cost;
                values[0] = c.model;
                values[1] = c.startup;
                values[2] = c.shutdown;
                values[3] = static_cast<double>(c.model == 1 ? c.coefficients.size() / 2 : c.coefficients.size());
                std::copy(c.coefficients.begin(), c.coefficients.end(), values.begin() + 4);
            } else {
                values[0] = 2;
            }
            out << '\t';
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (i) out << '\t';
                out << format_number(values[i]);
            }
            out << ";\n";
        }
        out << "];\n";
    }
    return out.str();
}

}  // namespace gridfm
