#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gridfm/case_format.hpp"
#include "gridfm/network.hpp"

namespace gridfm::testing {

inline std::filesystem::path data_dir() { return GRIDFM_TEST_DATA; }

inline std::filesystem::path case_path(const std::string& name) { return data_dir() / "cases" / (name + ".m"); }

inline Network load_test_case(const std::string& name) { return load_case(case_path(name).string()); }

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json reference(const std::string& file) {
    return nlohmann::json::parse(read_text(data_dir() / "reference" / file));
}

/// Two buses joined by one line: bus 1 slack at 1.0 pu, bus 2 PQ.
inline Network two_bus(double r = 0.0, double x = 0.1, double pd2 = 0.0, double qd2 = 0.0) {
    std::vector<Bus> buses(2);
    buses[0].id = 1;
    buses[0].type = BusType::Slack;
    buses[1].id = 2;
    buses[1].pd = pd2;
    buses[1].qd = qd2;
    Branch line;
    line.from_bus = 1;
    line.to_bus = 2;
    line.r = r;
    line.x = x;
    Generator g;
    g.bus = 1;
    g.pmax = 10.0;
    g.qmin = -10.0;
    g.qmax = 10.0;
    return Network("two_bus", 100.0, std::move(buses), {line}, {g});
}

}  // namespace gridfm::testing
