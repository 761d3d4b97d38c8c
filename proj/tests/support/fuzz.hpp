#pragma once

// Random parser inputs: raw bytes, token soup, and mutations of a valid file.

#include <random>
#include <string>
#include <string_view>

namespace gridfm::testing {

inline std::string fuzz_input(std::mt19937_64& gen, std::string_view seed_text) {
    std::uniform_int_distribution<int> pick(0, 2);
    std::uniform_int_distribution<int> byte(0, 255);
    std::string out;
    switch (pick(gen)) {
        case 0: {
            const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 512)(gen);
            for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<char>(byte(gen)));
            break;
        }
        case 1: {
            static constexpr std::string_view kTokens[] = {
                "function mpc = x\n", "mpc.bus = [", "mpc.gen = [", "mpc.branch = [", "mpc.gencost = [",
                "mpc.baseMVA = 100;\n", "];\n", ";\n", "1", "2", "3", "4", "-0.5", "1e308", "nan", "inf",
                " ", "\t", "%c\n", "...\n", "{", "}", "'s'", "\n", "=", "0.0", "1.06"};
            const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 200)(gen);
            std::uniform_int_distribution<std::size_t> tok(0, std::size(kTokens) - 1);
            for (std::size_t i = 0; i < n; ++i) out += kTokens[tok(gen)];
            break;
        }
        default: {
            out = std::string(seed_text);
            const int edits = std::uniform_int_distribution<int>(1, 8)(gen);
            for (int e = 0; e < edits && !out.empty(); ++e) {
                const std::size_t at = std::uniform_int_distribution<std::size_t>(0, out.size() - 1)(gen);
                switch (pick(gen)) {
                    case 0: out.erase(at, std::uniform_int_distribution<std::size_t>(1, 40)(gen)); break;
                    case 1: out.insert(at, 1, static_cast<char>(byte(gen))); break;
                    default: out[at] = "0123456789;[]%.-e \n"[std::uniform_int_distribution<int>(0, 18)(gen)];
                }
            }
        }
    }
    return out;
}

}  // namespace gridfm::testing
