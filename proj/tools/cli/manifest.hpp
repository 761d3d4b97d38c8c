#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace gridfm::cli {

inline constexpr const char* kToolName = "gridfm";
inline constexpr const char* kToolVersion = "1.0.0";

/// Lowercase hex SHA-256 of a file's bytes. Throws IoError.
std::string sha256_file(const std::filesystem::path& path);

std::string utc_timestamp(std::chrono::system_clock::time_point t);

/// Output file that appears only on commit(): bytes go to a sibling temp
/// file which is renamed over the target. Destruction without commit()
/// removes the temp file.
class AtomicOutput {
public:
    explicit AtomicOutput(std::filesystem::path target);
    AtomicOutput(const AtomicOutput&) = delete;
    AtomicOutput& operator=(const AtomicOutput&) = delete;
    ~AtomicOutput();

    std::ostream& stream() { return out_; }
    void commit();
    const std::filesystem::path& target() const noexcept { return target_; }

private:
    std::filesystem::path target_;
    std::filesystem::path temp_;
    std::ofstream out_;
    bool committed_ = false;
};

void write_file_atomic(const std::filesystem::path& target, const std::string& bytes);

struct FileDigest {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string tool = kToolName;
    std::string version = kToolVersion;
    std::string subcommand;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;
    std::optional<std::uint64_t> seed;
    std::string started;
    std::string finished;

    nlohmann::ordered_json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

std::filesystem::path manifest_path(const std::filesystem::path& output);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace gridfm::cli
