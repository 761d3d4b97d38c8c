#include "cli/manifest.hpp"

#include <array>
#include <ctime>
#include <memory>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "gridfm/errors.hpp"

namespace gridfm::cli {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 unavailable");
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    if (in.bad()) throw IoError(fmt::format("read failed on '{}'", path.string()));
    std::array<unsigned char, EVP_MAX_MD_SIZE> md;
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
    return hex;
}

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
    const std::time_t secs = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count() % 1000;
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                       tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
}

AtomicOutput::AtomicOutput(std::filesystem::path target) : target_(std::move(target)) {
    temp_ = target_;
    temp_ += ".tmp";
    out_.open(temp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError(fmt::format("cannot write '{}'", target_.string()));
}

AtomicOutput::~AtomicOutput() {
    if (committed_) return;
    out_.close();
    std::error_code ec;
    std::filesystem::remove(temp_, ec);
}

void AtomicOutput::commit() {
    out_.flush();
    if (!out_) throw IoError(fmt::format("write failed on '{}'", target_.string()));
    out_.close();
    std::error_code ec;
    std::filesystem::rename(temp_, target_, ec);
    if (ec) throw IoError(fmt::format("cannot move output into '{}': {}", target_.string(), ec.message()));
    committed_ = true;
}

void write_file_atomic(const std::filesystem::path& target, const std::string& bytes) {
    AtomicOutput out(target);
    out.stream() << bytes;
    out.commit();
}

namespace {

nlohmann::ordered_json digests_json(const std::vector<FileDigest>& files) {
    auto a = nlohmann::ordered_json::array();
    for (const FileDigest& f : files) a.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return a;
}

std::vector<FileDigest> digests_from(const nlohmann::json& a) {
    std::vector<FileDigest> out;
    for (const auto& f : a) out.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
    return out;
}

}  // namespace

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = tool;
    j["version"] = version;
    j["subcommand"] = subcommand;
    j["config"] = config;
    j["inputs"] = digests_json(inputs);
    j["outputs"] = digests_json(outputs);
    j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
    j["started"] = started;
    j["finished"] = finished;
    return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.tool = j.at("tool").get<std::string>();
        m.version = j.at("version").get<std::string>();
        m.subcommand = j.at("subcommand").get<std::string>();
        m.config = j.at("config");
        m.inputs = digests_from(j.at("inputs"));
        m.outputs = digests_from(j.at("outputs"));
        if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
        m.started = j.value("started", "");
        m.finished = j.value("finished", "");
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("malformed manifest: {}", e.what()));
    }
    if (m.tool != kToolName) throw IoError(fmt::format("manifest written by '{}', not {}", m.tool, kToolName));
    if (!m.config.is_object()) throw IoError("malformed manifest: config is not an object");
    return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& output) {
    std::filesystem::path p = output;
    p += ".manifest.json";
    return p;
}

RunManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot open manifest '{}'", path.string()));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(fmt::format("malformed manifest '{}': {}", path.string(), e.what()));
    }
    return RunManifest::from_json(j);
}

}  // namespace gridfm::cli
