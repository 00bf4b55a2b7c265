#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "orlab/errors.hpp"

namespace orlab {

inline constexpr const char* kVersion = "0.1.0";

/// Raised when an artifact cannot be written.
class IoError : public Error {
public:
    using Error::Error;
};

/// $ORLAB_OUTDIR, else ./orlab-out.
inline std::filesystem::path default_output_root() {
    if (const char* env = std::getenv("ORLAB_OUTDIR"); env && *env) return env;
    return "orlab-out";
}

/// Collects the files of one run under <root>/<command>/<label>/ and writes the manifest last.
class ArtifactDir {
public:
    ArtifactDir(const std::filesystem::path& root, const std::string& command, const std::string& label)
        : dir_(root / command / label) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    const std::filesystem::path& path() const noexcept { return dir_; }

    /// `fill` writes the content; the file is recorded for the manifest.
    void write(const std::string& name, const std::function<void(std::ostream&)>& fill) {
        const auto p = dir_ / name;
        std::ofstream out(p, std::ios::binary);
        if (!out) throw IoError("cannot open " + p.string() + " for writing");
        fill(out);
        out.flush();
        if (!out) throw IoError("write failed: " + p.string());
        files_.push_back(name);
    }

    void write_json(const std::string& name, const nlohmann::json& j) {
        write(name, [&](std::ostream& os) { os << std::setw(2) << j << '\n'; });
    }

    /// Command plus the effective configuration: enough to replay the run.
    void write_manifest(const std::string& command, const nlohmann::json& config) {
        nlohmann::json m;
        m["command"] = command;
        m["config"] = config;
        m["version"] = kVersion;
        m["outputs"] = files_;
        write_json("manifest.json", m);
    }

    const std::vector<std::string>& files() const noexcept { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw InvalidInput("cannot open " + p.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(p.string() + ": " + e.what());
    }
}

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace orlab
