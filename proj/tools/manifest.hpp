#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "menas/arch.hpp"

namespace menas {

inline constexpr const char* kToolVersion = "0.1.0";

inline std::string timestamp_utc() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

/// Frozen record of a command run: the fully resolved configuration plus
/// timestamps. Re-running a command from its manifest reproduces the outputs
/// bit for bit (timestamps aside).
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    nlohmann::ordered_json config;
    std::string started_at;
    std::string finished_at;

    void write(const std::filesystem::path& path) const {
        nlohmann::ordered_json doc;
        doc["command"] = command;
        doc["version"] = kToolVersion;
        doc["seed"] = seed;
        doc["config"] = config;
        doc["started_at"] = started_at;
        doc["finished_at"] = finished_at;
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot write manifest to " + path.string());
        out << doc.dump(2) << "\n";
    }
};

}  // namespace menas
