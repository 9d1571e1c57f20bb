// Shared helpers for the test suites.
#pragma once

#include "crashscope/appmodel.hpp"
#include "crashscope/trace.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#ifndef CRASHSCOPE_FIXTURE_DIR
#error "CRASHSCOPE_FIXTURE_DIR must be defined by the build"
#endif
#ifndef CRASHSCOPE_GOLDEN_DIR
#error "CRASHSCOPE_GOLDEN_DIR must be defined by the build"
#endif

namespace testsupport {

inline std::filesystem::path fixture_path(const std::string& name) {
    return std::filesystem::path(CRASHSCOPE_FIXTURE_DIR) / name;
}

inline std::filesystem::path golden_path(const std::string& name) {
    return std::filesystem::path(CRASHSCOPE_GOLDEN_DIR) / name;
}

inline crashscope::AppModel load_fixture(const std::string& name) {
    return crashscope::load_app_model(fixture_path(name));
}

inline std::shared_ptr<const crashscope::AppModel> load_fixture_shared(const std::string& name) {
    return std::make_shared<const crashscope::AppModel>(load_fixture(name));
}

/// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& label) {
        static std::mt19937_64 rng(
            static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
        path = std::filesystem::temp_directory_path() /
               ("crashscope_" + label + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void spit(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

/// First crash signature seeded in a fixture's behavior rules.
inline const crashscope::CrashSignature* seeded_signature(const crashscope::AppModel& model) {
    for (const auto& rule : model.behavior)
        if (const auto* crash = std::get_if<crashscope::CrashApp>(&rule.result))
            return &crash->signature;
    return nullptr;
}

/// Golden files are regenerated instead of compared when this env var is set.
inline bool regenerate_golden() { return std::getenv("CRASHSCOPE_REGEN_GOLDEN") != nullptr; }

}  // namespace testsupport
