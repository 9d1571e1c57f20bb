// File-backed persistence for execution traces. One line-oriented file per
// trace: a metadata header line followed by one serialized step per line.
// The archive index is reconstructible from a directory scan alone.
#pragma once

#include "crashscope/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace crashscope {

class TraceStoreError : public std::runtime_error {
public:
    explicit TraceStoreError(const std::string& what) : std::runtime_error(what) {}
};

struct TraceArchive {
    std::filesystem::path root;
};

struct TraceIndexEntry {
    std::string app;
    std::string strategy;
    int run = 0;
    std::filesystem::path path;
};

inline std::string trace_file_name(const std::string& app, const std::string& strategy, int run) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "run%03d", run);
    return detail::sanitize_file_token(app) + "__" + strategy + "__" + buf + ".trace";
}

/// One step per line with a metadata header line; keys are serialized in
/// sorted order, so identical traces produce byte-identical files.
inline std::string serialize_trace(const ExecutionTrace& trace) {
    std::ostringstream out;
    out << trace_meta_to_json(trace).dump() << "\n";
    for (const ExecutionStep& step : trace.steps)
        out << execution_step_to_json(step).dump() << "\n";
    return out.str();
}

inline ExecutionTrace parse_trace(const std::string& text, const std::string& origin = "<trace>") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw TraceStoreError(origin + ": empty trace file");
    ExecutionTrace trace;
    try {
        trace_meta_from_json(nlohmann::json::parse(line), trace);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            trace.steps.push_back(execution_step_from_json(nlohmann::json::parse(line)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw TraceStoreError(origin + ": malformed trace line: " + e.what());
    } catch (const ParseError& e) {
        throw TraceStoreError(origin + ": " + e.what());
    }
    const bool last_is_crash =
        !trace.steps.empty() && trace.steps.back().outcome.kind == OutcomeKind::crash;
    if (trace.crashed != last_is_crash)
        throw TraceStoreError(origin + ": crashed flag does not match the last step outcome");
    return trace;
}

inline ExecutionTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw TraceStoreError("cannot open trace file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trace(buf.str(), path.string());
}

/// Persist a trace; runs are never overwritten, a colliding run id is an error.
inline std::filesystem::path append_trace(const TraceArchive& archive,
                                          const ExecutionTrace& trace) {
    std::filesystem::create_directories(archive.root);
    const std::filesystem::path path =
        archive.root / trace_file_name(trace.meta.app_name, trace.meta.strategy, trace.meta.run);
    if (std::filesystem::exists(path))
        throw TraceStoreError("trace already exists (runs are never overwritten): " +
                              path.string());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw TraceStoreError("cannot write trace file: " + path.string());
    out << serialize_trace(trace);
    return path;
}

/// Scan the archive directory; the index is derived purely from file names.
inline std::vector<TraceIndexEntry> scan_archive(const TraceArchive& archive) {
    std::vector<TraceIndexEntry> out;
    if (!std::filesystem::exists(archive.root)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(archive.root)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".trace") continue;
        const std::string stem = entry.path().stem().string();
        // <app>__<strategy>__runNNN
        const std::size_t second = stem.rfind("__");
        if (second == std::string::npos) continue;
        const std::size_t first = stem.rfind("__", second - 1);
        if (first == std::string::npos) continue;
        const std::string run_token = stem.substr(second + 2);
        if (run_token.rfind("run", 0) != 0) continue;
        TraceIndexEntry e;
        e.app = stem.substr(0, first);
        e.strategy = stem.substr(first + 2, second - first - 2);
        e.run = std::atoi(run_token.c_str() + 3);
        e.path = entry.path();
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const TraceIndexEntry& a, const TraceIndexEntry& b) {
        return std::tie(a.app, a.strategy, a.run) < std::tie(b.app, b.strategy, b.run);
    });
    return out;
}

/// Crashed traces for an app, sorted by (strategy label, run id). Unreadable
/// files are skipped with a warning on stderr; the batch never aborts.
inline std::vector<ExecutionTrace> load_crashing_traces(const TraceArchive& archive,
                                                        const std::string& app_name) {
    const std::string app_token = detail::sanitize_file_token(app_name);
    std::vector<ExecutionTrace> out;
    for (const TraceIndexEntry& e : scan_archive(archive)) {
        if (e.app != app_token) continue;
        try {
            ExecutionTrace t = load_trace(e.path);
            if (t.crashed) out.push_back(std::move(t));
        } catch (const TraceStoreError& err) {
            std::cerr << "warning: skipping unreadable trace: " << err.what() << "\n";
        }
    }
    return out;
}

}  // namespace crashscope
