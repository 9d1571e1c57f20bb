// End-to-end orchestration: load a model, analyze it, run the selected
// strategies (optionally in parallel), persist traces and screenshots, and
// emit a report plus a replay script for every crashed trace.
#pragma once

#include "crashscope/analyzer.hpp"
#include "crashscope/appmodel.hpp"
#include "crashscope/explorer.hpp"
#include "crashscope/replay.hpp"
#include "crashscope/reporter.hpp"
#include "crashscope/tracestore.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace crashscope {

struct RunConfig {
    std::filesystem::path app_model_path;
    std::vector<std::string> strategies;  // empty = all 12
    std::uint64_t seed = 1;
    int budget = 500;
    int parallelism = 1;
    std::filesystem::path out_dir = "crashscope-out";
    bool inject_log_decoys = false;
};

struct CrashGroup {
    std::string key;  // normalized (class, message, pruned stack)
    CrashSignature signature;
    std::vector<const ExecutionTrace*> traces;
};

/// Group crashed traces by signature equality over (exception class, message,
/// pruned stack). Groups come back sorted by key for determinism.
inline std::vector<CrashGroup> dedupe_crashes(const std::vector<const ExecutionTrace*>& traces) {
    std::map<std::string, CrashGroup> groups;
    for (const ExecutionTrace* t : traces) {
        const ExecutionStep* crash = t->crash_step();
        if (!crash || !crash->outcome.signature) continue;
        const CrashSignature pruned =
            prune_stack_trace(*crash->outcome.signature, t->meta.package);
        std::ostringstream key;
        key << pruned.exception_class << "\n" << pruned.message;
        for (const std::string& frame : pruned.stack) key << "\n" << frame;
        auto [it, inserted] = groups.try_emplace(key.str());
        if (inserted) {
            it->second.key = key.str();
            it->second.signature = pruned;
        }
        it->second.traces.push_back(t);
    }
    std::vector<CrashGroup> out;
    out.reserve(groups.size());
    for (auto& [_, g] : groups) out.push_back(std::move(g));
    return out;
}

inline std::vector<CrashGroup> dedupe_crashes(const std::vector<ExecutionTrace>& traces) {
    std::vector<const ExecutionTrace*> ptrs;
    ptrs.reserve(traces.size());
    for (const auto& t : traces) ptrs.push_back(&t);
    return dedupe_crashes(ptrs);
}

struct PipelineSummary {
    int strategies_run = 0;
    int traces_total = 0;
    int crashed_traces = 0;
    int distinct_crashes = 0;
    std::vector<std::filesystem::path> trace_paths;
    std::vector<std::filesystem::path> report_paths;
    std::vector<std::filesystem::path> script_paths;
    std::map<std::string, std::string> failures;  // strategy label -> error
    std::vector<std::string> warnings;

    bool ok() const { return failures.empty(); }
};

using DeviceFactory =
    std::function<std::unique_ptr<DeviceInterface>(const ExplorationStrategy&)>;

class PipelineError : public std::runtime_error {
public:
    explicit PipelineError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PipelineError("cannot write file: " + path.string());
    out << content;
}

}  // namespace detail

/// Run the whole pipeline for one app model. Strategy workers run with no
/// shared mutable state; a failure in one strategy never aborts its siblings.
/// `factory` exists for tests that substitute the device; by default every
/// strategy gets a fresh simulator over the shared immutable model.
inline PipelineSummary run_pipeline(const RunConfig& config, DeviceFactory factory = {}) {
    auto model = std::make_shared<const AppModel>(load_app_model(config.app_model_path));
    const FeatureMap features = classify_contextual_features(*model);

    std::vector<ExplorationStrategy> strategies;
    if (config.strategies.empty()) {
        strategies = all_strategies(config.seed, config.budget);
    } else {
        for (const std::string& label : config.strategies) {
            auto s = strategy_from_label(label, config.seed, config.budget);
            if (!s) throw PipelineError("unknown strategy label: " + label);
            strategies.push_back(*s);
        }
    }
    if (strategies.empty()) throw PipelineError("strategy selector expands to nothing");

    if (!factory) {
        factory = [&config, model](const ExplorationStrategy&) {
            SimDevice::Options opts;
            opts.inject_foreign_pid_decoys = config.inject_log_decoys;
            return std::make_unique<SimDevice>(model, opts);
        };
    }

    std::filesystem::create_directories(config.out_dir);
    const TraceArchive archive{config.out_dir};

    struct StrategyOutput {
        ExploreResult result;
        std::string error;
    };
    std::vector<StrategyOutput> outputs(strategies.size());

    const int workers =
        std::max(1, std::min<int>(config.parallelism, static_cast<int>(strategies.size())));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= strategies.size()) return;
            try {
                auto device = factory(strategies[i]);
                if (!device) throw PipelineError("device factory returned nothing");
                outputs[i].result = explore(*model, features, *device, strategies[i]);
            } catch (const std::exception& e) {
                outputs[i].error = e.what();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    // Single writer: persist everything in deterministic strategy order.
    PipelineSummary summary;
    std::vector<ExecutionTrace> all_traces;
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        if (!outputs[i].error.empty()) {
            summary.failures[strategies[i].label()] = outputs[i].error;
            continue;
        }
        ++summary.strategies_run;
        for (const auto& [ref, svg] : outputs[i].result.renderings)
            detail::write_file(config.out_dir / ref, svg);
        for (ExecutionTrace& trace : outputs[i].result.traces) {
            summary.trace_paths.push_back(append_trace(archive, trace));
            ++summary.traces_total;
            if (trace.crashed) ++summary.crashed_traces;
            all_traces.push_back(std::move(trace));
        }
    }

    for (const ExecutionTrace& trace : all_traces) {
        if (!trace.crashed) continue;
        std::map<std::string, std::string> renderings;
        for (const ExecutionStep& step : trace.steps) {
            std::ifstream in(config.out_dir / step.screenshot, std::ios::binary);
            if (!in) continue;
            std::ostringstream buf;
            buf << in.rdbuf();
            renderings[step.screenshot] = buf.str();
        }
        ReportResult report = generate_report(trace, renderings);
        for (const std::string& w : report.warnings) summary.warnings.push_back(w);
        const auto report_path = config.out_dir / report_file_name(trace.meta);
        detail::write_file(report_path, report.html);
        summary.report_paths.push_back(report_path);

        const ReplayScript script = generate_script(trace);
        const auto script_path = config.out_dir / script_file_name(trace.meta);
        detail::write_file(script_path, serialize_script(script));
        summary.script_paths.push_back(script_path);
    }

    summary.distinct_crashes = static_cast<int>(dedupe_crashes(all_traces).size());
    return summary;
}

}  // namespace crashscope
