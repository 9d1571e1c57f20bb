// crashscope command-line driver.
#include "crashscope/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace crashscope;

namespace {

std::vector<std::string> split_labels(const std::string& list) {
    std::vector<std::string> out;
    std::istringstream in(list);
    std::string token;
    while (std::getline(in, token, ','))
        if (!token.empty()) out.push_back(token);
    return out;
}

std::map<std::string, std::string> load_renderings_beside(const fs::path& trace_path,
                                                          const ExecutionTrace& trace) {
    std::map<std::string, std::string> out;
    const fs::path dir = trace_path.parent_path();
    for (const ExecutionStep& step : trace.steps) {
        std::ifstream in(dir / step.screenshot, std::ios::binary);
        if (!in) continue;
        std::ostringstream buf;
        buf << in.rdbuf();
        out[step.screenshot] = buf.str();
    }
    return out;
}

int cmd_run(const RunConfig& config) {
    PipelineSummary summary = run_pipeline(config);
    std::cout << "strategies run:    " << summary.strategies_run << "\n";
    std::cout << "traces:            " << summary.traces_total << " (" << summary.crashed_traces
              << " crashed)\n";
    std::cout << "distinct crashes:  " << summary.distinct_crashes << "\n";
    for (const auto& p : summary.report_paths) std::cout << "report: " << p.string() << "\n";
    for (const auto& p : summary.script_paths) std::cout << "script: " << p.string() << "\n";
    for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& [label, error] : summary.failures)
        std::cerr << "strategy " << label << " failed: " << error << "\n";
    return summary.ok() ? 0 : 1;
}

int cmd_analyze(const fs::path& app_path) {
    const AppModel model = load_app_model(app_path);
    const FeatureMap features = classify_contextual_features(model);
    std::cout << feature_map_to_json(features).dump(2) << "\n";
    return 0;
}

int cmd_report(const fs::path& trace_path, const fs::path& out_dir) {
    const ExecutionTrace trace = load_trace(trace_path);
    ReportResult report = generate_report(trace, load_renderings_beside(trace_path, trace));
    fs::create_directories(out_dir);
    const fs::path out = out_dir / report_file_name(trace.meta);
    std::ofstream f(out, std::ios::binary);
    f << report.html;
    for (const std::string& w : report.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << out.string() << "\n";
    return 0;
}

int cmd_script(const fs::path& trace_path, const fs::path& out_dir) {
    const ExecutionTrace trace = load_trace(trace_path);
    const ReplayScript script = generate_script(trace);
    fs::create_directories(out_dir);
    const fs::path out = out_dir / script_file_name(trace.meta);
    std::ofstream f(out, std::ios::binary);
    f << serialize_script(script);
    std::cout << out.string() << "\n";
    return 0;
}

int cmd_replay(const fs::path& script_path, const fs::path& app_path) {
    std::ifstream in(script_path);
    if (!in) {
        std::cerr << "cannot open script: " << script_path.string() << "\n";
        return 1;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    const ReplayScript script = parse_script(buf.str());
    auto model = std::make_shared<const AppModel>(load_app_model(app_path));
    SimDevice device(model);
    const ReplayOutcome outcome = replay(script, device);
    std::cout << "lines executed: " << outcome.lines_executed << "\n";
    std::cout << "reproduced:     " << (outcome.reproduced ? "yes" : "no") << "\n";
    if (outcome.signature) {
        std::cout << "signature:      " << outcome.signature->exception_class;
        if (!outcome.signature->message.empty()) std::cout << ": " << outcome.signature->message;
        std::cout << "\n";
        for (const std::string& frame : outcome.signature->stack)
            std::cout << "    at " << frame << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crashscope: automated crash discovery, reporting and replay for app models"};
    app.require_subcommand(1);

    RunConfig config;
    std::string strategies = "all";
    auto* run = app.add_subcommand("run", "explore an app model and emit reports and scripts");
    run->add_option("--app", config.app_model_path, "app model file")->required();
    run->add_option("--strategies", strategies, "all or comma-separated strategy labels");
    run->add_option("--seed", config.seed, "text-generation seed");
    run->add_option("--budget", config.budget, "max recorded steps per strategy run");
    run->add_option("--parallel", config.parallelism, "concurrent strategy workers");
    run->add_option("--out", config.out_dir, "output directory");
    run->add_flag("--log-decoys", config.inject_log_decoys,
                  "inject foreign-pid FATAL EXCEPTION decoys into the log");

    fs::path analyze_app;
    auto* analyze = app.add_subcommand("analyze", "print the contextual feature map");
    analyze->add_option("--app", analyze_app, "app model file")->required();

    fs::path report_trace, report_out = ".";
    auto* report = app.add_subcommand("report", "generate the HTML crash report for a trace");
    report->add_option("--trace", report_trace, "trace file")->required();
    report->add_option("--out", report_out, "output directory");

    fs::path script_trace, script_out = ".";
    auto* script = app.add_subcommand("script", "generate the replay script for a trace");
    script->add_option("--trace", script_trace, "trace file")->required();
    script->add_option("--out", script_out, "output directory");

    fs::path replay_script_path, replay_app;
    auto* replay_cmd = app.add_subcommand("replay", "replay a script against a fresh simulator");
    replay_cmd->add_option("--script", replay_script_path, "script file")->required();
    replay_cmd->add_option("--app", replay_app, "app model file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (strategies != "all") config.strategies = split_labels(strategies);
            return cmd_run(config);
        }
        if (analyze->parsed()) return cmd_analyze(analyze_app);
        if (report->parsed()) return cmd_report(report_trace, report_out);
        if (script->parsed()) return cmd_script(script_trace, script_out);
        if (replay_cmd->parsed()) return cmd_replay(replay_script_path, replay_app);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
