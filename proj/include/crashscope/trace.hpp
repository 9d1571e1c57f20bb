// Execution traces: the ordered record of every event, target component,
// context snapshot and outcome of one app session under one strategy.
#pragma once

#include "crashscope/appmodel.hpp"
#include "crashscope/simdevice.hpp"

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crashscope {

namespace detail {

inline std::string sanitize_file_token(const std::string& s) {
    std::string out;
    for (char ch : s)
        out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-') ? ch : '_';
    return out;
}

}  // namespace detail

/// Everything a trace step can record: the three GUI actions, the back
/// button, and the contextual state changes.
enum class StepKind {
    tap,
    long_tap,
    type_text,
    back,
    wifi_off,
    wifi_on,
    gps_invalid,
    sensor_adverse,
    rotate_landscape,
    rotate_portrait,
};

inline const char* step_kind_name(StepKind k) {
    switch (k) {
    case StepKind::tap: return "tap";
    case StepKind::long_tap: return "long_tap";
    case StepKind::type_text: return "type_text";
    case StepKind::back: return "back";
    case StepKind::wifi_off: return "wifi_off";
    case StepKind::wifi_on: return "wifi_on";
    case StepKind::gps_invalid: return "gps_invalid";
    case StepKind::sensor_adverse: return "sensor_adverse";
    case StepKind::rotate_landscape: return "rotate_landscape";
    case StepKind::rotate_portrait: return "rotate_portrait";
    }
    return "?";
}

inline std::optional<StepKind> step_kind_from_name(const std::string& s) {
    for (StepKind k : {StepKind::tap, StepKind::long_tap, StepKind::type_text, StepKind::back,
                       StepKind::wifi_off, StepKind::wifi_on, StepKind::gps_invalid,
                       StepKind::sensor_adverse, StepKind::rotate_landscape,
                       StepKind::rotate_portrait})
        if (s == step_kind_name(k)) return k;
    return std::nullopt;
}

inline bool is_context_change(StepKind k) {
    switch (k) {
    case StepKind::wifi_off:
    case StepKind::wifi_on:
    case StepKind::gps_invalid:
    case StepKind::sensor_adverse:
    case StepKind::rotate_landscape:
    case StepKind::rotate_portrait: return true;
    default: return false;
    }
}

/// explore = popped from the unvisited stack or part of window-entry testing;
/// nav = replay of an already-recorded transition to reach pending work.
enum class StepPhase { explore, nav };

inline const char* step_phase_name(StepPhase p) {
    return p == StepPhase::explore ? "explore" : "nav";
}

struct ComponentSnapshot {
    std::string id;
    std::string widget_type;
    std::string text;
    Bounds bounds;

    static ComponentSnapshot of(const ComponentModel& c) {
        return ComponentSnapshot{c.id, c.widget_type, c.text, c.bounds};
    }

    friend bool operator==(const ComponentSnapshot&, const ComponentSnapshot&) = default;
};

enum class OutcomeKind { none, transition, crash, exception };

inline const char* outcome_kind_name(OutcomeKind k) {
    switch (k) {
    case OutcomeKind::none: return "none";
    case OutcomeKind::transition: return "transition";
    case OutcomeKind::crash: return "crash";
    case OutcomeKind::exception: return "exception";
    }
    return "?";
}

struct StepOutcome {
    OutcomeKind kind = OutcomeKind::none;
    std::optional<CrashSignature> signature;  // crash/exception payload

    static StepOutcome none() { return {}; }
    static StepOutcome transition() { return {OutcomeKind::transition, std::nullopt}; }
    static StepOutcome crash(CrashSignature sig) {
        return {OutcomeKind::crash, std::move(sig)};
    }
    static StepOutcome exception(CrashSignature sig) {
        return {OutcomeKind::exception, std::move(sig)};
    }

    friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

struct ExecutionStep {
    int index = 0;  // 1-based, contiguous within a trace
    StepKind kind = StepKind::tap;
    StepPhase phase = StepPhase::explore;
    std::optional<ComponentSnapshot> component;
    std::optional<std::string> typed_text;
    std::optional<ContextFeature> sensor;  // payload of sensor_adverse steps
    std::string window_before;             // window key; "" before launch
    std::string window_after;
    ContextualState context;  // snapshot after the step's effect
    std::string screenshot;   // rendering reference (file name)
    StepOutcome outcome;

    friend bool operator==(const ExecutionStep&, const ExecutionStep&) = default;
};

struct TraceMeta {
    std::string app_name;
    std::string app_version;
    std::string package;
    std::string os_version;
    std::string device_name;
    int width = 0;   // device resolution
    int height = 0;
    std::string strategy;  // strategy label
    std::uint64_t seed = 0;
    int run = 0;  // 1-based app-session ordinal within the strategy run

    friend bool operator==(const TraceMeta&, const TraceMeta&) = default;
};

struct ExecutionTrace {
    TraceMeta meta;
    std::vector<ExecutionStep> steps;
    bool crashed = false;
    std::vector<std::string> skipped;  // skip annotations for dropped work items

    const ExecutionStep* crash_step() const {
        if (!crashed || steps.empty()) return nullptr;
        return &steps.back();
    }

    friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

// ---------------------------------------------------------------------------
// JSON serialization (one object per step; meta as a header object)
// ---------------------------------------------------------------------------

inline nlohmann::json contextual_state_to_json(const ContextualState& s) {
    nlohmann::json sensors = nlohmann::json::array();
    for (ContextFeature f : s.sensor_adverse) sensors.push_back(context_feature_name(f));
    return nlohmann::json{
        {"network", s.network_on},
        {"gps", {{"lat", s.gps.lat}, {"lon", s.gps.lon}, {"invalid", s.gps.invalid}}},
        {"sensors_adverse", sensors},
        {"orientation", orientation_name(s.orientation)},
    };
}

inline ContextualState contextual_state_from_json(const nlohmann::json& j) {
    ContextualState s;
    s.network_on = j.at("network").get<bool>();
    s.gps.lat = j.at("gps").at("lat").get<double>();
    s.gps.lon = j.at("gps").at("lon").get<double>();
    s.gps.invalid = j.at("gps").at("invalid").get<bool>();
    for (const auto& f : j.at("sensors_adverse")) {
        auto feature = context_feature_from_name(f.get<std::string>());
        if (feature) s.sensor_adverse.insert(*feature);
    }
    auto o = orientation_from_name(j.at("orientation").get<std::string>());
    s.orientation = o.value_or(Orientation::portrait);
    return s;
}

inline nlohmann::json execution_step_to_json(const ExecutionStep& st) {
    nlohmann::json j;
    j["index"] = st.index;
    j["kind"] = step_kind_name(st.kind);
    j["phase"] = step_phase_name(st.phase);
    if (st.component) {
        j["component"] = {{"id", st.component->id},
                          {"widget", st.component->widget_type},
                          {"text", st.component->text},
                          {"bounds",
                           {st.component->bounds.x1, st.component->bounds.y1,
                            st.component->bounds.x2, st.component->bounds.y2}}};
    }
    if (st.typed_text) j["typed"] = *st.typed_text;
    if (st.sensor) j["sensor"] = context_feature_name(*st.sensor);
    j["before"] = st.window_before;
    j["after"] = st.window_after;
    j["context"] = contextual_state_to_json(st.context);
    j["screenshot"] = st.screenshot;
    switch (st.outcome.kind) {
    case OutcomeKind::none: j["outcome"] = "none"; break;
    case OutcomeKind::transition: j["outcome"] = "transition"; break;
    case OutcomeKind::crash:
        j["outcome"] = {{"crash", detail::signature_to_json(*st.outcome.signature)}};
        break;
    case OutcomeKind::exception:
        j["outcome"] = {{"exception", detail::signature_to_json(*st.outcome.signature)}};
        break;
    }
    return j;
}

inline ExecutionStep execution_step_from_json(const nlohmann::json& j) {
    ExecutionStep st;
    st.index = j.at("index").get<int>();
    auto kind = step_kind_from_name(j.at("kind").get<std::string>());
    if (!kind) throw ParseError("trace step: unknown kind '" + j.at("kind").get<std::string>() + "'");
    st.kind = *kind;
    st.phase = j.at("phase").get<std::string>() == "nav" ? StepPhase::nav : StepPhase::explore;
    if (j.contains("component")) {
        const auto& c = j["component"];
        ComponentSnapshot snap;
        snap.id = c.at("id").get<std::string>();
        snap.widget_type = c.at("widget").get<std::string>();
        snap.text = c.at("text").get<std::string>();
        const auto& b = c.at("bounds");
        snap.bounds = Bounds{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(),
                             b.at(3).get<int>()};
        st.component = snap;
    }
    if (j.contains("typed")) st.typed_text = j["typed"].get<std::string>();
    if (j.contains("sensor"))
        st.sensor = context_feature_from_name(j["sensor"].get<std::string>());
    st.window_before = j.at("before").get<std::string>();
    st.window_after = j.at("after").get<std::string>();
    st.context = contextual_state_from_json(j.at("context"));
    st.screenshot = j.at("screenshot").get<std::string>();
    const auto& out = j.at("outcome");
    if (out.is_string()) {
        st.outcome.kind =
            out.get<std::string>() == "transition" ? OutcomeKind::transition : OutcomeKind::none;
    } else if (out.contains("crash")) {
        st.outcome = StepOutcome::crash(detail::signature_from_json(out["crash"], "trace step"));
    } else if (out.contains("exception")) {
        st.outcome =
            StepOutcome::exception(detail::signature_from_json(out["exception"], "trace step"));
    } else {
        throw ParseError("trace step: malformed outcome");
    }
    return st;
}

inline nlohmann::json trace_meta_to_json(const ExecutionTrace& t) {
    return nlohmann::json{
        {"app", t.meta.app_name},       {"version", t.meta.app_version},
        {"package", t.meta.package},    {"os", t.meta.os_version},
        {"device", t.meta.device_name}, {"width", t.meta.width},
        {"height", t.meta.height},      {"strategy", t.meta.strategy},
        {"seed", t.meta.seed},          {"run", t.meta.run},
        {"crashed", t.crashed},         {"skipped", t.skipped},
    };
}

inline void trace_meta_from_json(const nlohmann::json& j, ExecutionTrace& t) {
    t.meta.app_name = j.at("app").get<std::string>();
    t.meta.app_version = j.at("version").get<std::string>();
    t.meta.package = j.at("package").get<std::string>();
    t.meta.os_version = j.at("os").get<std::string>();
    t.meta.device_name = j.at("device").get<std::string>();
    t.meta.width = j.at("width").get<int>();
    t.meta.height = j.at("height").get<int>();
    t.meta.strategy = j.at("strategy").get<std::string>();
    t.meta.seed = j.at("seed").get<std::uint64_t>();
    t.meta.run = j.at("run").get<int>();
    t.crashed = j.at("crashed").get<bool>();
    t.skipped = j.at("skipped").get<std::vector<std::string>>();
}

}  // namespace crashscope
