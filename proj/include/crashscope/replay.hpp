// Crash reproduction scripts: adb-style input commands plus contextual-state
// markers, generated from a crashed trace and replayable against any device
// bound to the same app model. See docs/script-format.md for the grammar.
#pragma once

#include "crashscope/explorer.hpp"
#include "crashscope/trace.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace crashscope {

class ScriptError : public std::runtime_error {
public:
    explicit ScriptError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Script lines
// ---------------------------------------------------------------------------

namespace script {

struct Launch {
    friend bool operator==(const Launch&, const Launch&) = default;
};
struct Tap {
    int x = 0, y = 0;
    friend bool operator==(const Tap&, const Tap&) = default;
};
/// Long tap, encoded as a same-point swipe with a fixed 800 ms duration.
struct LongTap {
    int x = 0, y = 0;
    friend bool operator==(const LongTap&, const LongTap&) = default;
};
struct Text {
    std::string text;  // unescaped payload
    friend bool operator==(const Text&, const Text&) = default;
};
struct Back {
    friend bool operator==(const Back&, const Back&) = default;
};
struct WifiMarker {
    bool on = false;
    friend bool operator==(const WifiMarker&, const WifiMarker&) = default;
};
struct GpsInvalidMarker {
    friend bool operator==(const GpsInvalidMarker&, const GpsInvalidMarker&) = default;
};
struct SensorAdverseMarker {
    ContextFeature feature = ContextFeature::accelerometer;
    friend bool operator==(const SensorAdverseMarker&, const SensorAdverseMarker&) = default;
};
struct RotateMarker {
    Orientation orientation = Orientation::portrait;
    friend bool operator==(const RotateMarker&, const RotateMarker&) = default;
};
/// Reserved for real-device adapters; the simulator is delay-free.
struct Sleep {
    int millis = 0;
    friend bool operator==(const Sleep&, const Sleep&) = default;
};

}  // namespace script

using ScriptLine =
    std::variant<script::Launch, script::Tap, script::LongTap, script::Text, script::Back,
                 script::WifiMarker, script::GpsInvalidMarker, script::SensorAdverseMarker,
                 script::RotateMarker, script::Sleep>;

struct ReplayScript {
    struct Header {
        int version = 1;
        std::string app;
        std::string strategy;
        std::uint64_t seed = 0;

        friend bool operator==(const Header&, const Header&) = default;
    };
    Header header;
    std::vector<ScriptLine> lines;

    friend bool operator==(const ReplayScript&, const ReplayScript&) = default;
};

// ---------------------------------------------------------------------------
// Coordinates and text escaping
// ---------------------------------------------------------------------------

/// Center of a component's bounds, integer floor division.
inline std::pair<int, int> component_center(const Bounds& b) {
    return {(b.x1 + b.x2) / 2, (b.y1 + b.y2) / 2};
}

/// adb-style `input text` escaping: space becomes %s, quotes and the escape
/// characters themselves are backslash-escaped. Newlines cannot be encoded.
inline std::string escape_script_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        switch (ch) {
        case '\\': out += "\\\\"; break;
        case '"': out += "\\\""; break;
        case '\'': out += "\\'"; break;
        case '%': out += "\\%"; break;
        case ' ': out += "%s"; break;
        case '\n': throw ScriptError("newline cannot be encoded in input text");
        default: out += ch;
        }
    }
    return out;
}

inline std::string unescape_script_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            out += s[++i];
        } else if (s[i] == '%' && i + 1 < s.size() && s[i + 1] == 's') {
            out += ' ';
            ++i;
        } else {
            out += s[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string serialize_script(const ReplayScript& s) {
    std::ostringstream out;
    out << "# crashscope-script v" << s.header.version << "\n";
    out << "# app: " << s.header.app << "\n";
    out << "# strategy: " << s.header.strategy << "\n";
    out << "# seed: " << s.header.seed << "\n";
    for (const ScriptLine& line : s.lines) {
        if (std::holds_alternative<script::Launch>(line)) {
            out << "launch\n";
        } else if (const auto* tap = std::get_if<script::Tap>(&line)) {
            out << "input tap " << tap->x << " " << tap->y << "\n";
        } else if (const auto* lt = std::get_if<script::LongTap>(&line)) {
            out << "input swipe " << lt->x << " " << lt->y << " " << lt->x << " " << lt->y
                << " 800\n";
        } else if (const auto* text = std::get_if<script::Text>(&line)) {
            out << "input text " << escape_script_text(text->text) << "\n";
        } else if (std::holds_alternative<script::Back>(line)) {
            out << "input keyevent BACK\n";
        } else if (const auto* wifi = std::get_if<script::WifiMarker>(&line)) {
            out << (wifi->on ? "<Wifi_ON>" : "<Wifi_OFF>") << "\n";
        } else if (std::holds_alternative<script::GpsInvalidMarker>(line)) {
            out << "<GPS_INVALID>\n";
        } else if (const auto* sensor = std::get_if<script::SensorAdverseMarker>(&line)) {
            out << "<SENSOR_ADVERSE " << context_feature_name(sensor->feature) << ">\n";
        } else if (const auto* rot = std::get_if<script::RotateMarker>(&line)) {
            out << "<ROTATE " << orientation_name(rot->orientation) << ">\n";
        } else if (const auto* sleep = std::get_if<script::Sleep>(&line)) {
            out << "sleep " << sleep->millis << "\n";
        }
    }
    return out.str();
}

inline ReplayScript parse_script(const std::string& text) {
    ReplayScript s;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    auto fail = [&lineno](const std::string& what) {
        throw ScriptError("line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# crashscope-script v", 0) == 0) {
                s.header.version = std::atoi(line.c_str() + 21);
                header_seen = true;
            } else if (line.rfind("# app: ", 0) == 0) {
                s.header.app = line.substr(7);
            } else if (line.rfind("# strategy: ", 0) == 0) {
                s.header.strategy = line.substr(12);
            } else if (line.rfind("# seed: ", 0) == 0) {
                s.header.seed = std::strtoull(line.c_str() + 8, nullptr, 10);
            }
            continue;
        }
        if (line == "launch") {
            s.lines.emplace_back(script::Launch{});
        } else if (line.rfind("input tap ", 0) == 0) {
            int x, y;
            if (std::sscanf(line.c_str(), "input tap %d %d", &x, &y) != 2)
                fail("malformed tap: " + line);
            s.lines.emplace_back(script::Tap{x, y});
        } else if (line.rfind("input swipe ", 0) == 0) {
            int x1, y1, x2, y2, ms;
            if (std::sscanf(line.c_str(), "input swipe %d %d %d %d %d", &x1, &y1, &x2, &y2, &ms) !=
                5)
                fail("malformed swipe: " + line);
            if (x1 != x2 || y1 != y2) fail("only same-point swipes (long taps) are supported");
            s.lines.emplace_back(script::LongTap{x1, y1});
        } else if (line.rfind("input text ", 0) == 0) {
            s.lines.emplace_back(script::Text{unescape_script_text(line.substr(11))});
        } else if (line == "input keyevent BACK") {
            s.lines.emplace_back(script::Back{});
        } else if (line == "<Wifi_OFF>") {
            s.lines.emplace_back(script::WifiMarker{false});
        } else if (line == "<Wifi_ON>") {
            s.lines.emplace_back(script::WifiMarker{true});
        } else if (line == "<GPS_INVALID>") {
            s.lines.emplace_back(script::GpsInvalidMarker{});
        } else if (line.rfind("<SENSOR_ADVERSE ", 0) == 0 && line.back() == '>') {
            const std::string name = line.substr(16, line.size() - 17);
            auto f = context_feature_from_name(name);
            if (!f) fail("unknown sensor feature: " + name);
            s.lines.emplace_back(script::SensorAdverseMarker{*f});
        } else if (line.rfind("<ROTATE ", 0) == 0 && line.back() == '>') {
            const std::string name = line.substr(8, line.size() - 9);
            auto o = orientation_from_name(name);
            if (!o) fail("unknown orientation: " + name);
            s.lines.emplace_back(script::RotateMarker{*o});
        } else if (line.rfind("sleep ", 0) == 0) {
            s.lines.emplace_back(script::Sleep{std::atoi(line.c_str() + 6)});
        } else {
            fail("unrecognized script line: " + line);
        }
    }
    if (!header_seen) throw ScriptError("missing '# crashscope-script v1' header");
    return s;
}

// ---------------------------------------------------------------------------
// Script generation
// ---------------------------------------------------------------------------

/// Translate a crashed trace into a replay script. The line sequence mirrors
/// the step sequence after an initial launch; the script ends at the crashing
/// event's line. Type steps emit a focus tap followed by the text input.
inline ReplayScript generate_script(const ExecutionTrace& trace) {
    if (!trace.crashed)
        throw std::invalid_argument("replay scripts are generated from crashed traces only");
    ReplayScript s;
    s.header.app = trace.meta.app_name;
    s.header.strategy = trace.meta.strategy;
    s.header.seed = trace.meta.seed;
    s.lines.emplace_back(script::Launch{});
    for (const ExecutionStep& step : trace.steps) {
        switch (step.kind) {
        case StepKind::wifi_off: s.lines.emplace_back(script::WifiMarker{false}); break;
        case StepKind::wifi_on: s.lines.emplace_back(script::WifiMarker{true}); break;
        case StepKind::gps_invalid: s.lines.emplace_back(script::GpsInvalidMarker{}); break;
        case StepKind::sensor_adverse:
            s.lines.emplace_back(script::SensorAdverseMarker{
                step.sensor.value_or(ContextFeature::accelerometer)});
            break;
        case StepKind::rotate_landscape:
            s.lines.emplace_back(script::RotateMarker{Orientation::landscape});
            break;
        case StepKind::rotate_portrait:
            s.lines.emplace_back(script::RotateMarker{Orientation::portrait});
            break;
        case StepKind::back: s.lines.emplace_back(script::Back{}); break;
        case StepKind::tap: {
            auto [x, y] = component_center(step.component->bounds);
            s.lines.emplace_back(script::Tap{x, y});
            break;
        }
        case StepKind::long_tap: {
            auto [x, y] = component_center(step.component->bounds);
            s.lines.emplace_back(script::LongTap{x, y});
            break;
        }
        case StepKind::type_text: {
            auto [x, y] = component_center(step.component->bounds);
            s.lines.emplace_back(script::Tap{x, y});  // focus the field
            s.lines.emplace_back(script::Text{step.typed_text.value_or("")});
            break;
        }
        }
    }
    return s;
}

inline std::string script_file_name(const TraceMeta& meta) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "run%03d", meta.run);
    return detail::sanitize_file_token(meta.app_name) + "__" + meta.strategy + "__" + buf +
           ".script";
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

struct ReplayOutcome {
    bool reproduced = false;
    std::optional<CrashSignature> signature;
    int lines_executed = 0;
    int no_op_taps = 0;  // taps that hit no component

    friend bool operator==(const ReplayOutcome&, const ReplayOutcome&) = default;
};

/// Execute a script against a fresh device bound to the same app model. Taps
/// are resolved by hit-testing the point against the foreground hierarchy
/// (topmost match wins); markers map to the contextual-state operations.
/// `reproduced` is true iff a crash dialog appears at or before the final
/// line; replay stops at the crash.
inline ReplayOutcome replay(const ReplayScript& s, DeviceInterface& device) {
    ReplayOutcome out;
    for (const ScriptLine& line : s.lines) {
        std::optional<DeviceObservation> obs;
        if (std::holds_alternative<script::Launch>(line)) {
            device.launch_app();
        } else if (const auto* tap = std::get_if<script::Tap>(&line)) {
            obs = device.perform(Event::tap_at(tap->x, tap->y));
            if (!obs->crash_dialog && device.app_running()) {
                const HierarchyDump dump = device.current_hierarchy();
                bool hit = false;
                for (const auto& c : dump.components)
                    if (c.bounds.contains(tap->x, tap->y)) hit = true;
                if (!hit) ++out.no_op_taps;  // recorded as a no-op, replay continues
            }
        } else if (const auto* lt = std::get_if<script::LongTap>(&line)) {
            obs = device.perform(Event::long_tap_at(lt->x, lt->y));
        } else if (const auto* text = std::get_if<script::Text>(&line)) {
            obs = device.perform(Event::type_focused(text->text));
        } else if (std::holds_alternative<script::Back>(line)) {
            obs = device.press_back();
        } else if (const auto* wifi = std::get_if<script::WifiMarker>(&line)) {
            device.set_network(wifi->on);
        } else if (std::holds_alternative<script::GpsInvalidMarker>(line)) {
            device.set_gps_invalid();
        } else if (const auto* sensor = std::get_if<script::SensorAdverseMarker>(&line)) {
            device.set_sensor(sensor->feature, kAdverseSensorValue);
        } else if (const auto* rot = std::get_if<script::RotateMarker>(&line)) {
            obs = device.rotate(rot->orientation);
        } else if (std::holds_alternative<script::Sleep>(line)) {
            // delay-free simulator: interpreted as a no-op
        }
        ++out.lines_executed;
        if (obs) {
            if (auto sig = detect_crash(*obs, device.app_pid())) {
                out.reproduced = true;
                out.signature = std::move(sig);
                break;
            }
        }
    }
    return out;
}

}  // namespace crashscope
