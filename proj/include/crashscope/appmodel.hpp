// Declarative app-model types, file loading, and structural validation.
// Every other component consumes the model defined here; see
// docs/appmodel-format.md for the on-disk grammar.
#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace crashscope {

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

/// Environment-dependent capabilities whose adverse state can induce crashes.
enum class ContextFeature { network, gps, accelerometer, magnetometer, temperature };

inline constexpr std::array<ContextFeature, 5> kAllContextFeatures = {
    ContextFeature::network,       ContextFeature::gps,
    ContextFeature::accelerometer, ContextFeature::magnetometer,
    ContextFeature::temperature,
};

/// Soft-keyboard classes associated with text fields.
enum class KeyboardType { plain_text, number, email, phone, uri };

enum class WindowKind { activity, dialog };

/// Input event kinds the ripping engine can deliver.
enum class ActionKind { tap, long_tap, type_text, back, rotate };

enum class Orientation { portrait, landscape };

inline const char* context_feature_name(ContextFeature f) {
    switch (f) {
    case ContextFeature::network: return "network";
    case ContextFeature::gps: return "gps";
    case ContextFeature::accelerometer: return "accelerometer";
    case ContextFeature::magnetometer: return "magnetometer";
    case ContextFeature::temperature: return "temperature";
    }
    return "?";
}

inline std::optional<ContextFeature> context_feature_from_name(const std::string& s) {
    for (ContextFeature f : kAllContextFeatures)
        if (s == context_feature_name(f)) return f;
    return std::nullopt;
}

inline const char* keyboard_type_name(KeyboardType k) {
    switch (k) {
    case KeyboardType::plain_text: return "plain_text";
    case KeyboardType::number: return "number";
    case KeyboardType::email: return "email";
    case KeyboardType::phone: return "phone";
    case KeyboardType::uri: return "uri";
    }
    return "?";
}

inline std::optional<KeyboardType> keyboard_type_from_name(const std::string& s) {
    for (KeyboardType k : {KeyboardType::plain_text, KeyboardType::number, KeyboardType::email,
                           KeyboardType::phone, KeyboardType::uri})
        if (s == keyboard_type_name(k)) return k;
    return std::nullopt;
}

inline const char* action_kind_name(ActionKind a) {
    switch (a) {
    case ActionKind::tap: return "tap";
    case ActionKind::long_tap: return "long_tap";
    case ActionKind::type_text: return "type_text";
    case ActionKind::back: return "back";
    case ActionKind::rotate: return "rotate";
    }
    return "?";
}

inline std::optional<ActionKind> action_kind_from_name(const std::string& s) {
    for (ActionKind a : {ActionKind::tap, ActionKind::long_tap, ActionKind::type_text,
                         ActionKind::back, ActionKind::rotate})
        if (s == action_kind_name(a)) return a;
    return std::nullopt;
}

inline const char* orientation_name(Orientation o) {
    return o == Orientation::portrait ? "portrait" : "landscape";
}

inline std::optional<Orientation> orientation_from_name(const std::string& s) {
    if (s == "portrait") return Orientation::portrait;
    if (s == "landscape") return Orientation::landscape;
    return std::nullopt;
}

inline const char* window_kind_name(WindowKind k) {
    return k == WindowKind::activity ? "activity" : "dialog";
}

// ---------------------------------------------------------------------------
// Keyboard charsets
// ---------------------------------------------------------------------------
// Each keyboard type maps to a fixed base charset (characters an "expected"
// input draws from) and a fixed special-character set (the additional
// characters an "unexpected" input may contain).

inline const std::string& keyboard_base_charset(KeyboardType k) {
    static const std::string plain =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 ";
    static const std::string number = "0123456789";
    static const std::string email =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.@";
    static const std::string phone = "0123456789";
    static const std::string uri =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789:/.";
    switch (k) {
    case KeyboardType::plain_text: return plain;
    case KeyboardType::number: return number;
    case KeyboardType::email: return email;
    case KeyboardType::phone: return phone;
    case KeyboardType::uri: return uri;
    }
    return plain;
}

inline const std::string& keyboard_special_charset(KeyboardType k) {
    static const std::string plain = "!@#$%^&*()_+-=[]{};':\",./<>?";
    static const std::string number = "-.,";
    static const std::string email = "_+-";
    static const std::string phone = "+-#*()";
    static const std::string uri = "?&=%#_-";
    switch (k) {
    case KeyboardType::plain_text: return plain;
    case KeyboardType::number: return number;
    case KeyboardType::email: return email;
    case KeyboardType::phone: return phone;
    case KeyboardType::uri: return uri;
    }
    return plain;
}

// ---------------------------------------------------------------------------
// Model types
// ---------------------------------------------------------------------------

struct AppInfo {
    std::string name;
    std::string version;
    std::string package;  // dotted prefix owning the app's stack frames

    friend bool operator==(const AppInfo&, const AppInfo&) = default;
};

struct ActivityInfo {
    std::string name;
    bool rotatable = false;
    bool is_main = false;

    friend bool operator==(const ActivityInfo&, const ActivityInfo&) = default;
};

struct Manifest {
    std::vector<ActivityInfo> activities;

    const ActivityInfo* find(const std::string& name) const {
        for (const auto& a : activities)
            if (a.name == name) return &a;
        return nullptr;
    }
    const ActivityInfo* main_activity() const {
        for (const auto& a : activities)
            if (a.is_main) return &a;
        return nullptr;
    }

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct ContextualCall {
    std::string method;
    ContextFeature feature;

    friend bool operator==(const ContextualCall&, const ContextualCall&) = default;
};

struct CallGraph {
    std::set<std::string> methods;
    std::set<std::pair<std::string, std::string>> edges;  // (caller, callee)
    std::vector<ContextualCall> contextual_calls;
    std::map<std::string, std::set<std::string>> activity_entries;

    friend bool operator==(const CallGraph&, const CallGraph&) = default;
};

struct Bounds {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    bool contains(int x, int y) const { return x >= x1 && x <= x2 && y >= y1 && y <= y2; }

    friend bool operator==(const Bounds&, const Bounds&) = default;
};

struct ComponentModel {
    std::string id;
    std::string widget_type;  // "button", "edit text", ...
    std::string text;         // display text, may be empty
    Bounds bounds;            // window coordinates
    bool clickable = false;
    bool long_clickable = false;
    bool is_text_field = false;
    std::optional<KeyboardType> keyboard;  // present iff is_text_field

    friend bool operator==(const ComponentModel&, const ComponentModel&) = default;
};

struct WindowModel {
    std::string id;
    WindowKind kind = WindowKind::activity;
    std::string activity_name;  // owning activity (dialogs: the spawning one)
    int width = 0;
    int height = 0;
    std::vector<ComponentModel> components;

    const ComponentModel* find_component(const std::string& cid) const {
        for (const auto& c : components)
            if (c.id == cid) return &c;
        return nullptr;
    }

    friend bool operator==(const WindowModel&, const WindowModel&) = default;
};

struct CrashSignature {
    std::string exception_class;
    std::string message;
    std::vector<std::string> stack;

    friend bool operator==(const CrashSignature&, const CrashSignature&) = default;
};

struct RuleTrigger {
    std::string window;
    std::optional<std::string> component;  // absent = any component event
    ActionKind action = ActionKind::tap;

    friend bool operator==(const RuleTrigger&, const RuleTrigger&) = default;
};

/// Guards absent from a rule match any context.
struct RuleGuards {
    std::optional<bool> network_on;
    std::optional<Orientation> orientation;
    std::optional<bool> gps_invalid;
    std::optional<ContextFeature> sensor_adverse;
    std::map<std::string, std::string> text_matches;  // component id -> regex

    friend bool operator==(const RuleGuards&, const RuleGuards&) = default;
};

struct NavigateTo {
    std::string window;
    friend bool operator==(const NavigateTo&, const NavigateTo&) = default;
};
struct OpenDialog {
    std::string window;
    friend bool operator==(const OpenDialog&, const OpenDialog&) = default;
};
struct CrashApp {
    CrashSignature signature;
    friend bool operator==(const CrashApp&, const CrashApp&) = default;
};
struct NoEffect {
    friend bool operator==(const NoEffect&, const NoEffect&) = default;
};

using RuleResult = std::variant<NoEffect, NavigateTo, OpenDialog, CrashApp>;

/// One app-logic rule. Rules are matched in declaration order; the first
/// match wins and at most one result fires per event.
struct BehaviorRule {
    RuleTrigger trigger;
    RuleGuards guards;
    RuleResult result;

    friend bool operator==(const BehaviorRule&, const BehaviorRule&) = default;
};

struct AppModel {
    AppInfo app_info;
    Manifest manifest;
    CallGraph call_graph;
    std::vector<WindowModel> windows;
    std::vector<BehaviorRule> behavior;
    std::string initial_window;

    const WindowModel* find_window(const std::string& id) const {
        for (const auto& w : windows)
            if (w.id == id) return &w;
        return nullptr;
    }

    friend bool operator==(const AppModel&, const AppModel&) = default;
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Malformed model file (bad JSON, missing or mistyped field).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally well-formed file that violates a model invariant.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace detail {

inline bool frame_has_prefix(const std::string& frame, const std::string& prefix) {
    std::string f = frame;
    if (f.rfind("at ", 0) == 0) f = f.substr(3);
    return f.rfind(prefix, 0) == 0;
}

}  // namespace detail

/// Total structural check. Returns one description per violated invariant,
/// empty when the model is valid. Never throws on any parseable input.
inline std::vector<std::string> validate(const AppModel& m) {
    std::vector<std::string> out;
    auto add = [&out](const std::string& s) { out.push_back(s); };

    // Manifest: names unique, exactly one main activity.
    {
        std::set<std::string> names;
        int mains = 0;
        for (const auto& a : m.manifest.activities) {
            if (!names.insert(a.name).second)
                add("Manifest.activities: duplicate activity name '" + a.name + "'");
            if (a.is_main) ++mains;
        }
        if (mains != 1)
            add("Manifest.activities: expected exactly one is_main activity, found " +
                std::to_string(mains));
    }

    // Call graph: every referenced method must be declared.
    {
        const auto& g = m.call_graph;
        for (const auto& [caller, callee] : g.edges) {
            if (!g.methods.count(caller))
                add("CallGraph.edges: unknown caller method '" + caller + "'");
            if (!g.methods.count(callee))
                add("CallGraph.edges: unknown callee method '" + callee + "'");
        }
        for (const auto& cc : g.contextual_calls)
            if (!g.methods.count(cc.method))
                add("CallGraph.contextual_calls: unknown method '" + cc.method + "'");
        for (const auto& [activity, entries] : g.activity_entries) {
            if (!m.manifest.find(activity))
                add("CallGraph.activity_entries: unknown activity '" + activity + "'");
            for (const auto& e : entries)
                if (!g.methods.count(e))
                    add("CallGraph.activity_entries: unknown entry method '" + e + "'");
        }
    }

    // Windows and components.
    {
        std::set<std::string> ids;
        for (const auto& w : m.windows) {
            if (!ids.insert(w.id).second)
                add("WindowModel.id: duplicate window id '" + w.id + "'");
            if (w.width <= 0 || w.height <= 0)
                add("WindowModel.size: non-positive size (window '" + w.id + "')");
            if (!m.manifest.find(w.activity_name))
                add("WindowModel.activity_name: unknown activity '" + w.activity_name +
                    "' (window '" + w.id + "')");
            std::set<std::string> cids;
            for (const auto& c : w.components) {
                const std::string where = " (component '" + c.id + "' in window '" + w.id + "')";
                if (!cids.insert(c.id).second)
                    add("ComponentModel.id: duplicate component id" + where);
                if (c.bounds.x1 > c.bounds.x2)
                    add("ComponentModel.bounds: x1 > x2" + where);
                if (c.bounds.y1 > c.bounds.y2)
                    add("ComponentModel.bounds: y1 > y2" + where);
                if (c.bounds.x1 < 0 || c.bounds.y1 < 0 || c.bounds.x2 > w.width ||
                    c.bounds.y2 > w.height)
                    add("ComponentModel.bounds: outside window size" + where);
                if (c.keyboard.has_value() != c.is_text_field)
                    add("ComponentModel.keyboard: keyboard must be present iff is_text_field" +
                        where);
            }
        }
    }

    // Initial window.
    {
        const WindowModel* w = m.find_window(m.initial_window);
        if (!w)
            add("AppModel.initial_window: unknown initial window '" + m.initial_window + "'");
        else if (w->kind != WindowKind::activity)
            add("AppModel.initial_window: initial window '" + m.initial_window +
                "' is not an activity");
    }

    // Behavior rules.
    for (std::size_t i = 0; i < m.behavior.size(); ++i) {
        const auto& r = m.behavior[i];
        const std::string where = " (rule #" + std::to_string(i) + ")";
        const WindowModel* w = m.find_window(r.trigger.window);
        if (!w) {
            add("BehaviorRule.trigger.window: unknown window '" + r.trigger.window + "'" + where);
        } else if (r.trigger.component && !w->find_component(*r.trigger.component)) {
            add("BehaviorRule.trigger.component: unknown component '" + *r.trigger.component +
                "' in window '" + r.trigger.window + "'" + where);
        }
        if (w) {
            for (const auto& [cid, pattern] : r.guards.text_matches) {
                if (!w->find_component(cid))
                    add("BehaviorRule.guards.text_matches: unknown component '" + cid +
                        "' in window '" + r.trigger.window + "'" + where);
                try {
                    std::regex re(pattern);
                } catch (const std::regex_error&) {
                    add("BehaviorRule.guards.text_matches: regex does not compile: '" + pattern +
                        "'" + where);
                }
            }
        }
        if (const auto* nav = std::get_if<NavigateTo>(&r.result)) {
            const WindowModel* t = m.find_window(nav->window);
            if (!t)
                add("BehaviorRule.result.navigate: unknown window '" + nav->window + "'" + where);
            else if (t->kind != WindowKind::activity)
                add("BehaviorRule.result.navigate: target '" + nav->window +
                    "' is not an activity" + where);
        } else if (const auto* dlg = std::get_if<OpenDialog>(&r.result)) {
            const WindowModel* t = m.find_window(dlg->window);
            if (!t)
                add("BehaviorRule.result.open_dialog: unknown window '" + dlg->window + "'" +
                    where);
            else if (t->kind != WindowKind::dialog)
                add("BehaviorRule.result.open_dialog: target '" + dlg->window +
                    "' is not a dialog" + where);
        } else if (const auto* crash = std::get_if<CrashApp>(&r.result)) {
            if (crash->signature.stack.empty())
                add("CrashSignature.stack: empty stack" + where);
            else if (!detail::frame_has_prefix(crash->signature.stack.front(),
                                               m.app_info.package))
                add("CrashSignature.stack: first frame '" + crash->signature.stack.front() +
                    "' is outside app package '" + m.app_info.package + "'" + where);
        }
    }

    return out;
}

// ---------------------------------------------------------------------------
// JSON (de)serialization
// ---------------------------------------------------------------------------

namespace detail {

using json = nlohmann::json;

inline const json& require(const json& j, const char* key, const char* ctx) {
    auto it = j.find(key);
    if (it == j.end())
        throw ParseError(std::string(ctx) + ": missing required key '" + key + "'");
    return *it;
}

inline std::string require_string(const json& j, const char* key, const char* ctx) {
    const json& v = require(j, key, ctx);
    if (!v.is_string())
        throw ParseError(std::string(ctx) + ": key '" + key + "' must be a string");
    return v.get<std::string>();
}

inline CrashSignature signature_from_json(const json& j, const char* ctx) {
    if (!j.is_object()) throw ParseError(std::string(ctx) + ": crash signature must be an object");
    CrashSignature sig;
    sig.exception_class = require_string(j, "exception", ctx);
    sig.message = j.value("message", std::string{});
    const json& st = require(j, "stack", ctx);
    if (!st.is_array()) throw ParseError(std::string(ctx) + ": 'stack' must be an array");
    for (const auto& f : st) {
        if (!f.is_string()) throw ParseError(std::string(ctx) + ": stack frames must be strings");
        sig.stack.push_back(f.get<std::string>());
    }
    return sig;
}

inline json signature_to_json(const CrashSignature& sig) {
    return json{{"exception", sig.exception_class},
                {"message", sig.message},
                {"stack", sig.stack}};
}

}  // namespace detail

/// Build an AppModel from its JSON document. Throws ParseError on structural
/// problems; does not run validate().
inline AppModel app_model_from_json(const nlohmann::json& j) {
    using detail::require;
    using detail::require_string;
    using json = nlohmann::json;

    if (!j.is_object()) throw ParseError("app model: top level must be an object");
    AppModel m;

    {
        const json& app = require(j, "app", "app");
        m.app_info.name = require_string(app, "name", "app");
        m.app_info.version = require_string(app, "version", "app");
        m.app_info.package = require_string(app, "package", "app");
    }

    {
        const json& man = require(j, "manifest", "manifest");
        const json& acts = require(man, "activities", "manifest");
        if (!acts.is_array()) throw ParseError("manifest: 'activities' must be an array");
        for (const auto& a : acts) {
            ActivityInfo info;
            info.name = require_string(a, "name", "manifest.activities");
            info.rotatable = a.value("rotatable", false);
            info.is_main = a.value("is_main", false);
            m.manifest.activities.push_back(std::move(info));
        }
    }

    {
        const json& g = require(j, "call_graph", "call_graph");
        for (const auto& v : require(g, "methods", "call_graph")) {
            if (!v.is_string()) throw ParseError("call_graph: methods must be strings");
            m.call_graph.methods.insert(v.get<std::string>());
        }
        for (const auto& e : g.value("edges", json::array())) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
                throw ParseError("call_graph: each edge must be a [caller, callee] string pair");
            m.call_graph.edges.emplace(e[0].get<std::string>(), e[1].get<std::string>());
        }
        for (const auto& c : g.value("contextual_calls", json::array())) {
            ContextualCall cc;
            cc.method = require_string(c, "method", "call_graph.contextual_calls");
            const std::string fname = require_string(c, "feature", "call_graph.contextual_calls");
            auto f = context_feature_from_name(fname);
            if (!f)
                throw ParseError("call_graph.contextual_calls: unknown feature '" + fname + "'");
            cc.feature = *f;
            m.call_graph.contextual_calls.push_back(std::move(cc));
        }
        const json entries_obj = g.value("activity_entries", json::object());
        for (const auto& [activity, entries] : entries_obj.items()) {
            if (!entries.is_array())
                throw ParseError("call_graph.activity_entries: values must be arrays");
            std::set<std::string> set;
            for (const auto& e : entries) {
                if (!e.is_string())
                    throw ParseError("call_graph.activity_entries: entries must be strings");
                set.insert(e.get<std::string>());
            }
            m.call_graph.activity_entries[activity] = std::move(set);
        }
    }

    {
        const json& ws = require(j, "windows", "windows");
        if (!ws.is_array()) throw ParseError("'windows' must be an array");
        for (const auto& wj : ws) {
            WindowModel w;
            w.id = require_string(wj, "id", "windows");
            const std::string kind = require_string(wj, "kind", "windows");
            if (kind == "activity")
                w.kind = WindowKind::activity;
            else if (kind == "dialog")
                w.kind = WindowKind::dialog;
            else
                throw ParseError("windows: unknown kind '" + kind + "'");
            w.activity_name = require_string(wj, "activity", "windows");
            const json& size = require(wj, "size", "windows");
            if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() ||
                !size[1].is_number_integer())
                throw ParseError("windows: 'size' must be [width, height]");
            w.width = size[0].get<int>();
            w.height = size[1].get<int>();
            for (const auto& cj : wj.value("components", json::array())) {
                ComponentModel c;
                c.id = require_string(cj, "id", "components");
                c.widget_type = require_string(cj, "widget", "components");
                c.text = cj.value("text", std::string{});
                const json& b = require(cj, "bounds", "components");
                if (!b.is_array() || b.size() != 4)
                    throw ParseError("components: 'bounds' must be [x1, y1, x2, y2]");
                c.bounds = Bounds{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(),
                                  b[3].get<int>()};
                c.clickable = cj.value("clickable", false);
                c.long_clickable = cj.value("long_clickable", false);
                c.is_text_field = cj.value("is_text_field", false);
                if (cj.contains("keyboard")) {
                    const std::string kb = require_string(cj, "keyboard", "components");
                    auto k = keyboard_type_from_name(kb);
                    if (!k) throw ParseError("components: unknown keyboard type '" + kb + "'");
                    c.keyboard = *k;
                }
                w.components.push_back(std::move(c));
            }
            m.windows.push_back(std::move(w));
        }
    }

    for (const auto& rj : j.value("behavior", json::array())) {
        BehaviorRule r;
        const json& t = require(rj, "trigger", "behavior");
        r.trigger.window = require_string(t, "window", "behavior.trigger");
        if (t.contains("component"))
            r.trigger.component = require_string(t, "component", "behavior.trigger");
        const std::string action = require_string(t, "action", "behavior.trigger");
        auto a = action_kind_from_name(action);
        if (!a) throw ParseError("behavior.trigger: unknown action '" + action + "'");
        r.trigger.action = *a;

        if (rj.contains("guards")) {
            const json& gj = rj["guards"];
            if (gj.contains("network")) {
                const std::string v = require_string(gj, "network", "behavior.guards");
                if (v == "on")
                    r.guards.network_on = true;
                else if (v == "off")
                    r.guards.network_on = false;
                else
                    throw ParseError("behavior.guards: network must be 'on' or 'off'");
            }
            if (gj.contains("orientation")) {
                const std::string v = require_string(gj, "orientation", "behavior.guards");
                auto o = orientation_from_name(v);
                if (!o) throw ParseError("behavior.guards: unknown orientation '" + v + "'");
                r.guards.orientation = *o;
            }
            if (gj.contains("gps_invalid")) {
                if (!gj["gps_invalid"].is_boolean())
                    throw ParseError("behavior.guards: gps_invalid must be a boolean");
                r.guards.gps_invalid = gj["gps_invalid"].get<bool>();
            }
            if (gj.contains("sensor_adverse")) {
                const std::string v = require_string(gj, "sensor_adverse", "behavior.guards");
                auto f = context_feature_from_name(v);
                if (!f) throw ParseError("behavior.guards: unknown feature '" + v + "'");
                r.guards.sensor_adverse = *f;
            }
            const json text_matches = gj.value("text_matches", json::object());
            for (const auto& [cid, pattern] : text_matches.items()) {
                if (!pattern.is_string())
                    throw ParseError("behavior.guards: text_matches values must be strings");
                r.guards.text_matches[cid] = pattern.get<std::string>();
            }
        }

        const json& res = require(rj, "result", "behavior");
        if (res.is_string() && res.get<std::string>() == "none") {
            r.result = NoEffect{};
        } else if (res.is_object() && res.contains("navigate")) {
            r.result = NavigateTo{res["navigate"].get<std::string>()};
        } else if (res.is_object() && res.contains("open_dialog")) {
            r.result = OpenDialog{res["open_dialog"].get<std::string>()};
        } else if (res.is_object() && res.contains("crash")) {
            r.result = CrashApp{detail::signature_from_json(res["crash"], "behavior.result")};
        } else {
            throw ParseError(
                "behavior.result: expected \"none\", {navigate}, {open_dialog} or {crash}");
        }
        m.behavior.push_back(std::move(r));
    }

    m.initial_window = require_string(j, "initial_window", "app model");
    return m;
}

inline nlohmann::json app_model_to_json(const AppModel& m) {
    using json = nlohmann::json;
    json j;
    j["app"] = {{"name", m.app_info.name},
                {"version", m.app_info.version},
                {"package", m.app_info.package}};

    json acts = json::array();
    for (const auto& a : m.manifest.activities)
        acts.push_back({{"name", a.name}, {"rotatable", a.rotatable}, {"is_main", a.is_main}});
    j["manifest"] = {{"activities", acts}};

    json g;
    g["methods"] = m.call_graph.methods;
    json edges = json::array();
    for (const auto& [caller, callee] : m.call_graph.edges)
        edges.push_back(json::array({caller, callee}));
    g["edges"] = edges;
    json ccs = json::array();
    for (const auto& cc : m.call_graph.contextual_calls)
        ccs.push_back({{"method", cc.method}, {"feature", context_feature_name(cc.feature)}});
    g["contextual_calls"] = ccs;
    json entries = json::object();
    for (const auto& [activity, methods] : m.call_graph.activity_entries)
        entries[activity] = methods;
    g["activity_entries"] = entries;
    j["call_graph"] = g;

    json ws = json::array();
    for (const auto& w : m.windows) {
        json wj;
        wj["id"] = w.id;
        wj["kind"] = window_kind_name(w.kind);
        wj["activity"] = w.activity_name;
        wj["size"] = json::array({w.width, w.height});
        json cs = json::array();
        for (const auto& c : w.components) {
            json cj;
            cj["id"] = c.id;
            cj["widget"] = c.widget_type;
            cj["text"] = c.text;
            cj["bounds"] = json::array({c.bounds.x1, c.bounds.y1, c.bounds.x2, c.bounds.y2});
            cj["clickable"] = c.clickable;
            cj["long_clickable"] = c.long_clickable;
            cj["is_text_field"] = c.is_text_field;
            if (c.keyboard) cj["keyboard"] = keyboard_type_name(*c.keyboard);
            cs.push_back(cj);
        }
        wj["components"] = cs;
        ws.push_back(wj);
    }
    j["windows"] = ws;

    json rules = json::array();
    for (const auto& r : m.behavior) {
        json rj;
        json t;
        t["window"] = r.trigger.window;
        if (r.trigger.component) t["component"] = *r.trigger.component;
        t["action"] = action_kind_name(r.trigger.action);
        rj["trigger"] = t;

        json gj = json::object();
        if (r.guards.network_on) gj["network"] = *r.guards.network_on ? "on" : "off";
        if (r.guards.orientation) gj["orientation"] = orientation_name(*r.guards.orientation);
        if (r.guards.gps_invalid) gj["gps_invalid"] = *r.guards.gps_invalid;
        if (r.guards.sensor_adverse)
            gj["sensor_adverse"] = context_feature_name(*r.guards.sensor_adverse);
        if (!r.guards.text_matches.empty()) {
            json tm = json::object();
            for (const auto& [cid, pattern] : r.guards.text_matches) tm[cid] = pattern;
            gj["text_matches"] = tm;
        }
        if (!gj.empty()) rj["guards"] = gj;

        if (std::holds_alternative<NoEffect>(r.result))
            rj["result"] = "none";
        else if (const auto* nav = std::get_if<NavigateTo>(&r.result))
            rj["result"] = {{"navigate", nav->window}};
        else if (const auto* dlg = std::get_if<OpenDialog>(&r.result))
            rj["result"] = {{"open_dialog", dlg->window}};
        else if (const auto* crash = std::get_if<CrashApp>(&r.result))
            rj["result"] = {{"crash", detail::signature_to_json(crash->signature)}};
        rules.push_back(rj);
    }
    j["behavior"] = rules;
    j["initial_window"] = m.initial_window;
    return j;
}

/// Load and validate a model file. Throws ParseError for malformed files and
/// ValidationError naming the first violated invariant.
inline AppModel load_app_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open app model file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed app model file " + path.string() + ": " + e.what());
    }
    AppModel m = app_model_from_json(j);
    auto violations = validate(m);
    if (!violations.empty()) throw ValidationError(violations.front());
    return m;
}

inline std::string serialize_app_model(const AppModel& m) {
    return app_model_to_json(m).dump(2) + "\n";
}

}  // namespace crashscope
