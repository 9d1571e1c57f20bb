// Simulated device: the abstract device contract plus an in-memory
// implementation over an AppModel. Stands in for an emulator reached
// through adb/telnet; every operation is deterministic given the model,
// the prior event sequence and the contextual state.
#pragma once

#include "crashscope/appmodel.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace crashscope {

// ---------------------------------------------------------------------------
// Contextual state
// ---------------------------------------------------------------------------

/// Sentinel for coordinates that do not represent a physical GPS location.
inline constexpr double kInvalidGpsCoordinate = 999.0;

/// Sensor reading far outside anything possible under normal conditions.
inline constexpr double kAdverseSensorValue = 1e6;

struct GpsState {
    double lat = 0.0;
    double lon = 0.0;
    bool invalid = false;

    friend bool operator==(const GpsState&, const GpsState&) = default;
};

struct ContextualState {
    bool network_on = true;
    GpsState gps;
    std::set<ContextFeature> sensor_adverse;  // accelerometer/magnetometer/temperature
    Orientation orientation = Orientation::portrait;

    friend bool operator==(const ContextualState&, const ContextualState&) = default;
};

// ---------------------------------------------------------------------------
// Events and observations
// ---------------------------------------------------------------------------

struct Event {
    ActionKind kind = ActionKind::tap;
    std::optional<std::string> target;        // component id
    std::optional<std::pair<int, int>> point; // window coordinates
    std::optional<std::string> text;          // type_text payload

    static Event tap(std::string component) {
        return Event{ActionKind::tap, std::move(component), std::nullopt, std::nullopt};
    }
    static Event tap_at(int x, int y) {
        return Event{ActionKind::tap, std::nullopt, std::pair{x, y}, std::nullopt};
    }
    static Event long_tap(std::string component) {
        return Event{ActionKind::long_tap, std::move(component), std::nullopt, std::nullopt};
    }
    static Event long_tap_at(int x, int y) {
        return Event{ActionKind::long_tap, std::nullopt, std::pair{x, y}, std::nullopt};
    }
    static Event type(std::string component, std::string text) {
        return Event{ActionKind::type_text, std::move(component), std::nullopt, std::move(text)};
    }
    /// Types into whichever component currently holds focus.
    static Event type_focused(std::string text) {
        return Event{ActionKind::type_text, std::nullopt, std::nullopt, std::move(text)};
    }
    static Event back() { return Event{ActionKind::back, std::nullopt, std::nullopt, std::nullopt}; }

    friend bool operator==(const Event&, const Event&) = default;
};

struct CrashDialog {
    std::string dialog_text;  // "<app name> has stopped"

    friend bool operator==(const CrashDialog&, const CrashDialog&) = default;
};

struct LogEntry {
    int pid = 0;
    std::string severity;  // "I", "E", ...
    std::string marker;    // "FATAL EXCEPTION" for crash entries
    std::optional<CrashSignature> signature;
    std::string text;

    friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

struct DeviceObservation {
    std::optional<CrashDialog> crash_dialog;
    std::vector<LogEntry> log_entries;  // entries appended by the observed operation
    std::string foreground_window;      // window id; "" for dialogs and when not running
    int width = 0;
    int height = 0;

    friend bool operator==(const DeviceObservation&, const DeviceObservation&) = default;
};

/// Snapshot of the foreground window. Component order equals depth-first
/// document order of the window's component sequence. Dialog windows have no
/// stable identifier: `window` is empty and callers fall back to kind + size.
struct HierarchyDump {
    std::string window;
    WindowKind kind = WindowKind::activity;
    int width = 0;
    int height = 0;
    std::vector<ComponentModel> components;

    const ComponentModel* find_component(const std::string& cid) const {
        for (const auto& c : components)
            if (c.id == cid) return &c;
        return nullptr;
    }
};

struct ScreenRendering {
    std::string svg;

    friend bool operator==(const ScreenRendering&, const ScreenRendering&) = default;
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class DeviceError : public std::runtime_error {
public:
    explicit DeviceError(const std::string& what) : std::runtime_error(what) {}
};

/// The event targeted a component that is not part of the foreground window;
/// the caller's hierarchy snapshot is outdated.
class StaleTargetError : public DeviceError {
public:
    explicit StaleTargetError(const std::string& component)
        : DeviceError("stale target: component '" + component +
                      "' is not in the foreground window") {}
};

// ---------------------------------------------------------------------------
// Device contract
// ---------------------------------------------------------------------------

class DeviceInterface {
public:
    virtual ~DeviceInterface() = default;

    virtual HierarchyDump launch_app() = 0;
    virtual HierarchyDump current_hierarchy() const = 0;
    virtual DeviceObservation perform(const Event& event) = 0;
    virtual DeviceObservation press_back() = 0;
    virtual DeviceObservation rotate(Orientation orientation) = 0;

    virtual void set_network(bool on) = 0;
    virtual void set_gps(double lat, double lon) = 0;
    virtual void set_gps_invalid() = 0;
    virtual void set_sensor(ContextFeature feature, double value) = 0;

    /// Declared keyboard of a text field. Requires a prior touch event on the
    /// field (the keyboard must be on screen before its metadata is read).
    virtual KeyboardType keyboard_type_of(const std::string& component_id) const = 0;

    virtual std::optional<CrashDialog> crash_dialog() const = 0;
    virtual std::vector<LogEntry> drain_log() = 0;
    virtual ScreenRendering screenshot() const = 0;
    virtual void reset() = 0;

    virtual bool app_running() const = 0;
    virtual int app_pid() const = 0;
    virtual ContextualState context() const = 0;
    virtual std::string os_version() const = 0;
    virtual std::string device_name() const = 0;
    /// Device resolution = size of the app's initial activity window.
    virtual std::pair<int, int> resolution() const = 0;
};

// ---------------------------------------------------------------------------
// Simulator
// ---------------------------------------------------------------------------

class SimDevice : public DeviceInterface {
public:
    struct Options {
        /// Append FATAL EXCEPTION decoys under a foreign pid alongside real
        /// crash entries, to exercise log filtering.
        bool inject_foreign_pid_decoys = false;
        std::string os_version = "SimDevice 4.4.2";
        std::string device_name = "SimDevice";
    };

    static constexpr int kBasePid = 10421;
    static constexpr int kForeignPid = 424;

    static CrashSignature decoy_signature() {
        return CrashSignature{"android.os.DeadSystemException",
                              "decoy entry from another process",
                              {"android.os.SystemServer.run(SystemServer.java:1)"}};
    }

    explicit SimDevice(std::shared_ptr<const AppModel> model)
        : SimDevice(std::move(model), Options{}) {}

    SimDevice(std::shared_ptr<const AppModel> model, Options options)
        : model_(std::move(model)), options_(std::move(options)) {
        reset();
    }

    void reset() override {
        running_ = false;
        crash_dialog_.reset();
        back_stack_.clear();
        state_ = ContextualState{};
        log_.clear();
        typed_.clear();
        focused_.reset();
        next_pid_ = kBasePid;
        pid_ = 0;
    }

    HierarchyDump launch_app() override {
        crash_dialog_.reset();
        running_ = true;
        pid_ = next_pid_++;
        back_stack_ = {model_->initial_window};
        typed_.clear();
        focused_.reset();
        if (options_.inject_foreign_pid_decoys)
            log_.push_back(LogEntry{kForeignPid, "I", "", std::nullopt,
                                    "ActivityManager: start proc " + model_->app_info.package});
        return current_hierarchy();
    }

    HierarchyDump current_hierarchy() const override {
        const WindowModel& w = foreground();
        HierarchyDump d;
        d.window = w.kind == WindowKind::activity ? w.id : std::string{};
        d.kind = w.kind;
        d.width = w.width;
        d.height = w.height;
        d.components = w.components;
        return d;
    }

    DeviceObservation perform(const Event& event) override {
        if (event.kind == ActionKind::back) return press_back();
        if (event.kind == ActionKind::rotate)
            throw DeviceError("rotate events are delivered via rotate(orientation)");
        if (!running_) throw DeviceError("app not running");
        if (crash_dialog_) throw DeviceError("crash dialog pending; dismiss or relaunch first");

        const std::size_t mark = log_.size();
        const WindowModel& w = foreground();
        const ComponentModel* comp = resolve_target(event, w);
        if (!comp) return observe_since(mark);  // tap on empty space / no focus

        if (event.kind == ActionKind::type_text) {
            typed_[{w.id, comp->id}] = event.text.value_or("");
            focused_ = comp->id;
        } else if (comp->is_text_field) {
            focused_ = comp->id;  // touch shows the keyboard
        }

        match_and_apply(w.id, comp->id, event.kind);
        return observe_since(mark);
    }

    DeviceObservation press_back() override {
        const std::size_t mark = log_.size();
        if (crash_dialog_) {
            crash_dialog_.reset();  // dismiss; the app stays dead
            return observe_since(mark);
        }
        if (!running_) return observe_since(mark);
        focused_.reset();
        if (back_stack_.size() > 1) {
            back_stack_.pop_back();
        } else {
            back_stack_.clear();  // back on the root exits the app
            running_ = false;
        }
        return observe_since(mark);
    }

    DeviceObservation rotate(Orientation orientation) override {
        const std::size_t mark = log_.size();
        if (!running_ || crash_dialog_) {
            state_.orientation = orientation;  // home screen rotates freely
            return observe_since(mark);
        }
        const WindowModel& w = foreground();
        const ActivityInfo* activity = model_->manifest.find(w.activity_name);
        if (!activity || !activity->rotatable)
            return observe_since(mark);  // manifest-locked: ignored, no rule evaluated
        if (state_.orientation != orientation) {
            state_.orientation = orientation;
            match_and_apply(w.id, std::nullopt, ActionKind::rotate);
        }
        return observe_since(mark);
    }

    void set_network(bool on) override { state_.network_on = on; }

    void set_gps(double lat, double lon) override {
        state_.gps.lat = lat;
        state_.gps.lon = lon;
        state_.gps.invalid = (lat == kInvalidGpsCoordinate && lon == kInvalidGpsCoordinate);
    }

    void set_gps_invalid() override { set_gps(kInvalidGpsCoordinate, kInvalidGpsCoordinate); }

    void set_sensor(ContextFeature feature, double value) override {
        if (feature == ContextFeature::network || feature == ContextFeature::gps)
            throw DeviceError("use set_network/set_gps for this feature");
        if (value >= kAdverseSensorValue)
            state_.sensor_adverse.insert(feature);
        else
            state_.sensor_adverse.erase(feature);
    }

    KeyboardType keyboard_type_of(const std::string& component_id) const override {
        if (!running_) throw DeviceError("app not running");
        const ComponentModel* comp = foreground().find_component(component_id);
        if (!comp) throw StaleTargetError(component_id);
        if (!comp->is_text_field)
            throw DeviceError("component '" + component_id + "' is not a text field");
        if (!focused_ || *focused_ != component_id)
            throw DeviceError("keyboard not shown: touch the text field before querying");
        return *comp->keyboard;
    }

    std::optional<CrashDialog> crash_dialog() const override { return crash_dialog_; }

    std::vector<LogEntry> drain_log() override {
        std::vector<LogEntry> out;
        out.swap(log_);
        return out;
    }

    ScreenRendering screenshot() const override {
        std::ostringstream svg;
        if (!running_ && !crash_dialog_) {
            auto [w, h] = resolution();
            svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
                << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
            svg << "  <rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h
                << "\" fill=\"#1b1b1b\"/>\n";
            svg << "  <text x=\"" << w / 2 << "\" y=\"" << h / 2
                << "\" fill=\"#cccccc\" font-family=\"monospace\" font-size=\"40\" "
                   "text-anchor=\"middle\">app not running</text>\n";
            svg << "</svg>\n";
            return ScreenRendering{svg.str()};
        }
        const WindowModel& w = foreground();
        svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w.width << "\" height=\""
            << w.height << "\" viewBox=\"0 0 " << w.width << " " << w.height << "\">\n";
        svg << "  <rect x=\"0\" y=\"0\" width=\"" << w.width << "\" height=\"" << w.height
            << "\" fill=\"" << (w.kind == WindowKind::dialog ? "#f4f4f4" : "#fafafa")
            << "\" stroke=\"#333333\" stroke-width=\"2\"/>\n";
        svg << "  <text x=\"12\" y=\"28\" fill=\"#666666\" font-family=\"monospace\" "
               "font-size=\"20\">"
            << xml_escape(w.kind == WindowKind::dialog ? w.activity_name + " (dialog)" : w.id)
            << "</text>\n";
        for (const auto& c : w.components) {
            const Bounds& b = c.bounds;
            const char* fill = c.is_text_field ? "#ffffff" : (c.clickable ? "#dde6f0" : "#eeeeee");
            svg << "  <rect x=\"" << b.x1 << "\" y=\"" << b.y1 << "\" width=\"" << b.x2 - b.x1
                << "\" height=\"" << b.y2 - b.y1 << "\" fill=\"" << fill
                << "\" stroke=\"#555555\"/>\n";
            std::string label = c.text;
            if (c.is_text_field) {
                auto it = typed_.find({w.id, c.id});
                if (it != typed_.end()) label = it->second;
            }
            if (!label.empty()) {
                svg << "  <text x=\"" << (b.x1 + b.x2) / 2 << "\" y=\"" << (b.y1 + b.y2) / 2
                    << "\" fill=\"#222222\" font-family=\"monospace\" font-size=\"24\" "
                       "text-anchor=\"middle\" dominant-baseline=\"middle\">"
                    << xml_escape(label) << "</text>\n";
            }
        }
        if (crash_dialog_) {
            const int bw = w.width * 3 / 4, bh = 160;
            const int bx = (w.width - bw) / 2, by = (w.height - bh) / 2;
            svg << "  <rect x=\"" << bx << "\" y=\"" << by << "\" width=\"" << bw
                << "\" height=\"" << bh
                << "\" fill=\"#ffffff\" stroke=\"#aa0000\" stroke-width=\"3\"/>\n";
            svg << "  <text x=\"" << w.width / 2 << "\" y=\"" << by + bh / 2
                << "\" fill=\"#aa0000\" font-family=\"monospace\" font-size=\"28\" "
                   "text-anchor=\"middle\" dominant-baseline=\"middle\">"
                << xml_escape(crash_dialog_->dialog_text) << "</text>\n";
        }
        svg << "</svg>\n";
        return ScreenRendering{svg.str()};
    }

    bool app_running() const override { return running_; }
    int app_pid() const override { return pid_; }
    ContextualState context() const override { return state_; }
    std::string os_version() const override { return options_.os_version; }
    std::string device_name() const override { return options_.device_name; }

    std::pair<int, int> resolution() const override {
        const WindowModel* w = model_->find_window(model_->initial_window);
        return {w->width, w->height};
    }

    /// Test hook: append an arbitrary logcat entry.
    void inject_log_entry(LogEntry entry) { log_.push_back(std::move(entry)); }

    const AppModel& model() const { return *model_; }

private:
    const WindowModel& foreground() const {
        if (back_stack_.empty()) throw DeviceError("app not running");
        return *model_->find_window(back_stack_.back());
    }

    const ComponentModel* resolve_target(const Event& event, const WindowModel& w) const {
        if (event.target) {
            const ComponentModel* comp = w.find_component(*event.target);
            if (!comp) throw StaleTargetError(*event.target);
            return comp;
        }
        if (event.point) {
            // Topmost match wins: later siblings draw above earlier ones.
            for (auto it = w.components.rbegin(); it != w.components.rend(); ++it)
                if (it->bounds.contains(event.point->first, event.point->second)) return &*it;
            return nullptr;
        }
        if (event.kind == ActionKind::type_text && focused_)
            return w.find_component(*focused_);
        return nullptr;
    }

    bool guards_satisfied(const RuleGuards& g, const std::string& window_id) const {
        if (g.network_on && *g.network_on != state_.network_on) return false;
        if (g.orientation && *g.orientation != state_.orientation) return false;
        if (g.gps_invalid && *g.gps_invalid != state_.gps.invalid) return false;
        if (g.sensor_adverse && !state_.sensor_adverse.count(*g.sensor_adverse)) return false;
        for (const auto& [cid, pattern] : g.text_matches) {
            auto it = typed_.find({window_id, cid});
            if (it == typed_.end()) return false;
            // Unanchored: the rule fires if the pattern occurs anywhere in the
            // last text typed into the component.
            if (!std::regex_search(it->second, std::regex(pattern))) return false;
        }
        return true;
    }

    void match_and_apply(const std::string& window_id,
                         const std::optional<std::string>& component_id, ActionKind action) {
        for (const auto& rule : model_->behavior) {
            if (rule.trigger.window != window_id) continue;
            if (rule.trigger.action != action) continue;
            if (rule.trigger.component && rule.trigger.component != component_id) continue;
            if (!guards_satisfied(rule.guards, window_id)) continue;
            apply_result(rule.result);
            return;  // first match wins
        }
    }

    void apply_result(const RuleResult& result) {
        if (const auto* nav = std::get_if<NavigateTo>(&result)) {
            back_stack_.push_back(nav->window);
            focused_.reset();
        } else if (const auto* dlg = std::get_if<OpenDialog>(&result)) {
            back_stack_.push_back(dlg->window);
            focused_.reset();
        } else if (const auto* crash = std::get_if<CrashApp>(&result)) {
            crash_dialog_ = CrashDialog{model_->app_info.name + " has stopped"};
            if (options_.inject_foreign_pid_decoys)
                log_.push_back(LogEntry{kForeignPid, "E", "FATAL EXCEPTION", decoy_signature(),
                                        "FATAL EXCEPTION: main"});
            log_.push_back(LogEntry{pid_, "E", "FATAL EXCEPTION", crash->signature,
                                    "FATAL EXCEPTION: main"});
            running_ = false;
        }
    }

    DeviceObservation observe_since(std::size_t mark) const {
        DeviceObservation obs;
        obs.crash_dialog = crash_dialog_;
        obs.log_entries.assign(log_.begin() + static_cast<std::ptrdiff_t>(mark), log_.end());
        if (running_ && !back_stack_.empty()) {
            const WindowModel& w = foreground();
            obs.foreground_window = w.kind == WindowKind::activity ? w.id : std::string{};
            obs.width = w.width;
            obs.height = w.height;
        }
        return obs;
    }

    static std::string xml_escape(const std::string& s) {
        std::string out;
        out.reserve(s.size());
        for (char ch : s) {
            switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += ch;
            }
        }
        return out;
    }

    std::shared_ptr<const AppModel> model_;
    Options options_;
    bool running_ = false;
    std::optional<CrashDialog> crash_dialog_;
    std::vector<std::string> back_stack_;  // window ids, root first
    ContextualState state_;
    std::vector<LogEntry> log_;
    std::map<std::pair<std::string, std::string>, std::string> typed_;  // (window, component)
    std::optional<std::string> focused_;
    int next_pid_ = kBasePid;
    int pid_ = 0;
};

}  // namespace crashscope
