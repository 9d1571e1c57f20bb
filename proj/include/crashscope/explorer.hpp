// The GUI ripping engine: systematic, crash-resilient exploration of an app
// model under one of twelve strategies, producing one execution trace per app
// session together with the screen renderings captured along the way.
#pragma once

#include "crashscope/analyzer.hpp"
#include "crashscope/appmodel.hpp"
#include "crashscope/simdevice.hpp"
#include "crashscope/trace.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace crashscope {

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

enum class Traversal { top_down, bottom_up };
enum class TextMode { no_text, expected, unexpected };
enum class ContextMode { context_enabled, context_disabled };

inline const char* traversal_label(Traversal t) {
    return t == Traversal::top_down ? "topdown" : "bottomup";
}
inline const char* text_mode_label(TextMode t) {
    switch (t) {
    case TextMode::no_text: return "notext";
    case TextMode::expected: return "expected";
    case TextMode::unexpected: return "unexpected";
    }
    return "?";
}
inline const char* context_mode_label(ContextMode c) {
    return c == ContextMode::context_enabled ? "ctxon" : "ctxoff";
}

struct ExplorationStrategy {
    Traversal traversal = Traversal::top_down;
    TextMode text_mode = TextMode::no_text;
    ContextMode context_mode = ContextMode::context_enabled;
    std::uint64_t seed = 1;
    int budget = 500;  // max recorded steps per run

    /// File-name-safe label, e.g. "unexpected_topdown_ctxon".
    std::string label() const {
        return std::string(text_mode_label(text_mode)) + "_" + traversal_label(traversal) + "_" +
               context_mode_label(context_mode);
    }

    friend bool operator==(const ExplorationStrategy&, const ExplorationStrategy&) = default;
};

/// All twelve combinations of (text mode x traversal x context mode).
inline std::vector<ExplorationStrategy> all_strategies(std::uint64_t seed = 1, int budget = 500) {
    std::vector<ExplorationStrategy> out;
    for (TextMode text : {TextMode::no_text, TextMode::expected, TextMode::unexpected})
        for (Traversal traversal : {Traversal::top_down, Traversal::bottom_up})
            for (ContextMode context :
                 {ContextMode::context_enabled, ContextMode::context_disabled})
                out.push_back(ExplorationStrategy{traversal, text, context, seed, budget});
    return out;
}

inline std::optional<ExplorationStrategy> strategy_from_label(const std::string& label,
                                                              std::uint64_t seed = 1,
                                                              int budget = 500) {
    for (ExplorationStrategy s : all_strategies(seed, budget))
        if (s.label() == label) return s;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Window keys and the transition graph
// ---------------------------------------------------------------------------

/// Identity of a screen for exploration purposes. Activities are keyed by
/// their unique name. Dialogs carry no stable identifier, so they are keyed
/// by owning activity plus window size; two dialogs of equal size under the
/// same activity are indistinguishable by design.
struct WindowKey {
    std::string activity;
    std::optional<std::pair<int, int>> dialog_size;

    bool is_dialog() const { return dialog_size.has_value(); }

    std::string str() const {
        if (!dialog_size) return activity;
        return activity + "[dialog " + std::to_string(dialog_size->first) + "x" +
               std::to_string(dialog_size->second) + "]";
    }

    friend bool operator==(const WindowKey&, const WindowKey&) = default;
};

struct TransitionEdge {
    std::string src;  // window key strings
    std::string dst;
    std::optional<std::string> component;
    ActionKind action = ActionKind::tap;
    std::optional<std::string> text;         // type_text edges replay the same text
    std::optional<Orientation> orientation;  // rotate edges

    friend bool operator==(const TransitionEdge&, const TransitionEdge&) = default;
};

struct TransitionGraph {
    std::set<std::string> nodes;
    std::vector<TransitionEdge> edges;

    void add_node(const std::string& key) { nodes.insert(key); }

    /// At most one edge is recorded per (source, component, action);
    /// returns false when that slot is already taken.
    bool add_edge(TransitionEdge edge) {
        for (const auto& e : edges)
            if (e.src == edge.src && e.component == edge.component && e.action == edge.action)
                return false;
        add_node(edge.src);
        add_node(edge.dst);
        edges.push_back(std::move(edge));
        return true;
    }

    /// Breadth-first shortest edge path. Deterministic: neighbors expand in
    /// edge insertion order.
    std::optional<std::vector<TransitionEdge>> shortest_path(const std::string& from,
                                                             const std::string& to) const {
        if (from == to) return std::vector<TransitionEdge>{};
        std::map<std::string, std::pair<std::string, const TransitionEdge*>> parent;
        std::deque<std::string> queue{from};
        parent[from] = {"", nullptr};
        while (!queue.empty()) {
            std::string cur = queue.front();
            queue.pop_front();
            for (const auto& e : edges) {
                if (e.src != cur || parent.count(e.dst)) continue;
                parent[e.dst] = {cur, &e};
                if (e.dst == to) {
                    std::vector<TransitionEdge> path;
                    std::string at = to;
                    while (at != from) {
                        path.push_back(*parent[at].second);
                        at = parent[at].first;
                    }
                    std::reverse(path.begin(), path.end());
                    return path;
                }
                queue.push_back(e.dst);
            }
        }
        return std::nullopt;
    }
};

// ---------------------------------------------------------------------------
// Unvisited work items
// ---------------------------------------------------------------------------

struct WorkItem {
    std::string window_key;
    std::string component;
    ActionKind action = ActionKind::tap;

    friend bool operator==(const WorkItem&, const WorkItem&) = default;
    friend bool operator<(const WorkItem& a, const WorkItem& b) {
        return std::tie(a.window_key, a.component, a.action) <
               std::tie(b.window_key, b.component, b.action);
    }
};

/// LIFO of yet-to-be-visited (window, component, action) items. An item can
/// be admitted once per run; re-pushing a previously admitted item is a no-op.
class UnvisitedStack {
public:
    bool push(const WorkItem& item) {
        if (!seen_.insert(item).second) return false;
        items_.push_back(item);
        return true;
    }

    /// Re-admit a popped item without consuming another admission
    /// (used when an item was popped but could not be exercised yet).
    void restore(const WorkItem& item) { items_.push_back(item); }

    std::optional<WorkItem> pop() {
        if (items_.empty()) return std::nullopt;
        WorkItem item = items_.back();
        items_.pop_back();
        return item;
    }

    const WorkItem* peek() const { return items_.empty() ? nullptr : &items_.back(); }
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }

    /// Remove every pending item for a window key; returns the removed items.
    std::vector<WorkItem> drain_window(const std::string& window_key) {
        std::vector<WorkItem> removed;
        std::vector<WorkItem> kept;
        for (const auto& item : items_) {
            if (item.window_key == window_key)
                removed.push_back(item);
            else
                kept.push_back(item);
        }
        items_ = std::move(kept);
        return removed;
    }

    std::vector<WorkItem> drain_all() {
        std::vector<WorkItem> removed = std::move(items_);
        items_.clear();
        return removed;
    }

private:
    std::vector<WorkItem> items_;
    std::set<WorkItem> seen_;
};

// ---------------------------------------------------------------------------
// Free operations
// ---------------------------------------------------------------------------

/// Component ids of a hierarchy dump in traversal order: top_down is the
/// dump's depth-first document order, bottom_up its exact reverse.
inline std::vector<std::string> order_components(const HierarchyDump& dump, Traversal traversal) {
    std::vector<std::string> ids;
    ids.reserve(dump.components.size());
    for (const auto& c : dump.components) ids.push_back(c.id);
    if (traversal == Traversal::bottom_up) std::reverse(ids.begin(), ids.end());
    return ids;
}

/// Deterministic text input for a keyboard type. `expected` draws 4-12
/// characters from the base charset only; `unexpected` draws 4-16 characters
/// from base plus specials and always contains at least one special.
inline std::string generate_text(KeyboardType keyboard, TextMode mode, std::mt19937_64& rng) {
    if (mode == TextMode::no_text)
        throw std::invalid_argument("generate_text requires expected or unexpected mode");
    const std::string& base = keyboard_base_charset(keyboard);
    const std::string& specials = keyboard_special_charset(keyboard);
    auto pick = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

    if (mode == TextMode::expected) {
        const std::size_t len = 4 + pick(9);  // 4..12
        std::string s;
        s.reserve(len);
        for (std::size_t i = 0; i < len; ++i) s += base[pick(base.size())];
        return s;
    }

    const std::size_t len = 4 + pick(13);  // 4..16
    const std::string pool = base + specials;
    std::string s;
    s.reserve(len);
    for (std::size_t i = 0; i < len; ++i) s += pool[pick(pool.size())];
    if (s.find_first_of(specials) == std::string::npos)
        s[pick(len)] = specials[pick(specials.size())];
    return s;
}

/// A crash is reported iff the crash dialog is present; its signature is the
/// FATAL EXCEPTION log entry carrying the app's pid. Entries under foreign
/// pids are ignored. A dialog without a matching entry yields the flagged
/// "unknown" signature.
inline std::optional<CrashSignature> detect_crash(const DeviceObservation& obs, int app_pid) {
    if (!obs.crash_dialog) return std::nullopt;
    for (const auto& e : obs.log_entries)
        if (e.pid == app_pid && e.marker == "FATAL EXCEPTION" && e.signature) return e.signature;
    return CrashSignature{"unknown", "crash dialog present without a matching log entry",
                          {"unknown"}};
}

/// Every app-pid exception entry in the observation, crash or not.
inline std::vector<CrashSignature> collect_exceptions(const DeviceObservation& obs, int app_pid) {
    std::vector<CrashSignature> out;
    for (const auto& e : obs.log_entries)
        if (e.pid == app_pid && e.signature) out.push_back(*e.signature);
    return out;
}

namespace detail {

inline WindowKey key_of_dump(const AppModel& model, const HierarchyDump& dump,
                             const std::string& current_activity) {
    if (dump.kind == WindowKind::activity) {
        const WindowModel* w = model.find_window(dump.window);
        return WindowKey{w ? w->activity_name : dump.window, std::nullopt};
    }
    return WindowKey{current_activity, std::pair{dump.width, dump.height}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// navigate_to
// ---------------------------------------------------------------------------

struct NavigationStep {
    TransitionEdge edge;
    std::string screenshot_svg;  // captured before the replayed event
    std::optional<ComponentSnapshot> component;
    DeviceObservation observation;
};

struct NavigationOutcome {
    bool success = false;
    bool crashed = false;  // a replayed edge crashed instead of transitioning
    std::optional<CrashSignature> crash_signature;
    std::vector<NavigationStep> steps;
};

/// Replay the shortest recorded edge path from the app's initial window to
/// `target_key`. Requires a freshly launched device. Fails when no path is
/// recorded or when a replayed edge no longer produces its recorded target.
inline NavigationOutcome navigate_to(const TransitionGraph& graph, DeviceInterface& device,
                                     const AppModel& model, const std::string& target_key) {
    NavigationOutcome out;
    const WindowModel* initial = model.find_window(model.initial_window);
    std::string current_activity = initial->activity_name;
    const std::string initial_key = WindowKey{current_activity, std::nullopt}.str();

    auto path = graph.shortest_path(initial_key, target_key);
    if (!path) return out;

    for (const TransitionEdge& edge : *path) {
        NavigationStep step;
        step.edge = edge;
        step.screenshot_svg = device.screenshot().svg;
        try {
            if (edge.action == ActionKind::rotate) {
                step.observation = device.rotate(edge.orientation.value_or(Orientation::landscape));
            } else {
                const HierarchyDump dump = device.current_hierarchy();
                const ComponentModel* comp =
                    edge.component ? dump.find_component(*edge.component) : nullptr;
                if (edge.component && !comp) return out;  // divergence: component gone
                if (comp) step.component = ComponentSnapshot::of(*comp);
                Event ev{edge.action, edge.component, std::nullopt, edge.text};
                step.observation = device.perform(ev);
            }
        } catch (const DeviceError&) {
            return out;  // divergence
        }
        if (auto sig = detect_crash(step.observation, device.app_pid())) {
            out.crashed = true;
            out.crash_signature = sig;
            out.steps.push_back(std::move(step));
            return out;
        }
        if (!device.app_running()) return out;
        const HierarchyDump after = device.current_hierarchy();
        const WindowKey key = detail::key_of_dump(model, after, current_activity);
        out.steps.push_back(std::move(step));
        if (key.str() != edge.dst) return out;  // divergence
        if (!key.is_dialog()) current_activity = key.activity;
    }
    out.success = true;
    return out;
}

// ---------------------------------------------------------------------------
// The exploration engine
// ---------------------------------------------------------------------------

struct ExploreResult {
    std::vector<ExecutionTrace> traces;
    std::map<std::string, std::string> renderings;  // screenshot ref -> SVG
    TransitionGraph graph;
};

class Explorer {
public:
    Explorer(const AppModel& model, const FeatureMap& features, DeviceInterface& device,
             const ExplorationStrategy& strategy)
        : model_(model), features_(features), device_(device), strategy_(strategy),
          rng_(strategy.seed) {}

    ExploreResult run() {
        device_.reset();
        budget_left_ = strategy_.budget;
        bool needs_session = true;
        bool done = false;
        while (!done) {
            try {
                if (needs_session) {
                    begin_session();
                    needs_session = false;
                }
                const WorkItem* top = stack_.peek();
                if (!top) {
                    finalize_session(false);
                    break;
                }
                if (top->window_key != current_key().str()) {
                    reach(top->window_key);
                    continue;
                }
                WorkItem item = *stack_.pop();
                exercise(item);
            } catch (const CrashInterrupt&) {
                if (stack_.empty() || budget_left_ <= 0) {
                    if (budget_left_ <= 0) note_skipped_remaining("budget exhausted");
                    finalize_session(true);
                    done = true;
                } else {
                    finalize_session(true);
                    needs_session = true;
                }
            } catch (const BudgetInterrupt&) {
                note_skipped_remaining("budget exhausted");
                finalize_session(false);
                done = true;
            }
        }
        ExploreResult result;
        result.traces = std::move(traces_);
        result.renderings = std::move(renderings_);
        result.graph = std::move(graph_);
        return result;
    }

private:
    struct CrashInterrupt {};
    struct BudgetInterrupt {};

    struct StepResult {
        StepOutcome outcome;
        std::string after_key;
        std::optional<HierarchyDump> dump_after;
    };

    // -- session lifecycle ---------------------------------------------------

    void begin_session() {
        ++session_;
        steps_.clear();
        skipped_.clear();
        breadcrumb_.clear();
        if (strategy_.context_mode == ContextMode::context_enabled) {
            // App-level features go adverse before the app comes up.
            for (ContextFeature f : kAllContextFeatures)
                if (features_.app_level.count(f)) ensure_adverse(f);
        }
        HierarchyDump dump = device_.launch_app();
        const WindowModel* initial = model_.find_window(model_.initial_window);
        current_activity_ = initial->activity_name;
        WindowKey key = detail::key_of_dump(model_, dump, current_activity_);
        breadcrumb_ = {key};
        enter_window(dump, key);
    }

    void finalize_session(bool crashed) {
        ExecutionTrace t;
        auto [w, h] = device_.resolution();
        t.meta = TraceMeta{model_.app_info.name,
                           model_.app_info.version,
                           model_.app_info.package,
                           device_.os_version(),
                           device_.device_name(),
                           w,
                           h,
                           strategy_.label(),
                           strategy_.seed,
                           session_};
        t.steps = std::move(steps_);
        t.crashed = crashed;
        t.skipped = std::move(skipped_);
        steps_.clear();
        skipped_.clear();
        traces_.push_back(std::move(t));
    }

    // -- step recording -------------------------------------------------------

    std::string screenshot_ref(int index) const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "__run%03d__step%03d.svg", session_, index);
        return detail::sanitize_file_token(model_.app_info.name) + "__" + strategy_.label() + buf;
    }

    /// Record one step around a device action. The screenshot is captured
    /// before the action; the context snapshot after it. Throws
    /// BudgetInterrupt before acting when the budget is spent.
    StepResult record_step(StepKind kind, StepPhase phase,
                           std::optional<ComponentSnapshot> component,
                           std::optional<std::string> typed, std::optional<ContextFeature> sensor,
                           const std::function<DeviceObservation()>& act) {
        if (budget_left_ <= 0) throw BudgetInterrupt{};
        const int index = static_cast<int>(steps_.size()) + 1;
        const std::string before =
            breadcrumb_.empty() ? std::string{} : breadcrumb_.back().str();
        const std::string svg = device_.screenshot().svg;
        DeviceObservation obs = act();  // StaleTargetError propagates unrecorded

        const std::string ref = screenshot_ref(index);
        renderings_[ref] = svg;
        --budget_left_;

        StepResult res;
        if (auto sig = detect_crash(obs, device_.app_pid())) {
            res.outcome = StepOutcome::crash(std::move(*sig));
            res.after_key = before;
        } else if (!device_.app_running()) {
            res.after_key = "";
            res.outcome = before.empty() ? StepOutcome::none() : StepOutcome::transition();
        } else {
            res.dump_after = device_.current_hierarchy();
            res.after_key = detail::key_of_dump(model_, *res.dump_after, current_activity_).str();
            auto exceptions = collect_exceptions(obs, device_.app_pid());
            if (res.after_key != before)
                res.outcome = StepOutcome::transition();
            else if (!exceptions.empty())
                res.outcome = StepOutcome::exception(exceptions.front());
            else
                res.outcome = StepOutcome::none();
        }

        ExecutionStep step;
        step.index = index;
        step.kind = kind;
        step.phase = phase;
        step.component = std::move(component);
        step.typed_text = std::move(typed);
        step.sensor = sensor;
        step.window_before = before;
        step.window_after = res.after_key;
        step.context = device_.context();
        step.screenshot = ref;
        step.outcome = res.outcome;
        steps_.push_back(std::move(step));
        return res;
    }

    void record_context_step(StepKind kind, std::optional<ContextFeature> sensor,
                             const std::function<void()>& set) {
        record_step(kind, StepPhase::explore, std::nullopt, std::nullopt, sensor, [&] {
            set();
            DeviceObservation obs;
            obs.crash_dialog = device_.crash_dialog();
            return obs;
        });
    }

    // -- contextual state -----------------------------------------------------

    void ensure_adverse(ContextFeature f) {
        const ContextualState state = device_.context();
        switch (f) {
        case ContextFeature::network:
            if (state.network_on)
                record_context_step(StepKind::wifi_off, std::nullopt,
                                    [&] { device_.set_network(false); });
            break;
        case ContextFeature::gps:
            if (!state.gps.invalid)
                record_context_step(StepKind::gps_invalid, std::nullopt,
                                    [&] { device_.set_gps_invalid(); });
            break;
        default:
            if (!state.sensor_adverse.count(f))
                record_context_step(StepKind::sensor_adverse, f,
                                    [&] { device_.set_sensor(f, kAdverseSensorValue); });
            break;
        }
    }

    // -- window entry ----------------------------------------------------------

    void enter_window(const HierarchyDump& dump, const WindowKey& key) {
        graph_.add_node(key.str());
        if (!entered_.insert(key.str()).second) return;

        // Work items first: a crash during entry testing must not lose them.
        push_items(dump, key);

        if (strategy_.context_mode == ContextMode::context_enabled) {
            for (ContextFeature f : kAllContextFeatures) {
                if (features_.app_level.count(f)) continue;  // adverse since launch
                const auto* activities = features_.activities_for(f);
                if (activities && activities->count(key.activity)) ensure_adverse(f);
            }
            if (dump.kind == WindowKind::activity && features_.rotatable.count(key.activity) &&
                rotated_.insert(key.activity).second) {
                if (rotation_check(Orientation::landscape)) return;  // left this window
                if (rotation_check(Orientation::portrait)) return;
            }
        }
    }

    /// Rotate the device and route the outcome. Returns true when the rotation
    /// transitioned away from the current window.
    bool rotation_check(Orientation o) {
        StepKind kind =
            o == Orientation::landscape ? StepKind::rotate_landscape : StepKind::rotate_portrait;
        StepResult res = record_step(kind, StepPhase::explore, std::nullopt, std::nullopt,
                                     std::nullopt, [&] { return device_.rotate(o); });
        if (res.outcome.kind == OutcomeKind::crash) throw CrashInterrupt{};
        if (res.outcome.kind == OutcomeKind::transition) {
            const WindowKey before = breadcrumb_.back();
            WindowKey key = detail::key_of_dump(model_, *res.dump_after, current_activity_);
            graph_.add_edge(TransitionEdge{before.str(), key.str(), std::nullopt,
                                           ActionKind::rotate, std::nullopt, o});
            advance_to(key, *res.dump_after);
            return true;
        }
        return false;
    }

    void advance_to(const WindowKey& key, const HierarchyDump& dump) {
        breadcrumb_.push_back(key);
        if (!key.is_dialog()) current_activity_ = key.activity;
        enter_window(dump, key);
    }

    void push_items(const HierarchyDump& dump, const WindowKey& key) {
        std::vector<WorkItem> items;
        for (const std::string& id : order_components(dump, strategy_.traversal)) {
            const ComponentModel* c = dump.find_component(id);
            if (c->clickable) items.push_back(WorkItem{key.str(), id, ActionKind::tap});
            if (c->long_clickable) items.push_back(WorkItem{key.str(), id, ActionKind::long_tap});
        }
        for (auto it = items.rbegin(); it != items.rend(); ++it) stack_.push(*it);
    }

    // -- reaching pending work --------------------------------------------------

    WindowKey current_key() const { return breadcrumb_.back(); }

    void reach(const std::string& target_key) {
        for (const WindowKey& k : breadcrumb_) {
            if (k.str() == target_key) {
                while (current_key().str() != target_key) do_back();
                return;
            }
        }
        // Not on the current path; unwind to the root and replay graph edges.
        while (breadcrumb_.size() > 1) do_back();
        navigate(target_key);
    }

    void do_back() {
        record_step(StepKind::back, StepPhase::explore, std::nullopt, std::nullopt, std::nullopt,
                    [&] { return device_.press_back(); });
        if (breadcrumb_.size() > 1) breadcrumb_.pop_back();
        const WindowKey& k = breadcrumb_.back();
        if (!k.is_dialog()) current_activity_ = k.activity;
    }

    void navigate(const std::string& target_key) {
        auto path = graph_.shortest_path(current_key().str(), target_key);
        if (!path) {
            drop_items_for(target_key, "unreachable: no recorded transition path");
            return;
        }
        for (const TransitionEdge& edge : *path) {
            StepKind kind;
            std::optional<ComponentSnapshot> snapshot;
            std::function<DeviceObservation()> act;
            if (edge.action == ActionKind::rotate) {
                const Orientation o = edge.orientation.value_or(Orientation::landscape);
                kind = o == Orientation::landscape ? StepKind::rotate_landscape
                                                   : StepKind::rotate_portrait;
                act = [this, o] { return device_.rotate(o); };
            } else {
                kind = edge.action == ActionKind::tap        ? StepKind::tap
                       : edge.action == ActionKind::long_tap ? StepKind::long_tap
                                                             : StepKind::type_text;
                const HierarchyDump dump = device_.current_hierarchy();
                const ComponentModel* comp =
                    edge.component ? dump.find_component(*edge.component) : nullptr;
                if (edge.component && !comp) {
                    drop_items_for(target_key, "navigation diverged: component missing");
                    restart_session();
                    return;
                }
                if (comp) snapshot = ComponentSnapshot::of(*comp);
                Event ev{edge.action, edge.component, std::nullopt, edge.text};
                act = [this, ev] { return device_.perform(ev); };
            }

            StepResult res;
            try {
                res = record_step(kind, StepPhase::nav, snapshot, edge.text, std::nullopt, act);
            } catch (const StaleTargetError&) {
                drop_items_for(target_key, "navigation diverged: stale target");
                restart_session();
                return;
            }
            if (res.outcome.kind == OutcomeKind::crash) {
                drop_items_for(target_key, "navigation crashed");
                throw CrashInterrupt{};
            }
            if (res.after_key != edge.dst || !res.dump_after) {
                drop_items_for(target_key, "navigation diverged");
                restart_session();
                return;
            }
            WindowKey key = detail::key_of_dump(model_, *res.dump_after, current_activity_);
            breadcrumb_.push_back(key);
            if (!key.is_dialog()) current_activity_ = key.activity;
        }
    }

    /// End the current session without a crash and relaunch. Used when replay
    /// divergence leaves the device in an unplanned state.
    void restart_session() {
        finalize_session(false);
        begin_session();
    }

    // -- exercising work items ---------------------------------------------------

    void exercise(const WorkItem& item) {
        bool executed = false;
        try {
            if (fill_text_fields()) {
                stack_.restore(item);  // window changed under us; retry later
                return;
            }
            HierarchyDump dump = device_.current_hierarchy();
            const ComponentModel* comp = dump.find_component(item.component);
            if (!comp) {
                note_skipped(item, "component not present in hierarchy");
                return;
            }

            StepKind kind = item.action == ActionKind::tap ? StepKind::tap : StepKind::long_tap;
            StepResult res;
            bool recorded = false;
            for (int attempt = 0; attempt < 2 && !recorded; ++attempt) {
                try {
                    res = record_step(kind, StepPhase::explore, ComponentSnapshot::of(*comp),
                                      std::nullopt, std::nullopt, [&] {
                                          return device_.perform(
                                              Event{item.action, item.component, std::nullopt,
                                                    std::nullopt});
                                      });
                    recorded = true;
                } catch (const StaleTargetError&) {
                    // Hierarchy went stale: re-dump, re-resolve, retry once.
                    dump = device_.current_hierarchy();
                    comp = dump.find_component(item.component);
                    if (!comp || attempt == 1) {
                        note_skipped(item, "stale target");
                        return;
                    }
                }
            }
            executed = true;

            if (res.outcome.kind == OutcomeKind::crash) throw CrashInterrupt{};
            if (res.outcome.kind == OutcomeKind::transition) {
                const WindowKey before = current_key();
                if (res.dump_after) {
                    WindowKey key = detail::key_of_dump(model_, *res.dump_after, current_activity_);
                    graph_.add_edge(TransitionEdge{before.str(), key.str(), item.component,
                                                   item.action, std::nullopt, std::nullopt});
                    advance_to(key, *res.dump_after);
                }
                // app_running() false here means back-on-root semantics leaked
                // into a rule; nothing to enter.
            }
        } catch (const CrashInterrupt&) {
            if (!executed) stack_.restore(item);
            throw;
        } catch (const BudgetInterrupt&) {
            if (!executed) stack_.restore(item);
            throw;
        }
    }

    /// Fill every text field on the current window (document order) with
    /// freshly generated input. Returns true when a fill transitioned to a
    /// different window. Fields whose typing previously crashed the app are
    /// skipped for the rest of the run.
    bool fill_text_fields() {
        if (strategy_.text_mode == TextMode::no_text) return false;
        const HierarchyDump dump = device_.current_hierarchy();
        const std::string key = current_key().str();
        for (const ComponentModel& comp : dump.components) {
            if (!comp.is_text_field) continue;
            if (poisoned_.count({key, comp.id})) continue;

            // A touch event must precede the keyboard query. The touch is part
            // of the type step (scripts emit tap + text for it); it is recorded
            // separately only if it has an effect of its own.
            if (budget_left_ <= 0) throw BudgetInterrupt{};
            const std::string svg = device_.screenshot().svg;
            DeviceObservation focus_obs = device_.perform(Event::tap(comp.id));
            if (focus_effect(comp, svg, focus_obs, key)) return true;

            const KeyboardType kb = device_.keyboard_type_of(comp.id);
            const std::string text = generate_text(kb, strategy_.text_mode, rng_);
            StepResult res =
                record_step(StepKind::type_text, StepPhase::explore, ComponentSnapshot::of(comp),
                            text, std::nullopt,
                            [&] { return device_.perform(Event::type(comp.id, text)); });
            if (res.outcome.kind == OutcomeKind::crash) {
                poisoned_.insert({key, comp.id});
                throw CrashInterrupt{};
            }
            if (res.outcome.kind == OutcomeKind::transition) {
                const WindowKey before = current_key();
                if (res.dump_after) {
                    WindowKey k = detail::key_of_dump(model_, *res.dump_after, current_activity_);
                    graph_.add_edge(TransitionEdge{before.str(), k.str(), comp.id,
                                                   ActionKind::type_text, text, std::nullopt});
                    advance_to(k, *res.dump_after);
                }
                return true;
            }
        }
        return false;
    }

    /// Handle a focus tap that fired a rule of its own. Records it as a tap
    /// step after the fact. Returns true when the window changed.
    bool focus_effect(const ComponentModel& comp, const std::string& pre_svg,
                      const DeviceObservation& obs, const std::string& key) {
        const bool crashed = detect_crash(obs, device_.app_pid()).has_value();
        const bool running = device_.app_running();
        std::optional<HierarchyDump> dump_after;
        std::string after_key;
        if (!crashed && running) {
            dump_after = device_.current_hierarchy();
            after_key = detail::key_of_dump(model_, *dump_after, current_activity_).str();
        }
        if (!crashed && running && after_key == key) return false;  // plain focus

        const int index = static_cast<int>(steps_.size()) + 1;
        const std::string ref = screenshot_ref(index);
        renderings_[ref] = pre_svg;
        --budget_left_;
        ExecutionStep step;
        step.index = index;
        step.kind = StepKind::tap;
        step.phase = StepPhase::explore;
        step.component = ComponentSnapshot::of(comp);
        step.window_before = key;
        step.context = device_.context();
        step.screenshot = ref;
        if (crashed) {
            step.window_after = key;
            step.outcome = StepOutcome::crash(*detect_crash(obs, device_.app_pid()));
            steps_.push_back(std::move(step));
            poisoned_.insert({key, comp.id});
            throw CrashInterrupt{};
        }
        step.window_after = after_key;
        step.outcome = StepOutcome::transition();
        steps_.push_back(std::move(step));
        if (dump_after) {
            const WindowKey before = current_key();
            WindowKey k = detail::key_of_dump(model_, *dump_after, current_activity_);
            graph_.add_edge(TransitionEdge{before.str(), k.str(), comp.id, ActionKind::tap,
                                           std::nullopt, std::nullopt});
            advance_to(k, *dump_after);
        }
        return true;
    }

    // -- skip annotations ---------------------------------------------------------

    static std::string item_label(const WorkItem& item) {
        return "(window=" + item.window_key + ", component=" + item.component +
               ", action=" + action_kind_name(item.action) + ")";
    }

    void note_skipped(const WorkItem& item, const std::string& reason) {
        skipped_.push_back("work item " + item_label(item) + " skipped: " + reason);
    }

    void drop_items_for(const std::string& window_key, const std::string& reason) {
        for (const WorkItem& item : stack_.drain_window(window_key)) note_skipped(item, reason);
    }

    void note_skipped_remaining(const std::string& reason) {
        for (const WorkItem& item : stack_.drain_all()) note_skipped(item, reason);
    }

    const AppModel& model_;
    const FeatureMap& features_;
    DeviceInterface& device_;
    ExplorationStrategy strategy_;
    std::mt19937_64 rng_;

    int budget_left_ = 0;
    int session_ = 0;
    TransitionGraph graph_;
    UnvisitedStack stack_;
    std::set<std::string> entered_;   // window keys with completed entry rites
    std::set<std::string> rotated_;   // activities already rotation-checked
    std::set<std::pair<std::string, std::string>> poisoned_;  // (window key, field id)
    std::vector<WindowKey> breadcrumb_;
    std::string current_activity_;
    std::vector<ExecutionStep> steps_;
    std::vector<std::string> skipped_;
    std::vector<ExecutionTrace> traces_;
    std::map<std::string, std::string> renderings_;
};

inline ExploreResult explore(const AppModel& model, const FeatureMap& features,
                             DeviceInterface& device, const ExplorationStrategy& strategy) {
    return Explorer(model, features, device, strategy).run();
}

}  // namespace crashscope
