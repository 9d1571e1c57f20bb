#include "crashscope/explorer.hpp"

#include "crashscope/tracestore.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <map>
#include <memory>
#include <set>

using namespace crashscope;
using testsupport::load_fixture;
using testsupport::load_fixture_shared;
using testsupport::seeded_signature;

namespace {

ExplorationStrategy make_strategy(TextMode text, Traversal trav, ContextMode ctx,
                                  std::uint64_t seed = 1, int budget = 500) {
    return ExplorationStrategy{trav, text, ctx, seed, budget};
}

ExploreResult run_strategy(const std::shared_ptr<const AppModel>& model,
                           const ExplorationStrategy& strategy,
                           SimDevice::Options opts = {}) {
    const FeatureMap features = classify_contextual_features(*model);
    SimDevice device(model, opts);
    return explore(*model, features, device, strategy);
}

int crashed_count(const ExploreResult& r) {
    int n = 0;
    for (const auto& t : r.traces) n += t.crashed ? 1 : 0;
    return n;
}

std::string serialize_all(const ExploreResult& r) {
    std::string out;
    for (const auto& t : r.traces) out += serialize_trace(t);
    return out;
}

/// Delegating device wrapper for fault injection.
class WrappedDevice : public DeviceInterface {
public:
    explicit WrappedDevice(std::shared_ptr<const AppModel> model) : inner_(std::move(model)) {}

    HierarchyDump launch_app() override { return inner_.launch_app(); }
    HierarchyDump current_hierarchy() const override { return inner_.current_hierarchy(); }
    DeviceObservation perform(const Event& e) override { return inner_.perform(e); }
    DeviceObservation press_back() override { return inner_.press_back(); }
    DeviceObservation rotate(Orientation o) override { return inner_.rotate(o); }
    void set_network(bool on) override { inner_.set_network(on); }
    void set_gps(double lat, double lon) override { inner_.set_gps(lat, lon); }
    void set_gps_invalid() override { inner_.set_gps_invalid(); }
    void set_sensor(ContextFeature f, double v) override { inner_.set_sensor(f, v); }
    KeyboardType keyboard_type_of(const std::string& id) const override {
        return inner_.keyboard_type_of(id);
    }
    std::optional<CrashDialog> crash_dialog() const override { return inner_.crash_dialog(); }
    std::vector<LogEntry> drain_log() override { return inner_.drain_log(); }
    ScreenRendering screenshot() const override { return inner_.screenshot(); }
    void reset() override { inner_.reset(); }
    bool app_running() const override { return inner_.app_running(); }
    int app_pid() const override { return inner_.app_pid(); }
    ContextualState context() const override { return inner_.context(); }
    std::string os_version() const override { return inner_.os_version(); }
    std::string device_name() const override { return inner_.device_name(); }
    std::pair<int, int> resolution() const override { return inner_.resolution(); }

protected:
    SimDevice inner_;
};

class StaleOnceDevice : public WrappedDevice {
public:
    StaleOnceDevice(std::shared_ptr<const AppModel> model, std::string component, int times)
        : WrappedDevice(std::move(model)), component_(std::move(component)), times_(times) {}

    DeviceObservation perform(const Event& e) override {
        if (e.target == component_ && times_ > 0) {
            --times_;
            throw StaleTargetError(component_);
        }
        return WrappedDevice::perform(e);
    }

private:
    std::string component_;
    int times_;
};

}  // namespace

// ---------------------------------------------------------------------------
// order_components
// ---------------------------------------------------------------------------

TEST(OrderComponents, DocumentOrderAndReverse) {
    HierarchyDump dump;
    for (const char* id : {"c1", "c2", "c3"}) {
        ComponentModel c;
        c.id = id;
        dump.components.push_back(c);
    }
    EXPECT_EQ(order_components(dump, Traversal::top_down),
              (std::vector<std::string>{"c1", "c2", "c3"}));
    EXPECT_EQ(order_components(dump, Traversal::bottom_up),
              (std::vector<std::string>{"c3", "c2", "c1"}));
    EXPECT_TRUE(order_components(HierarchyDump{}, Traversal::top_down).empty());
}

// ---------------------------------------------------------------------------
// generate_text
// ---------------------------------------------------------------------------

// Charset membership oracle over 10^4 samples per (keyboard, mode). The
// charsets are written out independently here; they must match the documented
// keyboard tables, not whatever the implementation happens to use.
TEST(GenerateText, CharsetMembershipOracle) {
    const std::map<KeyboardType, std::pair<std::string, std::string>> charsets = {
        {KeyboardType::plain_text,
         {"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 ",
          "!@#$%^&*()_+-=[]{};':\",./<>?"}},
        {KeyboardType::number, {"0123456789", "-.,"}},
        {KeyboardType::email,
         {"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.@", "_+-"}},
        {KeyboardType::phone, {"0123456789", "+-#*()"}},
        {KeyboardType::uri,
         {"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789:/.", "?&=%#_-"}},
    };
    std::mt19937_64 rng(99);
    for (const auto& [kb, sets] : charsets) {
        const auto& [base, specials] = sets;
        for (int i = 0; i < 10000; ++i) {
            const std::string expected = generate_text(kb, TextMode::expected, rng);
            EXPECT_GE(expected.size(), 4u);
            EXPECT_LE(expected.size(), 12u);
            for (char ch : expected)
                ASSERT_NE(base.find(ch), std::string::npos)
                    << "expected text drew '" << ch << "' outside the base charset of "
                    << keyboard_type_name(kb);

            const std::string unexpected = generate_text(kb, TextMode::unexpected, rng);
            EXPECT_GE(unexpected.size(), 4u);
            EXPECT_LE(unexpected.size(), 16u);
            EXPECT_NE(unexpected.find_first_of(specials), std::string::npos)
                << "unexpected text lacks a special character: " << unexpected;
            for (char ch : unexpected)
                ASSERT_TRUE(base.find(ch) != std::string::npos ||
                            specials.find(ch) != std::string::npos)
                    << "unexpected text drew '" << ch << "' outside base+specials";
        }
    }
}

TEST(GenerateText, DeterministicForFixedSeed) {
    std::mt19937_64 a(1234), b(1234);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(generate_text(KeyboardType::plain_text, TextMode::unexpected, a),
                  generate_text(KeyboardType::plain_text, TextMode::unexpected, b));
    }
}

TEST(GenerateText, NoTextModeIsRejected) {
    std::mt19937_64 rng(1);
    EXPECT_THROW(generate_text(KeyboardType::number, TextMode::no_text, rng),
                 std::invalid_argument);
}

// ---------------------------------------------------------------------------
// strategies
// ---------------------------------------------------------------------------

TEST(Strategies, ExactlyTwelveDistinctCombinations) {
    const auto all = all_strategies(42, 300);
    EXPECT_EQ(all.size(), 12u);
    std::set<std::string> labels;
    for (const auto& s : all) {
        labels.insert(s.label());
        EXPECT_EQ(s.seed, 42u);
        EXPECT_EQ(s.budget, 300);
    }
    EXPECT_EQ(labels.size(), 12u);
    EXPECT_TRUE(labels.count("notext_topdown_ctxon"));      // the paper's example tuple
    EXPECT_TRUE(labels.count("unexpected_topdown_ctxon"));  // label format anchor
    EXPECT_TRUE(strategy_from_label("expected_bottomup_ctxoff").has_value());
    EXPECT_FALSE(strategy_from_label("bogus_label").has_value());
}

// ---------------------------------------------------------------------------
// detect_crash / collect_exceptions
// ---------------------------------------------------------------------------

TEST(DetectCrash, DialogWithMatchingPidEntry) {
    const CrashSignature sig{"java.lang.NullPointerException", "boom", {"com.x.A.f(A.java:1)"}};
    DeviceObservation obs;
    obs.crash_dialog = CrashDialog{"ExampleApp has stopped"};
    obs.log_entries.push_back(LogEntry{100, "E", "FATAL EXCEPTION", sig, ""});
    auto got = detect_crash(obs, 100);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(*got, sig);
}

TEST(DetectCrash, ForeignPidEntryWithoutDialogIsIgnored) {
    const CrashSignature sig{"java.lang.Error", "other process", {"com.other.B.g(B.java:2)"}};
    DeviceObservation obs;
    obs.log_entries.push_back(LogEntry{999, "E", "FATAL EXCEPTION", sig, ""});
    EXPECT_FALSE(detect_crash(obs, 100).has_value());
    EXPECT_TRUE(collect_exceptions(obs, 100).empty());
}

TEST(DetectCrash, NonFatalAppExceptionIsCollectedNotCrash) {
    const CrashSignature sig{"java.io.IOException", "handled", {"com.x.A.f(A.java:9)"}};
    DeviceObservation obs;
    obs.log_entries.push_back(LogEntry{100, "W", "EXCEPTION", sig, ""});
    EXPECT_FALSE(detect_crash(obs, 100).has_value());
    const auto exceptions = collect_exceptions(obs, 100);
    ASSERT_EQ(exceptions.size(), 1u);
    EXPECT_EQ(exceptions[0], sig);
}

TEST(DetectCrash, DialogWithoutEntryIsFlaggedUnknown) {
    DeviceObservation obs;
    obs.crash_dialog = CrashDialog{"X has stopped"};
    auto got = detect_crash(obs, 100);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(got->exception_class, "unknown");
    EXPECT_FALSE(got->stack.empty());
}

TEST(DetectCrash, PicksEntryMatchingPidAmongDecoys) {
    const CrashSignature real{"java.lang.IllegalStateException", "mine", {"com.x.A.f(A.java:3)"}};
    const CrashSignature decoy{"android.os.DeadSystemException", "decoy", {"android.os.S.r(S.java:1)"}};
    DeviceObservation obs;
    obs.crash_dialog = CrashDialog{"X has stopped"};
    obs.log_entries.push_back(LogEntry{424, "E", "FATAL EXCEPTION", decoy, ""});
    obs.log_entries.push_back(LogEntry{100, "E", "FATAL EXCEPTION", real, ""});
    auto got = detect_crash(obs, 100);
    ASSERT_TRUE(got.has_value());
    EXPECT_EQ(*got, real);
}

// ---------------------------------------------------------------------------
// navigate_to
// ---------------------------------------------------------------------------

namespace {

std::shared_ptr<const AppModel> chain_model() {
    const std::string text = R"json({
      "app": {"name": "Chain", "version": "1", "package": "com.chain"},
      "manifest": {"activities": [
        {"name": "A", "is_main": true}, {"name": "B", "is_main": false}, {"name": "C", "is_main": false}]},
      "call_graph": {"methods": []},
      "windows": [
        {"id": "wa", "kind": "activity", "activity": "A", "size": [400, 400], "components": [
          {"id": "to_b", "widget": "button", "text": "B", "bounds": [0, 0, 100, 100], "clickable": true}]},
        {"id": "wb", "kind": "activity", "activity": "B", "size": [400, 400], "components": [
          {"id": "to_c", "widget": "button", "text": "C", "bounds": [0, 0, 100, 100], "clickable": true}]},
        {"id": "wc", "kind": "activity", "activity": "C", "size": [400, 400], "components": []}
      ],
      "behavior": [
        {"trigger": {"window": "wa", "component": "to_b", "action": "tap"}, "result": {"navigate": "wb"}},
        {"trigger": {"window": "wb", "component": "to_c", "action": "tap"}, "result": {"navigate": "wc"}}
      ],
      "initial_window": "wa"
    })json";
    return std::make_shared<const AppModel>(app_model_from_json(nlohmann::json::parse(text)));
}

TransitionGraph chain_graph() {
    TransitionGraph g;
    g.add_edge(TransitionEdge{"A", "B", "to_b", ActionKind::tap, std::nullopt, std::nullopt});
    g.add_edge(TransitionEdge{"B", "C", "to_c", ActionKind::tap, std::nullopt, std::nullopt});
    return g;
}

}  // namespace

TEST(NavigateTo, ReplaysShortestRecordedPath) {
    auto model = chain_model();
    SimDevice device(model);
    device.launch_app();
    const NavigationOutcome out = navigate_to(chain_graph(), device, *model, "C");
    EXPECT_TRUE(out.success);
    EXPECT_EQ(out.steps.size(), 2u);
    EXPECT_EQ(device.current_hierarchy().window, "wc");
}

TEST(NavigateTo, InitialWindowNeedsNoEvents) {
    auto model = chain_model();
    SimDevice device(model);
    device.launch_app();
    const NavigationOutcome out = navigate_to(chain_graph(), device, *model, "A");
    EXPECT_TRUE(out.success);
    EXPECT_TRUE(out.steps.empty());
}

TEST(NavigateTo, UnreachableTargetFails) {
    auto model = chain_model();
    SimDevice device(model);
    device.launch_app();
    const NavigationOutcome out = navigate_to(chain_graph(), device, *model, "Nowhere");
    EXPECT_FALSE(out.success);
    EXPECT_TRUE(out.steps.empty());
}

// ---------------------------------------------------------------------------
// exploration
// ---------------------------------------------------------------------------

// One unconditional crash: every strategy finds it with a single tap step.
TEST(Explorer, UnconditionalCrashFoundByEveryStrategy) {
    auto model = load_fixture_shared("corpus/tap_basic.json");
    const CrashSignature* want = seeded_signature(*model);
    ASSERT_NE(want, nullptr);
    for (const auto& strategy : all_strategies(1, 500)) {
        const ExploreResult r = run_strategy(model, strategy);
        ASSERT_EQ(r.traces.size(), 1u) << strategy.label();
        const ExecutionTrace& t = r.traces[0];
        EXPECT_TRUE(t.crashed);
        ASSERT_EQ(t.steps.size(), 1u) << strategy.label();
        EXPECT_EQ(t.steps[0].kind, StepKind::tap);
        EXPECT_EQ(t.steps[0].outcome.kind, OutcomeKind::crash);
        EXPECT_EQ(*t.steps[0].outcome.signature, *want);
        EXPECT_EQ(t.steps[0].index, 1);
    }
}

// The running-example shape: tapping the header crashes only when the network
// is off. Context-enabled strategies find it; context-disabled never do.
TEST(Explorer, ContextGuardedCrashNeedsContextEnabled) {
    auto model = load_fixture_shared("almost_31c3.json");
    const CrashSignature* want = seeded_signature(*model);
    int found_with_context = 0;
    for (const auto& strategy : all_strategies(3, 500)) {
        const ExploreResult r = run_strategy(model, strategy);
        const int crashes = crashed_count(r);
        if (strategy.context_mode == ContextMode::context_disabled) {
            EXPECT_EQ(crashes, 0) << strategy.label();
        } else {
            EXPECT_EQ(crashes, 1) << strategy.label();
            for (const auto& t : r.traces)
                if (t.crashed) EXPECT_EQ(*t.steps.back().outcome.signature, *want);
            ++found_with_context;
        }
    }
    EXPECT_EQ(found_with_context, 6);  // reachable under all text modes
}

// The first step of a context-found crash is the network-disable step, and the
// crash tap follows it.
TEST(Explorer, ContextStepsPrecedeInteractions) {
    auto model = load_fixture_shared("almost_31c3.json");
    const ExploreResult r = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_enabled));
    ASSERT_FALSE(r.traces.empty());
    const ExecutionTrace& t = r.traces[0];
    ASSERT_TRUE(t.crashed);
    ASSERT_GE(t.steps.size(), 2u);
    EXPECT_EQ(t.steps[0].kind, StepKind::wifi_off);
    EXPECT_FALSE(t.steps[0].context.network_on);  // snapshot reflects the change
    EXPECT_EQ(t.steps[1].kind, StepKind::tap);
    EXPECT_EQ(t.steps[1].component->id, "header_day1");
}

// App-level features go adverse before the launch; the steps carry no window.
TEST(Explorer, AppLevelFeatureAppliedBeforeLaunch) {
    auto model = load_fixture_shared("corpus/gps_applevel.json");
    const ExploreResult r = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_enabled));
    ASSERT_FALSE(r.traces.empty());
    const ExecutionTrace& t = r.traces[0];
    ASSERT_TRUE(t.crashed);
    ASSERT_EQ(t.steps.size(), 2u);
    EXPECT_EQ(t.steps[0].kind, StepKind::gps_invalid);
    EXPECT_EQ(t.steps[0].window_before, "");
    EXPECT_TRUE(t.steps[0].context.gps.invalid);
    EXPECT_EQ(t.steps[1].kind, StepKind::tap);
}

// Rotation testing is part of contextual testing: double rotation on first
// entry of a rotatable activity, recorded as steps, only when enabled.
TEST(Explorer, RotationCheckOnRotatableActivities) {
    auto model = load_fixture_shared("three_windows.json");
    const ExploreResult on = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_enabled));
    bool saw_landscape = false, saw_portrait = false;
    for (const auto& t : on.traces)
        for (const auto& s : t.steps) {
            if (s.kind == StepKind::rotate_landscape) saw_landscape = true;
            if (s.kind == StepKind::rotate_portrait) {
                saw_portrait = true;
                EXPECT_TRUE(saw_landscape);  // landscape first, then back
            }
        }
    EXPECT_TRUE(saw_landscape);
    EXPECT_TRUE(saw_portrait);

    const ExploreResult off = run_strategy(
        model,
        make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_disabled));
    for (const auto& t : off.traces)
        for (const auto& s : t.steps) EXPECT_FALSE(is_context_change(s.kind));
}

TEST(Explorer, RotationCrashDiscovered) {
    auto model = load_fixture_shared("corpus/rotate_guard.json");
    const ExploreResult r = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_enabled));
    ASSERT_GE(r.traces.size(), 1u);
    const ExecutionTrace& t = r.traces[0];
    ASSERT_TRUE(t.crashed);
    EXPECT_EQ(t.steps.back().kind, StepKind::rotate_landscape);
    // The post-crash session still exercises the remaining button without
    // rotating again.
    ASSERT_EQ(r.traces.size(), 2u);
    EXPECT_FALSE(r.traces[1].crashed);
    for (const auto& s : r.traces[1].steps) EXPECT_FALSE(is_context_change(s.kind));
}

// Crash resilience: three seeded crashes on disjoint paths are all found in a
// single run, one crashed trace each, without repeating any work item.
TEST(Explorer, CrashResilienceThreeDisjointPaths) {
    auto model = load_fixture_shared("resilience.json");
    const ExploreResult r = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_disabled));

    ASSERT_EQ(r.traces.size(), 3u);
    std::set<std::string> signatures;
    for (const auto& t : r.traces) {
        EXPECT_TRUE(t.crashed);
        ASSERT_EQ(t.steps.size(), 2u);  // navigate tap + detonating tap
        signatures.insert(t.steps.back().outcome.signature->exception_class);
    }
    EXPECT_EQ(signatures.size(), 3u);

    // No (window, component, action) exercised twice across the whole run.
    std::set<std::string> exercised;
    for (const auto& t : r.traces)
        for (const auto& s : t.steps) {
            if (s.phase != StepPhase::explore || !s.component) continue;
            if (s.kind != StepKind::tap && s.kind != StepKind::long_tap) continue;
            const std::string key =
                s.window_before + "|" + s.component->id + "|" + step_kind_name(s.kind);
            EXPECT_TRUE(exercised.insert(key).second) << "repeated work item " << key;
        }
}

// Unexpected text fires the guard; the crashing field is then left alone so
// the rest of the window can still be explored.
TEST(Explorer, UnexpectedTextCrashAndFieldPoisoning) {
    auto model = load_fixture_shared("corpus/text_unexpected.json");
    const CrashSignature* want = seeded_signature(*model);

    const ExploreResult r = run_strategy(
        model,
        make_strategy(TextMode::unexpected, Traversal::top_down, ContextMode::context_disabled));
    ASSERT_EQ(r.traces.size(), 2u);
    const ExecutionTrace& crash_trace = r.traces[0];
    ASSERT_TRUE(crash_trace.crashed);
    ASSERT_EQ(crash_trace.steps.size(), 1u);
    EXPECT_EQ(crash_trace.steps[0].kind, StepKind::type_text);
    EXPECT_TRUE(crash_trace.steps[0].typed_text.has_value());
    EXPECT_EQ(*crash_trace.steps[0].outcome.signature, *want);

    const ExecutionTrace& follow_up = r.traces[1];
    EXPECT_FALSE(follow_up.crashed);
    ASSERT_EQ(follow_up.steps.size(), 1u);  // submit tap; the field is poisoned
    EXPECT_EQ(follow_up.steps[0].kind, StepKind::tap);
    EXPECT_EQ(follow_up.steps[0].component->id, "btn_submit");
}

TEST(Explorer, ExpectedAndNoTextModesNeverTriggerTextCrash) {
    for (const char* fixture : {"corpus/text_unexpected.json", "corpus/text_unexpected_email.json"}) {
        auto model = load_fixture_shared(fixture);
        for (const auto& strategy : all_strategies(11, 500)) {
            if (strategy.text_mode == TextMode::unexpected) continue;
            const ExploreResult r = run_strategy(model, strategy);
            EXPECT_EQ(crashed_count(r), 0) << fixture << " " << strategy.label();
        }
    }
}

// Text fields are refilled before each clickable: two clickables on a window
// with one field produce two type steps with fresh strings.
TEST(Explorer, TextRefilledBeforeEachClickable) {
    const std::string text = R"json({
      "app": {"name": "Refill", "version": "1", "package": "com.refill"},
      "manifest": {"activities": [{"name": "A", "is_main": true}]},
      "call_graph": {"methods": []},
      "windows": [
        {"id": "w", "kind": "activity", "activity": "A", "size": [400, 600], "components": [
          {"id": "field", "widget": "edit text", "text": "F", "bounds": [0, 0, 400, 100], "is_text_field": true, "keyboard": "plain_text"},
          {"id": "b1", "widget": "button", "text": "One", "bounds": [0, 200, 200, 300], "clickable": true},
          {"id": "b2", "widget": "button", "text": "Two", "bounds": [0, 400, 200, 500], "clickable": true}
        ]}
      ],
      "behavior": [],
      "initial_window": "w"
    })json";
    auto model = std::make_shared<const AppModel>(app_model_from_json(nlohmann::json::parse(text)));
    const ExploreResult r = run_strategy(
        model,
        make_strategy(TextMode::expected, Traversal::top_down, ContextMode::context_disabled));
    ASSERT_EQ(r.traces.size(), 1u);
    std::vector<std::string> typed;
    int taps = 0;
    for (const auto& s : r.traces[0].steps) {
        if (s.kind == StepKind::type_text) typed.push_back(*s.typed_text);
        if (s.kind == StepKind::tap) ++taps;
    }
    EXPECT_EQ(taps, 2);
    ASSERT_EQ(typed.size(), 2u);  // refilled before each clickable
    EXPECT_NE(typed[0], typed[1]);  // fresh rng draw each time
}

TEST(Explorer, DeterministicTraceSerialization) {
    auto model = load_fixture_shared("corpus/text_unexpected.json");
    const auto strategy =
        make_strategy(TextMode::unexpected, Traversal::bottom_up, ContextMode::context_enabled, 42);
    const ExploreResult a = run_strategy(model, strategy);
    const ExploreResult b = run_strategy(model, strategy);
    EXPECT_EQ(serialize_all(a), serialize_all(b));
    EXPECT_EQ(a.renderings, b.renderings);
}

TEST(Explorer, TraversalDirectionChangesVisitOrder) {
    auto model = load_fixture_shared("resilience.json");
    const ExploreResult td = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_disabled));
    const ExploreResult bu = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::bottom_up, ContextMode::context_disabled));
    ASSERT_FALSE(td.traces.empty());
    ASSERT_FALSE(bu.traces.empty());
    EXPECT_EQ(td.traces[0].steps[0].component->id, "b1");
    EXPECT_EQ(bu.traces[0].steps[0].component->id, "b3");
}

// Context is only ever set adverse for features the analyzer reported.
TEST(Explorer, ContextTargetingHonorsFeatureMap) {
    AppModel stripped = load_fixture("corpus/net_guard.json");
    stripped.call_graph.contextual_calls.clear();  // analyzer now reports nothing
    auto model = std::make_shared<const AppModel>(std::move(stripped));

    const ExploreResult r = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_enabled));
    EXPECT_EQ(crashed_count(r), 0);
    for (const auto& t : r.traces)
        for (const auto& s : t.steps) EXPECT_FALSE(is_context_change(s.kind));
}

TEST(Explorer, ContextDisabledRunsHaveNoContextSteps) {
    for (const char* fixture :
         {"corpus/net_guard.json", "corpus/gps_applevel.json", "corpus/rotate_guard.json"}) {
        auto model = load_fixture_shared(fixture);
        for (const auto& strategy : all_strategies(5, 500)) {
            if (strategy.context_mode != ContextMode::context_disabled) continue;
            const ExploreResult r = run_strategy(model, strategy);
            for (const auto& t : r.traces)
                for (const auto& s : t.steps)
                    EXPECT_FALSE(is_context_change(s.kind)) << fixture << " " << strategy.label();
        }
    }
}

// Dialog identity comes from (owning activity, size): two same-size dialogs
// share a node, a differently sized one gets its own.
TEST(Explorer, DialogWindowIdentityBySize) {
    auto model = load_fixture_shared("dialogs.json");
    const ExploreResult r = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_disabled));
    EXPECT_EQ(r.graph.nodes,
              (std::set<std::string>{"MainActivity", "MainActivity[dialog 600x400]",
                                     "MainActivity[dialog 800x500]"}));
    // d2's unique component is shadowed by the d1 node: never exercised.
    for (const auto& t : r.traces)
        for (const auto& s : t.steps)
            if (s.component) EXPECT_NE(s.component->id, "other_btn");
}

// Full exploration of a crash-free app ends with an empty stack and uses the
// back button to escape exhausted branches.
TEST(Explorer, CrashFreeFullExploration) {
    auto model = load_fixture_shared("crash_free.json");
    const ExploreResult r = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_disabled));
    ASSERT_EQ(r.traces.size(), 1u);
    const ExecutionTrace& t = r.traces[0];
    EXPECT_FALSE(t.crashed);
    EXPECT_TRUE(t.skipped.empty());

    std::set<std::string> tapped;
    int backs = 0;
    for (const auto& s : t.steps) {
        if (s.kind == StepKind::tap) tapped.insert(s.component->id);
        if (s.kind == StepKind::back) ++backs;
    }
    EXPECT_EQ(tapped,
              (std::set<std::string>{"btn_save", "btn_help", "btn_more", "btn_dismiss",
                                     "btn_home"}));
    EXPECT_GE(backs, 1);  // dialog dismissed via back

    // Steps are contiguously indexed from 1.
    for (std::size_t i = 0; i < t.steps.size(); ++i)
        EXPECT_EQ(t.steps[i].index, static_cast<int>(i) + 1);
}

TEST(Explorer, BudgetExhaustionFinalizesWithSkips) {
    auto model = load_fixture_shared("crash_free.json");
    const ExploreResult r = run_strategy(
        model,
        make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_disabled, 1, 2));
    ASSERT_EQ(r.traces.size(), 1u);
    EXPECT_FALSE(r.traces[0].crashed);
    EXPECT_EQ(r.traces[0].steps.size(), 2u);
    EXPECT_FALSE(r.traces[0].skipped.empty());
    for (const auto& note : r.traces[0].skipped)
        EXPECT_NE(note.find("budget exhausted"), std::string::npos);
}

TEST(Explorer, StaleTargetRetriesOnceThenSucceeds) {
    auto model = load_fixture_shared("corpus/tap_basic.json");
    StaleOnceDevice device(model, "btn_boom", 1);
    const FeatureMap features = classify_contextual_features(*model);
    const ExploreResult r = explore(
        *model, features,  device,
        make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_disabled));
    ASSERT_EQ(r.traces.size(), 1u);
    EXPECT_TRUE(r.traces[0].crashed);  // retry exercised the item anyway
    EXPECT_TRUE(r.traces[0].skipped.empty());
}

TEST(Explorer, PersistentlyStaleTargetIsSkipped) {
    auto model = load_fixture_shared("corpus/tap_basic.json");
    StaleOnceDevice device(model, "btn_boom", 1000);
    const FeatureMap features = classify_contextual_features(*model);
    const ExploreResult r = explore(
        *model, features, device,
        make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_disabled));
    ASSERT_EQ(r.traces.size(), 1u);
    EXPECT_FALSE(r.traces[0].crashed);
    ASSERT_EQ(r.traces[0].skipped.size(), 1u);
    EXPECT_NE(r.traces[0].skipped[0].find("stale target"), std::string::npos);
    EXPECT_NE(r.traces[0].skipped[0].find("btn_boom"), std::string::npos);
}

// Post-crash navigation replays recorded edges as nav-phase steps so the
// next crash's script still reproduces from a fresh launch.
TEST(Explorer, PostCrashNavigationRecordedAsNavPhase) {
    auto model = load_fixture_shared("corpus/rotate_guard_deep.json");
    const ExploreResult r = run_strategy(
        model, make_strategy(TextMode::no_text, Traversal::top_down, ContextMode::context_enabled));
    ASSERT_EQ(r.traces.size(), 2u);
    EXPECT_TRUE(r.traces[0].crashed);
    const ExecutionTrace& after = r.traces[1];
    ASSERT_GE(after.steps.size(), 2u);
    EXPECT_EQ(after.steps[0].phase, StepPhase::nav);  // replayed main->gallery edge
    EXPECT_EQ(after.steps[0].component->id, "btn_gallery");
    EXPECT_EQ(after.steps[1].phase, StepPhase::explore);
    EXPECT_EQ(after.steps[1].component->id, "btn_next");
}

TEST(Explorer, EveryStepCarriesScreenshotAndContext) {
    auto model = load_fixture_shared("almost_31c3.json");
    const ExploreResult r = run_strategy(
        model, make_strategy(TextMode::expected, Traversal::bottom_up, ContextMode::context_enabled));
    for (const auto& t : r.traces)
        for (const auto& s : t.steps) {
            EXPECT_FALSE(s.screenshot.empty());
            EXPECT_TRUE(r.renderings.count(s.screenshot)) << s.screenshot;
            EXPECT_NE(r.renderings.at(s.screenshot).find("<svg"), std::string::npos);
        }
}
