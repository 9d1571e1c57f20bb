// Static analysis over the app model: classify contextual features as
// activity-level or app-level via reverse call-graph reachability, and
// extract rotatable activities from the manifest.
#pragma once

#include "crashscope/appmodel.hpp"

#include <deque>
#include <map>
#include <set>
#include <string>

namespace crashscope {

struct FeatureMap {
    std::map<ContextFeature, std::set<std::string>> activity_level;
    std::set<ContextFeature> app_level;
    std::set<std::string> rotatable;

    const std::set<std::string>* activities_for(ContextFeature f) const {
        auto it = activity_level.find(f);
        return it == activity_level.end() ? nullptr : &it->second;
    }

    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

inline std::set<std::string> rotatable_activities(const Manifest& manifest) {
    std::set<std::string> out;
    for (const auto& a : manifest.activities)
        if (a.rotatable) out.insert(a.name);
    return out;
}

namespace detail {

/// All methods that can reach `method` over call edges, including itself.
/// Fixed-point BFS over reversed edges; cycles are handled naturally.
inline std::set<std::string> reverse_reachable(const CallGraph& g, const std::string& method) {
    std::map<std::string, std::set<std::string>> callers_of;
    for (const auto& [caller, callee] : g.edges) callers_of[callee].insert(caller);

    std::set<std::string> seen{method};
    std::deque<std::string> queue{method};
    while (!queue.empty()) {
        std::string cur = queue.front();
        queue.pop_front();
        auto it = callers_of.find(cur);
        if (it == callers_of.end()) continue;
        for (const auto& caller : it->second)
            if (seen.insert(caller).second) queue.push_back(caller);
    }
    return seen;
}

}  // namespace detail

/// Classify each contextual feature used by the model.
///
/// A contextual call site traceable (via some call chain) to an activity entry
/// method makes the feature testable at that activity. A feature whose call
/// sites are all untraceable is testable only at app level. A feature with
/// both traceable and untraceable sites is treated as activity-level for the
/// traceable activities only.
inline FeatureMap classify_contextual_features(const AppModel& model) {
    FeatureMap out;
    out.rotatable = rotatable_activities(model.manifest);

    std::map<ContextFeature, bool> any_traceable;
    std::map<ContextFeature, bool> any_untraceable;

    for (const auto& call : model.call_graph.contextual_calls) {
        const std::set<std::string> reach =
            detail::reverse_reachable(model.call_graph, call.method);
        bool traceable = false;
        for (const auto& [activity, entries] : model.call_graph.activity_entries) {
            for (const auto& entry : entries) {
                if (reach.count(entry)) {
                    out.activity_level[call.feature].insert(activity);
                    traceable = true;
                    break;
                }
            }
        }
        if (traceable)
            any_traceable[call.feature] = true;
        else
            any_untraceable[call.feature] = true;
    }

    for (const auto& [feature, untraceable] : any_untraceable)
        if (untraceable && !any_traceable[feature]) out.app_level.insert(feature);

    return out;
}

inline nlohmann::json feature_map_to_json(const FeatureMap& fm) {
    nlohmann::json j;
    nlohmann::json levels = nlohmann::json::object();
    for (const auto& [feature, activities] : fm.activity_level)
        levels[context_feature_name(feature)] = activities;
    j["activity_level"] = levels;
    nlohmann::json app = nlohmann::json::array();
    for (ContextFeature f : fm.app_level) app.push_back(context_feature_name(f));
    j["app_level"] = app;
    j["rotatable"] = fm.rotatable;
    return j;
}

}  // namespace crashscope
