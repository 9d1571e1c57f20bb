// Natural-language crash report generation: turns a crashed trace into a
// single self-contained HTML document with general info, a contextual-state
// legend, templated reproduction steps, the crash screen flow with the
// interacted component highlighted, and a pruned stack trace.
#pragma once

#include "crashscope/trace.hpp"

#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace crashscope {

// ---------------------------------------------------------------------------
// Relative location
// ---------------------------------------------------------------------------

enum class RelativeLocation {
    top_left,
    top,
    top_right,
    left,
    center,
    right,
    bottom_left,
    bottom,
    bottom_right,
};

inline const char* relative_location_name(RelativeLocation loc) {
    switch (loc) {
    case RelativeLocation::top_left: return "top left";
    case RelativeLocation::top: return "top";
    case RelativeLocation::top_right: return "top right";
    case RelativeLocation::left: return "left";
    case RelativeLocation::center: return "center";
    case RelativeLocation::right: return "right";
    case RelativeLocation::bottom_left: return "bottom left";
    case RelativeLocation::bottom: return "bottom";
    case RelativeLocation::bottom_right: return "bottom right";
    }
    return "?";
}

/// Cell of a 3x3 equal grid over the window containing the component's
/// center. Centers exactly on a grid line belong to the lower-index (left or
/// top) cell; comparisons are exact integer arithmetic.
inline RelativeLocation relative_location(const Bounds& bounds, int window_width,
                                          int window_height) {
    const long cx = (static_cast<long>(bounds.x1) + bounds.x2) / 2;
    const long cy = (static_cast<long>(bounds.y1) + bounds.y2) / 2;
    const int col = 3 * cx <= window_width ? 0 : (3 * cx <= 2L * window_width ? 1 : 2);
    const int row = 3 * cy <= window_height ? 0 : (3 * cy <= 2L * window_height ? 1 : 2);
    static constexpr RelativeLocation grid[3][3] = {
        {RelativeLocation::top_left, RelativeLocation::top, RelativeLocation::top_right},
        {RelativeLocation::left, RelativeLocation::center, RelativeLocation::right},
        {RelativeLocation::bottom_left, RelativeLocation::bottom, RelativeLocation::bottom_right},
    };
    return grid[row][col];
}

// ---------------------------------------------------------------------------
// Step sentences
// ---------------------------------------------------------------------------

namespace detail {

inline std::string component_phrase(const ComponentSnapshot& c) {
    if (c.text.empty()) return c.widget_type;  // no empty quotes
    return "\"" + c.text + "\" " + c.widget_type;
}

}  // namespace detail

/// One sentence per step from a fixed template table. GUI steps follow
/// `<action> on <component text> <component type>, which is located on the
/// <relative location> of the screen.`; context changes use fixed phrases.
inline std::string render_step_sentence(const ExecutionStep& step, int window_width,
                                        int window_height) {
    switch (step.kind) {
    case StepKind::wifi_off: return "Disable the network connection.";
    case StepKind::wifi_on: return "Enable the network connection.";
    case StepKind::gps_invalid: return "Set the GPS to an invalid location.";
    case StepKind::rotate_landscape: return "Rotate the device to landscape.";
    case StepKind::rotate_portrait: return "Rotate the device to portrait.";
    case StepKind::sensor_adverse:
        return std::string("Set the ") +
               context_feature_name(step.sensor.value_or(ContextFeature::accelerometer)) +
               " to adverse values.";
    case StepKind::back: return "Press the back button.";
    default: break;
    }
    if (!step.component)
        throw std::invalid_argument("GUI step without a component snapshot");
    const ComponentSnapshot& c = *step.component;
    const std::string loc =
        relative_location_name(relative_location(c.bounds, window_width, window_height));
    const std::string tail = ", which is located on the " + loc + " of the screen.";
    switch (step.kind) {
    case StepKind::tap: return "Tap on " + detail::component_phrase(c) + tail;
    case StepKind::long_tap: return "Long-tap on " + detail::component_phrase(c) + tail;
    case StepKind::type_text:
        return "Type \"" + step.typed_text.value_or("") + "\" on the " +
               detail::component_phrase(c) + tail;
    default: break;
    }
    throw std::invalid_argument("unreachable step kind");
}

// ---------------------------------------------------------------------------
// Stack trace pruning
// ---------------------------------------------------------------------------

/// Keep only frames inside the app's package. Exception class and message are
/// preserved. When no frame survives, the original head frame is kept so a
/// trace is never frame-less. Idempotent.
inline CrashSignature prune_stack_trace(const CrashSignature& sig,
                                        const std::string& package_prefix) {
    CrashSignature out;
    out.exception_class = sig.exception_class;
    out.message = sig.message;
    for (const std::string& frame : sig.stack)
        if (detail::frame_has_prefix(frame, package_prefix)) out.stack.push_back(frame);
    if (out.stack.empty() && !sig.stack.empty()) out.stack.push_back(sig.stack.front());
    return out;
}

// ---------------------------------------------------------------------------
// HTML report
// ---------------------------------------------------------------------------

struct ReportResult {
    std::string html;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string html_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&#39;"; break;
        default: out += ch;
        }
    }
    return out;
}

inline std::string placeholder_svg(int w, int h) {
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
        << "  <rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h
        << "\" fill=\"#dddddd\" stroke=\"#888888\"/>\n"
        << "  <text x=\"" << w / 2 << "\" y=\"" << h / 2
        << "\" fill=\"#555555\" font-family=\"monospace\" font-size=\"32\" "
           "text-anchor=\"middle\">screenshot missing</text>\n</svg>\n";
    return svg.str();
}

/// Overlay the interacted component's bounds on a rendering by injecting a
/// highlight rectangle before the closing tag.
inline std::string highlight_component(std::string svg, const Bounds& b) {
    const std::string rect = "  <rect x=\"" + std::to_string(b.x1) + "\" y=\"" +
                             std::to_string(b.y1) + "\" width=\"" + std::to_string(b.x2 - b.x1) +
                             "\" height=\"" + std::to_string(b.y2 - b.y1) +
                             "\" fill=\"none\" stroke=\"#d32f2f\" stroke-width=\"6\"/>\n";
    const std::size_t pos = svg.rfind("</svg>");
    if (pos == std::string::npos) return svg;
    svg.insert(pos, rect);
    return svg;
}

struct ContextBadge {
    const char* css;
    const char* text;
    const char* meaning;
};

inline std::vector<ContextBadge> context_badges(const ContextualState& s) {
    std::vector<ContextBadge> out;
    if (!s.network_on) out.push_back({"net", "NET OFF", "network connection disabled"});
    if (s.gps.invalid) out.push_back({"gps", "GPS INV", "GPS set to an invalid location"});
    for (ContextFeature f : s.sensor_adverse) {
        switch (f) {
        case ContextFeature::accelerometer:
            out.push_back({"sen", "ACC ADV", "accelerometer set to adverse values"});
            break;
        case ContextFeature::magnetometer:
            out.push_back({"sen", "MAG ADV", "magnetometer set to adverse values"});
            break;
        case ContextFeature::temperature:
            out.push_back({"sen", "TMP ADV", "temperature set to adverse values"});
            break;
        default: break;
        }
    }
    if (s.orientation == Orientation::landscape)
        out.push_back({"rot", "LAND", "device rotated to landscape"});
    return out;
}

inline const char* kReportCss = R"css(
body { font-family: Georgia, serif; margin: 2em auto; max-width: 72em; color: #222; }
h1 { border-bottom: 2px solid #d32f2f; padding-bottom: 0.3em; }
h2 { margin-top: 1.6em; color: #444; }
table.general th { text-align: left; padding-right: 1.2em; color: #555; }
table.general td, table.general th { padding-bottom: 0.25em; vertical-align: top; }
ol.steps li { margin-bottom: 0.5em; }
span.badge { font-family: monospace; font-size: 0.75em; padding: 0.15em 0.4em;
             border-radius: 3px; margin-left: 0.4em; color: #fff; }
span.badge.net { background: #b71c1c; }
span.badge.gps { background: #e65100; }
span.badge.sen { background: #4a148c; }
span.badge.rot { background: #01579b; }
div.flow { display: flex; flex-wrap: wrap; gap: 1em; }
figure.shot { margin: 0; }
figure.shot svg { width: 240px; height: auto; border: 1px solid #ccc; }
figure.shot figcaption { font-size: 0.8em; text-align: center; color: #555; }
pre.trace { background: #f7f7f7; border: 1px solid #ddd; padding: 1em; overflow-x: auto; }
ul.legend { list-style: none; padding-left: 0; }
ul.legend li { margin-bottom: 0.3em; }
)css";

}  // namespace detail

/// Render the crash report for a crashed trace. `renderings` maps screenshot
/// references to SVG content; a missing reference yields a placeholder image
/// plus a warning, never a failure. Throws std::invalid_argument for
/// non-crashed traces.
inline ReportResult generate_report(const ExecutionTrace& trace,
                                    const std::map<std::string, std::string>& renderings) {
    if (!trace.crashed)
        throw std::invalid_argument("crash reports are generated from crashed traces only");

    ReportResult result;
    using detail::html_escape;
    const TraceMeta& meta = trace.meta;
    const ExecutionStep& crash = trace.steps.back();
    const CrashSignature pruned =
        prune_stack_trace(crash.outcome.signature.value_or(CrashSignature{}), meta.package);

    auto rendering_for = [&](const ExecutionStep& step) -> std::string {
        auto it = renderings.find(step.screenshot);
        if (it != renderings.end()) return it->second;
        result.warnings.push_back("missing screenshot '" + step.screenshot + "' for step " +
                                  std::to_string(step.index));
        return detail::placeholder_svg(meta.width, meta.height);
    };

    std::ostringstream html;
    html << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>"
         << html_escape(meta.app_name) << " crash report</title>\n<style>" << detail::kReportCss
         << "</style>\n</head>\n<body>\n";
    html << "<h1>Crash report: " << html_escape(meta.app_name) << " "
         << html_escape(meta.app_version) << "</h1>\n";

    // 1. General information.
    html << "<section id=\"general\">\n<h2>General Information</h2>\n<table class=\"general\">\n";
    html << "<tr><th>App</th><td>" << html_escape(meta.app_name) << "</td></tr>\n";
    html << "<tr><th>Version</th><td>" << html_escape(meta.app_version) << "</td></tr>\n";
    html << "<tr><th>OS version</th><td>" << html_escape(meta.os_version) << "</td></tr>\n";
    html << "<tr><th>Device</th><td>" << html_escape(meta.device_name) << "</td></tr>\n";
    html << "<tr><th>Orientation at crash</th><td>" << orientation_name(crash.context.orientation)
         << "</td></tr>\n";
    html << "<tr><th>Resolution at crash</th><td>" << meta.width << "x" << meta.height
         << "</td></tr>\n";
    html << "<tr><th>Strategy</th><td>" << html_escape(meta.strategy) << "</td></tr>\n";
    html << "</table>\n";
    html << "<h3>Contextual state legend</h3>\n<ul class=\"legend\">\n";
    html << "<li><span class=\"badge net\">NET OFF</span> network connection disabled</li>\n";
    html << "<li><span class=\"badge gps\">GPS INV</span> GPS set to an invalid location "
            "(999.0, 999.0)</li>\n";
    html << "<li><span class=\"badge sen\">ACC ADV</span> accelerometer set to adverse "
            "values</li>\n";
    html << "<li><span class=\"badge sen\">MAG ADV</span> magnetometer set to adverse "
            "values</li>\n";
    html << "<li><span class=\"badge sen\">TMP ADV</span> temperature set to adverse "
            "values</li>\n";
    html << "<li><span class=\"badge rot\">LAND</span> device rotated to landscape</li>\n";
    html << "</ul>\n</section>\n";

    // 2. Reproduction steps.
    html << "<section id=\"steps\">\n<h2>Reproduction Steps</h2>\n<ol class=\"steps\">\n";
    for (const ExecutionStep& step : trace.steps) {
        html << "<li value=\"" << step.index << "\">"
             << html_escape(render_step_sentence(step, meta.width, meta.height));
        for (const auto& badge : detail::context_badges(step.context))
            html << "<span class=\"badge " << badge.css << "\">" << badge.text << "</span>";
        html << "</li>\n";
    }
    html << "</ol>\n</section>\n";

    // 3. Crash screen flow.
    html << "<section id=\"screenflow\">\n<h2>Crash Screen-Flow</h2>\n<div class=\"flow\">\n";
    for (const ExecutionStep& step : trace.steps) {
        std::string svg = rendering_for(step);
        if (step.component) svg = detail::highlight_component(std::move(svg), step.component->bounds);
        html << "<figure class=\"shot\">\n" << svg << "<figcaption>Step " << step.index << ": "
             << step_kind_name(step.kind) << "</figcaption>\n</figure>\n";
    }
    html << "</div>\n</section>\n";

    // 4. Pruned stack trace.
    html << "<section id=\"stacktrace\">\n<h2>Pruned Stack Trace</h2>\n<pre class=\"trace\">";
    html << html_escape(pruned.exception_class);
    if (!pruned.message.empty()) html << ": " << html_escape(pruned.message);
    html << "\n";
    for (const std::string& frame : pruned.stack) html << "    at " << html_escape(frame) << "\n";
    html << "</pre>\n</section>\n</body>\n</html>\n";

    result.html = html.str();
    return result;
}

inline std::string report_file_name(const TraceMeta& meta) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "run%03d", meta.run);
    return detail::sanitize_file_token(meta.app_name) + "__" + meta.strategy + "__" + buf +
           "__report.html";
}

}  // namespace crashscope
