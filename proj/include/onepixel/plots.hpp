#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "onepixel/campaign.hpp"
#include "onepixel/csv.hpp"
#include "onepixel/errors.hpp"
#include "onepixel/image.hpp"
#include "onepixel/png_io.hpp"
#include "onepixel/stats.hpp"

namespace onepixel {

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Score axis: [0,1] mapped top-down into the plot area.
struct ScoreAxis {
  double top, height;
  double y(double score) const { return top + (1.0 - score) * height; }
};

inline void svg_axis(std::string& svg, const ScoreAxis& ax, double x_left,
                     double x_right) {
  svg += "<line x1='" + svg_num(x_left) + "' y1='" + svg_num(ax.y(0)) +
         "' x2='" + svg_num(x_left) + "' y2='" + svg_num(ax.y(1)) +
         "' stroke='#333'/>\n";
  for (double tick : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const double y = ax.y(tick);
    svg += "<line x1='" + svg_num(x_left - 4) + "' y1='" + svg_num(y) + "' x2='" +
           svg_num(x_left) + "' y2='" + svg_num(y) + "' stroke='#333'/>\n";
    svg += "<line x1='" + svg_num(x_left) + "' y1='" + svg_num(y) + "' x2='" +
           svg_num(x_right) + "' y2='" + svg_num(y) +
           "' stroke='#ddd' stroke-dasharray='3 3'/>\n";
    svg += "<text x='" + svg_num(x_left - 8) + "' y='" + svg_num(y + 4) +
           "' text-anchor='end' font-size='11' font-family='sans-serif'>" +
           svg_num(tick) + "</text>\n";
  }
}

}  // namespace detail

// Tukey box-and-whisker chart of one or more score series on a fixed [0,1]
// axis: box q1..q3, line at the median, whiskers at the farthest points
// within 1.5 IQR of the box, individual dots beyond.
inline std::string render_box_plot_svg(
    const std::string& title,
    const std::vector<std::pair<std::string, SummaryStats>>& series) {
  if (series.empty()) throw ConfigError("box plot needs at least one series");
  const double pad_left = 56, pad_top = 44, pad_bottom = 36;
  const double slot = 120, box_w = 52;
  const double width = pad_left + slot * series.size() + 16;
  const double height = 320;
  const detail::ScoreAxis ax{pad_top, height - pad_top - pad_bottom};

  std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" +
                    detail::svg_num(width) + "' height='" +
                    detail::svg_num(height) + "' viewBox='0 0 " +
                    detail::svg_num(width) + " " + detail::svg_num(height) +
                    "'>\n";
  svg += "<rect width='100%' height='100%' fill='white'/>\n";
  svg += "<text x='" + detail::svg_num(width / 2) +
         "' y='24' text-anchor='middle' font-size='14' "
         "font-family='sans-serif' font-weight='bold'>" +
         detail::xml_escape(title) + "</text>\n";
  detail::svg_axis(svg, ax, pad_left, width - 16);

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& [name, s] = series[i];
    const double cx = pad_left + slot * (i + 0.5);
    const double x0 = cx - box_w / 2, x1 = cx + box_w / 2;
    // Whisker stem and caps.
    svg += "<line x1='" + detail::svg_num(cx) + "' y1='" +
           detail::svg_num(ax.y(s.whisker_low)) + "' x2='" + detail::svg_num(cx) +
           "' y2='" + detail::svg_num(ax.y(s.whisker_high)) +
           "' stroke='#333'/>\n";
    for (double w : {s.whisker_low, s.whisker_high})
      svg += "<line x1='" + detail::svg_num(cx - box_w / 4) + "' y1='" +
             detail::svg_num(ax.y(w)) + "' x2='" + detail::svg_num(cx + box_w / 4) +
             "' y2='" + detail::svg_num(ax.y(w)) + "' stroke='#333'/>\n";
    // Box and median.
    svg += "<rect x='" + detail::svg_num(x0) + "' y='" +
           detail::svg_num(ax.y(s.q3)) + "' width='" + detail::svg_num(box_w) +
           "' height='" + detail::svg_num(ax.y(s.q1) - ax.y(s.q3)) +
           "' fill='#9ecae1' stroke='#333'/>\n";
    svg += "<line x1='" + detail::svg_num(x0) + "' y1='" +
           detail::svg_num(ax.y(s.median)) + "' x2='" + detail::svg_num(x1) +
           "' y2='" + detail::svg_num(ax.y(s.median)) +
           "' stroke='#333' stroke-width='2'/>\n";
    for (double o : s.outliers)
      svg += "<circle cx='" + detail::svg_num(cx) + "' cy='" +
             detail::svg_num(ax.y(o)) + "' r='2.5' fill='none' stroke='#333'/>\n";
    svg += "<text x='" + detail::svg_num(cx) + "' y='" +
           detail::svg_num(height - 12) +
           "' text-anchor='middle' font-size='12' font-family='sans-serif'>" +
           detail::xml_escape(name) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

// Convergence line chart: best score after initialization and after each
// generation, with the 0.05/0.5/0.95 tier thresholds marked.
inline std::string render_trace_svg(const std::string& image_id,
                                    const std::vector<double>& trace) {
  if (trace.empty()) throw ConfigError("trace for '" + image_id + "' is empty");
  const double pad_left = 56, pad_top = 44, pad_bottom = 36, pad_right = 16;
  const double width = 480, height = 320;
  const double plot_w = width - pad_left - pad_right;
  const detail::ScoreAxis ax{pad_top, height - pad_top - pad_bottom};
  const auto x_of = [&](std::size_t i) {
    if (trace.size() == 1) return pad_left + plot_w / 2;
    return pad_left + plot_w * static_cast<double>(i) / (trace.size() - 1);
  };

  std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" +
                    detail::svg_num(width) + "' height='" +
                    detail::svg_num(height) + "' viewBox='0 0 " +
                    detail::svg_num(width) + " " + detail::svg_num(height) +
                    "'>\n";
  svg += "<rect width='100%' height='100%' fill='white'/>\n";
  svg += "<text x='" + detail::svg_num(width / 2) +
         "' y='24' text-anchor='middle' font-size='14' "
         "font-family='sans-serif' font-weight='bold'>" +
         detail::xml_escape(image_id) + "</text>\n";
  detail::svg_axis(svg, ax, pad_left, width - pad_right);
  for (double t : {0.05, 0.5, 0.95})
    svg += "<line x1='" + detail::svg_num(pad_left) + "' y1='" +
           detail::svg_num(ax.y(t)) + "' x2='" + detail::svg_num(width - pad_right) +
           "' y2='" + detail::svg_num(ax.y(t)) +
           "' stroke='#e41a1c' stroke-dasharray='5 4' stroke-opacity='0.5'/>\n";

  if (trace.size() == 1) {
    svg += "<circle cx='" + detail::svg_num(x_of(0)) + "' cy='" +
           detail::svg_num(ax.y(trace[0])) + "' r='3' fill='#08519c'/>\n";
  } else {
    std::string points;
    for (std::size_t i = 0; i < trace.size(); ++i)
      points += detail::svg_num(x_of(i)) + "," + detail::svg_num(ax.y(trace[i])) + " ";
    svg += "<polyline points='" + points +
           "' fill='none' stroke='#08519c' stroke-width='1.5'/>\n";
  }
  svg += "<text x='" + detail::svg_num(pad_left + plot_w / 2) + "' y='" +
         detail::svg_num(height - 12) +
         "' text-anchor='middle' font-size='12' "
         "font-family='sans-serif'>iteration</text>\n";
  svg += "</svg>\n";
  return svg;
}

// Filesystem-safe rendering of an image id.
inline std::string sanitize_filename(std::string_view id) {
  std::string out;
  out.reserve(id.size());
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "unnamed" : out;
}

struct PlotOptions {
  // Trace SVGs and adversarial PNGs are emitted for these ids.
  std::vector<std::string> image_ids;
  // Maps a result row back to its source image; leave unset to skip
  // adversarial PNGs.
  std::function<RgbImage(const ResultRow&)> load_source;
};

namespace detail {

inline std::string write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("failed to write " + path);
  return path;
}

}  // namespace detail

// Writes box-plot SVGs for every direction with attacked rows, plus trace
// SVGs and adversarial PNGs for the requested ids. Returns the paths written.
inline std::vector<std::string> emit_plots(
    const CampaignReport& report, const std::vector<ResultRow>& rows,
    const std::map<std::string, std::vector<double>>& traces,
    const std::string& out_dir, const PlotOptions& options = {}) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;

  const auto emit_box = [&](const DirectionReport& rep, AttackDirection dir) {
    if (!rep.before || !rep.after) return;
    const std::string name(direction_name(dir));
    const std::string svg = render_box_plot_svg(
        name + " confidence scores", {{"before", *rep.before}, {"after", *rep.after}});
    written.push_back(
        detail::write_text_file(out_dir + "/box_" + name + ".svg", svg));
  };
  emit_box(report.mitosis_to_normal, AttackDirection::MitosisToNormal);
  emit_box(report.normal_to_mitosis, AttackDirection::NormalToMitosis);

  for (const std::string& id : options.image_ids) {
    const auto row_it =
        std::find_if(rows.begin(), rows.end(),
                     [&](const ResultRow& r) { return r.image_id == id; });
    if (row_it == rows.end())
      throw ConfigError("no result row for image_id '" + id + "'");
    const std::string stem = out_dir + "/" + sanitize_filename(id);
    const auto trace_it = traces.find(id);
    if (trace_it == traces.end())
      throw ConfigError("no trace recorded for image_id '" + id + "'");
    written.push_back(detail::write_text_file(
        stem + "_trace.svg", render_trace_svg(id, trace_it->second)));
    if (options.load_source) {
      const RgbImage source = options.load_source(*row_it);
      const PixelPerturbation p{row_it->x, row_it->y,
                                static_cast<std::uint8_t>(row_it->r),
                                static_cast<std::uint8_t>(row_it->g),
                                static_cast<std::uint8_t>(row_it->b)};
      encode_png_file(apply_perturbation(source, p), stem + "_adv.png");
      written.push_back(stem + "_adv.png");
    }
  }
  return written;
}

}  // namespace onepixel
