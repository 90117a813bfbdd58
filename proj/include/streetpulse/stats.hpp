#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "streetpulse/census.hpp"

namespace streetpulse {

// Critical values are embedded rather than computed: significance decisions
// compare against these tables, avoiding an incomplete-gamma implementation.
inline double z_for_level(double level) {
  if (std::abs(level - 0.95) < 1e-12) return 1.959964;
  if (std::abs(level - 0.99) < 1e-12) return 2.575829;
  throw std::invalid_argument("stats: no embedded z value for this confidence level");
}

// Upper 5% chi-square critical values for df 1..20.
inline double chi_square_critical_05(int df) {
  static constexpr std::array<double, 20> kTable = {
      3.841459,  5.991465,  7.814728,  9.487729,  11.070498, 12.591587, 14.067140,
      15.507313, 16.918978, 18.307038, 19.675138, 21.026070, 22.362032, 23.684791,
      24.995790, 26.296228, 27.587112, 28.869299, 30.143527, 31.410433,
  };
  if (df < 1 || df > static_cast<int>(kTable.size())) {
    throw std::invalid_argument("stats: no embedded chi-square critical value for df " +
                                std::to_string(df));
  }
  return kTable[df - 1];
}

struct ProportionEstimate {
  long long successes = 0;
  long long trials = 0;
  double point = 0.0;
};

inline ProportionEstimate make_proportion(long long successes, long long trials) {
  if (trials < 1) throw std::invalid_argument("stats: trials must be >= 1");
  if (successes < 0 || successes > trials) {
    throw std::invalid_argument("stats: successes must be in [0, trials]");
  }
  return {successes, trials, static_cast<double>(successes) / static_cast<double>(trials)};
}

enum class CiMethod { wald, wilson };

inline std::string_view ci_method_name(CiMethod m) {
  return m == CiMethod::wald ? "wald" : "wilson";
}

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  CiMethod method = CiMethod::wilson;
};

// wald: p +- z*sqrt(p(1-p)/n), clamped into [0,1].
// wilson: the score interval; never needs clamping. The k=0 and k=n
// endpoints use their exact closed forms (0, z^2/(n+z^2)) and
// (n/(n+z^2), 1).
inline ConfidenceInterval proportion_ci(long long successes, long long trials, double level,
                                        CiMethod method) {
  const ProportionEstimate est = make_proportion(successes, trials);
  const double z = z_for_level(level);
  const double n = static_cast<double>(trials);
  const double p = est.point;
  ConfidenceInterval ci;
  ci.level = level;
  ci.method = method;
  if (method == CiMethod::wald) {
    const double half = z * std::sqrt(p * (1.0 - p) / n);
    ci.lower = std::max(0.0, p - half);
    ci.upper = std::min(1.0, p + half);
  } else {
    const double z2 = z * z;
    if (successes == 0) {
      ci.lower = 0.0;
      ci.upper = z2 / (n + z2);
    } else if (successes == trials) {
      ci.lower = n / (n + z2);
      ci.upper = 1.0;
    } else {
      const double denom = 1.0 + z2 / n;
      const double center = (p + z2 / (2.0 * n)) / denom;
      const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
      ci.lower = center - half;
      ci.upper = center + half;
    }
  }
  return ci;
}

struct TwoProportionResult {
  double z = 0.0;
  bool significant = false;  // two-sided at the embedded 0.05 critical value
};

// Pooled two-proportion z test; z is defined as 0 when the pooled
// proportion is 0 or 1 (no variance, no evidence of a difference).
inline TwoProportionResult two_proportion_z(long long k1, long long n1, long long k2,
                                            long long n2) {
  const ProportionEstimate a = make_proportion(k1, n1);
  const ProportionEstimate b = make_proportion(k2, n2);
  const double pooled = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
  TwoProportionResult r;
  if (pooled == 0.0 || pooled == 1.0) {
    r.z = 0.0;
  } else {
    const double se = std::sqrt(pooled * (1.0 - pooled) *
                                (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
    r.z = (a.point - b.point) / se;
  }
  r.significant = std::abs(r.z) > z_for_level(0.95);
  return r;
}

struct HomogeneityResult {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  double critical_value = 0.0;
  bool reject = false;
};

// Chi-square homogeneity over the 2xC happy/not-happy table, expected
// counts from the pooled proportion.
inline HomogeneityResult chi_square_homogeneity(
    const std::vector<std::pair<long long, long long>>& counts) {
  if (counts.size() < 2) throw std::invalid_argument("stats: need at least 2 cities");
  long long total_k = 0, total_n = 0;
  for (const auto& [k, n] : counts) {
    make_proportion(k, n);  // validates 0 <= k <= n, n >= 1
    total_k += k;
    total_n += n;
  }
  const double pooled = static_cast<double>(total_k) / static_cast<double>(total_n);
  if (pooled == 0.0 || pooled == 1.0) {
    throw std::runtime_error("stats: degenerate table (pooled proportion is 0 or 1)");
  }
  HomogeneityResult r;
  for (const auto& [k, n] : counts) {
    const double e_happy = static_cast<double>(n) * pooled;
    const double e_rest = static_cast<double>(n) * (1.0 - pooled);
    const double d_happy = static_cast<double>(k) - e_happy;
    const double d_rest = static_cast<double>(n - k) - e_rest;
    r.statistic += d_happy * d_happy / e_happy + d_rest * d_rest / e_rest;
  }
  r.degrees_of_freedom = static_cast<int>(counts.size()) - 1;
  r.critical_value = chi_square_critical_05(r.degrees_of_freedom);
  r.reject = r.statistic > r.critical_value;
  return r;
}

// Closed-interval overlap; diagonal is always true.
inline std::vector<std::vector<bool>> overlap_matrix(
    const std::vector<ConfidenceInterval>& intervals) {
  for (const ConfidenceInterval& ci : intervals) {
    if (ci.level != intervals.front().level || ci.method != intervals.front().method) {
      throw std::invalid_argument("stats: overlap_matrix requires a uniform level and method");
    }
  }
  const std::size_t n = intervals.size();
  std::vector<std::vector<bool>> m(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      m[i][j] = intervals[i].lower <= intervals[j].upper &&
                intervals[j].lower <= intervals[i].upper;
    }
  }
  return m;
}

namespace detail {

inline std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

struct Report {
  std::string svg;
  std::string summary;
};

// One marker + error bar per city (point = happiness proportion, bar = its
// CI) and a text summary with each city's counts, interval and the omnibus
// chi-square verdict. Cities with zero processed faces are listed in the
// summary but carry no interval and are excluded from the omnibus test.
inline Report render_report(const std::vector<CityEmotionCounts>& counts, CiMethod method) {
  if (counts.empty()) throw std::invalid_argument("report: no cities");
  constexpr double kLevel = 0.95;
  const int happy = static_cast<int>(EmotionLabel::Happy);

  struct CityRow {
    const CityEmotionCounts* c;
    bool has_trials;
    ConfidenceInterval ci;
    double point;
  };
  std::vector<CityRow> rows;
  std::vector<std::pair<long long, long long>> tested;
  for (const CityEmotionCounts& c : counts) {
    CityRow row{&c, c.faces_processed > 0, {}, 0.0};
    if (row.has_trials) {
      row.ci = proportion_ci(c.counts[happy], c.faces_processed, kLevel, method);
      row.point = static_cast<double>(c.counts[happy]) / static_cast<double>(c.faces_processed);
      tested.push_back({c.counts[happy], c.faces_processed});
    }
    rows.push_back(row);
  }

  std::string summary;
  for (const CityRow& row : rows) {
    summary += row.c->city;
    if (!row.has_trials) {
      summary += ": no faces processed\n";
      continue;
    }
    summary += ": happy " + std::to_string(row.c->counts[happy]) + "/" +
               std::to_string(row.c->faces_processed);
    summary += ", proportion " + detail::fmt("%.6f", row.point);
    summary += ", " + std::string(ci_method_name(method)) + " 95% CI [" +
               detail::fmt("%.6f", row.ci.lower) + ", " + detail::fmt("%.6f", row.ci.upper) + "]\n";
  }
  if (tested.size() >= 2) {
    const HomogeneityResult h = chi_square_homogeneity(tested);
    summary += "chi-square homogeneity: statistic " + detail::fmt("%.4f", h.statistic) + " on " +
               std::to_string(h.degrees_of_freedom) + " df, critical " +
               detail::fmt("%.4f", h.critical_value) + " -> " +
               (h.reject ? "reject homogeneity at 0.05" : "fail to reject homogeneity at 0.05") +
               "\n";
  } else {
    summary += "omnibus chi-square skipped: need at least 2 cities with processed faces\n";
  }

  // SVG layout: fixed margins, one 80 px slot per city.
  const int c_count = static_cast<int>(rows.size());
  const double margin_left = 90.0, margin_right = 30.0, margin_top = 50.0, margin_bottom = 70.0;
  const double plot_w = std::max(300.0, 80.0 * c_count);
  const double plot_h = 330.0;
  const double width = margin_left + plot_w + margin_right;
  const double height = margin_top + plot_h + margin_bottom;

  double ymax = 0.05;
  for (const CityRow& row : rows) {
    if (row.has_trials) ymax = std::max(ymax, row.ci.upper);
  }
  ymax = std::min(1.0, std::ceil(ymax / 0.05) * 0.05);
  const auto ypix = [&](double p) { return margin_top + plot_h - p / ymax * plot_h; };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         detail::fmt("%.0f", width) + "\" height=\"" + detail::fmt("%.0f", height) +
         "\" viewBox=\"0 0 " + detail::fmt("%.0f", width) + " " + detail::fmt("%.0f", height) +
         "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + detail::fmt("%.0f", width) + "\" height=\"" +
         detail::fmt("%.0f", height) + "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + detail::fmt("%.1f", width / 2.0) +
         "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
         "Happiness proportion by city (" +
         std::string(ci_method_name(method)) + " 95% CI)</text>\n";

  // Axes and y ticks.
  svg += "<line x1=\"" + detail::fmt("%.1f", margin_left) + "\" y1=\"" +
         detail::fmt("%.1f", margin_top) + "\" x2=\"" + detail::fmt("%.1f", margin_left) +
         "\" y2=\"" + detail::fmt("%.1f", margin_top + plot_h) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + detail::fmt("%.1f", margin_left) + "\" y1=\"" +
         detail::fmt("%.1f", margin_top + plot_h) + "\" x2=\"" +
         detail::fmt("%.1f", margin_left + plot_w) + "\" y2=\"" +
         detail::fmt("%.1f", margin_top + plot_h) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double p = ymax * t / 5.0;
    const double y = ypix(p);
    svg += "<line x1=\"" + detail::fmt("%.1f", margin_left - 5.0) + "\" y1=\"" +
           detail::fmt("%.1f", y) + "\" x2=\"" + detail::fmt("%.1f", margin_left) + "\" y2=\"" +
           detail::fmt("%.1f", y) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::fmt("%.1f", margin_left - 10.0) + "\" y=\"" +
           detail::fmt("%.1f", y + 4.0) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::fmt("%.3f", p) + "</text>\n";
  }
  svg += "<text x=\"20\" y=\"" + detail::fmt("%.1f", margin_top + plot_h / 2.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 20 " +
         detail::fmt("%.1f", margin_top + plot_h / 2.0) + ")\">happiness proportion</text>\n";

  for (int i = 0; i < c_count; ++i) {
    const CityRow& row = rows[i];
    const double x = margin_left + (i + 0.5) * plot_w / c_count;
    const std::string name = detail::xml_escape(row.c->city);
    svg += "<text x=\"" + detail::fmt("%.1f", x) + "\" y=\"" +
           detail::fmt("%.1f", margin_top + plot_h + 20.0) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + name +
           "</text>\n";
    if (!row.has_trials) continue;
    const double y_lo = ypix(row.ci.lower), y_hi = ypix(row.ci.upper), y_pt = ypix(row.point);
    svg += "<g class=\"errorbar\" data-city=\"" + name + "\">\n";
    svg += "  <line x1=\"" + detail::fmt("%.1f", x) + "\" y1=\"" + detail::fmt("%.1f", y_hi) +
           "\" x2=\"" + detail::fmt("%.1f", x) + "\" y2=\"" + detail::fmt("%.1f", y_lo) +
           "\" stroke=\"steelblue\" stroke-width=\"2\"/>\n";
    svg += "  <line x1=\"" + detail::fmt("%.1f", x - 6.0) + "\" y1=\"" +
           detail::fmt("%.1f", y_hi) + "\" x2=\"" + detail::fmt("%.1f", x + 6.0) + "\" y2=\"" +
           detail::fmt("%.1f", y_hi) + "\" stroke=\"steelblue\" stroke-width=\"2\"/>\n";
    svg += "  <line x1=\"" + detail::fmt("%.1f", x - 6.0) + "\" y1=\"" +
           detail::fmt("%.1f", y_lo) + "\" x2=\"" + detail::fmt("%.1f", x + 6.0) + "\" y2=\"" +
           detail::fmt("%.1f", y_lo) + "\" stroke=\"steelblue\" stroke-width=\"2\"/>\n";
    svg += "  <circle cx=\"" + detail::fmt("%.1f", x) + "\" cy=\"" + detail::fmt("%.1f", y_pt) +
           "\" r=\"4\" fill=\"darkorange\"/>\n";
    svg += "</g>\n";
  }
  svg += "</svg>\n";

  return {std::move(svg), std::move(summary)};
}

}  // namespace streetpulse
