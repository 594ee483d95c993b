#include "d2k/orchestrator/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"

namespace d2k::orchestrator {
namespace {

constexpr const char* kRunsHeader =
    "setup,run_index,config_id,wall_seconds,cross_validation_loss,final_validation_mae,trainable_groups,"
    "unchanged_groups,accepted";
constexpr const char* kTrendHeader = "setup,run_index,epoch,validation_mae";
constexpr const char* kSummaryHeader =
    "setup,runs,total_wall_seconds,mean_wall_seconds,first_run_validation_mae,best_validation_mae,"
    "theoretical_max_mae,sensor_floor,noise_sigma";

constexpr const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return std::string(buf) == "-0.00" ? "0.00" : buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
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

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, const std::string& header) {
  if (!std::filesystem::exists(path)) throw ValidationError("artifacts", path.string() + " not found");
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw ValidationError("artifacts", path.filename().string() + ": unexpected header");
  }
  const auto n = split(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != n) throw ValidationError("artifacts", path.filename().string() + ": malformed row");
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw ValidationError("artifacts", path.filename().string() + " has no rows");
  return rows;
}

double to_d(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("artifacts", "not a number: '" + s + "'");
  }
}

int to_i(const std::string& s) { return static_cast<int>(std::lround(to_d(s))); }

/// Setups in summary order.
std::vector<std::string> setup_order(const ReportTables& t) {
  std::vector<std::string> out;
  for (const auto& s : t.summary) out.push_back(s.setup);
  return out;
}

struct Svg {
  std::ostringstream out;
  Svg(int w, int h) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
        << w << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"#ffffff\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, const std::string& extra = "") {
    out << "<line x1=\"" << px(x1) << "\" y1=\"" << px(y1) << "\" x2=\"" << px(x2) << "\" y2=\"" << px(y2)
        << "\" stroke=\"" << stroke << "\"" << extra << "/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke) {
    out << "<rect x=\"" << px(x) << "\" y=\"" << px(y) << "\" width=\"" << px(w) << "\" height=\"" << px(h)
        << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& anchor = "start", const std::string& extra = "") {
    out << "<text x=\"" << px(x) << "\" y=\"" << px(y) << "\" text-anchor=\"" << anchor << "\"" << extra << ">"
        << xml_escape(s) << "</text>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) out << (i ? " " : "") << px(pts[i].first) << ',' << px(pts[i].second);
    out << "\"/>\n";
  }
  std::string finish() {
    out << "</svg>\n";
    return out.str();
  }
};

}  // namespace

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ValidationError("values", "empty");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ReportTables tables_from(const BenchmarkReport& r) {
  ReportTables t;
  for (const auto& res : r.results) {
    const auto name = sweep::to_string(res.setup);
    for (const auto& run : res.runs) {
      t.runs.push_back({name, run.run_index, run.config_id, run.wall_seconds, run.cross_validation_loss,
                        run.final_validation_mae(), static_cast<int>(run.trainable_groups),
                        static_cast<int>(run.unchanged_groups), run.accepted});
      for (std::size_t e = 0; e < run.validation_mae.size(); ++e) {
        t.trend.push_back({name, run.run_index, static_cast<int>(e + 1), run.validation_mae[e]});
      }
    }
    t.summary.push_back({name, static_cast<int>(res.runs.size()), res.total_wall_seconds, res.mean_wall_seconds(),
                         res.first_run_validation_mae(), res.best_validation_mae(), r.theoretical_max_mae,
                         r.sensor_floor, r.noise_sigma});
  }
  return t;
}

void write_benchmark_artifacts(const BenchmarkReport& r, const std::filesystem::path& dir) {
  const auto t = tables_from(r);
  std::ostringstream runs, trend, summary;
  runs << kRunsHeader << '\n';
  for (const auto& x : t.runs) {
    runs << x.setup << ',' << x.run_index << ',' << x.config_id << ',' << num(x.wall_seconds) << ','
         << num(x.cross_validation_loss) << ',' << num(x.final_validation_mae) << ',' << x.trainable_groups << ','
         << x.unchanged_groups << ',' << (x.accepted ? 1 : 0) << '\n';
  }
  trend << kTrendHeader << '\n';
  for (const auto& x : t.trend) {
    trend << x.setup << ',' << x.run_index << ',' << x.epoch << ',' << num(x.validation_mae) << '\n';
  }
  summary << kSummaryHeader << '\n';
  for (const auto& x : t.summary) {
    summary << x.setup << ',' << x.runs << ',' << num(x.total_wall_seconds) << ',' << num(x.mean_wall_seconds) << ','
            << num(x.first_run_validation_mae) << ',' << num(x.best_validation_mae) << ','
            << num(x.theoretical_max_mae) << ',' << num(x.sensor_floor) << ',' << num(x.noise_sigma) << '\n';
  }
  write_file_atomic(dir / "runs.csv", runs.str());
  write_file_atomic(dir / "mae_trend.csv", trend.str());
  write_file_atomic(dir / "summary.csv", summary.str());
  write_file_atomic(dir / "benchmark.json", to_json(r).dump(2) + "\n");
}

ReportTables read_tables(const std::filesystem::path& dir) {
  ReportTables t;
  for (const auto& c : read_csv(dir / "runs.csv", kRunsHeader)) {
    t.runs.push_back({c[0], to_i(c[1]), c[2], to_d(c[3]), to_d(c[4]), to_d(c[5]), to_i(c[6]), to_i(c[7]),
                      to_i(c[8]) != 0});
  }
  for (const auto& c : read_csv(dir / "mae_trend.csv", kTrendHeader)) {
    t.trend.push_back({c[0], to_i(c[1]), to_i(c[2]), to_d(c[3])});
  }
  for (const auto& c : read_csv(dir / "summary.csv", kSummaryHeader)) {
    t.summary.push_back(
        {c[0], to_i(c[1]), to_d(c[2]), to_d(c[3]), to_d(c[4]), to_d(c[5]), to_d(c[6]), to_d(c[7]), to_d(c[8])});
  }
  return t;
}

std::string render_runtime_boxplot(const ReportTables& t) {
  const auto setups = setup_order(t);
  if (setups.empty() || t.runs.empty()) throw ValidationError("artifacts", "no runs to plot");
  std::map<std::string, std::vector<double>> times;
  for (const auto& r : t.runs) {
    if (!(r.wall_seconds > 0.0)) throw ValidationError("wall_seconds", "must be > 0 on a log axis");
    times[r.setup].push_back(r.wall_seconds);
  }
  double vmin = t.runs.front().wall_seconds, vmax = vmin;
  for (const auto& r : t.runs) {
    vmin = std::min(vmin, r.wall_seconds);
    vmax = std::max(vmax, r.wall_seconds);
  }
  int dlo = static_cast<int>(std::floor(std::log10(vmin)));
  int dhi = static_cast<int>(std::ceil(std::log10(vmax)));
  if (dhi <= dlo) dhi = dlo + 1;

  const double left = 80, right = 620, top = 40, bottom = 340;
  auto y_of = [&](double v) { return bottom - (std::log10(v) - dlo) / (dhi - dlo) * (bottom - top); };

  Svg svg(660, 400);
  svg.text(350, 22, "Training wall time per run by setup", "middle", " font-size=\"14\"");
  svg.line(left, top, left, bottom, "#000000");
  svg.line(left, bottom, right, bottom, "#000000");
  for (int d = dlo; d <= dhi; ++d) {
    const double y = y_of(std::pow(10.0, d));
    svg.line(left - 5, y, right, y, "#cccccc", " stroke-dasharray=\"2,3\"");
    svg.text(left - 8, y + 4, "1e" + std::to_string(d), "end");
    if (d < dhi) {
      for (int m = 2; m < 10; ++m) svg.line(left - 3, y_of(m * std::pow(10.0, d)), left, y_of(m * std::pow(10.0, d)), "#000000");
    }
  }
  svg.text(20, (top + bottom) / 2, "wall time [s] (log scale)", "middle",
           " transform=\"rotate(-90 20 " + px((top + bottom) / 2) + ")\"");

  const double slot = (right - left) / static_cast<double>(setups.size());
  for (std::size_t i = 0; i < setups.size(); ++i) {
    const auto& v = times[setups[i]];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    const std::string color = kColors[i % 6];
    svg.text(cx, bottom + 18, setups[i], "middle", " font-size=\"10\"");
    svg.text(cx, bottom + 32, "n=" + std::to_string(v.size()), "middle", " font-size=\"10\"");
    if (v.empty()) continue;
    const double q1 = quantile(v, 0.25), med = quantile(v, 0.5), q3 = quantile(v, 0.75);
    const double iqr = q3 - q1;
    double wlo = q3, whi = q1;
    for (double x : v) {
      if (x >= q1 - 1.5 * iqr) wlo = std::min(wlo, x);
      if (x <= q3 + 1.5 * iqr) whi = std::max(whi, x);
    }
    const double bw = std::min(60.0, slot * 0.5);
    svg.line(cx, y_of(wlo), cx, y_of(q1), color);
    svg.line(cx, y_of(q3), cx, y_of(whi), color);
    svg.line(cx - bw / 4, y_of(wlo), cx + bw / 4, y_of(wlo), color);
    svg.line(cx - bw / 4, y_of(whi), cx + bw / 4, y_of(whi), color);
    svg.out << "<g class=\"box\" data-setup=\"" << xml_escape(setups[i]) << "\">\n";
    svg.rect(cx - bw / 2, y_of(q3), bw, std::max(0.0, y_of(q1) - y_of(q3)), "#f4f4f4", color);
    svg.line(cx - bw / 2, y_of(med), cx + bw / 2, y_of(med), color, " stroke-width=\"2\"");
    svg.out << "</g>\n";
    for (double x : v) {
      if (x < wlo || x > whi) {
        svg.out << "<circle cx=\"" << px(cx) << "\" cy=\"" << px(y_of(x)) << "\" r=\"2.5\" fill=\"none\" stroke=\""
                << color << "\"/>\n";
      }
    }
  }
  return svg.finish();
}

std::string render_mae_trend(const ReportTables& t) {
  const auto setups = setup_order(t);
  if (setups.empty() || t.trend.empty()) throw ValidationError("artifacts", "no validation traces to plot");
  const double tmax = t.summary.front().theoretical_max_mae;
  const double floor = t.summary.front().sensor_floor;
  const double sigma = t.summary.front().noise_sigma;
  if (!(tmax > 0.0)) throw ValidationError("theoretical_max_mae", "must be > 0");

  // Trace of each setup's best run (lowest final MAE, earliest on ties).
  std::map<std::string, int> best_run;
  {
    std::map<std::string, double> best;
    for (const auto& r : t.runs) {
      auto it = best.find(r.setup);
      if (it == best.end() || r.final_validation_mae < it->second) {
        best[r.setup] = r.final_validation_mae;
        best_run[r.setup] = r.run_index;
      }
    }
  }
  std::map<std::string, std::vector<std::pair<int, double>>> traces;
  int max_epoch = 1;
  for (const auto& r : t.trend) {
    auto it = best_run.find(r.setup);
    if (it == best_run.end() || it->second != r.run_index) continue;
    traces[r.setup].emplace_back(r.epoch, r.validation_mae);
    max_epoch = std::max(max_epoch, r.epoch);
  }
  double lo = tmax, hi = 0.0;
  for (auto& [name, tr] : traces) {
    std::sort(tr.begin(), tr.end());
    for (const auto& p : tr) {
      lo = std::min(lo, p.second);
      hi = std::max(hi, p.second);
    }
  }
  if (!(hi > lo)) {
    lo -= 0.5 * std::max(lo, 1e-3);
    hi += 0.5 * std::max(hi, 1e-3);
  }
  const double pad = 0.05 * (hi - lo);
  lo = std::max(0.0, lo - pad);
  hi += pad;

  const double left = 70, right = 470, top = 50, bottom = 370;
  const double ileft = 540, iright = 760, itop = 60, ibottom = 240;
  auto x_of = [&](double e, double l, double r) {
    return max_epoch == 1 ? (l + r) / 2 : l + (e - 1) / (max_epoch - 1) * (r - l);
  };
  auto y_main = [&](double v) { return bottom - v / tmax * (bottom - top); };
  auto y_inset = [&](double v) { return ibottom - (v - lo) / (hi - lo) * (ibottom - itop); };

  Svg svg(800, 440);
  svg.text(400, 24, "Validation MAE per epoch by setup (best run)", "middle", " font-size=\"14\"");
  svg.line(left, top, left, bottom, "#000000");
  svg.line(left, bottom, right, bottom, "#000000");
  for (int k = 0; k <= 4; ++k) {
    const double v = tmax * k / 4.0;
    svg.line(left - 5, y_main(v), left, y_main(v), "#000000");
    svg.text(left - 8, y_main(v) + 4, short_num(v), "end");
  }
  svg.line(left, y_main(tmax), right, y_main(tmax), "#888888", " stroke-dasharray=\"6,3\"");
  svg.text(right, y_main(tmax) - 4, "theoretical max MAE " + short_num(tmax) + " N m", "end", " font-size=\"10\"");
  svg.line(left, y_main(floor), right, y_main(floor), "#888888", " stroke-dasharray=\"2,2\"");
  svg.text(right, y_main(floor) - 4, "sensor floor " + short_num(floor) + " N m", "end", " font-size=\"10\"");
  for (int e : {1, max_epoch}) {
    svg.text(x_of(e, left, right), bottom + 16, std::to_string(e), "middle");
  }
  svg.text((left + right) / 2, bottom + 32, "epoch", "middle");
  svg.text(20, (top + bottom) / 2, "validation MAE [N m]", "middle",
           " transform=\"rotate(-90 20 " + px((top + bottom) / 2) + ")\"");

  // Detail inset: same traces on a zoomed axis.
  svg.rect(ileft, itop, iright - ileft, ibottom - itop, "#fafafa", "#444444");
  svg.text(ileft, itop - 6, "detail", "start", " font-size=\"10\"");
  svg.text(ileft - 4, y_inset(hi) + 4, short_num(hi), "end", " font-size=\"9\"");
  svg.text(ileft - 4, y_inset(lo) + 4, short_num(lo), "end", " font-size=\"9\"");
  if (sigma > lo && sigma < hi) {
    svg.line(ileft, y_inset(sigma), iright, y_inset(sigma), "#888888", " stroke-dasharray=\"2,2\"");
  }

  double legend_y = ibottom + 30;
  svg.text(ileft, legend_y - 12, "final MAE [N m], noise sigma " + short_num(sigma), "start", " font-size=\"10\"");
  for (std::size_t i = 0; i < setups.size(); ++i) {
    const std::string color = kColors[i % 6];
    const auto it = traces.find(setups[i]);
    if (it == traces.end() || it->second.empty()) continue;
    std::vector<std::pair<double, double>> main_pts, inset_pts;
    for (const auto& [e, v] : it->second) {
      main_pts.emplace_back(x_of(e, left, right), y_main(std::min(v, tmax)));
      inset_pts.emplace_back(x_of(e, ileft, iright), y_inset(v));
    }
    svg.polyline(main_pts, color);
    svg.polyline(inset_pts, color);
    svg.line(ileft, legend_y - 4, ileft + 16, legend_y - 4, color, " stroke-width=\"2\"");
    svg.text(ileft + 22, legend_y, setups[i] + ": " + short_num(it->second.back().second), "start",
             " font-size=\"10\"");
    legend_y += 16;
  }
  return svg.finish();
}

std::vector<std::filesystem::path> render_report(const std::filesystem::path& dir) {
  const auto t = read_tables(dir);
  const auto box = dir / "runtime_boxplot.svg";
  const auto trend = dir / "mae_trend.svg";
  write_file_atomic(box, render_runtime_boxplot(t));
  write_file_atomic(trend, render_mae_trend(t));
  return {box, trend};
}

}  // namespace d2k::orchestrator
