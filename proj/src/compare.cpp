#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ahrm/harness.hpp"

namespace ahrm::harness {

namespace {

struct RunData {
  std::string variant;
  std::vector<double> task_return;
  std::optional<EvalReport> eval;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  return out;
}

RunData read_run(const std::filesystem::path& dir) {
  RunData run;
  const auto config = nlohmann::json::parse(read_text(dir / "config.json"));
  run.variant = config.at("variant").get<std::string>();

  std::istringstream csv(read_text(dir / "episodes.csv"));
  std::string line;
  std::getline(csv, line);
  const auto header = split(line, ',');
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw std::runtime_error((dir / "episodes.csv").string() + " has no column " + name);
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t f1 = column("sum_f1"), f2 = column("sum_f2"), f3 = column("sum_f3");
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw std::runtime_error((dir / "episodes.csv").string() + " has a ragged row");
    }
    run.task_return.push_back(std::stod(cells[f1]) + std::stod(cells[f2]) + std::stod(cells[f3]));
  }
  if (std::filesystem::exists(dir / "eval.json")) {
    run.eval = eval_report_from_json(nlohmann::json::parse(read_text(dir / "eval.json")));
  }
  return run;
}

void mean_std(const std::vector<double>& xs, double& mean, double& stdev) {
  mean = 0.0;
  stdev = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  for (double x : xs) stdev += (x - mean) * (x - mean);
  stdev = std::sqrt(stdev / static_cast<double>(xs.size()));
}

}  // namespace

std::vector<double> smooth(std::span<const double> values, int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= static_cast<std::size_t>(window)) acc -= values[i - window];
    const std::size_t n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

CompareResult compare(const std::vector<std::filesystem::path>& run_dirs,
                      const std::filesystem::path& out_dir) {
  if (run_dirs.size() < 2) throw std::invalid_argument("compare needs at least two run directories");
  std::vector<std::string> missing;
  for (const auto& dir : run_dirs) {
    for (const char* file : {"config.json", "episodes.csv"}) {
      if (!std::filesystem::is_regular_file(dir / file)) missing.push_back((dir / file).string());
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing run files:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw std::runtime_error(msg);
  }

  // Grouped by variant, in first-seen order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<RunData>> groups;
  for (const auto& dir : run_dirs) {
    RunData run = read_run(dir);
    if (!groups.count(run.variant)) order.push_back(run.variant);
    groups[run.variant].push_back(std::move(run));
  }

  std::vector<std::vector<double>> curves;
  for (const auto& name : order) {
    const auto& runs = groups[name];
    std::size_t len = runs.front().task_return.size();
    for (const auto& r : runs) len = std::min(len, r.task_return.size());
    std::vector<double> mean(len, 0.0);
    for (const auto& r : runs) {
      const auto s = smooth(r.task_return, kCurveWindow);
      for (std::size_t i = 0; i < len; ++i) mean[i] += s[i] / static_cast<double>(runs.size());
    }
    curves.push_back(std::move(mean));
  }

  std::filesystem::create_directories(out_dir);
  CompareResult result{out_dir / "comparison.csv", out_dir / "curves.csv",
                       out_dir / "learning_curves.svg"};

  std::string table =
      "variant,runs,evaluated_runs,success_rate_mean,success_rate_std,obstacle_touches_mean,"
      "time_to_success_mean,travel_length_mean,final_smoothed_return\n";
  for (std::size_t v = 0; v < order.size(); ++v) {
    const auto& runs = groups[order[v]];
    std::vector<double> rate, touches, time, travel;
    for (const auto& r : runs) {
      if (!r.eval) continue;
      rate.push_back(r.eval->success_rate);
      touches.push_back(r.eval->obstacle_touches);
      if (r.eval->successes > 0) time.push_back(r.eval->time_to_success_mean);
      travel.push_back(r.eval->travel_length_mean);
    }
    double rm, rs, tm, ts, tim, tis, trm, trs;
    mean_std(rate, rm, rs);
    mean_std(touches, tm, ts);
    mean_std(time, tim, tis);
    mean_std(travel, trm, trs);
    const double final_return = curves[v].empty() ? 0.0 : curves[v].back();
    table += order[v] + "," + std::to_string(runs.size()) + "," + std::to_string(rate.size()) +
             "," + fmt(rm) + "," + fmt(rs) + "," + fmt(tm) + "," + fmt(tim) + "," + fmt(trm) +
             "," + fmt(final_return) + "\n";
  }

  std::string curves_csv = "episode";
  for (const auto& name : order) curves_csv += "," + name;
  curves_csv += "\n";
  std::size_t longest = 0;
  for (const auto& c : curves) longest = std::max(longest, c.size());
  for (std::size_t i = 0; i < longest; ++i) {
    curves_csv += std::to_string(i + 1);
    for (const auto& c : curves) curves_csv += "," + (i < c.size() ? fmt(c[i]) : std::string());
    curves_csv += "\n";
  }

  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing " + p.string());
  };
  write(result.table_csv, table);
  write(result.curves_csv, curves_csv);
  write(result.svg, render_svg(order, curves, "Smoothed task return (window 10)", "episode",
                               "sum of f1+f2+f3"));
  return result;
}

std::string render_svg(const std::vector<std::string>& names,
                       const std::vector<std::vector<double>>& series, const std::string& title,
                       const std::string& x_label, const std::string& y_label) {
  constexpr double kW = 720, kH = 420, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  double lo = 0.0, hi = 1.0;
  std::size_t len = 1;
  bool any = false;
  for (const auto& s : series) {
    len = std::max(len, s.size());
    for (double v : s) {
      if (!any) lo = hi = v;
      any = true;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](std::size_t i) {
    return kLeft + (len > 1 ? pw * static_cast<double>(i) / static_cast<double>(len - 1) : 0.0);
  };
  auto py = [&](double v) { return kTop + ph * (hi - v) / (hi - lo); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
        << fmt(std::round(v * 100.0) / 100.0) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft << "\" y=\"" << kH - 28 << "\">1</text>\n";
  svg << "<text x=\"" << kLeft + pw << "\" y=\"" << kH - 28 << "\" text-anchor=\"end\">" << len
      << "</text>\n";
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">"
      << x_label << "</text>\n";
  svg << "<text transform=\"translate(16," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << y_label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].size(); ++i) {
      svg << (i ? " " : "") << fmt(px(i)) << "," << fmt(py(series[s][i]));
    }
    svg << "\"/>\n";
    const double ly = kTop + 16.0 + 18.0 * static_cast<double>(s);
    svg << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + pw + 32
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly << "\">"
        << (s < names.size() ? names[s] : std::string("series")) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace ahrm::harness
