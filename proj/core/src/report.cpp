#include "cp/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cp/io.hpp"

namespace cp::report {

namespace fs = std::filesystem;
using nlohmann::json;

RunData load_run_dir(const std::string& dir) {
  RunData run;
  run.path = dir;
  std::ifstream cfg_in(dir + "/resolved_config.json");
  if (!cfg_in) {
    throw std::runtime_error("missing resolved_config.json in " + dir);
  }
  json cfg = json::parse(cfg_in);
  run.method = cfg.at("method").get<std::string>();
  const auto seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
  if (seeds.size() != 1) {
    throw std::runtime_error("run dir " + dir +
                             " must carry exactly one resolved seed");
  }
  run.seed = seeds[0];
  run.num_tasks =
      static_cast<int>(cfg.at("sequence").at("tasks").size());
  run.store = io::load_snapshots(dir + "/snapshots.csv");
  if (fs::exists(dir + "/clora_trace.csv")) {
    run.clora_trace = load_clora_trace(dir + "/clora_trace.csv");
  }
  return run;
}

void save_metrics_csv(const MetricsReport& report, const std::string& method,
                      std::uint64_t seed, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# cplab-metrics v1\n";
  out << "boundary_task,metric,value,seed,method\n";
  for (const auto& r : report.records) {
    out << r.boundary_task << ',' << r.metric << ','
        << io::format_double(r.value) << ',' << seed << ',' << method << '\n';
  }
}

MetricsReport load_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "# cplab-metrics v1") {
    throw std::runtime_error("metrics csv: bad header in " + path);
  }
  std::getline(in, line);
  MetricsReport rep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string task, metric, value;
    std::getline(ls, task, ',');
    std::getline(ls, metric, ',');
    std::getline(ls, value, ',');
    rep.add(std::stoi(task), metric, std::stod(value));
  }
  return rep;
}

void save_metrics_json(const MetricsReport& report, const std::string& method,
                       std::uint64_t seed, const std::string& path) {
  json j;
  j["format"] = "cplab-metrics";
  j["version"] = 1;
  j["method"] = method;
  j["seed"] = seed;
  j["records"] = json::array();
  for (const auto& r : report.records) {
    j["records"].push_back({{"boundary_task", r.boundary_task},
                            {"metric", r.metric},
                            {"value", r.value}});
  }
  j["wallclock_seconds"] = report.wallclock_seconds;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

void save_clora_trace(const std::vector<CloraTrace>& trace,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# cplab-clora-trace v1\n";
  out << "task,iteration,l_forget,adapter_norms\n";
  for (const auto& t : trace) {
    out << t.task << ',' << t.iteration << ','
        << io::format_double(t.l_forget) << ',';
    for (std::size_t i = 0; i < t.adapter_norms.size(); ++i) {
      if (i) out << '|';
      out << io::format_double(t.adapter_norms[i]);
    }
    out << '\n';
  }
}

std::vector<CloraTrace> load_clora_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "# cplab-clora-trace v1") {
    throw std::runtime_error("clora trace: bad header in " + path);
  }
  std::getline(in, line);
  std::vector<CloraTrace> trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CloraTrace t;
    std::string field;
    std::getline(ls, field, ',');
    t.task = std::stoi(field);
    std::getline(ls, field, ',');
    t.iteration = std::stoi(field);
    std::getline(ls, field, ',');
    t.l_forget = std::stod(field);
    std::string norms;
    std::getline(ls, norms);
    std::istringstream ns(norms);
    while (std::getline(ns, field, '|')) {
      if (!field.empty()) t.adapter_norms.push_back(std::stod(field));
    }
    trace.push_back(std::move(t));
  }
  return trace;
}

void write_svg_lines(const std::vector<Series>& series,
                     const std::string& title, const std::string& path) {
  constexpr double W = 640, H = 400, ML = 60, MR = 20, MT = 40, MB = 40;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  const auto px = [&](double x) {
    return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR);
  };
  const auto py = [&](double y) {
    return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB);
  };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#ff7f0e", "#9467bd", "#8c564b"};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << title << "</text>\n";
  out << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR
      << "\" y2=\"" << H - MB << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML
      << "\" y2=\"" << H - MB << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << ML << "\" y=\"" << H - MB + 16
      << "\" font-family=\"sans-serif\" font-size=\"10\">"
      << io::format_double(xmin) << "</text>\n";
  out << "<text x=\"" << W - MR << "\" y=\"" << H - MB + 16
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"10\">"
      << io::format_double(xmax) << "</text>\n";
  out << "<text x=\"" << ML - 4 << "\" y=\"" << H - MB
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"10\">"
      << io::format_double(ymin) << "</text>\n";
  out << "<text x=\"" << ML - 4 << "\" y=\"" << MT + 10
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"10\">"
      << io::format_double(ymax) << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kColors[si % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << W - MR - 4 << "\" y=\"" << MT + 14 * (si + 1)
        << "\" text-anchor=\"end\" fill=\"" << color
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label
        << "</text>\n";
  }
  out << "</svg>\n";
}

namespace {

struct Agg {
  std::vector<double> values;
  double mean() const {
    double s = 0;
    for (double v : values) s += v;
    return values.empty() ? 0.0 : s / values.size();
  }
  double stddev() const {
    if (values.size() < 2) return 0.0;
    const double m = mean();
    double s = 0;
    for (double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / (values.size() - 1));
  }
};

}  // namespace

CompareSummary compare_runs(const std::vector<std::string>& run_dirs,
                            const std::string& out_dir) {
  CompareSummary summary;
  fs::create_directories(out_dir);

  std::vector<RunData> runs;
  for (const auto& dir : run_dirs) {
    try {
      runs.push_back(load_run_dir(dir));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << dir << ": " << e.what() << '\n';
      summary.skipped.push_back(dir);
    }
  }
  if (runs.empty()) {
    throw std::runtime_error("compare: no loadable run directories");
  }

  // Recompute every metric from the raw snapshots; the stored metrics CSV
  // is never trusted for the table.
  // method -> metric -> per-seed final values; method -> boundary curve.
  std::map<std::string, std::map<std::string, Agg>> table;
  std::map<std::string, std::map<int, Agg>> a_curves;
  for (const auto& run : runs) {
    const int N = run.num_tasks;
    table[run.method]["a_mmd"].values.push_back(a_mmd(run.store, N));
    table[run.method]["f_mmd"].values.push_back(f_mmd(run.store, N));
    table[run.method]["bwt_mmd"].values.push_back(bwt_mmd(run.store, N));
    for (int n = 1; n <= N; ++n) {
      a_curves[run.method][n].values.push_back(a_mmd(run.store, n));
    }
  }

  summary.table_path = out_dir + "/table.csv";
  {
    std::ofstream out(summary.table_path);
    if (!out) throw std::runtime_error("cannot write " + summary.table_path);
    out << "method,seeds,a_mmd_mean,a_mmd_std,f_mmd_mean,f_mmd_std,"
           "bwt_mmd_mean,bwt_mmd_std\n";
    for (const auto& [method, metrics] : table) {
      out << method << ',' << metrics.at("a_mmd").values.size();
      for (const char* m : {"a_mmd", "f_mmd", "bwt_mmd"}) {
        out << ',' << io::format_double(metrics.at(m).mean()) << ','
            << io::format_double(metrics.at(m).stddev());
      }
      out << '\n';
    }
  }

  for (const auto& [method, curve] : a_curves) {
    Series s;
    s.label = method;
    for (const auto& [n, agg] : curve) {
      s.x.push_back(n);
      s.y.push_back(agg.mean());
    }
    const std::string path = out_dir + "/a_mmd_" + method + ".svg";
    write_svg_lines({s}, "per-boundary A_MMD: " + method, path);
    summary.plot_paths.push_back(path);
  }

  // Degeneracy traces (one series per adapter norm, plus the forget loss).
  for (const auto& run : runs) {
    if (run.clora_trace.empty()) continue;
    std::size_t max_adapters = 0;
    for (const auto& t : run.clora_trace) {
      max_adapters = std::max(max_adapters, t.adapter_norms.size());
    }
    std::vector<Series> series(max_adapters + 1);
    for (std::size_t a = 0; a < max_adapters; ++a) {
      series[a].label = "|A" + std::to_string(a + 1) + "B" +
                        std::to_string(a + 1) + "|_F";
    }
    series[max_adapters].label = "l_forget";
    double step = 0;
    for (const auto& t : run.clora_trace) {
      for (std::size_t a = 0; a < t.adapter_norms.size(); ++a) {
        series[a].x.push_back(step);
        series[a].y.push_back(t.adapter_norms[a]);
      }
      series[max_adapters].x.push_back(step);
      series[max_adapters].y.push_back(t.l_forget);
      step += 1;
    }
    const std::string path = out_dir + "/clora_degeneracy_seed" +
                             std::to_string(run.seed) + ".svg";
    write_svg_lines(series, "C-LoRA adapter degeneracy (seed " +
                                std::to_string(run.seed) + ")",
                    path);
    summary.plot_paths.push_back(path);
  }
  return summary;
}

}  // namespace cp::report
