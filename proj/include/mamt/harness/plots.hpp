#pragma once

// Renders run archives as SVG line charts with a mean +/- deviation band and
// writes the aggregated numbers next to them as CSV. A run directory either
// holds metrics.jsonl itself or one seed_* subdirectory per seed.

#include "mamt/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace mamt::harness {

struct Band {
  std::string name;
  std::string x_label;
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> dev;  // standard deviation over the pooled samples
};

struct PlotOptions {
  bool log_y = false;
  double y_min = 0.0;  // clamp range, used when clamp_y is set
  double y_max = 0.0;
  bool clamp_y = false;
};

struct PlotReport {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> warnings;
};

inline std::vector<std::filesystem::path> seed_dirs(const std::filesystem::path& run) {
  if (std::filesystem::exists(run / "metrics.jsonl")) return {run};
  std::vector<std::filesystem::path> dirs;
  if (std::filesystem::is_directory(run))
    for (const auto& e : std::filesystem::directory_iterator(run))
      if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0 &&
          std::filesystem::exists(e.path() / "metrics.jsonl"))
        dirs.push_back(e.path());
  if (dirs.empty()) throw std::runtime_error("no metrics.jsonl under " + run.string());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

/// samples[seed][record] is the list of values pooled into one point.
inline Band aggregate(std::string name, std::string x_label, const std::vector<std::vector<double>>& xs,
                      const std::vector<std::vector<std::vector<double>>>& samples) {
  Band b{std::move(name), std::move(x_label), {}, {}, {}};
  std::size_t len = samples.empty() ? 0 : samples.front().size();
  for (const auto& s : samples) len = std::min(len, s.size());
  for (std::size_t k = 0; k < len; ++k) {
    double sum = 0.0, sq = 0.0, x = 0.0;
    long cnt = 0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      x += xs[s][k] / static_cast<double>(samples.size());
      for (double v : samples[s][k]) {
        sum += v;
        sq += v * v;
        ++cnt;
      }
    }
    if (cnt == 0) continue;
    const double m = sum / static_cast<double>(cnt);
    b.x.push_back(x);
    b.mean.push_back(m);
    b.dev.push_back(std::sqrt(std::max(0.0, sq / static_cast<double>(cnt) - m * m)));
  }
  return b;
}

inline void write_band_csv(const std::filesystem::path& path, const Band& b) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10) << b.x_label << ",mean,std\n";
  for (std::size_t k = 0; k < b.x.size(); ++k) out << b.x[k] << ',' << b.mean[k] << ',' << b.dev[k] << '\n';
}

inline void write_band_svg(const std::filesystem::path& path, const Band& b, const PlotOptions& opt = {}) {
  constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  if (b.x.empty()) throw std::invalid_argument("write_band_svg: empty series " + b.name);
  auto ty = [&](double v) {
    if (opt.clamp_y) v = std::clamp(v, opt.y_min, opt.y_max);
    return opt.log_y ? std::log10(std::max(v, 1e-300)) : v;
  };
  double x0 = b.x.front(), x1 = b.x.back();
  double y0 = 0.0, y1 = 0.0;
  if (opt.clamp_y) {
    y0 = ty(opt.y_min);
    y1 = ty(opt.y_max);
  } else {
    y0 = std::numeric_limits<double>::infinity();
    y1 = -y0;
    for (std::size_t k = 0; k < b.x.size(); ++k) {
      y0 = std::min(y0, ty(b.mean[k] - b.dev[k]));
      y1 = std::max(y1, ty(b.mean[k] + b.dev[k]));
    }
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (!(y1 > y0)) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return T + (1.0 - (ty(v) - y0) / (y1 - y0)) * (H - T - B); };

  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << b.name << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0;
    const double lab = opt.log_y ? std::pow(10.0, yv) : yv;
    const double yy = T + (1.0 - k / 4.0) * (H - T - B);
    s << "<text x=\"" << L - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << std::setprecision(3)
      << std::defaultfloat << lab << std::fixed << std::setprecision(2) << "</text>\n";
    const double xv = x0 + (x1 - x0) * k / 4.0;
    s << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << std::setprecision(0) << xv << std::setprecision(2) << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">" << b.x_label
    << "</text>\n";
  s << "<polygon fill=\"steelblue\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
  for (std::size_t k = 0; k < b.x.size(); ++k) s << px(b.x[k]) << ',' << py(b.mean[k] + b.dev[k]) << ' ';
  for (std::size_t k = b.x.size(); k-- > 0;) s << px(b.x[k]) << ',' << py(b.mean[k] - b.dev[k]) << ' ';
  s << "\"/>\n<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (std::size_t k = 0; k < b.x.size(); ++k) s << px(b.x[k]) << ',' << py(b.mean[k]) << ' ';
  s << "\"/>\n</svg>\n";

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << s.str();
}

namespace detail {

/// Per seed: x values and pooled samples taken from `key` in each record.
/// Non-finite values are dropped; `required` series must be present.
template <class Extract>
inline std::optional<Band> collect(const std::vector<std::vector<json>>& runs, const std::string& name,
                                   const std::string& x_key, const std::string& key, bool required, Extract extract) {
  std::vector<std::vector<double>> xs;
  std::vector<std::vector<std::vector<double>>> samples;
  bool any = false;
  for (const auto& recs : runs) {
    xs.emplace_back();
    samples.emplace_back();
    for (const auto& r : recs) {
      if (!r.contains(key)) continue;
      std::vector<double> v;
      extract(r.at(key), v);
      std::erase_if(v, [](double d) { return !std::isfinite(d); });
      if (v.empty()) continue;
      any = true;
      xs.back().push_back(r.value(x_key, 0.0));
      samples.back().push_back(std::move(v));
    }
  }
  if (!any) {
    if (required) throw MissingSeries(name);
    return std::nullopt;
  }
  auto b = aggregate(name, x_key, xs, samples);
  if (b.x.empty()) {
    if (required) throw MissingSeries(name);
    return std::nullopt;
  }
  return b;
}

inline void scalar(const json& j, std::vector<double>& out) { out.push_back(number_or_inf(j, "series")); }

inline void vector_entries(const json& j, std::vector<double>& out) {
  for (const auto& v : j) out.push_back(number_or_inf(v, "series"));
}

inline void off_diagonal(const json& j, std::vector<double>& out) {
  for (std::size_t r = 0; r < j.size(); ++r)
    for (std::size_t c = 0; c < j[r].size(); ++c)
      if (r != c) out.push_back(j[r][c].get<double>());
}

}  // namespace detail

/// Writes reward, policy_kl, d_ns, epsilon and coordination charts (SVG +
/// CSV) into `out` (default: run/plots). Reward and policy KL are required;
/// the other series are skipped with a warning when absent.
inline PlotReport emit_plots(const std::filesystem::path& run, std::filesystem::path out = {}) {
  if (out.empty()) out = run / "plots";
  const auto dirs = seed_dirs(run);
  std::vector<std::vector<json>> metrics, evals;
  for (const auto& d : dirs) {
    metrics.push_back(read_jsonl(d / "metrics.jsonl"));
    if (!std::filesystem::exists(d / "eval.jsonl")) throw MissingSeries("reward");
    evals.push_back(read_jsonl(d / "eval.jsonl"));
  }
  std::filesystem::create_directories(out);
  PlotReport rep;
  auto emit = [&](const std::optional<Band>& b, const std::string& file, const PlotOptions& opt) {
    if (!b) {
      rep.warnings.push_back("series '" + file + "' is empty; plot skipped");
      return;
    }
    write_band_svg(out / (file + ".svg"), *b, opt);
    write_band_csv(out / (file + ".csv"), *b);
    rep.written.push_back(out / (file + ".svg"));
    rep.written.push_back(out / (file + ".csv"));
  };

  emit(detail::collect(evals, "reward", "env_steps", "eval_return", true, detail::scalar), "reward", {});
  emit(detail::collect(metrics, "policy_kl", "update", "policy_kl", true, detail::vector_entries), "policy_kl", {});
  emit(detail::collect(metrics, "d_ns", "update", "d_ns_system", false, detail::scalar), "d_ns", {});
  emit(detail::collect(metrics, "epsilon", "update", "epsilon", false, detail::vector_entries), "epsilon",
       PlotOptions{true, 0.01, 100.0, true});
  emit(detail::collect(metrics, "coordination", "update", "coord_post", false, detail::off_diagonal), "coordination", {});
  return rep;
}

}  // namespace mamt::harness
