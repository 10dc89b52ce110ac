#pragma once

// Serialization (options, option sets, trajectories), CSV emission for the
// documented schemas, minimal SVG line plots, and the Student-t helper used
// by the paired comparison.

#include "opsr/discovery.hpp"
#include "opsr/options.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace opsr {

using nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  long rows = static_cast<long>(j.size());
  long cols = rows ? static_cast<long>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

inline json option_to_json(const OptionDef& o) {
  return json{{"feature_id", o.feature_id},
              {"w_pi", matrix_to_json(o.w_pi)},
              {"b_pi", vector_to_json(o.b_pi)},
              {"w_beta", matrix_to_json(o.w_beta)},
              {"b_beta", vector_to_json(o.b_beta)}};
}

inline OptionDef option_from_json(const json& j) {
  OptionDef o;
  o.feature_id = j.at("feature_id").get<std::string>();
  o.w_pi = matrix_from_json(j.at("w_pi"));
  o.b_pi = vector_from_json(j.at("b_pi"));
  o.w_beta = matrix_from_json(j.at("w_beta"));
  o.b_beta = vector_from_json(j.at("b_beta"));
  return o;
}

inline json option_set_to_json(const ExtendedOptionSet& es) {
  json j;
  j["n_options"] = es.n_options;
  j["n_actions"] = es.n_actions;
  j["options"] = json::array();
  for (const auto& o : es.options) j["options"].push_back(option_to_json(o));
  j["pi_h"] = json::array();
  for (const auto& m : es.pi_h) j["pi_h"].push_back(matrix_to_json(m));
  j["pi_null"] = json::array();
  for (const auto& m : es.pi_null) j["pi_null"].push_back(matrix_to_json(m));
  return j;
}

inline ExtendedOptionSet option_set_from_json(const json& j) {
  ExtendedOptionSet es;
  es.n_options = j.at("n_options").get<int>();
  es.n_actions = j.at("n_actions").get<int>();
  for (const auto& o : j.at("options")) es.options.push_back(option_from_json(o));
  for (const auto& m : j.at("pi_h")) es.pi_h.push_back(matrix_from_json(m));
  for (const auto& m : j.at("pi_null")) es.pi_null.push_back(matrix_from_json(m));
  return es;
}

inline json trajectory_to_json(const Trajectory& t) {
  return json{{"task", t.task},
              {"states", t.states},
              {"actions", t.actions},
              {"rewards", t.rewards}};
}

inline Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.task = j.at("task").get<int>();
  t.states = j.at("states").get<std::vector<int>>();
  t.actions = j.at("actions").get<std::vector<int>>();
  t.rewards = j.at("rewards").get<std::vector<double>>();
  t.check();
  return t;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ----------------------------------------------------------------- stats ---

namespace detail {

inline double gamma_ln(double x) { return std::lgamma(x); }

// regularized incomplete beta by Lentz's continued fraction
inline double beta_cf(double a, double b, double x) {
  const int max_iter = 300;
  const double eps = 3e-14, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_bt = gamma_ln(a + b) - gamma_ln(a) - gamma_ln(b) + a * std::log(x) +
                 b * std::log(1.0 - x);
  double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// one-sided upper tail Pr(T_nu > t) of Student's t
inline double student_t_sf(double t, double nu) {
  double x = nu / (nu + t * t);
  double p = 0.5 * detail::incomplete_beta(nu / 2.0, 0.5, x);
  return t >= 0.0 ? p : 1.0 - p;
}

// one-sided paired t-test p-value for H1: mean(xs - ys) > 0
inline double paired_t_pvalue(const std::vector<double>& xs,
                              const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("paired_t_pvalue: need >= 2 matched pairs");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) mean += xs[i] - ys[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double d = xs[i] - ys[i] - mean;
    ss += d * d;
  }
  double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) return mean > 0.0 ? 0.0 : 1.0;
  double t = mean / (sd / std::sqrt(n));
  return student_t_sf(t, n - 1.0);
}

// ------------------------------------------------------------------- svg ---

// A minimal multi-series line plot with a shaded min/max band per series.
struct PlotSeries {
  std::string label;
  std::vector<double> mean, lo, hi;
};

inline std::string render_svg_plot(const std::vector<PlotSeries>& series,
                                   const std::string& title) {
  const double W = 720, H = 420, ml = 60, mr = 20, mt = 40, mb = 40;
  double ymin = 0, ymax = 1;
  std::size_t n = 0;
  bool first = true;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      double lo = i < s.lo.size() ? s.lo[i] : s.mean[i];
      double hi = i < s.hi.size() ? s.hi[i] : s.mean[i];
      if (first) { ymin = lo; ymax = hi; first = false; }
      ymin = std::min({ymin, lo});
      ymax = std::max({ymax, hi});
      n = std::max(n, s.mean.size());
    }
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto px = [&](std::size_t i) {
    return ml + (n > 1 ? (W - ml - mr) * i / (n - 1) : 0.0);
  };
  auto py = [&](double y) { return H - mb - (H - mt - mb) * (y - ymin) / (ymax - ymin); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
      << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
      << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
  int ci = 0;
  for (const auto& s : series) {
    const char* col = colors[ci++ % 4];
    if (!s.lo.empty() && s.lo.size() == s.mean.size() && s.hi.size() == s.mean.size()) {
      svg << "<polygon fill=\"" << col << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.mean.size(); ++i)
        svg << px(i) << "," << py(s.hi[i]) << " ";
      for (std::size_t i = s.mean.size(); i-- > 0;)
        svg << px(i) << "," << py(s.lo[i]) << " ";
      svg << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.mean.size(); ++i)
      svg << px(i) << "," << py(s.mean[i]) << " ";
    svg << "\"/>\n";
    svg << "<text x=\"" << W - mr - 150 << "\" y=\"" << mt + 16 * ci
        << "\" font-size=\"12\" fill=\"" << col << "\">" << s.label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace opsr
