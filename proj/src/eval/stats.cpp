#include "laughsynth/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

namespace laughsynth::eval {

namespace {

std::vector<double> scores_of(const std::vector<RatingRecord>& records, Method m) {
  std::vector<double> s;
  for (const auto& r : records)
    if (r.method == m) s.push_back(r.score);
  return s;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

MethodStats summarize(Method m, std::vector<double> s) {
  MethodStats st;
  st.method = m;
  st.n_ratings = s.size();
  std::sort(s.begin(), s.end());
  // two-pass: mean, then squared deviations
  double sum = 0;
  for (double x : s) sum += x;
  const double n = static_cast<double>(s.size());
  st.mos = sum / n;
  double ss = 0;
  for (double x : s) ss += (x - st.mos) * (x - st.mos);
  st.std = s.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  st.median = quantile_sorted(s, 0.5);
  st.q1 = quantile_sorted(s, 0.25);
  st.q3 = quantile_sorted(s, 0.75);
  for (double x : s) ++st.counts[static_cast<std::size_t>(x) - 1];
  for (std::size_t k = 0; k < 5; ++k) st.percent[k] = 100.0 * static_cast<double>(st.counts[k]) / n;
  return st;
}

const std::vector<std::string>& columns() {
  static const std::vector<std::string> c{"method", "n_ratings", "mos", "std", "median", "q1",
                                          "q3",     "p1",        "p2",  "p3",  "p4",     "p5"};
  return c;
}

}  // namespace

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw EvalError("quantile of an empty set");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<MethodStats> mos_stats(const std::vector<RatingRecord>& records) {
  validate_records(records);
  std::vector<MethodStats> out;
  for (Method m : kMethods) {
    auto s = scores_of(records, m);
    if (s.empty()) {
      spdlog::warn("no ratings for method {}; left out of the statistics", to_string(m));
      continue;
    }
    out.push_back(summarize(m, std::move(s)));
  }
  return out;
}

double mos_gain(const std::vector<MethodStats>& stats, Method a, Method b) {
  auto find = [&](Method m) {
    auto it = std::find_if(stats.begin(), stats.end(), [&](const MethodStats& s) { return s.method == m; });
    if (it == stats.end()) throw EvalError(fmt::format("no statistics for method {}", to_string(m)));
    return it->mos;
  };
  const double g = round2(find(a) - find(b));
  return g == 0.0 ? 0.0 : g;  // no -0
}

std::array<double, 5> score_distribution(const std::vector<RatingRecord>& records, Method m) {
  auto s = scores_of(records, m);
  if (s.empty()) throw EvalError(fmt::format("no ratings for method {}", to_string(m)));
  return summarize(m, std::move(s)).percent;
}

BoxplotSummary boxplot_summary(const std::vector<RatingRecord>& records, Method m) {
  auto s = scores_of(records, m);
  if (s.empty()) throw EvalError(fmt::format("no ratings for method {}", to_string(m)));
  const MethodStats st = summarize(m, s);
  std::sort(s.begin(), s.end());
  return {s.front(), st.q1, st.median, st.q3, s.back(), st.mos};
}

double spectral_convergence(const Eigen::MatrixXd& ref, const Eigen::MatrixXd& est) {
  if (ref.rows() != est.rows())
    throw EvalError(fmt::format("spectrograms have {} and {} bins", ref.rows(), est.rows()));
  const Eigen::Index f = std::min(ref.cols(), est.cols());
  const double denom = ref.leftCols(f).norm();
  if (denom == 0.0) throw EvalError("spectral convergence: reference has zero norm");
  return (ref.leftCols(f) - est.leftCols(f)).norm() / denom;
}

double log_mag_distance(const Eigen::MatrixXd& ref, const Eigen::MatrixXd& est, double floor) {
  if (ref.rows() != est.rows())
    throw EvalError(fmt::format("spectrograms have {} and {} bins", ref.rows(), est.rows()));
  const Eigen::Index f = std::min(ref.cols(), est.cols());
  if (f == 0 || ref.rows() == 0) throw EvalError("log magnitude distance: no common frames");
  const Eigen::ArrayXXd a = ref.leftCols(f).array().max(floor).log();
  const Eigen::ArrayXXd b = est.leftCols(f).array().max(floor).log();
  return (a - b).abs().mean();
}

ExportFormat parse_export_format(std::string_view s) {
  if (s == "csv") return ExportFormat::csv;
  if (s == "jsonl") return ExportFormat::jsonl;
  throw EvalError(fmt::format("unknown export format '{}' (csv or jsonl)", s));
}

std::string format_results(const std::vector<MethodStats>& stats, ExportFormat format, int decimals) {
  auto f = [&](double x) { return decimals < 0 ? fmt::format("{}", x) : fmt::format("{:.{}f}", x, decimals); };
  std::string out;
  if (format == ExportFormat::csv) {
    out += fmt::format("# std: {}; quantiles: {}\n", kStdDefinition, kQuantileDefinition);
    out += fmt::format("{}\n", fmt::join(columns(), ","));
    for (const auto& s : stats) {
      out += fmt::format("{},{},{},{},{},{},{}", to_string(s.method), s.n_ratings, f(s.mos), f(s.std), f(s.median),
                         f(s.q1), f(s.q3));
      for (double p : s.percent) out += "," + f(p);
      out += "\n";
    }
    return out;
  }
  nlohmann::ordered_json meta;
  meta["record"] = "meta";
  meta["std"] = kStdDefinition;
  meta["quantiles"] = kQuantileDefinition;
  meta["columns"] = columns();
  out += meta.dump() + "\n";
  for (const auto& s : stats) {
    // numbers go through the same formatting as CSV, then back to JSON numbers
    nlohmann::ordered_json j;
    j["method"] = to_string(s.method);
    j["n_ratings"] = s.n_ratings;
    j["mos"] = std::stod(f(s.mos));
    j["std"] = std::stod(f(s.std));
    j["median"] = std::stod(f(s.median));
    j["q1"] = std::stod(f(s.q1));
    j["q3"] = std::stod(f(s.q3));
    for (std::size_t k = 0; k < 5; ++k) j[fmt::format("p{}", k + 1)] = std::stod(f(s.percent[k]));
    out += j.dump() + "\n";
  }
  return out;
}

void export_results(const std::vector<MethodStats>& stats, const std::filesystem::path& path, ExportFormat format,
                    int decimals) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw EvalError("cannot write " + path.string());
  out << format_results(stats, format, decimals);
  if (!out.flush()) throw EvalError("write failed: " + path.string());
}

std::vector<MethodStats> parse_results(const std::string& text, ExportFormat format) {
  std::vector<MethodStats> out;
  std::istringstream in(text);
  std::string line;
  auto finish = [](MethodStats& s) {
    for (std::size_t k = 0; k < 5; ++k)
      s.counts[k] = static_cast<std::size_t>(std::llround(s.percent[k] * static_cast<double>(s.n_ratings) / 100.0));
  };
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    MethodStats s;
    if (format == ExportFormat::csv) {
      if (!header_seen) {
        header_seen = true;
        continue;
      }
      std::vector<std::string> cells;
      std::istringstream row(line);
      for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
      if (cells.size() != columns().size())
        throw EvalError(fmt::format("results row has {} cells, expected {}", cells.size(), columns().size()));
      s.method = parse_method(cells[0]);
      s.n_ratings = std::stoull(cells[1]);
      s.mos = std::stod(cells[2]);
      s.std = std::stod(cells[3]);
      s.median = std::stod(cells[4]);
      s.q1 = std::stod(cells[5]);
      s.q3 = std::stod(cells[6]);
      for (std::size_t k = 0; k < 5; ++k) s.percent[k] = std::stod(cells[7 + k]);
    } else {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("record")) continue;
      s.method = parse_method(j.at("method").get<std::string>());
      s.n_ratings = j.at("n_ratings").get<std::size_t>();
      s.mos = j.at("mos").get<double>();
      s.std = j.at("std").get<double>();
      s.median = j.at("median").get<double>();
      s.q1 = j.at("q1").get<double>();
      s.q3 = j.at("q3").get<double>();
      for (std::size_t k = 0; k < 5; ++k) s.percent[k] = j.at(fmt::format("p{}", k + 1)).get<double>();
    }
    finish(s);
    out.push_back(s);
  }
  return out;
}

std::vector<RatingRecord> synthesize_ratings(Method m, std::size_t n, double mean, double std,
                                             const std::string& id_prefix) {
  if (n == 0) throw EvalError("synthesize_ratings: n must be positive");
  if (mean < 1.0 || mean > 5.0) throw EvalError("synthesize_ratings: mean outside [1, 5]");
  const auto total = static_cast<long>(std::llround(mean * static_cast<double>(n)));
  // least-spread multiset with that total
  std::array<long, 5> c{};
  const long base = total / static_cast<long>(n), rem = total % static_cast<long>(n);
  c[static_cast<std::size_t>(base - 1)] = static_cast<long>(n) - rem;
  if (rem) c[static_cast<std::size_t>(base)] = rem;

  auto sd = [&](const std::array<long, 5>& k) {
    if (n < 2) return 0.0;
    double sq = 0;
    for (std::size_t v = 0; v < 5; ++v) sq += static_cast<double>(k[v]) * static_cast<double>((v + 1) * (v + 1));
    const double nn = static_cast<double>(n), t = static_cast<double>(total);
    return std::sqrt(std::max(0.0, (sq - t * t / nn) / (nn - 1)));
  };
  // spread greedily: move one rating down and one up, keeping the total
  for (;;) {
    const double cur = std::abs(sd(c) - std);
    double best = cur;
    std::array<long, 5> best_c = c;
    for (std::size_t a = 1; a < 5; ++a)
      for (std::size_t b = 0; b < 4; ++b) {
        std::array<long, 5> k = c;
        if (--k[a] < 0 || --k[b] < 0) continue;
        ++k[a - 1];
        ++k[b + 1];
        const double d = std::abs(sd(k) - std);
        if (d < best - 1e-15) {
          best = d;
          best_c = k;
        }
      }
    if (best_c == c) break;
    c = best_c;
  }

  std::vector<RatingRecord> out;
  out.reserve(n);
  std::size_t i = 0;
  for (int v = 1; v <= 5; ++v)
    for (long j = 0; j < c[static_cast<std::size_t>(v - 1)]; ++j, ++i) {
      RatingRecord r;
      r.participant = fmt::format("{}{:02}", id_prefix, i % 24);
      r.session = r.participant;
      r.sample = fmt::format("{}-{:03}", to_string(m), i / 24);
      r.method = m;
      r.score = v;
      r.timestamp_ms = static_cast<std::int64_t>(i);
      out.push_back(std::move(r));
    }
  return out;
}

}  // namespace laughsynth::eval
