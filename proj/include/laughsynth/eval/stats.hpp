#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "laughsynth/eval/ratings.hpp"

namespace laughsynth::eval {

/// Recorded alongside every export.
inline constexpr const char* kStdDefinition = "sample (n-1)";
inline constexpr const char* kQuantileDefinition = "linear interpolation between order statistics (type 7)";

struct MethodStats {
  Method method = Method::original;
  std::size_t n_ratings = 0;
  double mos = 0.0;
  /// Sample standard deviation; 0 for a single rating.
  double std = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  std::array<std::size_t, 5> counts{};
  std::array<double, 5> percent{};

  bool operator==(const MethodStats&) const = default;
};

/// One entry per method with ratings, in kMethods order. Methods without
/// ratings are left out (with a warning). Throws EvalError on invalid records.
std::vector<MethodStats> mos_stats(const std::vector<RatingRecord>& records);

/// mos(a) − mos(b) rounded to 2 decimals. Throws EvalError if either is missing.
double mos_gain(const std::vector<MethodStats>& stats, Method a, Method b);

std::array<double, 5> score_distribution(const std::vector<RatingRecord>& records, Method m);

struct BoxplotSummary {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};
BoxplotSummary boxplot_summary(const std::vector<RatingRecord>& records, Method m);

/// Type-7 quantile of sorted data, p in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double p);

/// ‖ref − est‖_F / ‖ref‖_F over the common frames.
double spectral_convergence(const Eigen::MatrixXd& ref_mag, const Eigen::MatrixXd& est_mag);
/// mean |log max(ref, floor) − log max(est, floor)| over the common frames.
double log_mag_distance(const Eigen::MatrixXd& ref_mag, const Eigen::MatrixXd& est_mag, double floor = 1e-7);

enum class ExportFormat { csv, jsonl };
ExportFormat parse_export_format(std::string_view s);

/// Columns: method, n_ratings, mos, std, median, q1, q3, p1..p5.
/// decimals < 0 writes full round-trip precision.
std::string format_results(const std::vector<MethodStats>& stats, ExportFormat format, int decimals = 2);
void export_results(const std::vector<MethodStats>& stats, const std::filesystem::path& path, ExportFormat format,
                    int decimals = 2);
/// Inverse of format_results. Counts are rebuilt from n_ratings and the percentages.
std::vector<MethodStats> parse_results(const std::string& text, ExportFormat format);

/// A rating log for one method with exactly `n` ratings whose mean is the
/// closest achievable to `mean` and whose sample std is close to `std`.
/// Used to stand in for published summaries.
std::vector<RatingRecord> synthesize_ratings(Method m, std::size_t n, double mean, double std,
                                             const std::string& id_prefix = "p");

}  // namespace laughsynth::eval
