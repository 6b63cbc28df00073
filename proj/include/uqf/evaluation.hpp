#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uqf/uncertainty.hpp"

namespace uqf {

enum class Metric { pcs, vr, vro, pe, mi };
inline constexpr std::array<Metric, 5> kAllMetrics{Metric::pcs, Metric::vr, Metric::vro, Metric::pe, Metric::mi};

std::string_view metric_name(Metric m);
double metric_value(const UncertaintyProfile& p, Metric m);
/// Detection score, higher = more likely adversarial. PCS is negated; the others are used as-is.
double detection_score(const UncertaintyProfile& p, Metric m);

/// Mann-Whitney AUC: (#pairs pos > neg + 0.5 #ties) / (|pos| |neg|), by one sort sweep.
double auc_roc(std::span<const double> positives, std::span<const double> negatives);

struct MetricAuc {
  Metric metric;
  double auc;
};

/// AUC of each metric's detection score, adversarial as the positive class.
std::vector<MetricAuc> metric_aucs(std::span<const UncertaintyProfile> benign,
                                   std::span<const UncertaintyProfile> adversarial);

struct SummaryRow {
  std::string group;
  std::size_t count = 0;
  std::array<double, 5> mean{};
  std::array<double, 5> variance{};  // population variance, in kAllMetrics order
};

struct ProfileGroup {
  std::string name;
  std::vector<UncertaintyProfile> profiles;
};

/// Per-group mean and population variance of every metric.
std::vector<SummaryRow> summarize(std::span<const ProfileGroup> groups);

/// One row of the per-input metrics report.
struct ReportRow {
  std::string id;
  std::string group;
  std::size_t label_true = 0;
  std::size_t label_pred = 0;
  bool is_adversarial = false;
  double pcs = 0.0;
  double vr = 0.0;
  double vro = 0.0;
  double pe = 0.0;
  double mi = 0.0;
  PatternLabel pattern = PatternLabel::MID;

  UncertaintyProfile profile() const;
};

inline constexpr std::string_view kReportHeader = "id,group,label_true,label_pred,is_adversarial,pcs,vr,vro,pe,mi,pattern";
inline constexpr std::string_view kSummaryHeader =
    "group,n,pcs_mean,pcs_var_pop,vr_mean,vr_var_pop,vro_mean,vro_var_pop,pe_mean,pe_var_pop,mi_mean,mi_var_pop";
inline constexpr std::string_view kAucHeader = "metric,auc,n_adversarial,n_benign,score_orientation";

ReportRow make_report_row(std::string id, std::string group, std::size_t label_true, const UncertaintyProfile& p,
                          const PatternThresholds& thresholds);

/// Reals are printed with 17 significant digits so they parse back exactly.
std::string format_real(double v);

std::string report_csv(std::span<const ReportRow> rows);
void emit_report(std::span<const ReportRow> rows, const std::filesystem::path& path);
std::vector<ReportRow> read_report(const std::filesystem::path& path);
std::vector<ReportRow> parse_report(std::string_view text);

std::string summary_csv(std::span<const SummaryRow> rows);
void emit_summary(std::span<const SummaryRow> rows, const std::filesystem::path& path);

std::string auc_csv(std::span<const MetricAuc> aucs, std::size_t n_adversarial, std::size_t n_benign);

}  // namespace uqf
