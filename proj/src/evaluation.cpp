#include "uqf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "uqf/error.hpp"
#include "uqf/model_io.hpp"

namespace uqf {

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::pcs:
      return "pcs";
    case Metric::vr:
      return "vr";
    case Metric::vro:
      return "vro";
    case Metric::pe:
      return "pe";
    case Metric::mi:
      return "mi";
  }
  return "pcs";
}

double metric_value(const UncertaintyProfile& p, Metric m) {
  switch (m) {
    case Metric::pcs:
      return p.pcs;
    case Metric::vr:
      return p.vr;
    case Metric::vro:
      return p.vro;
    case Metric::pe:
      return p.pe;
    case Metric::mi:
      return p.mi;
  }
  return 0.0;
}

double detection_score(const UncertaintyProfile& p, Metric m) {
  return m == Metric::pcs ? -p.pcs : metric_value(p, m);
}

double auc_roc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw ConfigError("AUC needs non-empty positive and negative sets");
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(positives.size() + negatives.size());
  for (double s : positives) all.push_back({s, true});
  for (double s : negatives) all.push_back({s, false});
  for (const auto& s : all) {
    if (!std::isfinite(s.score)) throw NumericError("AUC scores must be finite");
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });

  // Twice the Mann-Whitney U in exact integer arithmetic.
  unsigned long long twice_u = 0;
  unsigned long long negatives_below = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    unsigned long long pos = 0, neg = 0;
    for (; j < all.size() && all[j].score == all[i].score; ++j) (all[j].positive ? pos : neg) += 1;
    twice_u += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives.size()) *
                                         static_cast<double>(negatives.size()));
}

std::vector<MetricAuc> metric_aucs(std::span<const UncertaintyProfile> benign,
                                   std::span<const UncertaintyProfile> adversarial) {
  std::vector<MetricAuc> out;
  for (Metric m : kAllMetrics) {
    std::vector<double> pos, neg;
    for (const auto& p : adversarial) pos.push_back(detection_score(p, m));
    for (const auto& p : benign) neg.push_back(detection_score(p, m));
    out.push_back({m, auc_roc(pos, neg)});
  }
  return out;
}

std::vector<SummaryRow> summarize(std::span<const ProfileGroup> groups) {
  std::vector<SummaryRow> rows;
  for (const auto& g : groups) {
    if (g.profiles.empty()) throw ConfigError("summary group '" + g.name + "' is empty");
    SummaryRow row;
    row.group = g.name;
    row.count = g.profiles.size();
    // Welford's update per metric.
    for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
      double mean = 0.0, m2 = 0.0;
      std::size_t n = 0;
      for (const auto& p : g.profiles) {
        const double x = metric_value(p, kAllMetrics[k]);
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
      }
      row.mean[k] = mean;
      row.variance[k] = std::max(0.0, m2 / static_cast<double>(n));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

UncertaintyProfile ReportRow::profile() const {
  UncertaintyProfile p;
  p.pcs = pcs;
  p.vr = vr;
  p.vro = vro;
  p.pe = pe;
  p.mi = mi;
  p.original_label = label_pred;
  return p;
}

ReportRow make_report_row(std::string id, std::string group, std::size_t label_true, const UncertaintyProfile& p,
                          const PatternThresholds& thresholds) {
  ReportRow r;
  r.id = std::move(id);
  r.group = std::move(group);
  r.label_true = label_true;
  r.label_pred = p.original_label;
  r.is_adversarial = p.original_label != label_true;
  r.pcs = p.pcs;
  r.vr = p.vr;
  r.vro = p.vro;
  r.pe = p.pe;
  r.mi = p.mi;
  r.pattern = categorize(p, thresholds);
  return r;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void check_cell(const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) {
    throw ConfigError("report text field contains a separator: '" + s + "'");
  }
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

double parse_real(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw FormatError("report line " + std::to_string(line) + ": bad number '" + s + "'", 0);
  }
  return v;
}

std::size_t parse_index(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw FormatError("report line " + std::to_string(line) + ": bad integer '" + s + "'", 0);
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string report_csv(std::span<const ReportRow> rows) {
  std::string out(kReportHeader);
  out += '\n';
  for (const auto& r : rows) {
    check_cell(r.id);
    check_cell(r.group);
    out += r.id + ',' + r.group + ',' + std::to_string(r.label_true) + ',' + std::to_string(r.label_pred) + ',' +
           (r.is_adversarial ? "1" : "0") + ',' + format_real(r.pcs) + ',' + format_real(r.vr) + ',' +
           format_real(r.vro) + ',' + format_real(r.pe) + ',' + format_real(r.mi) + ',' +
           std::string(pattern_name(r.pattern)) + '\n';
  }
  return out;
}

void emit_report(std::span<const ReportRow> rows, const std::filesystem::path& path) {
  write_file_atomic(path, report_csv(rows));
}

std::vector<ReportRow> parse_report(std::string_view text) {
  std::vector<ReportRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != kReportHeader) throw FormatError("report header mismatch, expected '" + std::string(kReportHeader) + "'", 0);
      continue;
    }
    if (line.empty()) continue;
    const auto c = split_line(line);
    if (c.size() != 11) throw FormatError("report line " + std::to_string(line_no) + ": expected 11 columns", 0);
    ReportRow r;
    r.id = c[0];
    r.group = c[1];
    r.label_true = parse_index(c[2], line_no);
    r.label_pred = parse_index(c[3], line_no);
    r.is_adversarial = c[4] == "1";
    r.pcs = parse_real(c[5], line_no);
    r.vr = parse_real(c[6], line_no);
    r.vro = parse_real(c[7], line_no);
    r.pe = parse_real(c[8], line_no);
    r.mi = parse_real(c[9], line_no);
    const auto pat = parse_pattern(c[10]);
    if (!pat) throw FormatError("report line " + std::to_string(line_no) + ": unknown pattern '" + c[10] + "'", 0);
    r.pattern = *pat;
    rows.push_back(std::move(r));
  }
  if (line_no == 0) throw FormatError("report is empty", 0);
  return rows;
}

std::vector<ReportRow> read_report(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_report(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string summary_csv(std::span<const SummaryRow> rows) {
  std::string out(kSummaryHeader);
  out += '\n';
  for (const auto& r : rows) {
    check_cell(r.group);
    out += r.group + ',' + std::to_string(r.count);
    for (std::size_t k = 0; k < kAllMetrics.size(); ++k) out += ',' + format_real(r.mean[k]) + ',' + format_real(r.variance[k]);
    out += '\n';
  }
  return out;
}

void emit_summary(std::span<const SummaryRow> rows, const std::filesystem::path& path) {
  write_file_atomic(path, summary_csv(rows));
}

std::string auc_csv(std::span<const MetricAuc> aucs, std::size_t n_adversarial, std::size_t n_benign) {
  std::string out(kAucHeader);
  out += '\n';
  for (const auto& a : aucs) {
    out += std::string(metric_name(a.metric)) + ',' + format_real(a.auc) + ',' + std::to_string(n_adversarial) + ',' +
           std::to_string(n_benign) + ',' + (a.metric == Metric::pcs ? "negated" : "as_is") + '\n';
  }
  return out;
}

}  // namespace uqf
