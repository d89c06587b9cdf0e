#include "eat/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "eat/errors.hpp"

namespace eat {
namespace {

struct Split {
  std::vector<double> ood;  // descending
  std::vector<double> in;   // descending
};

Split split_scores(std::span<const ScoreRecord> records) {
  Split s;
  for (const auto& r : records) {
    if (!std::isfinite(r.score)) throw NumericDomainError("non-finite score in records");
    (r.is_ood ? s.ood : s.in).push_back(r.score);
  }
  std::sort(s.ood.begin(), s.ood.end(), std::greater<>());
  std::sort(s.in.begin(), s.in.end(), std::greater<>());
  return s;
}

void require_both(const Split& s, const char* metric) {
  if (s.ood.empty() || s.in.empty()) {
    throw UndefinedMetric(std::string(metric) + " needs at least one OOD and one inlier record");
  }
}

bool is_correct(const ScoreRecord& r) {
  if (!r.predicted || !r.true_class) {
    throw ContractViolation("inlier record " + std::to_string(r.id) +
                            " lacks a prediction or true class");
  }
  return *r.predicted == *r.true_class;
}

// Accuracy over inliers with score < threshold (all inliers when threshold is +inf).
double accuracy_below(std::span<const ScoreRecord> records, double threshold, const char* metric) {
  std::size_t kept = 0, correct = 0;
  for (const auto& r : records) {
    if (r.is_ood || !(r.score < threshold)) continue;
    ++kept;
    correct += is_correct(r);
  }
  if (kept == 0) throw UndefinedMetric(std::string(metric) + ": no inlier remains below threshold");
  return static_cast<double>(correct) / static_cast<double>(kept);
}

}  // namespace

double auroc(std::span<const ScoreRecord> records) {
  auto s = split_scores(records);
  require_both(s, "AUROC");
  // Descending sweep over tied groups; the trapezoid of each group contributes
  // fp_g * (2 * tp_before + tp_g) in units of 1 / (2 * N_in * N_out).
  std::size_t i = 0, j = 0;
  long long tp = 0;
  long double area = 0;
  while (i < s.ood.size() || j < s.in.size()) {
    double t = -INFINITY;
    if (i < s.ood.size()) t = s.ood[i];
    if (j < s.in.size()) t = std::max(t, s.in[j]);
    long long tp_g = 0, fp_g = 0;
    while (i < s.ood.size() && s.ood[i] == t) ++i, ++tp_g;
    while (j < s.in.size() && s.in[j] == t) ++j, ++fp_g;
    area += static_cast<long double>(fp_g) * static_cast<long double>(2 * tp + tp_g);
    tp += tp_g;
  }
  return static_cast<double>(area / (2.0L * static_cast<long double>(s.ood.size()) *
                                     static_cast<long double>(s.in.size())));
}

double aupr(std::span<const ScoreRecord> records) {
  auto s = split_scores(records);
  require_both(s, "AUPR");
  const double n_out = static_cast<double>(s.ood.size());
  std::size_t i = 0, j = 0;
  double ap = 0.0;
  while (i < s.ood.size() || j < s.in.size()) {
    double t = -INFINITY;
    if (i < s.ood.size()) t = s.ood[i];
    if (j < s.in.size()) t = std::max(t, s.in[j]);
    std::size_t tp_g = 0;
    while (i < s.ood.size() && s.ood[i] == t) ++i, ++tp_g;
    while (j < s.in.size() && s.in[j] == t) ++j;
    if (tp_g > 0) {
      const double precision = static_cast<double>(i) / static_cast<double>(i + j);
      ap += precision * (static_cast<double>(tp_g) / n_out);
    }
  }
  return ap;
}

double threshold_at_tpr(std::span<const ScoreRecord> records, double tpr) {
  if (!(tpr > 0.0 && tpr <= 1.0)) throw ConfigError("TPR operating point must lie in (0, 1]");
  auto s = split_scores(records);
  require_both(s, "FPR@TPR");
  const std::size_t n = s.ood.size();
  const double nd = static_cast<double>(n);
  // Smallest r with r / n >= tpr.
  auto r = static_cast<std::size_t>(std::ceil(tpr * nd));
  r = std::clamp<std::size_t>(r, 1, n);
  while (r > 1 && static_cast<double>(r - 1) / nd >= tpr) --r;
  while (r < n && static_cast<double>(r) / nd < tpr) ++r;
  return s.ood[r - 1];
}

double fpr_at_tpr(std::span<const ScoreRecord> records, double tpr) {
  const double t = threshold_at_tpr(records, tpr);
  std::size_t flagged = 0, n_in = 0;
  for (const auto& r : records) {
    if (r.is_ood) continue;
    ++n_in;
    flagged += r.score >= t;
  }
  return static_cast<double>(flagged) / static_cast<double>(n_in);
}

double acc_at_tpr(std::span<const ScoreRecord> records, double tpr) {
  return accuracy_below(records, threshold_at_tpr(records, tpr), "ACC@TPR");
}

double acc_at_fpr(std::span<const ScoreRecord> records, double fpr) {
  if (!(fpr >= 0.0 && fpr < 1.0)) throw ConfigError("FPR operating point must lie in [0, 1)");
  auto s = split_scores(records);
  if (s.in.empty()) throw UndefinedMetric("ACC@FPR needs at least one inlier record");
  const double n = static_cast<double>(s.in.size());
  // Walk tied groups from the top; stop before a group that would push FPR above fpr.
  double threshold = INFINITY;
  std::size_t flagged = 0;
  while (flagged < s.in.size()) {
    const double t = s.in[flagged];
    std::size_t next = flagged;
    while (next < s.in.size() && s.in[next] == t) ++next;
    if (static_cast<double>(next) / n > fpr) break;
    threshold = t;
    flagged = next;
  }
  return accuracy_below(records, threshold, "ACC@FPR");
}

double inlier_accuracy(std::span<const ScoreRecord> records) {
  return accuracy_below(records, INFINITY, "ACC");
}

long long n_correct(long long n, double fpr95, double acc95) {
  if (!(fpr95 >= 0.0 && fpr95 <= 1.0 && acc95 >= 0.0 && acc95 <= 1.0)) {
    throw ContractViolation("n_correct: rates must lie in [0, 1]");
  }
  return std::llround(static_cast<double>(n) * (1.0 - fpr95) * acc95);
}

std::string percent_label(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", fraction * 100.0);
  return buf;
}

MetricsReport compute_report(std::span<const ScoreRecord> records, const OperatingPoints& points) {
  MetricsReport rep;
  for (const auto& r : records) (r.is_ood ? rep.n_out : rep.n_in) += 1;
  rep.auroc = auroc(records);
  rep.aupr = aupr(records);
  auto optional_metric = [](auto&& fn) -> std::optional<double> {
    try {
      return fn();
    } catch (const UndefinedMetric&) {
      return std::nullopt;
    }
  };
  for (double t : points.tpr) {
    rep.fpr_at_tpr[t] = fpr_at_tpr(records, t);
    rep.acc_at_tpr[t] = optional_metric([&] { return acc_at_tpr(records, t); });
  }
  for (double f : points.fpr) {
    rep.acc_at_fpr[f] = optional_metric([&] { return acc_at_fpr(records, f); });
  }
  rep.fpr95 = fpr_at_tpr(records, 0.95);
  rep.acc95 = optional_metric([&] { return acc_at_tpr(records, 0.95); });
  if (rep.acc95) {
    rep.n_correct = n_correct(static_cast<long long>(rep.n_in), *rep.fpr95, *rep.acc95);
  }
  return rep;
}

std::vector<std::pair<std::string, std::string>> MetricsReport::entries() const {
  auto num = [](std::optional<double> v) { return v ? format_double(*v) : std::string("nan"); };
  std::vector<std::pair<std::string, std::string>> e;
  e.emplace_back("auroc", num(auroc));
  e.emplace_back("aupr", num(aupr));
  for (const auto& [t, v] : fpr_at_tpr) e.emplace_back("fpr_at_tpr" + percent_label(t), num(v));
  for (const auto& [t, v] : acc_at_tpr) e.emplace_back("acc_at_tpr" + percent_label(t), num(v));
  for (const auto& [f, v] : acc_at_fpr) e.emplace_back("acc_at_fpr" + percent_label(f), num(v));
  e.emplace_back("fpr95", num(fpr95));
  e.emplace_back("one_minus_fpr95", num(fpr95 ? std::optional<double>(1.0 - *fpr95) : std::nullopt));
  e.emplace_back("acc95", num(acc95));
  e.emplace_back("n_correct", n_correct ? std::to_string(*n_correct) : std::string("nan"));
  e.emplace_back("n_in", std::to_string(n_in));
  e.emplace_back("n_out", std::to_string(n_out));
  return e;
}

std::string MetricsReport::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : entries()) {
    if (v == "nan") {
      j[k] = nullptr;
    } else if (k == "n_correct" || k == "n_in" || k == "n_out") {
      j[k] = std::stoll(v);
    } else {
      j[k] = std::strtod(v.c_str(), nullptr);
    }
  }
  return j.dump(2) + "\n";
}

std::string scores_to_csv(std::span<const ScoreRecord> records) {
  std::string out = "id,is_ood,score,pred,label\n";
  for (const auto& r : records) {
    out += std::to_string(r.id) + ',' + (r.is_ood ? "1" : "0") + ',' + format_double(r.score) + ',';
    if (r.predicted) out += std::to_string(*r.predicted);
    out += ',';
    if (r.true_class) out += std::to_string(*r.true_class);
    out += '\n';
  }
  return out;
}

namespace {

std::optional<long long> parse_optional_int(const std::string& cell, std::size_t line) {
  if (cell.empty()) return std::nullopt;
  long long v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError("non-integer cell '" + cell + "'", line);
  }
  return v;
}

}  // namespace

std::vector<ScoreRecord> scores_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,is_ood,score,pred,label") {
    throw ParseError("missing header (expected id,is_ood,score,pred,label)", 1);
  }
  std::vector<ScoreRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() != 5) {
      throw ParseError("expected 5 columns, found " + std::to_string(cells.size()), line_no);
    }
    ScoreRecord r;
    const auto id = parse_optional_int(cells[0], line_no);
    if (!id) throw ParseError("missing id", line_no);
    r.id = *id;
    if (cells[1] != "0" && cells[1] != "1") throw ParseError("is_ood must be 0 or 1", line_no);
    r.is_ood = cells[1] == "1";
    char* end = nullptr;
    r.score = std::strtod(cells[2].c_str(), &end);
    if (cells[2].empty() || end != cells[2].c_str() + cells[2].size()) {
      throw ParseError("non-numeric score '" + cells[2] + "'", line_no);
    }
    if (auto p = parse_optional_int(cells[3], line_no)) r.predicted = static_cast<int>(*p);
    if (auto y = parse_optional_int(cells[4], line_no)) r.true_class = static_cast<int>(*y);
    if (!r.is_ood && (!r.predicted || !r.true_class)) {
      throw ParseError("inlier rows need pred and label", line_no);
    }
    records.push_back(r);
  }
  return records;
}

void write_scores_csv(std::span<const ScoreRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << scores_to_csv(records);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ScoreRecord> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return scores_from_csv(buf.str());
}

}  // namespace eat
