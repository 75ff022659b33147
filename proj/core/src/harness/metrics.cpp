#include "caac/harness/metrics.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace caac::harness {

namespace {

std::string Num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double ParseField(const std::string& s, const std::string& path, int line) {
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": malformed number '" + s + "'");
  }
  return x;
}

}  // namespace

double QosGap(const RealMat& utilities, const RealVec& thresholds, int iteration, int batch,
              const RealVec& scales) {
  const Eigen::Index k_users = thresholds.size();
  const Eigen::Index slots = static_cast<Eigen::Index>(batch) * (iteration + 1);
  if (iteration < 0 || batch < 1 || k_users < 1) throw std::invalid_argument("QosGap: bad sizes");
  if (utilities.rows() < slots || utilities.cols() != k_users) {
    throw std::invalid_argument("QosGap: history shorter than B(i+1) or wrong width");
  }
  if (scales.size() != 0 && scales.size() != k_users) {
    throw std::invalid_argument("QosGap: scales size mismatch");
  }
  double total = 0.0;
  for (Eigen::Index t = 0; t < slots; ++t) {
    for (Eigen::Index k = 0; k < k_users; ++k) {
      const double gap = std::max(utilities(t, k) - thresholds(k), 0.0);
      total += scales.size() ? gap / scales(k) : gap;
    }
  }
  return total / static_cast<double>(k_users * slots);
}

QosGapTracker::QosGapTracker(RealVec thresholds, RealVec scales)
    : thresholds_(std::move(thresholds)), scales_(std::move(scales)) {
  if (scales_.size() != thresholds_.size()) {
    throw std::invalid_argument("QosGapTracker: scales size mismatch");
  }
}

void QosGapTracker::Add(const RealVec& utilities) {
  if (utilities.size() != thresholds_.size()) {
    throw std::invalid_argument("QosGapTracker: utility vector size mismatch");
  }
  for (Eigen::Index k = 0; k < utilities.size(); ++k) {
    total_ += std::max(utilities(k) - thresholds_(k), 0.0) / scales_(k);
  }
  ++slots_;
}

double QosGapTracker::Value() const {
  if (slots_ == 0) return 0.0;
  return total_ / (static_cast<double>(thresholds_.size()) * static_cast<double>(slots_));
}

std::string CsvHeader(int num_users) {
  std::string h = "iter,avg_power_w,qos_gap";
  for (int k = 0; k <= num_users; ++k) h += ",fhat_" + std::to_string(k);
  h += ",wall_s";
  return h;
}

std::string FormatRow(const MetricsRow& row) {
  std::string s = std::to_string(row.iteration) + "," + Num(row.avg_power_w) + "," + Num(row.qos_gap);
  for (Eigen::Index k = 0; k < row.fhat.size(); ++k) s += "," + Num(row.fhat(k));
  s += "," + Num(row.wall_s);
  return s;
}

std::vector<MetricsRow> ReadMetricsCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  const int num_users = static_cast<int>(header.size()) - 5;
  if (num_users < 1 || line != CsvHeader(num_users)) {
    throw std::runtime_error(path + ": unexpected header");
  }
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != header.size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": wrong field count");
    }
    MetricsRow r;
    r.iteration = static_cast<int>(ParseField(f[0], path, line_no));
    r.avg_power_w = ParseField(f[1], path, line_no);
    r.qos_gap = ParseField(f[2], path, line_no);
    r.fhat.resize(num_users + 1);
    for (int k = 0; k <= num_users; ++k) r.fhat(k) = ParseField(f[3 + k], path, line_no);
    r.wall_s = ParseField(f.back(), path, line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

MetricsWriter::MetricsWriter(const std::string& path, int num_users)
    : out_(path), num_users_(num_users) {
  if (!out_) throw std::runtime_error("cannot write metrics file '" + path + "'");
  out_ << CsvHeader(num_users_) << '\n';
  out_.flush();
}

void MetricsWriter::Append(const MetricsRow& row) {
  if (row.fhat.size() != num_users_ + 1) {
    throw std::invalid_argument("MetricsWriter: fhat length must be K+1");
  }
  out_ << FormatRow(row) << '\n';
  out_.flush();
}

}  // namespace caac::harness
