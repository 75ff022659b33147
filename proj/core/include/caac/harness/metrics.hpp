#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "caac/numkit/linalg.hpp"

namespace caac::harness {

using numkit::RealMat;
using numkit::RealVec;

struct MetricsRow {
  int iteration = 0;
  double avg_power_w = 0.0;  // mean transmit power over the iteration's B slots
  double qos_gap = 0.0;      // cumulative QoS gap up to and including this iteration
  RealVec fhat;              // K+1 recursive estimates (constraints in threshold units)
  double wall_s = 0.0;
};

// QoS_gap(i) = 1/(K B (i+1)) sum_t sum_k [U_{k,t} - c_k]^+ / s_k over the
// first B(i+1) rows of `utilities` (T x K). `scales` defaults to all ones.
// Throws std::invalid_argument when fewer than B(i+1) rows are given.
double QosGap(const RealMat& utilities, const RealVec& thresholds, int iteration, int batch,
              const RealVec& scales = {});

// Running form of QosGap fed one slot at a time.
class QosGapTracker {
 public:
  QosGapTracker(RealVec thresholds, RealVec scales);

  void Add(const RealVec& utilities);
  // Mean positive violation per user-slot so far.
  double Value() const;
  long long slots() const { return slots_; }

 private:
  RealVec thresholds_;
  RealVec scales_;
  double total_ = 0.0;
  long long slots_ = 0;
};

// "iter,avg_power_w,qos_gap,fhat_0,..,fhat_K,wall_s"
std::string CsvHeader(int num_users);
// Numbers printed with 17 significant digits so they parse back exactly.
std::string FormatRow(const MetricsRow& row);
// Parses a full metrics file; throws std::runtime_error on a malformed file.
std::vector<MetricsRow> ReadMetricsCsv(const std::string& path);

// Appends rows to a metrics file, flushing after each.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, int num_users);
  void Append(const MetricsRow& row);

 private:
  std::ofstream out_;
  int num_users_;
};

}  // namespace caac::harness
