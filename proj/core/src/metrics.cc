#include "eqprop/metrics.h"

#include <cstdio>

#include "eqprop/errors.h"

namespace eqprop {

std::string format_metrics_row(const MetricsRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.6f", r.epoch, r.train_error_rate, r.val_error_rate,
                r.mean_energy, r.mean_cost, r.wall_seconds);
  return buf;
}

CsvMetricsSink::CsvMetricsSink(const std::filesystem::path& path, bool append) : path_(path) {
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out_) throw IoError("cannot open metrics file " + path.string());
  if (fresh) {
    out_ << kMetricsHeader << '\n';
    out_.flush();
  }
  if (!out_) throw IoError("error writing metrics file " + path.string());
}

void CsvMetricsSink::record(const MetricsRecord& record) {
  out_ << format_metrics_row(record) << '\n';
  out_.flush();
  if (!out_) throw IoError("error writing metrics file " + path_.string());
}

}  // namespace eqprop
