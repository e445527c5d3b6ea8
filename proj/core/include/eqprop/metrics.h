#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "eqprop/train.h"

namespace eqprop {

inline constexpr const char* kMetricsHeader = "epoch,train_error,val_error,mean_energy,mean_cost,wall_seconds";

// One CSV line per record, no trailing newline. Reals use 17 significant
// digits so values round-trip.
std::string format_metrics_row(const MetricsRecord& record);

// Appends rows to a CSV file, writing the header first when the file is new
// or empty. Rows are flushed as they arrive.
class CsvMetricsSink final : public MetricsSink {
 public:
  explicit CsvMetricsSink(const std::filesystem::path& path, bool append = false);
  void record(const MetricsRecord& record) override;

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace eqprop
