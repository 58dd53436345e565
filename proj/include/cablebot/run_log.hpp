#pragma once

#include "cablebot/runtime.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cablebot {

inline constexpr const char* kRunLogSchema = "cablebot-runlog v1";

/// Time-series record of a run: one numeric row per logged tick plus a
/// free-text event column.
struct RunLog {
  std::string scenario;
  std::string config_hash;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> events;  ///< one entry per row, "" when nothing happened

  /// Throws MissingColumn.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  std::vector<double> series(const std::string& name) const;

  std::string to_csv() const;
  void write(const std::filesystem::path& path) const;
  /// Validates the schema line. Throws ConfigError on a malformed log.
  static RunLog parse(const std::string& text);
  static RunLog read(const std::filesystem::path& path);
};

/// Column names produced by log_row, in order.
std::vector<std::string> runlog_columns();
std::vector<double> log_row(const Runtime& runtime);

/// Writes one CSV per figure panel into `out_dir` and returns their paths.
/// Throws MissingColumn when the log lacks a required series.
std::vector<std::filesystem::path> emit_plots(const RunLog& log, const std::filesystem::path& out_dir);

}  // namespace cablebot
