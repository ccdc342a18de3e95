#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hkc/backtest.hpp"
#include "hkc/estimation.hpp"
#include "hkc/model.hpp"

namespace hkc {

/// Numeric table with a header row.
struct Dataset {
  std::vector<std::string> header;
  RowMatrix values;
};

/// Comma-separated, header first, decimal point, no quoting. Every problem is
/// reported as an InputError naming the file, line and column.
Dataset read_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text, const std::string& source = "<input>");
std::string format_csv(const std::vector<std::string>& header, const RowMatrix& values);

/// Shortest decimal representation that reads back to the same double.
std::string format_number(double x);

/// Writes through a temporary file in the same directory followed by a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

inline constexpr const char* kModelFormat = "hkc-model/1";
inline constexpr const char* kReportFormat = "hkc-report/1";
inline constexpr const char* kBacktestFormat = "hkc-backtest/1";

/// Declarative model: a flat node list naming a root, each node with a family,
/// optional parameters and either child node names or column names.
struct ModelConfig {
  HierarchicalModel model;
  std::uint64_t seed = 0;
  std::size_t kendall_mc = 100000;
  ToleranceRule epsilon{};
  /// Every node with more than one argument states its parameters.
  bool fully_parameterized = true;
};

/// Parses a model config, or the "model" section of a fit report. Column names
/// resolve against `columns` when given (a data header), else against the
/// config's own "variables" list. Kendall functions are not yet prepared.
ModelConfig parse_model_config(const std::string& json_text, const std::vector<std::string>& columns = {},
                               const std::string& source = "<config>");
ModelConfig read_model_config(const std::filesystem::path& path, const std::vector<std::string>& columns = {});

/// Serializes a model (with all parameters) in the config schema.
std::string model_config_json(const ModelConfig& config, int indent = 2);

struct FitReportInfo {
  std::string method;
  std::string kendall_mode;
  bool pseudo_observations = true;
};

/// Fit report with the fitted model embedded in the config schema.
std::string fit_report_json(const FitResult& fit, const ModelConfig& config, const FitReportInfo& info);

/// Backtest report; p-values rounded to four decimals.
std::string backtest_report_json(const BacktestReport& report, const RollingOptions& options);

/// Study table as CSV.
std::string study_csv(const std::vector<StudyCell>& cells);

}  // namespace hkc
