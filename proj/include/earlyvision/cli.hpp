#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "earlyvision/io.hpp"

namespace earlyvision {

/// Tuned parameters shipped with the library (also in data/tuned_*.json).
PathwayParams tuned_params(CellClass c);

inline constexpr const char* kOutDirEnv = "EARLYVISION_OUT_DIR";

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  CellClass cell = CellClass::P;
  FrontEndMode mode = FrontEndMode::subcortical;
  VisualGrid grid;
  PathwayParams p_params = tuned_params(CellClass::P);
  PathwayParams m_params = tuned_params(CellClass::M);
  KRatioConvention k_convention = KRatioConvention::magnitude;
  SweepConfig sweeps;
  TuneConfig tune;
  bool targets_given = false;
  MRcUpperBound m_rc_upper = MRcUpperBound::corrected;
  GaborParams unit;
  GfbSpec bank;
  bool noise = false;
  NoiseSpec noise_spec;
  int calibration_images = 8;
  std::uint64_t calibration_seed = 0;
  std::filesystem::path image;

  const PathwayParams& pathway() const { return cell == CellClass::P ? p_params : m_params; }
  SearchSpace space() const { return SearchSpace::subcortical(cell, m_rc_upper); }
  PathwayOptions options() const;
  /// Tune config with the defaults filled in for the selected cell class.
  TuneConfig tune_config() const;
  void validate() const;
};

/// Relative paths inside `j` resolve against `base_dir`.
RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
Json to_json(const RunConfig& c);

struct CommandResult {
  int exit_code = 0;
  std::vector<std::filesystem::path> written;
};

CommandResult cmd_tune(const RunConfig& cfg, bool dry_run, bool plots, std::ostream* log = nullptr);
CommandResult cmd_measure(const RunConfig& cfg, bool dry_run, bool plots, std::ostream* log = nullptr);
CommandResult cmd_forward(const RunConfig& cfg, bool dry_run, std::ostream* log = nullptr);

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

ValidationReport validate_params_file(const std::filesystem::path& path, const std::optional<SearchSpace>& space);
CommandResult cmd_validate(const std::filesystem::path& path, const std::optional<SearchSpace>& space,
                           std::ostream& out);

/// Cell read out by cmd_measure for this config.
CellFn make_measure_cell(const RunConfig& cfg);

}  // namespace earlyvision
