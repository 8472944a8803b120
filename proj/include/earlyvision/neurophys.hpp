#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "earlyvision/grid.hpp"

namespace earlyvision {

/// Response of one readout unit to one RGB frame. Noise is never applied here.
using CellFn = std::function<double(const Channels& rgb)>;

enum class Experiment { sf_tuning, size_tuning, contrast_response };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

struct ResponseCurve {
  std::vector<double> abscissa;
  std::vector<double> f1;
  Experiment experiment = Experiment::sf_tuning;

  void validate() const;
  std::size_t size() const { return abscissa.size(); }
};

struct PropertySet {
  double center_radius_deg = 0.0;
  double surround_radius_deg = 0.0;
  double excitation_radius_deg = 0.0;
  double inhibition_radius_deg = 0.0;
  double suppression_index = 0.0;
  double saturation_index = 0.0;

  static constexpr std::size_t kCount = 6;
  static const std::array<std::string, kCount>& names();
  std::array<double, kCount> values() const;
  static PropertySet from_values(const std::array<double, kCount>& v);
  bool operator==(const PropertySet&) const = default;
};

/// Amplitude of the first harmonic of one stimulus cycle:
/// (2/N) |sum_k x_k exp(-i 2 pi k / N)|.
double f1_amplitude(std::span<const double> samples);

ResponseCurve run_sf_experiment(const CellFn& cell, const VisualGrid& grid, std::span<const double> sf_list,
                                double diameter_deg, double contrast);
ResponseCurve run_size_experiment(const CellFn& cell, const VisualGrid& grid, std::span<const double> diameter_list,
                                  double sf_cpd, double contrast);
ResponseCurve run_contrast_experiment(const CellFn& cell, const VisualGrid& grid,
                                      std::span<const double> contrast_list, double sf_cpd, double diameter_deg);

/// Raised when a fit is unidentifiable or pinned against its bounds.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

/// |Kc exp(-(pi f rc)^2) - Ks exp(-(pi f rs)^2)|; gains absorb the pi r^2 factors.
struct DogFit {
  double r_c_deg = 0.0;
  double r_s_deg = 0.0;
  double gain_c = 0.0;
  double gain_s = 0.0;
  double residual = 0.0;  // sum of squares relative to sum of squared data

  double response(double sf_cpd) const;
  double peak_sf(double lo, double hi) const;
};

/// Ke erf(d/re)^2 - Ki erf(d/ri)^2: the integrated-Gaussian area-summation
/// model, with the constant factors of each term absorbed into its gain.
struct AreaSummationFit {
  double r_e_deg = 0.0;
  double r_i_deg = 0.0;
  double k_e = 0.0;
  double k_i = 0.0;
  double suppression_index = 0.0;
  double residual = 0.0;
  bool inhibition_identified = true;  // false when the data carry no inhibition (k_i ~ 0)

  double response(double diameter_deg) const;
  double peak_diameter() const;
};

/// R_max c^q / (c^q + c50^q).
struct ContrastFit {
  double r_max = 0.0;
  double c50 = 0.0;
  double q = 0.0;
  double saturation_index = 0.0;
  double residual = 0.0;

  double response(double contrast) const;
};

/// 1 - [R(1) - R(1/2)] / [R(1/2) - R(0)] clamped to [0, 1].
double saturation_index(const std::function<double(double)>& response);

DogFit fit_dog_sf(const ResponseCurve& curve);
AreaSummationFit fit_area_summation(const ResponseCurve& curve);
ContrastFit fit_contrast_response(const ResponseCurve& curve);

/// Stimulus sweeps for the three chained experiments.
struct SweepConfig {
  std::vector<double> sf_cpd;        // default: 16 log-spaced points in [0.1, 16]
  std::vector<double> diameter_deg;  // default: 14 log-spaced points in [0.05, 7]
  std::vector<double> contrast{0.03, 0.06, 0.125, 0.25, 0.5, 0.75, 1.0};
  double sf_contrast = 1.0;
  double sf_diameter_deg = 7.0;  // full field
  double size_contrast = 1.0;

  SweepConfig();
  void validate() const;
};

std::vector<double> log_spaced(double lo, double hi, int n);

struct PropertyReport {
  PropertySet properties;
  std::array<std::optional<std::string>, PropertySet::kCount> errors;  // per-property failure markers
  ResponseCurve sf_curve;
  ResponseCurve size_curve;
  ResponseCurve contrast_curve;
  std::optional<DogFit> dog_fit;
  std::optional<AreaSummationFit> area_fit;
  std::optional<ContrastFit> contrast_fit;
  double peak_sf_cpd = 0.0;
  double peak_diameter_deg = 0.0;

  bool complete() const;
  std::size_t failures() const;
};

/// SF sweep, then size sweep at the peak SF, then contrast sweep at the peak
/// SF and peak diameter; each property comes from the fitted model.
PropertyReport measure_properties(const CellFn& cell, const VisualGrid& grid, const SweepConfig& sweeps = {});

}  // namespace earlyvision
