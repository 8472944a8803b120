#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earlyvision/grid.hpp"
#include "earlyvision/subcortical.hpp"

namespace earlyvision {

enum class GaborCellType { simple, complex };

std::string to_string(GaborCellType t);
GaborCellType gabor_cell_type_from_string(const std::string& s);

inline constexpr double kMinGaborSf = 0.5;
inline constexpr double kMaxGaborSf = 8.0;
inline constexpr double kVOneSpikeTarget = 0.655;

/// One V1 unit. The carrier varies along u = -x sin(theta) + y cos(theta), the
/// same axis as a grating of equal orientation.
struct GaborParams {
  double orientation_rad = 0.0;
  double sf_cpd = 2.0;
  double sigma_x_deg = 0.2;
  double sigma_y_deg = 0.2;
  double phase_rad = 0.0;
  int input_channel = 3;
  GaborCellType cell_type = GaborCellType::simple;

  void validate() const;
  bool operator==(const GaborParams&) const = default;
};

/// Envelope size tied to spatial frequency: roughly one carrier cycle per envelope.
double envelope_sigma_for_sf(double sf_cpd);

struct GfbSpec {
  int n_channels = 32;
  double simple_fraction = 0.5;
  std::uint64_t seed = 0;
  VisualGrid grid;

  void validate() const;
};

/// Seeded bank: SF log-uniform in [0.5, 8] cpd, orientation uniform in [0, pi),
/// phase uniform in [0, 2 pi), input channel uniform over {0..3}. The first
/// half of the bank is simple cells, the second half complex cells.
std::vector<GaborParams> sample_gfb(const GfbSpec& spec);

/// Precomputed even (phase) and quadrature (phase + pi/2) kernels of one unit.
struct GaborUnit {
  GaborParams params;
  Plane even;
  Plane odd;
  int half() const { return even.rows() / 2; }
};

GaborUnit make_gabor_unit(const GaborParams& params, const VisualGrid& grid);

/// Nonlinear response of `unit` to the input patch centered on it; `patch`
/// must have the kernel's size. Simple: max(r, 0). Complex: sqrt(r^2 + rq^2).
double unit_response(const GaborUnit& unit, const Plane& patch);

/// Every filter applied over the full grid (reflective padding), one output
/// plane per filter. Channel indices are checked against `input4`.
Channels gfb_forward(const Channels& input4, std::span<const GaborParams> filters, const VisualGrid& grid);

/// Input used when the subcortical block is absent: (x - 0.5) / 0.5 for R, G, B
/// plus their mean as the fourth channel.
Channels bypass_input(const Channels& rgb);

enum class FrontEndMode { subcortical, bypass, cascade };

std::string to_string(FrontEndMode m);
FrontEndMode front_end_mode_from_string(const std::string& s);

class VOneBlock {
 public:
  VOneBlock(std::vector<GaborParams> filters, const VisualGrid& grid);

  const std::vector<GaborParams>& filters() const { return filters_; }
  const VisualGrid& grid() const { return grid_; }
  double scale() const { return scale_; }
  void set_scale(double s) { scale_ = s; }
  double cortical_fano() const { return cortical_fano_; }
  void set_cortical_fano(double f);

  /// Scale so the mean response over `inputs` (4-channel) equals `target`.
  void calibrate(const std::vector<Channels>& inputs, double target = kVOneSpikeTarget);

  /// Filter bank, scaling and, when `noisy`, N(0, F_cortical |a|) noise.
  Channels forward(const Channels& input4, bool noisy = false, std::uint64_t seed = 0) const;

 private:
  std::vector<GaborParams> filters_;
  VisualGrid grid_;
  double scale_ = 1.0;
  double cortical_fano_ = 0.0;
};

/// Monte Carlo of the noisy cascade for a fixed stimulus at the grid-center
/// location: subcortical noise (F_sub) on the channels the units read, then
/// scaled Gabor responses, then cortical noise.
class CascadeProbe {
 public:
  CascadeProbe(const SubcorticalBlock& block, std::vector<GaborParams> units, const Channels& stimulus,
               double vone_scale, double subcortical_fano);

  struct Trial {
    std::vector<double> cortical;     // one entry per unit
    std::vector<double> subcortical;  // every unit of every window read
  };

  Trial run(std::uint64_t seed, std::uint64_t trial_index, double cortical_fano) const;
  std::size_t n_units() const { return units_.size(); }

 private:
  const VisualGrid grid_;
  std::vector<GaborUnit> units_;
  std::vector<int> channels_;         // distinct channels read by the units
  std::vector<Plane> clean_windows_;  // scaled, noise-free, per entry of channels_
  double vone_scale_;
  double subcortical_fano_;
};

struct FanoReport {
  double subcortical = 0.0;  // pooled var / mean|a| at the subcortical output
  double cortical = 0.0;     // pooled var / mean|a| at the V1 output
  std::size_t trials = 0;
};

/// Pooled Fano factors over `trials` noisy repetitions.
FanoReport measure_fano(const CascadeProbe& probe, std::size_t trials, std::uint64_t seed, double cortical_fano);

/// Cortical Fano that completes the inherited variability to an end-to-end
/// Fano of one: max(0, 1 - inherited), with the inherited part measured by
/// running the probe with cortical noise off.
double calibrate_cortical_fano(const CascadeProbe& probe, std::size_t trials, std::uint64_t seed);

}  // namespace earlyvision
