#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earlyvision/grid.hpp"

namespace earlyvision {

enum class CellClass { P, M };

std::string to_string(CellClass c);
CellClass cell_class_from_string(const std::string& s);

/// How the tabulated peak-sensitivity ratio enters the DoG. Search bounds are
/// negative while the kernel subtracts the ratio; `magnitude` subtracts |k|,
/// `literal` subtracts the signed value as given.
enum class KRatioConvention { magnitude, literal };

/// The seven tunable scalars of one subcortical pathway. Radii are in degrees;
/// `k_ratio` keeps the raw signed value.
struct PathwayParams {
  double gamma = 1.0;
  double r_c_deg = 0.05;
  double r_s_deg = 0.3;
  double k_ratio = -0.03;
  double r_cn_deg = 0.3;
  double c50 = 0.1;
  double n_cn = 0.5;
  CellClass cell_class = CellClass::P;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
  /// Returns every violated invariant (empty when valid).
  std::vector<std::string> violations() const;
  double surround_ratio(KRatioConvention convention) const;

  bool operator==(const PathwayParams&) const = default;
};

enum class OpponentChannel { P_rg = 0, P_gr = 1, P_by = 2, M_achro = 3 };

struct OpponentChannelSpec {
  OpponentChannel id = OpponentChannel::M_achro;
  std::array<double, 3> center_weights{};
  std::array<double, 3> surround_weights{};

  /// The fixed cone-opponent weight sets (unit L1 norm).
  static OpponentChannelSpec standard(OpponentChannel id);
};

/// Subcortical readout channel for the given pathway when measured alone.
OpponentChannel readout_channel(CellClass c);

struct NoiseSpec {
  double fano = 0.25;
  double spikes_mean_target = 0.655;
  double integration_window_ms = 50.0;

  void validate() const;
};

/// Separable Gaussian lobe: the 2-D kernel is gain * taps (outer) taps.
struct GaussianLobe {
  std::vector<double> taps;
  double gain = 1.0;
  int half() const { return static_cast<int>(taps.size() / 2); }
  int side() const { return static_cast<int>(taps.size()); }
  double sum() const;  // 2-D sum
  Plane dense() const;
};

enum class KernelSupport {
  mass75,  ///< smallest odd side containing 75% of the integrated response
  full,    ///< four radii, i.e. untruncated for practical purposes
};

struct DogKernel {
  GaussianLobe center;
  GaussianLobe surround;
  double surround_ratio = 0.0;  // effective subtractive ratio
  int side() const { return center.side(); }
  int half() const { return center.half(); }
  Plane dense() const;
};

/// Half-width in pixels of the smallest odd square containing the radius at
/// which a Gaussian exp(-r^2 / radius^2) has accumulated 75% of its mass.
/// Throws if the square would be narrower than 3 px.
int mass75_half_width(double radius_px);

/// Samples exp(-(x^2+y^2)/r_c^2) - k exp(-(x^2+y^2)/r_s^2) in pixel units, each
/// lobe rescaled so it integrates to its continuous value pi r^2.
DogKernel make_dog_kernel(const PathwayParams& params, const VisualGrid& grid,
                          KernelSupport support = KernelSupport::mass75,
                          KRatioConvention convention = KRatioConvention::magnitude);

/// Unit-sum Gaussian pooling window of radius `r_cn_deg`, sized by the 75% rule.
GaussianLobe make_pooling_kernel(double r_cn_deg, const VisualGrid& grid);

struct LightAdapted {
  Plane plane;
  bool degenerate = false;  // zero-mean input, output defined as 0
};

/// x^g / (x^g + mean^g) - 1/2 with `mean` the spatial mean of `image`.
LightAdapted light_adapt(const Plane& image, double gamma);

/// Same transform with an externally supplied mean (used on crops).
LightAdapted light_adapt_with_mean(const Plane& image, double gamma, double mean);

struct OpponentDrive {
  Plane center;
  Plane surround;
};

OpponentDrive opponent_project(const Channels& rgb, const OpponentChannelSpec& spec);

/// Valid-mode separable correlation: output shrinks by lobe.half() per side.
Plane correlate_valid(const Plane& input, const GaussianLobe& lobe);

/// DoG stage with reflective padding (output has the input's size).
Plane dog_filter(const OpponentDrive& drive, const DogKernel& kernel);

/// x / (c50 + sqrt(x^2 * w_cn))^n with reflective padding.
Plane contrast_normalize(const Plane& x_dog, const PathwayParams& params, const VisualGrid& grid);

/// Contrast normalization in valid mode: `x_dog` must carry pooling.half()
/// extra pixels per side; the output is correspondingly smaller.
Plane contrast_normalize_valid(const Plane& x_dog, const GaussianLobe& pooling, double c50, double n_cn);

/// Computes max(x,0) - max(-x,0), checks it equals x bit for bit and returns x.
/// Throws std::logic_error on mismatch.
Plane push_pull_identity_check(const Plane& x_cn);

/// Adds independent N(0, fano * |a|) noise per unit. Draw i of (seed, stream)
/// always lands on unit i.
Plane apply_noise(const Plane& activations, double fano, std::uint64_t seed, std::uint64_t stream = 0);

/// Scale s with s * mean(|a|) == target over every unit of every plane.
double scale_to_spikes(std::span<const Plane> batch, double target);

/// Luminance subtracted when light adaptation is off (mid-gray).
inline constexpr double kLinearReference = 0.5;

struct PathwayOptions {
  bool light_adaptation = true;  // off: luminance minus kLinearReference
  bool contrast_normalization = true;
  KernelSupport support = KernelSupport::mass75;
  KRatioConvention k_convention = KRatioConvention::magnitude;
};

/// The four-channel subcortical front-end: [P_rg, P_gr, P_by, M_achro].
class SubcorticalBlock {
 public:
  SubcorticalBlock(const PathwayParams& p_params, const PathwayParams& m_params, const VisualGrid& grid,
                   PathwayOptions options = {});

  static constexpr int kChannels = 4;

  const VisualGrid& grid() const { return grid_; }
  const PathwayParams& params(CellClass c) const { return c == CellClass::P ? p_ : m_; }
  const PathwayOptions& options() const { return options_; }
  const std::array<double, kChannels>& scales() const { return scales_; }
  void set_scales(const std::array<double, kChannels>& s) { scales_ = s; }

  /// Sets each channel's scale so its mean |activation| over `batch` equals `target`.
  void calibrate(const std::vector<Channels>& batch, double target);

  /// Full forward pass. With `noise` set, N(0, F|a|) is added after scaling.
  Channels forward(const Channels& rgb, const std::optional<NoiseSpec>& noise = std::nullopt,
                   std::uint64_t seed = 0) const;

  /// Noise-free scaled output of one channel over `win`. Identical to cropping
  /// `forward(rgb)[channel]`, computed only on the pixels the window depends on.
  Plane channel_window(const Channels& rgb, OpponentChannel channel, const Window& win) const;

  /// Unscaled, noise-free full-size output of one channel.
  Plane channel_full(const Channels& rgb, OpponentChannel channel) const;

  /// Pixels of context one output needs on each side.
  int support_half(OpponentChannel channel) const;

 private:
  struct Stage {
    PathwayParams params;
    DogKernel dog;
    GaussianLobe pooling;
  };
  const Stage& stage(OpponentChannel ch) const { return ch == OpponentChannel::M_achro ? m_stage_ : p_stage_; }
  Plane adapt(const Plane& region, double mean, double gamma) const;

  PathwayParams p_;
  PathwayParams m_;
  VisualGrid grid_;
  PathwayOptions options_;
  Stage p_stage_;
  Stage m_stage_;
  std::array<double, kChannels> scales_{1.0, 1.0, 1.0, 1.0};
};

}  // namespace earlyvision
