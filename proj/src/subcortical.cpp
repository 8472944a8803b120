#include "earlyvision/subcortical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "earlyvision/random.hpp"

namespace earlyvision {

std::string to_string(CellClass c) { return c == CellClass::P ? "P" : "M"; }

CellClass cell_class_from_string(const std::string& s) {
  if (s == "P" || s == "p") return CellClass::P;
  if (s == "M" || s == "m") return CellClass::M;
  throw std::invalid_argument("unknown cell class '" + s + "' (expected P or M)");
}

std::vector<std::string> PathwayParams::violations() const {
  std::vector<std::string> out;
  auto finite_positive = [&](double v, const char* name) {
    if (!std::isfinite(v) || !(v > 0.0)) out.push_back(std::string(name) + " must be finite and > 0");
  };
  finite_positive(gamma, "gamma");
  finite_positive(r_c_deg, "r_c_deg");
  finite_positive(r_s_deg, "r_s_deg");
  finite_positive(r_cn_deg, "r_cn_deg");
  finite_positive(c50, "c50");
  finite_positive(n_cn, "n_cn");
  if (!std::isfinite(k_ratio)) out.emplace_back("k_ratio must be finite");
  if (std::isfinite(r_c_deg) && std::isfinite(r_s_deg) && !(r_s_deg > r_c_deg)) {
    out.emplace_back("r_s_deg must exceed r_c_deg");
  }
  return out;
}

void PathwayParams::validate() const {
  const auto v = violations();
  if (!v.empty()) throw std::invalid_argument("PathwayParams: " + v.front());
}

double PathwayParams::surround_ratio(KRatioConvention convention) const {
  return convention == KRatioConvention::magnitude ? std::abs(k_ratio) : k_ratio;
}

OpponentChannelSpec OpponentChannelSpec::standard(OpponentChannel id) {
  constexpr double third = 1.0 / 3.0;
  switch (id) {
    case OpponentChannel::P_rg: return {id, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
    case OpponentChannel::P_gr: return {id, {0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}};
    case OpponentChannel::P_by: return {id, {0.0, 0.0, 1.0}, {0.5, 0.5, 0.0}};
    case OpponentChannel::M_achro: return {id, {third, third, third}, {third, third, third}};
  }
  throw std::invalid_argument("unknown opponent channel");
}

OpponentChannel readout_channel(CellClass c) {
  return c == CellClass::P ? OpponentChannel::P_rg : OpponentChannel::M_achro;
}

void NoiseSpec::validate() const {
  if (!(fano >= 0.0) || !std::isfinite(fano)) throw std::invalid_argument("NoiseSpec: fano must be >= 0");
  if (!(spikes_mean_target > 0.0)) throw std::invalid_argument("NoiseSpec: spikes_mean_target must be > 0");
  if (integration_window_ms != 50.0) throw std::invalid_argument("NoiseSpec: integration window is fixed at 50 ms");
}

double GaussianLobe::sum() const {
  double s = 0.0;
  for (double t : taps) s += t;
  return gain * s * s;
}

Plane GaussianLobe::dense() const {
  Plane out(side(), side());
  for (int i = 0; i < side(); ++i) {
    for (int j = 0; j < side(); ++j) out(i, j) = gain * (taps[i] * taps[j]);
  }
  return out;
}

Plane DogKernel::dense() const {
  Plane out(side(), side());
  for (int i = 0; i < side(); ++i) {
    for (int j = 0; j < side(); ++j) {
      out(i, j) = center.gain * (center.taps[i] * center.taps[j]) -
                  surround_ratio * (surround.gain * (surround.taps[i] * surround.taps[j]));
    }
  }
  return out;
}

int mass75_half_width(double radius_px) {
  // 1 - exp(-R^2 / r^2) = 0.75  =>  R = r sqrt(ln 4)
  const double reach = radius_px * std::sqrt(std::log(4.0));
  const int half = static_cast<int>(std::ceil(reach - 0.5));
  if (!(radius_px > 0.0) || half < 1) {
    throw std::invalid_argument("kernel radius too small for the grid resolution (side < 3 px)");
  }
  return half;
}

namespace {

int cap_half(int half, const VisualGrid& grid) { return std::min(half, (grid.resolution_px - 1) / 2); }

std::vector<double> gaussian_taps(int half, double radius_px) {
  std::vector<double> taps(2 * half + 1);
  const double inv_r2 = 1.0 / (radius_px * radius_px);
  for (int i = -half; i <= half; ++i) taps[i + half] = std::exp(-static_cast<double>(i * i) * inv_r2);
  return taps;
}

GaussianLobe integral_matched_lobe(int half, double radius_px) {
  GaussianLobe lobe{gaussian_taps(half, radius_px), 1.0};
  const double raw = lobe.sum();
  lobe.gain = std::numbers::pi * radius_px * radius_px / raw;
  return lobe;
}

}  // namespace

DogKernel make_dog_kernel(const PathwayParams& params, const VisualGrid& grid, KernelSupport support,
                          KRatioConvention convention) {
  params.validate();
  grid.validate();
  const double ppd = grid.px_per_deg();
  const double rc = params.r_c_deg * ppd;
  const double rs = params.r_s_deg * ppd;
  int half = support == KernelSupport::mass75 ? mass75_half_width(rs)
                                              : std::max(1, static_cast<int>(std::ceil(4.0 * rs)));
  half = cap_half(half, grid);
  if (half < 1) throw std::invalid_argument("kernel radius too small for the grid resolution (side < 3 px)");
  DogKernel k;
  k.center = integral_matched_lobe(half, rc);
  k.surround = integral_matched_lobe(half, rs);
  k.surround_ratio = params.surround_ratio(convention);
  return k;
}

GaussianLobe make_pooling_kernel(double r_cn_deg, const VisualGrid& grid) {
  const double r = r_cn_deg * grid.px_per_deg();
  const int half = cap_half(mass75_half_width(r), grid);
  GaussianLobe lobe{gaussian_taps(half, r), 1.0};
  lobe.gain = 1.0 / lobe.sum();
  return lobe;
}

LightAdapted light_adapt_with_mean(const Plane& image, double gamma, double mean) {
  if (image.empty()) throw std::invalid_argument("light_adapt: empty image");
  if (!(gamma > 0.0)) throw std::invalid_argument("light_adapt: gamma must be > 0");
  LightAdapted out{Plane(image.rows(), image.cols()), false};
  if (!(mean > 0.0)) {
    out.degenerate = true;
    return out;
  }
  const double mean_g = std::pow(mean, gamma);
  auto src = image.values();
  auto dst = out.plane.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double x = src[i];
    if (x < 0.0) throw std::invalid_argument("light_adapt: pixel values must be nonnegative");
    const double xg = std::pow(x, gamma);
    dst[i] = xg / (xg + mean_g) - 0.5;
  }
  return out;
}

LightAdapted light_adapt(const Plane& image, double gamma) {
  if (image.empty()) throw std::invalid_argument("light_adapt: empty image");
  return light_adapt_with_mean(image, gamma, image.mean());
}

OpponentDrive opponent_project(const Channels& rgb, const OpponentChannelSpec& spec) {
  if (rgb.size() != 3) throw std::invalid_argument("opponent_project: expected 3 channels");
  const int rows = rgb[0].rows();
  const int cols = rgb[0].cols();
  OpponentDrive d{Plane(rows, cols), Plane(rows, cols)};
  auto project = [&](const std::array<double, 3>& w, Plane& out) {
    auto o = out.values();
    for (int k = 0; k < 3; ++k) {
      if (w[k] == 0.0) continue;
      auto in = rgb[k].values();
      for (std::size_t i = 0; i < o.size(); ++i) o[i] += w[k] * in[i];
    }
  };
  project(spec.center_weights, d.center);
  project(spec.surround_weights, d.surround);
  return d;
}

Plane correlate_valid(const Plane& input, const GaussianLobe& lobe) {
  const int h = lobe.half();
  const int out_rows = input.rows() - 2 * h;
  const int out_cols = input.cols() - 2 * h;
  if (out_rows < 1 || out_cols < 1) throw std::invalid_argument("correlate_valid: input smaller than kernel");
  const double* taps = lobe.taps.data();
  const int n = lobe.side();

  Plane tmp(input.rows(), out_cols);
  for (int r = 0; r < input.rows(); ++r) {
    const double* in = input.row(r);
    double* t = tmp.row(r);
    for (int c = 0; c < out_cols; ++c) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += taps[j] * in[c + j];
      t[c] = acc;
    }
  }
  Plane out(out_rows, out_cols);
  for (int r = 0; r < out_rows; ++r) {
    double* o = out.row(r);
    for (int i = 0; i < n; ++i) {
      const double w = taps[i];
      const double* t = tmp.row(r + i);
      for (int c = 0; c < out_cols; ++c) o[c] += w * t[c];
    }
    for (int c = 0; c < out_cols; ++c) o[c] *= lobe.gain;
  }
  return out;
}

namespace {

Plane dog_valid(const Plane& center_drive, const Plane& surround_drive, const DogKernel& kernel) {
  Plane out = correlate_valid(center_drive, kernel.center);
  if (kernel.surround_ratio == 0.0) return out;
  const Plane s = correlate_valid(surround_drive, kernel.surround);
  auto o = out.values();
  auto sv = s.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] - kernel.surround_ratio * sv[i];
  return out;
}

}  // namespace

Plane dog_filter(const OpponentDrive& drive, const DogKernel& kernel) {
  return dog_valid(pad_reflect(drive.center, kernel.half()), pad_reflect(drive.surround, kernel.half()), kernel);
}

Plane contrast_normalize_valid(const Plane& x_dog, const GaussianLobe& pooling, double c50, double n_cn) {
  Plane sq(x_dog.rows(), x_dog.cols());
  auto in = x_dog.values();
  auto s = sq.values();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = in[i] * in[i];
  const Plane pool = correlate_valid(sq, pooling);
  const int h = pooling.half();
  Plane out(pool.rows(), pool.cols());
  for (int r = 0; r < out.rows(); ++r) {
    const double* x = x_dog.row(r + h) + h;
    const double* p = pool.row(r);
    double* o = out.row(r);
    for (int c = 0; c < out.cols(); ++c) {
      // Rounding can leave a tiny negative pool; the true value is >= 0.
      o[c] = x[c] / std::pow(c50 + std::sqrt(std::max(p[c], 0.0)), n_cn);
    }
  }
  return out;
}

Plane contrast_normalize(const Plane& x_dog, const PathwayParams& params, const VisualGrid& grid) {
  params.validate();
  const GaussianLobe pooling = make_pooling_kernel(params.r_cn_deg, grid);
  return contrast_normalize_valid(pad_reflect(x_dog, pooling.half()), pooling, params.c50, params.n_cn);
}

Plane push_pull_identity_check(const Plane& x_cn) {
  auto v = x_cn.values();
  for (double x : v) {
    const double pp = std::max(x, 0.0) - std::max(-x, 0.0);
    if (!(pp == x) && !(std::isnan(x) && std::isnan(pp))) {
      throw std::logic_error("push-pull identity violated");
    }
  }
  return x_cn;
}

Plane apply_noise(const Plane& activations, double fano, std::uint64_t seed, std::uint64_t stream) {
  if (!(fano >= 0.0)) throw std::invalid_argument("apply_noise: fano must be >= 0");
  Plane out = activations;
  if (fano == 0.0) return out;
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] += std::sqrt(fano * std::abs(v[i])) * counter_normal(seed, stream, i);
  }
  return out;
}

double scale_to_spikes(std::span<const Plane> batch, double target) {
  double total = 0.0;
  std::size_t count = 0;
  for (const Plane& p : batch) {
    for (double v : p.values()) total += std::abs(v);
    count += p.size();
  }
  if (count == 0 || !(total > 0.0)) throw std::domain_error("scale_to_spikes: zero mean evoked response");
  return target / (total / static_cast<double>(count));
}

SubcorticalBlock::SubcorticalBlock(const PathwayParams& p_params, const PathwayParams& m_params,
                                   const VisualGrid& grid, PathwayOptions options)
    : p_(p_params), m_(m_params), grid_(grid), options_(options) {
  auto build = [&](const PathwayParams& params) {
    Stage s{params, make_dog_kernel(params, grid, options.support, options.k_convention), GaussianLobe{{1.0}, 1.0}};
    if (options.contrast_normalization) s.pooling = make_pooling_kernel(params.r_cn_deg, grid);
    return s;
  };
  p_stage_ = build(p_);
  m_stage_ = build(m_);
}

int SubcorticalBlock::support_half(OpponentChannel channel) const {
  const Stage& s = stage(channel);
  return s.dog.half() + (options_.contrast_normalization ? s.pooling.half() : 0);
}

Plane SubcorticalBlock::adapt(const Plane& region, double mean, double gamma) const {
  if (options_.light_adaptation) return light_adapt_with_mean(region, gamma, mean).plane;
  Plane out = region;
  for (double& v : out.values()) v -= kLinearReference;
  return out;
}

namespace {

Channels crop_rgb(const Channels& rgb, const Window& w, const std::array<bool, 3>& needed) {
  Channels out(3);
  for (int k = 0; k < 3; ++k) {
    if (!needed[k]) {
      out[k] = Plane(w.side(), w.side());
      continue;
    }
    Plane p(w.side(), w.side());
    for (int r = 0; r < w.side(); ++r) {
      const double* src = rgb[k].row(w.row - w.half + r) + (w.col - w.half);
      std::copy(src, src + w.side(), p.row(r));
    }
    out[k] = std::move(p);
  }
  return out;
}

}  // namespace

Plane SubcorticalBlock::channel_full(const Channels& rgb, OpponentChannel channel) const {
  if (rgb.size() != 3) throw std::invalid_argument("SubcorticalBlock: expected a 3-channel image");
  const Stage& s = stage(channel);
  const auto spec = OpponentChannelSpec::standard(channel);
  Channels adapted(3);
  for (int k = 0; k < 3; ++k) {
    if (spec.center_weights[k] == 0.0 && spec.surround_weights[k] == 0.0) {
      adapted[k] = Plane(rgb[k].rows(), rgb[k].cols());
    } else {
      adapted[k] = adapt(rgb[k], rgb[k].mean(), s.params.gamma);
    }
  }
  const Plane x_dog = dog_filter(opponent_project(adapted, spec), s.dog);
  if (!options_.contrast_normalization) return x_dog;
  return contrast_normalize_valid(pad_reflect(x_dog, s.pooling.half()), s.pooling, s.params.c50, s.params.n_cn);
}

Plane SubcorticalBlock::channel_window(const Channels& rgb, OpponentChannel channel, const Window& win) const {
  if (rgb.size() != 3) throw std::invalid_argument("SubcorticalBlock: expected a 3-channel image");
  const int n_rows = rgb[0].rows();
  const int n_cols = rgb[0].cols();
  const int reach = win.half + support_half(channel);
  const double scale = scales_[static_cast<int>(channel)];
  const bool interior = win.row - reach >= 0 && win.row + reach < n_rows && win.col - reach >= 0 &&
                        win.col + reach < n_cols;
  Plane out;
  if (interior) {
    const Stage& s = stage(channel);
    const auto spec = OpponentChannelSpec::standard(channel);
    std::array<bool, 3> needed{};
    for (int k = 0; k < 3; ++k) needed[k] = spec.center_weights[k] != 0.0 || spec.surround_weights[k] != 0.0;
    Channels crop = crop_rgb(rgb, Window{win.row, win.col, reach}, needed);
    for (int k = 0; k < 3; ++k) {
      if (needed[k]) crop[k] = adapt(crop[k], rgb[k].mean(), s.params.gamma);
    }
    const OpponentDrive drive = opponent_project(crop, spec);
    const Plane x_dog = dog_valid(drive.center, drive.surround, s.dog);
    out = options_.contrast_normalization
              ? contrast_normalize_valid(x_dog, s.pooling, s.params.c50, s.params.n_cn)
              : x_dog;
  } else {
    out = extract_window(channel_full(rgb, channel), win);
  }
  if (scale != 1.0) {
    for (double& v : out.values()) v *= scale;
  }
  return out;
}

Channels SubcorticalBlock::forward(const Channels& rgb, const std::optional<NoiseSpec>& noise,
                                   std::uint64_t seed) const {
  if (noise) noise->validate();
  Channels out;
  out.reserve(kChannels);
  for (int ch = 0; ch < kChannels; ++ch) {
    Plane x = channel_full(rgb, static_cast<OpponentChannel>(ch));
    if (scales_[ch] != 1.0) {
      for (double& v : x.values()) v *= scales_[ch];
    }
    if (noise) x = apply_noise(x, noise->fano, seed, static_cast<std::uint64_t>(ch));
    out.push_back(std::move(x));
  }
  return out;
}

void SubcorticalBlock::calibrate(const std::vector<Channels>& batch, double target) {
  for (int ch = 0; ch < kChannels; ++ch) {
    std::vector<Plane> outs;
    outs.reserve(batch.size());
    for (const Channels& img : batch) outs.push_back(channel_full(img, static_cast<OpponentChannel>(ch)));
    scales_[ch] = scale_to_spikes(outs, target);
  }
}

}  // namespace earlyvision
