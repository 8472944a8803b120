#include "earlyvision/vone.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "earlyvision/fft.hpp"
#include "earlyvision/random.hpp"

namespace earlyvision {

std::string to_string(GaborCellType t) { return t == GaborCellType::simple ? "simple" : "complex"; }

GaborCellType gabor_cell_type_from_string(const std::string& s) {
  if (s == "simple") return GaborCellType::simple;
  if (s == "complex") return GaborCellType::complex;
  throw std::invalid_argument("unknown Gabor cell type '" + s + "'");
}

std::string to_string(FrontEndMode m) {
  switch (m) {
    case FrontEndMode::subcortical: return "subcortical";
    case FrontEndMode::bypass: return "bypass";
    case FrontEndMode::cascade: return "cascade";
  }
  return "?";
}

FrontEndMode front_end_mode_from_string(const std::string& s) {
  if (s == "subcortical") return FrontEndMode::subcortical;
  if (s == "bypass") return FrontEndMode::bypass;
  if (s == "cascade") return FrontEndMode::cascade;
  throw std::invalid_argument("unknown mode '" + s + "' (expected subcortical, bypass or cascade)");
}

void GaborParams::validate() const {
  if (!(sf_cpd >= kMinGaborSf && sf_cpd <= kMaxGaborSf)) {
    throw std::invalid_argument("GaborParams: sf_cpd must lie in [0.5, 8.0]");
  }
  if (!(sigma_x_deg > 0.0) || !(sigma_y_deg > 0.0)) throw std::invalid_argument("GaborParams: sigmas must be > 0");
  if (input_channel < 0 || input_channel > 3) throw std::invalid_argument("GaborParams: input_channel must be in 0..3");
  if (!std::isfinite(orientation_rad) || !std::isfinite(phase_rad)) {
    throw std::invalid_argument("GaborParams: orientation and phase must be finite");
  }
}

double envelope_sigma_for_sf(double sf_cpd) { return 0.4 / sf_cpd; }

void GfbSpec::validate() const {
  grid.validate();
  if (n_channels < 2 || n_channels % 2 != 0) throw std::invalid_argument("GfbSpec: n_channels must be even and >= 2");
  if (simple_fraction != 0.5) throw std::invalid_argument("GfbSpec: simple_fraction is fixed at 1/2");
}

std::vector<GaborParams> sample_gfb(const GfbSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed, 0x6766625fULL);
  const double log_lo = std::log(kMinGaborSf);
  const double log_hi = std::log(kMaxGaborSf);
  std::vector<GaborParams> bank;
  bank.reserve(spec.n_channels);
  const int n_simple = spec.n_channels / 2;
  for (int i = 0; i < spec.n_channels; ++i) {
    GaborParams g;
    g.sf_cpd = std::clamp(std::exp(rng.uniform(log_lo, log_hi)), kMinGaborSf, kMaxGaborSf);
    g.orientation_rad = rng.uniform(0.0, std::numbers::pi);
    g.phase_rad = rng.uniform(0.0, 2.0 * std::numbers::pi);
    g.input_channel = static_cast<int>(rng.below(4));
    g.sigma_x_deg = g.sigma_y_deg = envelope_sigma_for_sf(g.sf_cpd);
    g.cell_type = i < n_simple ? GaborCellType::simple : GaborCellType::complex;
    bank.push_back(g);
  }
  return bank;
}

GaborUnit make_gabor_unit(const GaborParams& params, const VisualGrid& grid) {
  params.validate();
  const double ppd = grid.px_per_deg();
  const double sigma_px = std::max(params.sigma_x_deg, params.sigma_y_deg) * ppd;
  const int half = std::min(static_cast<int>(std::ceil(3.0 * sigma_px)), (grid.resolution_px - 1) / 2);
  const int side = 2 * half + 1;
  GaborUnit unit{params, Plane(side, side), Plane(side, side)};
  const double s = std::sin(params.orientation_rad);
  const double c = std::cos(params.orientation_rad);
  const double w = 2.0 * std::numbers::pi * params.sf_cpd;
  const double ax = 1.0 / (2.0 * params.sigma_x_deg * params.sigma_x_deg);
  const double ay = 1.0 / (2.0 * params.sigma_y_deg * params.sigma_y_deg);
  for (int i = 0; i < side; ++i) {
    const double y = (i - half) / ppd;
    for (int j = 0; j < side; ++j) {
      const double x = (j - half) / ppd;
      const double u = -x * s + y * c;
      const double v = x * c + y * s;
      const double env = std::exp(-(u * u * ax + v * v * ay));
      unit.even(i, j) = env * std::cos(w * u + params.phase_rad);
      unit.odd(i, j) = env * std::cos(w * u + params.phase_rad + std::numbers::pi / 2.0);
    }
  }
  return unit;
}

namespace {

double dot(const Plane& a, const Plane& b) {
  auto av = a.values();
  auto bv = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return acc;
}

double apply_nonlinearity(GaborCellType type, double even, double odd) {
  return type == GaborCellType::simple ? std::max(even, 0.0) : std::sqrt(even * even + odd * odd);
}

}  // namespace

double unit_response(const GaborUnit& unit, const Plane& patch) {
  if (patch.rows() != unit.even.rows() || patch.cols() != unit.even.cols()) {
    throw std::invalid_argument("unit_response: patch does not match kernel size");
  }
  const double even = dot(unit.even, patch);
  const double odd = unit.params.cell_type == GaborCellType::complex ? dot(unit.odd, patch) : 0.0;
  return apply_nonlinearity(unit.params.cell_type, even, odd);
}

Channels gfb_forward(const Channels& input4, std::span<const GaborParams> filters, const VisualGrid& grid) {
  if (input4.empty()) throw std::invalid_argument("gfb_forward: empty input");
  const int rows = input4[0].rows();
  const int cols = input4[0].cols();
  std::vector<GaborUnit> units;
  units.reserve(filters.size());
  int max_half = 0;
  for (const GaborParams& f : filters) {
    if (f.input_channel >= static_cast<int>(input4.size())) {
      throw std::invalid_argument("gfb_forward: filter reads a channel the input does not have");
    }
    units.push_back(make_gabor_unit(f, grid));
    max_half = std::max(max_half, units.back().half());
  }
  std::vector<std::optional<Spectrum>> spectra(input4.size());
  Channels out;
  out.reserve(units.size());
  for (const GaborUnit& u : units) {
    auto& spec = spectra[u.params.input_channel];
    if (!spec) spec = forward_fft(pad_reflect(input4[u.params.input_channel], max_half));
    const int off = max_half - u.half();
    const Plane even = correlate_valid_fft(*spec, u.even);
    Plane odd;
    if (u.params.cell_type == GaborCellType::complex) odd = correlate_valid_fft(*spec, u.odd);
    Plane resp(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double e = even(r + off, c + off);
        const double o = odd.empty() ? 0.0 : odd(r + off, c + off);
        resp(r, c) = apply_nonlinearity(u.params.cell_type, e, o);
      }
    }
    out.push_back(std::move(resp));
  }
  return out;
}

Channels bypass_input(const Channels& rgb) {
  if (rgb.size() != 3) throw std::invalid_argument("bypass_input: expected 3 channels");
  Channels out(4, Plane(rgb[0].rows(), rgb[0].cols()));
  for (int k = 0; k < 3; ++k) {
    auto src = rgb[k].values();
    auto dst = out[k].values();
    auto lum = out[3].values();
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = (src[i] - 0.5) / 0.5;
      lum[i] += dst[i] / 3.0;
    }
  }
  return out;
}

VOneBlock::VOneBlock(std::vector<GaborParams> filters, const VisualGrid& grid)
    : filters_(std::move(filters)), grid_(grid) {
  grid_.validate();
  for (const auto& f : filters_) f.validate();
}

void VOneBlock::set_cortical_fano(double f) {
  if (!(f >= 0.0)) throw std::invalid_argument("VOneBlock: cortical Fano must be >= 0");
  cortical_fano_ = f;
}

void VOneBlock::calibrate(const std::vector<Channels>& inputs, double target) {
  std::vector<Plane> all;
  for (const Channels& in : inputs) {
    Channels r = gfb_forward(in, filters_, grid_);
    for (Plane& p : r) all.push_back(std::move(p));
  }
  scale_ = scale_to_spikes(all, target);
}

Channels VOneBlock::forward(const Channels& input4, bool noisy, std::uint64_t seed) const {
  Channels out = gfb_forward(input4, filters_, grid_);
  for (std::size_t f = 0; f < out.size(); ++f) {
    for (double& v : out[f].values()) v *= scale_;
    if (noisy) out[f] = apply_noise(out[f], cortical_fano_, seed, 1000 + f);
  }
  return out;
}

CascadeProbe::CascadeProbe(const SubcorticalBlock& block, std::vector<GaborParams> units, const Channels& stimulus,
                           double vone_scale, double subcortical_fano)
    : grid_(block.grid()), vone_scale_(vone_scale), subcortical_fano_(subcortical_fano) {
  if (units.empty()) throw std::invalid_argument("CascadeProbe: no units");
  if (!(subcortical_fano >= 0.0)) throw std::invalid_argument("CascadeProbe: fano must be >= 0");
  std::vector<int> half_per_channel(4, -1);
  for (const GaborParams& p : units) {
    units_.push_back(make_gabor_unit(p, grid_));
    half_per_channel[p.input_channel] = std::max(half_per_channel[p.input_channel], units_.back().half());
  }
  const int c = grid_.center_px();
  for (int ch = 0; ch < 4; ++ch) {
    if (half_per_channel[ch] < 0) continue;
    channels_.push_back(ch);
    clean_windows_.push_back(
        block.channel_window(stimulus, static_cast<OpponentChannel>(ch), Window{c, c, half_per_channel[ch]}));
  }
}

CascadeProbe::Trial CascadeProbe::run(std::uint64_t seed, std::uint64_t trial_index, double cortical_fano) const {
  Trial t;
  std::vector<Plane> noisy;
  noisy.reserve(channels_.size());
  for (std::size_t k = 0; k < channels_.size(); ++k) {
    const std::uint64_t stream = trial_index * 8 + static_cast<std::uint64_t>(channels_[k]);
    noisy.push_back(apply_noise(clean_windows_[k], subcortical_fano_, seed, stream));
    const auto v = noisy.back().values();
    t.subcortical.insert(t.subcortical.end(), v.begin(), v.end());
  }
  t.cortical.reserve(units_.size());
  for (std::size_t u = 0; u < units_.size(); ++u) {
    const GaborUnit& unit = units_[u];
    const auto it = std::find(channels_.begin(), channels_.end(), unit.params.input_channel);
    const Plane& win = noisy[static_cast<std::size_t>(it - channels_.begin())];
    const int c = win.rows() / 2;
    const Plane patch = extract_window(win, Window{c, c, unit.half()});
    const double a = vone_scale_ * unit_response(unit, patch);
    const double z = counter_normal(seed ^ 0xC0FFEEULL, trial_index, u);
    t.cortical.push_back(a + std::sqrt(cortical_fano * std::abs(a)) * z);
  }
  return t;
}

namespace {

struct RunningMoments {
  std::vector<double> mean;
  std::vector<double> m2;
  std::size_t n = 0;

  void add(const std::vector<double>& x) {
    if (mean.empty()) {
      mean.assign(x.size(), 0.0);
      m2.assign(x.size(), 0.0);
    }
    ++n;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean[i];
      mean[i] += d / static_cast<double>(n);
      m2[i] += d * (x[i] - mean[i]);
    }
  }

  double pooled_fano() const {
    double var = 0.0;
    double mu = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      var += m2[i] / static_cast<double>(n - 1);
      mu += std::abs(mean[i]);
    }
    return mu > 0.0 ? var / mu : 0.0;
  }
};

}  // namespace

FanoReport measure_fano(const CascadeProbe& probe, std::size_t trials, std::uint64_t seed, double cortical_fano) {
  if (trials < 2) throw std::invalid_argument("measure_fano: need at least 2 trials");
  RunningMoments sub;
  RunningMoments cort;
  for (std::size_t t = 0; t < trials; ++t) {
    const CascadeProbe::Trial tr = probe.run(seed, t, cortical_fano);
    sub.add(tr.subcortical);
    cort.add(tr.cortical);
  }
  return FanoReport{sub.pooled_fano(), cort.pooled_fano(), trials};
}

double calibrate_cortical_fano(const CascadeProbe& probe, std::size_t trials, std::uint64_t seed) {
  const FanoReport inherited = measure_fano(probe, trials, seed, 0.0);
  return std::max(0.0, 1.0 - inherited.cortical);
}

}  // namespace earlyvision
