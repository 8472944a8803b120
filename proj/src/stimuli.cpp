#include "earlyvision/stimuli.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "earlyvision/fft.hpp"
#include "earlyvision/random.hpp"

namespace earlyvision {

void GratingSpec::validate() const {
  if (!(contrast >= 0.0 && contrast <= 1.0)) {
    throw std::invalid_argument("GratingSpec: contrast must lie in [0, 1]");
  }
  if (!(sf_cpd > 0.0) || !std::isfinite(sf_cpd)) throw std::invalid_argument("GratingSpec: sf_cpd must be > 0");
  if (!(diameter_deg >= 0.0)) throw std::invalid_argument("GratingSpec: diameter_deg must be >= 0");
  if (n_phases < 1) throw std::invalid_argument("GratingSpec: n_phases must be >= 1");
  if (std::abs(n_phases * phase_step_rad - 2.0 * std::numbers::pi) > 1e-9) {
    throw std::invalid_argument("GratingSpec: phases must tile one full cycle");
  }
  if (!(background >= 0.0 && background <= 1.0)) {
    throw std::invalid_argument("GratingSpec: background must lie in [0, 1]");
  }
  if (background + 0.5 * contrast > 1.0 + 1e-12 || background - 0.5 * contrast < -1e-12) {
    throw std::invalid_argument("GratingSpec: grating exceeds the [0, 1] pixel range");
  }
}

Plane render_grating_plane(const GratingSpec& spec, const VisualGrid& grid, int phase_index) {
  spec.validate();
  grid.validate();
  const int n = grid.resolution_px;
  const double radius = std::min(spec.diameter_deg, grid.fov_deg) / 2.0;
  const double r2 = radius * radius;
  const double w = 2.0 * std::numbers::pi * spec.sf_cpd;
  const double s = std::sin(spec.orientation_rad);
  const double c = std::cos(spec.orientation_rad);
  const double phase = phase_index * spec.phase_step_rad;

  // sin(a(x) + b(y)) expanded so only 2n transcendental calls are needed.
  std::vector<double> sin_a(n), cos_a(n), sin_b(n), cos_b(n);
  for (int i = 0; i < n; ++i) {
    const double x = grid.coord_deg(i);
    const double a = -w * s * x;
    const double b = w * c * x + phase;
    sin_a[i] = std::sin(a);
    cos_a[i] = std::cos(a);
    sin_b[i] = std::sin(b);
    cos_b[i] = std::cos(b);
  }

  Plane out(n, n, spec.background);
  const double amp = 0.5 * spec.contrast;
  for (int row = 0; row < n; ++row) {
    const double y = grid.coord_deg(row);
    double* o = out.row(row);
    for (int col = 0; col < n; ++col) {
      const double x = grid.coord_deg(col);
      if (x * x + y * y < r2) {
        o[col] = spec.background + amp * (sin_a[col] * cos_b[row] + cos_a[col] * sin_b[row]);
      }
    }
  }
  return out;
}

GratingFrames render_grating(const GratingSpec& spec, const VisualGrid& grid) {
  spec.validate();
  GratingFrames result;
  result.diameter_clamped = spec.diameter_deg > grid.fov_deg;
  result.frames.reserve(spec.n_phases);
  for (int k = 0; k < spec.n_phases; ++k) {
    Plane lum = render_grating_plane(spec, grid, k);
    result.frames.push_back(Channels{lum, lum, lum});
  }
  return result;
}

namespace {

/// Unit-variance zero-mean field with amplitude spectrum proportional to 1/f.
Plane pink_field(std::uint64_t seed, std::uint64_t stream, int n) {
  Plane white(n, n);
  auto v = white.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = counter_normal(seed, stream, i);
  Spectrum spec = forward_fft(white);
  for (int r = 0; r < spec.rows; ++r) {
    const int fr = r <= n / 2 ? r : r - n;
    for (int c = 0; c < spec.half_cols(); ++c) {
      const double f = std::hypot(static_cast<double>(fr), static_cast<double>(c));
      spec.at(r, c) *= f > 0.0 ? 1.0 / f : 0.0;
    }
  }
  Plane field = inverse_fft(spec);
  const double mean = field.mean();
  double var = 0.0;
  for (double x : field.values()) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(field.size()));
  for (double& x : field.values()) x = (x - mean) / sd;
  return field;
}

}  // namespace

std::vector<Channels> render_natural_batch(std::uint64_t seed, int count, const VisualGrid& grid) {
  if (count < 1) throw std::invalid_argument("render_natural_batch: count must be >= 1");
  grid.validate();
  const int n = grid.resolution_px;
  constexpr double kLumaSd = 0.16;
  constexpr double kChromaSd = 0.04;
  std::vector<Channels> batch;
  batch.reserve(count);
  for (int img = 0; img < count; ++img) {
    const std::uint64_t base = static_cast<std::uint64_t>(img) * 4;
    const Plane luma = pink_field(seed, base, n);
    Channels rgb;
    for (int ch = 0; ch < 3; ++ch) {
      const Plane chroma = pink_field(seed, base + 1 + ch, n);
      Plane p(n, n);
      auto out = p.values();
      auto l = luma.values();
      auto cr = chroma.values();
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::clamp(0.5 + kLumaSd * l[i] + kChromaSd * cr[i], 0.0, 1.0);
      }
      rgb.push_back(std::move(p));
    }
    batch.push_back(std::move(rgb));
  }
  return batch;
}

}  // namespace earlyvision
