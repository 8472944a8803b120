#pragma once

#include <cstdint>
#include <numbers>
#include <vector>

#include "earlyvision/grid.hpp"

namespace earlyvision {

/// Drifting sine-wave grating. Luminance varies along the orientation normal
/// u = -x sin(theta) + y cos(theta), so orientation 0 gives horizontal bars.
struct GratingSpec {
  double diameter_deg = 7.0;
  double sf_cpd = 1.0;
  double contrast = 1.0;
  double orientation_rad = 0.0;
  int n_phases = 12;
  double phase_step_rad = std::numbers::pi / 6.0;
  double background = 0.5;

  void validate() const;
};

struct GratingFrames {
  std::vector<Channels> frames;  // n_phases frames of 3 identical planes
  bool diameter_clamped = false;
};

/// Renders every phase of `spec` on `grid`. Inside the centered circular
/// aperture L = 0.5 + 0.5 * contrast * sin(2 pi sf u + k * phase_step); outside
/// it equals the background. Apertures wider than the field are clamped.
GratingFrames render_grating(const GratingSpec& spec, const VisualGrid& grid);

/// Single-phase luminance plane of a grating (the building block of render_grating).
Plane render_grating_plane(const GratingSpec& spec, const VisualGrid& grid, int phase_index);

/// Deterministic pseudo-natural RGB images with a 1/f amplitude spectrum and
/// random phase, pixel values clipped to [0, 1].
std::vector<Channels> render_natural_batch(std::uint64_t seed, int count, const VisualGrid& grid);

}  // namespace earlyvision
