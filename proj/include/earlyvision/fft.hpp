#pragma once

#include <complex>
#include <vector>

#include "earlyvision/grid.hpp"

namespace earlyvision {

/// Half-spectrum of a real plane (rows x (cols/2 + 1)), FFTW layout.
struct Spectrum {
  int rows = 0;
  int cols = 0;  // of the real plane
  std::vector<std::complex<double>> bins;

  int half_cols() const { return cols / 2 + 1; }
  std::complex<double>& at(int r, int c) { return bins[static_cast<std::size_t>(r) * half_cols() + c]; }
  const std::complex<double>& at(int r, int c) const {
    return bins[static_cast<std::size_t>(r) * half_cols() + c];
  }
};

/// Forward real-to-complex 2-D transform (unnormalized).
Spectrum forward_fft(const Plane& plane);

/// Inverse transform including the 1/(rows*cols) normalization.
Plane inverse_fft(const Spectrum& spectrum);

/// Circular cross-correlation of `padded` with `kernel` computed in the
/// frequency domain, returning only the fully overlapping ("valid") region.
/// `padded_spectrum` must be `forward_fft(padded)`.
Plane correlate_valid_fft(const Spectrum& padded_spectrum, const Plane& kernel);

}  // namespace earlyvision
