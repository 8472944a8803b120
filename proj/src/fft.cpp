#include "earlyvision/fft.hpp"

#include <fftw3.h>

#include <memory>
#include <stdexcept>

namespace earlyvision {
namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
struct PlanDestroy {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using PlanPtr = std::unique_ptr<fftw_plan_s, PlanDestroy>;

template <typename T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return std::unique_ptr<T[], FftwFree>(p);
}

}  // namespace

Spectrum forward_fft(const Plane& plane) {
  Spectrum out;
  out.rows = plane.rows();
  out.cols = plane.cols();
  const std::size_t n_real = plane.size();
  const std::size_t n_cplx = static_cast<std::size_t>(out.rows) * out.half_cols();
  auto in = fftw_buffer<double>(n_real);
  auto spec = fftw_buffer<fftw_complex>(n_cplx);
  // ESTIMATE planning keeps the chosen algorithm, and so the bits, fixed.
  PlanPtr plan(fftw_plan_dft_r2c_2d(out.rows, out.cols, in.get(), spec.get(), FFTW_ESTIMATE));
  std::copy(plane.values().begin(), plane.values().end(), in.get());
  fftw_execute(plan.get());
  out.bins.resize(n_cplx);
  for (std::size_t i = 0; i < n_cplx; ++i) out.bins[i] = {spec[i][0], spec[i][1]};
  return out;
}

Plane inverse_fft(const Spectrum& spectrum) {
  const std::size_t n_cplx = spectrum.bins.size();
  auto spec = fftw_buffer<fftw_complex>(n_cplx);
  Plane out(spectrum.rows, spectrum.cols);
  auto real = fftw_buffer<double>(out.size());
  PlanPtr plan(fftw_plan_dft_c2r_2d(spectrum.rows, spectrum.cols, spec.get(), real.get(), FFTW_ESTIMATE));
  for (std::size_t i = 0; i < n_cplx; ++i) {
    spec[i][0] = spectrum.bins[i].real();
    spec[i][1] = spectrum.bins[i].imag();
  }
  fftw_execute(plan.get());
  const double norm = 1.0 / static_cast<double>(out.size());
  auto vals = out.values();
  for (std::size_t i = 0; i < out.size(); ++i) vals[i] = real[i] * norm;
  return out;
}

Plane correlate_valid_fft(const Spectrum& padded_spectrum, const Plane& kernel) {
  const int rows = padded_spectrum.rows;
  const int cols = padded_spectrum.cols;
  if (kernel.rows() > rows || kernel.cols() > cols) {
    throw std::invalid_argument("correlate_valid_fft: kernel larger than input");
  }
  Plane embedded(rows, cols);
  for (int r = 0; r < kernel.rows(); ++r) {
    for (int c = 0; c < kernel.cols(); ++c) embedded(r, c) = kernel(r, c);
  }
  Spectrum k = forward_fft(embedded);
  for (std::size_t i = 0; i < k.bins.size(); ++i) k.bins[i] = padded_spectrum.bins[i] * std::conj(k.bins[i]);
  const Plane full = inverse_fft(k);
  Plane out(rows - kernel.rows() + 1, cols - kernel.cols() + 1);
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) out(r, c) = full(r, c);
  }
  return out;
}

}  // namespace earlyvision
