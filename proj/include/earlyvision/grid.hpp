#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace earlyvision {

/// Square visual-degree grid. Pixel `i` sits at `(i - resolution/2) / px_per_deg`
/// degrees, so the grid center pixel is exactly at 0 deg.
struct VisualGrid {
  double fov_deg = 7.0;
  int resolution_px = 224;

  double px_per_deg() const { return resolution_px / fov_deg; }
  int center_px() const { return resolution_px / 2; }
  double coord_deg(int i) const { return (i - center_px()) / px_per_deg(); }

  void validate() const {
    if (!(fov_deg > 0.0) || resolution_px < 1) {
      throw std::invalid_argument("VisualGrid: fov_deg and resolution_px must be positive");
    }
  }
};

/// Dense row-major 2-D array of doubles.
class Plane {
 public:
  Plane() = default;
  Plane(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Plane: negative extent");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  double mean() const;
  double mean_abs() const;

  bool operator==(const Plane&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Multi-channel image: RGB (3), subcortical output (4) or one plane per filter.
using Channels = std::vector<Plane>;

/// Square region centered on (row, col) with the given half-width.
struct Window {
  int row = 0;
  int col = 0;
  int half = 0;
  int side() const { return 2 * half + 1; }
};

/// Maps an out-of-range index into [0, n) by mirror reflection without
/// repeating the edge sample (numpy "reflect").
int reflect_index(int i, int n);

/// Copy of `src` extended by `pad` pixels on every side with reflected values.
Plane pad_reflect(const Plane& src, int pad);

/// Extracts `win` from `src`, reflecting indices that fall outside the plane.
Plane extract_window(const Plane& src, const Window& win);

}  // namespace earlyvision
