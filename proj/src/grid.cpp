#include "earlyvision/grid.hpp"

#include <cmath>

namespace earlyvision {

double Plane::mean() const {
  if (data_.empty()) return 0.0;
  // Accumulated about the first sample so a uniform plane returns its value exactly.
  const double ref = data_.front();
  double s = 0.0;
  for (double v : data_) s += v - ref;
  return ref + s / static_cast<double>(data_.size());
}

double Plane::mean_abs() const {
  if (data_.empty()) return 0.0;
  double s = 0.0;
  for (double v : data_) s += std::abs(v);
  return s / static_cast<double>(data_.size());
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Plane pad_reflect(const Plane& src, int pad) {
  if (pad < 0) throw std::invalid_argument("pad_reflect: negative padding");
  Plane out(src.rows() + 2 * pad, src.cols() + 2 * pad);
  for (int r = 0; r < out.rows(); ++r) {
    const double* in_row = src.row(reflect_index(r - pad, src.rows()));
    double* o = out.row(r);
    for (int c = 0; c < out.cols(); ++c) o[c] = in_row[reflect_index(c - pad, src.cols())];
  }
  return out;
}

Plane extract_window(const Plane& src, const Window& win) {
  Plane out(win.side(), win.side());
  for (int r = 0; r < win.side(); ++r) {
    const double* in_row = src.row(reflect_index(win.row - win.half + r, src.rows()));
    double* o = out.row(r);
    for (int c = 0; c < win.side(); ++c) {
      o[c] = in_row[reflect_index(win.col - win.half + c, src.cols())];
    }
  }
  return out;
}

}  // namespace earlyvision
