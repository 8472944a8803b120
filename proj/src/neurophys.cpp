#include "earlyvision/neurophys.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "earlyvision/optimize.hpp"
#include "earlyvision/stimuli.hpp"

namespace earlyvision {

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::sf_tuning: return "sf_tuning";
    case Experiment::size_tuning: return "size_tuning";
    case Experiment::contrast_response: return "contrast_response";
  }
  return "?";
}

Experiment experiment_from_string(const std::string& s) {
  if (s == "sf_tuning") return Experiment::sf_tuning;
  if (s == "size_tuning") return Experiment::size_tuning;
  if (s == "contrast_response") return Experiment::contrast_response;
  throw std::invalid_argument("unknown experiment '" + s + "'");
}

void ResponseCurve::validate() const {
  if (abscissa.size() != f1.size()) throw std::invalid_argument("ResponseCurve: abscissa and f1 lengths differ");
  for (std::size_t i = 1; i < abscissa.size(); ++i) {
    if (!(abscissa[i] > abscissa[i - 1])) throw std::invalid_argument("ResponseCurve: abscissa must increase");
  }
  for (double v : f1) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("ResponseCurve: f1 values must be finite and >= 0");
  }
}

const std::array<std::string, PropertySet::kCount>& PropertySet::names() {
  static const std::array<std::string, kCount> n{"center_radius_deg",     "surround_radius_deg",
                                                 "excitation_radius_deg", "inhibition_radius_deg",
                                                 "suppression_index",     "saturation_index"};
  return n;
}

std::array<double, PropertySet::kCount> PropertySet::values() const {
  return {center_radius_deg,     surround_radius_deg, excitation_radius_deg,
          inhibition_radius_deg, suppression_index,   saturation_index};
}

PropertySet PropertySet::from_values(const std::array<double, kCount>& v) {
  return PropertySet{v[0], v[1], v[2], v[3], v[4], v[5]};
}

double f1_amplitude(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("f1_amplitude: no samples");
  const std::size_t n = samples.size();
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(samples[k])) throw std::invalid_argument("f1_amplitude: non-finite sample");
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    acc += samples[k] * std::complex<double>(std::cos(angle), std::sin(angle));
  }
  return 2.0 / static_cast<double>(n) * std::abs(acc);
}

namespace {

double grating_f1(const CellFn& cell, const VisualGrid& grid, const GratingSpec& spec) {
  const GratingFrames frames = render_grating(spec, grid);
  std::vector<double> resp;
  resp.reserve(frames.frames.size());
  for (const Channels& f : frames.frames) resp.push_back(cell(f));
  return f1_amplitude(resp);
}

void require_increasing(std::span<const double> xs, const char* what) {
  if (xs.empty()) throw std::invalid_argument(std::string(what) + ": empty sweep");
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw std::invalid_argument(std::string(what) + ": sweep must be increasing");
  }
}

}  // namespace

ResponseCurve run_sf_experiment(const CellFn& cell, const VisualGrid& grid, std::span<const double> sf_list,
                                double diameter_deg, double contrast) {
  require_increasing(sf_list, "run_sf_experiment");
  ResponseCurve curve{{sf_list.begin(), sf_list.end()}, {}, Experiment::sf_tuning};
  for (double sf : sf_list) {
    curve.f1.push_back(grating_f1(cell, grid, GratingSpec{.diameter_deg = diameter_deg, .sf_cpd = sf, .contrast = contrast}));
  }
  return curve;
}

ResponseCurve run_size_experiment(const CellFn& cell, const VisualGrid& grid, std::span<const double> diameter_list,
                                  double sf_cpd, double contrast) {
  require_increasing(diameter_list, "run_size_experiment");
  ResponseCurve curve{{diameter_list.begin(), diameter_list.end()}, {}, Experiment::size_tuning};
  for (double d : diameter_list) {
    curve.f1.push_back(grating_f1(cell, grid, GratingSpec{.diameter_deg = d, .sf_cpd = sf_cpd, .contrast = contrast}));
  }
  return curve;
}

ResponseCurve run_contrast_experiment(const CellFn& cell, const VisualGrid& grid,
                                      std::span<const double> contrast_list, double sf_cpd, double diameter_deg) {
  require_increasing(contrast_list, "run_contrast_experiment");
  ResponseCurve curve{{contrast_list.begin(), contrast_list.end()}, {}, Experiment::contrast_response};
  for (double c : contrast_list) {
    curve.f1.push_back(grating_f1(cell, grid, GratingSpec{.diameter_deg = diameter_deg, .sf_cpd = sf_cpd, .contrast = c}));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

/// Log-scale box transform: unconstrained z <-> value in [lo, hi].
struct LogBox {
  double lo;
  double hi;
  double to_value(double z) const { return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * sigmoid(z)); }
  double to_z(double v) const {
    const double p = (std::log(v) - std::log(lo)) / (std::log(hi) - std::log(lo));
    return logit(std::clamp(p, 1e-9, 1.0 - 1e-9));
  }
  /// True when v sits within a relative hair of either bound.
  bool pinned(double v) const { return v < lo * 1.01 || v > hi / 1.01; }
};

constexpr LogBox kDogCenterBox{1e-3, 10.0};
constexpr LogBox kRatioBox{1.001, 1000.0};
constexpr LogBox kAreaRadiusBox{1e-3, 20.0};
constexpr LogBox kC50Box{1e-4, 1e4};
constexpr LogBox kExponentBox{0.05, 20.0};

struct Normalized {
  std::vector<double> x;
  std::vector<double> y;
  double scale = 1.0;
  double sum_sq = 0.0;
};

Normalized normalize_curve(const ResponseCurve& curve, Experiment expected, std::size_t min_points) {
  curve.validate();
  if (curve.experiment != expected) throw std::invalid_argument("fit: curve is from the wrong experiment");
  if (curve.size() < min_points) {
    throw std::invalid_argument("fit: need at least " + std::to_string(min_points) + " points");
  }
  const auto [lo, hi] = std::minmax_element(curve.f1.begin(), curve.f1.end());
  if (!(*hi > 0.0) || (*hi - *lo) <= 1e-9 * *hi) throw FitError("fit: response curve is flat (unidentifiable)", 0.0);
  Normalized n{curve.abscissa, curve.f1, *hi, 0.0};
  for (double& v : n.y) {
    v /= n.scale;
    n.sum_sq += v * v;
  }
  return n;
}

template <typename Model>
double relative_sse(const Normalized& data, const Model& model) {
  double sse = 0.0;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const double r = model(data.x[i]) - data.y[i];
    sse += r * r;
  }
  return sse / data.sum_sq;
}

MinimizeResult best_of_starts(const Objective& objective, const std::vector<std::vector<double>>& starts) {
  MinimizeResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    MinimizeResult r = nelder_mead_restarted(objective, s, 0.5);
    if (r.value < best.value) best = std::move(r);
  }
  return best;
}

double dog_eval(double f, double rc, double rs, double kc, double ks) {
  const double a = std::numbers::pi * f * rc;
  const double b = std::numbers::pi * f * rs;
  return kc * std::exp(-a * a) - ks * std::exp(-b * b);
}

/// Maximizes a unimodal-near-the-optimum function of log(x) on [lo, hi].
double argmax_log(const std::function<double(double)>& f, double lo, double hi) {
  constexpr int kGrid = 400;
  const double llo = std::log(lo);
  const double lhi = std::log(hi);
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double v = f(std::exp(llo + (lhi - llo) * i / kGrid));
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  double a = llo + (lhi - llo) * std::max(best - 1, 0) / kGrid;
  double b = llo + (lhi - llo) * std::min(best + 1, kGrid) / kGrid;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  for (int it = 0; it < 80; ++it) {
    if (f(std::exp(c)) > f(std::exp(d))) {
      b = d;
    } else {
      a = c;
    }
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return std::exp(0.5 * (a + b));
}

}  // namespace

double DogFit::response(double sf_cpd) const { return std::abs(dog_eval(sf_cpd, r_c_deg, r_s_deg, gain_c, gain_s)); }

double DogFit::peak_sf(double lo, double hi) const {
  return argmax_log([this](double f) { return response(f); }, lo, hi);
}

DogFit fit_dog_sf(const ResponseCurve& curve) {
  const Normalized data = normalize_curve(curve, Experiment::sf_tuning, 6);
  struct Decoded {
    double rc, rs, kc, ks;
  };
  auto decode = [](std::span<const double> z) {
    const double rc = kDogCenterBox.to_value(z[0]);
    return Decoded{rc, rc * kRatioBox.to_value(z[1]), std::exp(z[2]), std::exp(z[3])};
  };
  const Objective objective = [&](std::span<const double> z) {
    const Decoded p = decode(z);
    return relative_sse(data, [&](double f) { return std::abs(dog_eval(f, p.rc, p.rs, p.kc, p.ks)); });
  };

  std::vector<std::vector<double>> starts;
  const std::size_t n = data.x.size();
  for (double rc : {0.02, 0.05, 0.12, 0.3}) {
    for (double ratio : {3.0, 6.0, 10.0, 16.0}) {
      // Gains from least squares on the signed model; the data are |DoG|, so
      // try every low-frequency sign flip (surround-dominated curves cross zero).
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = dog_eval(data.x[i], rc, rc * ratio, 1.0, 0.0);
        b[i] = dog_eval(data.x[i], rc, rc * ratio, 0.0, -1.0);
      }
      double kc = 1.0, ks = 0.1, best_sse = INFINITY;
      for (std::size_t flip = 0; flip <= n; ++flip) {
        double saa = 0, sab = 0, sbb = 0, sya = 0, syb = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double y = i < flip ? -data.y[i] : data.y[i];
          saa += a[i] * a[i];
          sab += a[i] * b[i];
          sbb += b[i] * b[i];
          sya += y * a[i];
          syb += y * b[i];
        }
        const double det = saa * sbb - sab * sab;
        if (det == 0.0) continue;
        const double c = (sya * sbb - syb * sab) / det;
        const double s = -(saa * syb - sab * sya) / det;
        if (c <= 0.0 || s <= 0.0) continue;
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) sse += std::pow(std::abs(c * a[i] - s * b[i]) - data.y[i], 2);
        if (sse < best_sse) {
          best_sse = sse;
          kc = c;
          ks = s;
        }
      }
      kc = std::max(kc, 1e-3);
      ks = std::clamp(ks, 1e-3 * kc, 1e3);
      starts.push_back({kDogCenterBox.to_z(rc), kRatioBox.to_z(ratio), std::log(kc), std::log(ks)});
    }
  }
  const MinimizeResult best = best_of_starts(objective, starts);
  const Decoded p = decode(best.x);
  DogFit fit{p.rc, p.rs, p.kc * data.scale, p.ks * data.scale, best.value};
  if (!std::isfinite(best.value) || kDogCenterBox.pinned(p.rc) || kRatioBox.pinned(p.rs / p.rc)) {
    throw FitError("fit_dog_sf: fit did not converge inside the radius bounds", best.value);
  }
  return fit;
}

double AreaSummationFit::response(double d) const {
  const double e = std::erf(d / r_e_deg);
  const double i = std::erf(d / r_i_deg);
  return k_e * e * e - k_i * i * i;
}

double AreaSummationFit::peak_diameter() const {
  return argmax_log([this](double d) { return response(d); }, 1e-3 * r_e_deg, 50.0 * r_i_deg);
}

namespace {

AreaSummationFit fit_excitation_only(const Normalized& data) {
  const Objective objective = [&](std::span<const double> z) {
    const double re = kAreaRadiusBox.to_value(z[0]);
    const double ke = std::exp(z[1]);
    return relative_sse(data, [&](double d) {
      const double e = std::erf(d / re);
      return ke * e * e;
    });
  };
  std::vector<std::vector<double>> starts;
  for (double re : {0.05, 0.15, 0.4, 1.0}) starts.push_back({kAreaRadiusBox.to_z(re), std::log(1.0)});
  const MinimizeResult best = best_of_starts(objective, starts);
  AreaSummationFit fit;
  fit.r_e_deg = fit.r_i_deg = kAreaRadiusBox.to_value(best.x[0]);
  fit.k_e = std::exp(best.x[1]) * data.scale;
  fit.k_i = 0.0;
  fit.residual = best.value;
  return fit;
}

}  // namespace

AreaSummationFit fit_area_summation(const ResponseCurve& curve) {
  const Normalized data = normalize_curve(curve, Experiment::size_tuning, 6);
  auto decode = [](std::span<const double> z) {
    AreaSummationFit f;
    f.r_e_deg = kAreaRadiusBox.to_value(z[0]);
    f.r_i_deg = f.r_e_deg * kRatioBox.to_value(z[1]);
    f.k_e = std::exp(z[2]);
    f.k_i = f.k_e * sigmoid(z[3]);  // 0 <= Ki <= Ke keeps R(inf) >= 0
    return f;
  };
  const Objective objective = [&](std::span<const double> z) {
    const AreaSummationFit f = decode(z);
    return relative_sse(data, [&](double d) { return f.response(d); });
  };
  std::vector<std::vector<double>> starts;
  for (double re : {0.05, 0.15, 0.4, 1.0}) {
    for (double ratio : {2.0, 5.0}) {
      starts.push_back({kAreaRadiusBox.to_z(re), kRatioBox.to_z(ratio), std::log(1.5), logit(0.3)});
    }
  }
  const MinimizeResult best = best_of_starts(objective, starts);
  AreaSummationFit fit = decode(best.x);
  fit.k_e *= data.scale;
  fit.k_i *= data.scale;
  fit.residual = best.value;
  const bool inhibition_matters = fit.k_i > 1e-4 * fit.k_e;
  const bool converged = std::isfinite(best.value) && !kAreaRadiusBox.pinned(fit.r_e_deg);
  if (!converged || (inhibition_matters && kRatioBox.pinned(fit.r_i_deg / fit.r_e_deg))) {
    // A collapsed inhibitory term (r_i -> r_e with cancelling gains) means the
    // curve carries no identifiable inhibition: refit with K_i = 0.
    fit = fit_excitation_only(data);
    if (!std::isfinite(fit.residual) || kAreaRadiusBox.pinned(fit.r_e_deg)) {
      throw FitError("fit_area_summation: fit did not converge inside the radius bounds", best.value);
    }
  }
  fit.inhibition_identified = fit.k_i > 1e-4 * fit.k_e;
  const double peak = std::max(fit.response(fit.peak_diameter()), fit.k_e - fit.k_i);
  const double asymptote = fit.k_e - fit.k_i;
  fit.suppression_index = peak > 0.0 ? std::clamp((peak - asymptote) / peak, 0.0, 1.0) : 0.0;
  return fit;
}

double ContrastFit::response(double c) const {
  if (c <= 0.0) return 0.0;
  const double cq = std::pow(c, q);
  return r_max * cq / (cq + std::pow(c50, q));
}

double saturation_index(const std::function<double(double)>& response) {
  const double r0 = response(0.0);
  const double rh = response(0.5);
  const double r1 = response(1.0);
  if (!(rh - r0 > 0.0)) return 1.0;
  return std::clamp(1.0 - (r1 - rh) / (rh - r0), 0.0, 1.0);
}

ContrastFit fit_contrast_response(const ResponseCurve& curve) {
  const Normalized data = normalize_curve(curve, Experiment::contrast_response, 5);
  if (data.x.front() > 0.1 || std::abs(data.x.back() - 1.0) > 1e-12) {
    throw std::invalid_argument("fit_contrast_response: sweep must include c <= 0.1 and c = 1");
  }
  auto decode = [](std::span<const double> z) {
    ContrastFit f;
    f.r_max = std::exp(z[0]);
    f.c50 = kC50Box.to_value(z[1]);
    f.q = kExponentBox.to_value(z[2]);
    return f;
  };
  const Objective objective = [&](std::span<const double> z) {
    const ContrastFit f = decode(z);
    return relative_sse(data, [&](double c) { return f.response(c); });
  };
  std::vector<std::vector<double>> starts;
  for (double c50 : {0.05, 0.2, 0.5, 2.0}) {
    for (double q : {1.0, 2.5}) {
      const double rmax = 1.0 + std::pow(c50, q);
      starts.push_back({std::log(rmax), kC50Box.to_z(c50), kExponentBox.to_z(q)});
    }
  }
  const MinimizeResult best = best_of_starts(objective, starts);
  if (!std::isfinite(best.value)) throw FitError("fit_contrast_response: fit did not converge", best.value);
  ContrastFit fit = decode(best.x);
  fit.r_max *= data.scale;
  fit.residual = best.value;
  fit.saturation_index = saturation_index([&](double c) { return fit.response(c); });
  return fit;
}

// ---------------------------------------------------------------------------
// Orchestration

std::vector<double> log_spaced(double lo, double hi, int n) {
  if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("log_spaced: invalid range");
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  v.back() = hi;
  return v;
}

SweepConfig::SweepConfig() : sf_cpd(log_spaced(0.1, 16.0, 16)), diameter_deg(log_spaced(0.05, 7.0, 14)) {}

void SweepConfig::validate() const {
  require_increasing(sf_cpd, "SweepConfig.sf_cpd");
  require_increasing(diameter_deg, "SweepConfig.diameter_deg");
  if (sf_cpd.size() < 6 || diameter_deg.size() < 6 || contrast.empty()) {
    throw std::invalid_argument("SweepConfig: need >= 6 SF, >= 6 diameter and >= 1 contrast points");
  }
  for (std::size_t i = 0; i < contrast.size(); ++i) {
    if (!(contrast[i] >= 0.0 && contrast[i] <= 1.0) || (i > 0 && contrast[i] < contrast[i - 1])) {
      throw std::invalid_argument("SweepConfig.contrast: values must be nondecreasing within [0, 1]");
    }
  }
  for (double c : {sf_contrast, size_contrast}) {
    if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("SweepConfig: contrasts must lie in [0, 1]");
  }
  if (!(sf_diameter_deg >= 0.0)) throw std::invalid_argument("SweepConfig: sf_diameter_deg must be >= 0");
}

bool PropertyReport::complete() const { return failures() == 0; }

std::size_t PropertyReport::failures() const {
  return static_cast<std::size_t>(std::count_if(errors.begin(), errors.end(), [](const auto& e) { return e.has_value(); }));
}

namespace {

double measured_argmax(const ResponseCurve& c) {
  const auto it = std::max_element(c.f1.begin(), c.f1.end());
  return c.abscissa[static_cast<std::size_t>(it - c.f1.begin())];
}

}  // namespace

PropertyReport measure_properties(const CellFn& cell, const VisualGrid& grid, const SweepConfig& sweeps) {
  sweeps.validate();
  PropertyReport rep;

  rep.sf_curve = run_sf_experiment(cell, grid, sweeps.sf_cpd, sweeps.sf_diameter_deg, sweeps.sf_contrast);
  rep.peak_sf_cpd = measured_argmax(rep.sf_curve);
  try {
    rep.dog_fit = fit_dog_sf(rep.sf_curve);
    rep.properties.center_radius_deg = rep.dog_fit->r_c_deg;
    rep.properties.surround_radius_deg = rep.dog_fit->r_s_deg;
    rep.peak_sf_cpd = rep.dog_fit->peak_sf(sweeps.sf_cpd.front(), sweeps.sf_cpd.back());
  } catch (const std::exception& e) {
    rep.errors[0] = rep.errors[1] = e.what();
  }

  rep.size_curve = run_size_experiment(cell, grid, sweeps.diameter_deg, rep.peak_sf_cpd, sweeps.size_contrast);
  rep.peak_diameter_deg = measured_argmax(rep.size_curve);
  try {
    rep.area_fit = fit_area_summation(rep.size_curve);
    rep.properties.excitation_radius_deg = rep.area_fit->r_e_deg;
    if (rep.area_fit->inhibition_identified) {
      rep.properties.inhibition_radius_deg = rep.area_fit->r_i_deg;
    } else {
      rep.errors[3] = "inhibition radius unidentifiable: size curve shows no inhibition";
    }
    rep.properties.suppression_index = rep.area_fit->suppression_index;
    rep.peak_diameter_deg =
        std::clamp(rep.area_fit->peak_diameter(), sweeps.diameter_deg.front(), sweeps.diameter_deg.back());
  } catch (const std::exception& e) {
    rep.errors[2] = rep.errors[3] = rep.errors[4] = e.what();
  }

  rep.contrast_curve = run_contrast_experiment(cell, grid, sweeps.contrast, rep.peak_sf_cpd, rep.peak_diameter_deg);
  try {
    rep.contrast_fit = fit_contrast_response(rep.contrast_curve);
    rep.properties.saturation_index = rep.contrast_fit->saturation_index;
  } catch (const std::exception& e) {
    rep.errors[5] = e.what();
  }
  return rep;
}

}  // namespace earlyvision
