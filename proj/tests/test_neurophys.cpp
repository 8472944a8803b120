#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "earlyvision/cells.hpp"
#include "earlyvision/neurophys.hpp"
#include "earlyvision/random.hpp"

using namespace earlyvision;

namespace {

std::vector<double> cycle(int n, double amp, double offset, double phase) {
  std::vector<double> v;
  for (int k = 0; k < n; ++k) v.push_back(offset + amp * std::sin(2.0 * std::numbers::pi * k / n + phase));
  return v;
}

ResponseCurve curve_from(Experiment e, const std::vector<double>& x, const std::function<double(double)>& f) {
  ResponseCurve c{x, {}, e};
  for (double v : x) c.f1.push_back(f(v));
  return c;
}

// Reads the luminance deviation of the center pixel.
double center_pixel(const Channels& rgb) {
  const int c = rgb[0].rows() / 2;
  return rgb[0](c, c) - 0.5;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_SUITE("neurophys") {

TEST_CASE("f1 amplitude") {
  CHECK(f1_amplitude(std::vector<double>(12, 3.0)) == doctest::Approx(0.0).scale(1.0));
  CHECK(f1_amplitude(cycle(12, 1.0, 0.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f1_amplitude(cycle(12, 0.7, 5.0, 1.1)) == doctest::Approx(0.7).epsilon(1e-14));
  // The second harmonic does not leak into F1.
  std::vector<double> h2;
  for (int k = 0; k < 12; ++k) h2.push_back(std::cos(4.0 * std::numbers::pi * k / 12));
  CHECK(f1_amplitude(h2) == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS(f1_amplitude(std::vector<double>{}));
  CHECK_THROWS(f1_amplitude(std::vector<double>{1.0, std::nan("")}));
}

TEST_CASE("f1 exactness on random cycles") {
  CounterRng rng(42);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(0.01, 10.0);
    const auto v = cycle(12, a, rng.uniform(-5.0, 5.0), rng.uniform(0.0, 6.3));
    CHECK(f1_amplitude(v) == doctest::Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("experiments drive the cell with the stated stimuli") {
  const VisualGrid g{7.0, 64};
  const std::vector<double> contrasts{0.0, 0.1, 0.5, 1.0};
  const auto c = run_contrast_experiment(center_pixel, g, contrasts, 2.0, 7.0);
  CHECK(c.experiment == Experiment::contrast_response);
  for (std::size_t i = 0; i < contrasts.size(); ++i) CHECK(c.f1[i] == doctest::Approx(0.5 * contrasts[i]).epsilon(1e-12));
  const std::vector<double> sfs{0.5, 1.0, 4.0};
  for (double v : run_sf_experiment(center_pixel, g, sfs, 7.0, 0.4).f1) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  const std::vector<double> diameters{0.0, 0.01, 1.0};
  const auto s = run_size_experiment(center_pixel, g, diameters, 1.0, 1.0);
  CHECK(s.f1[0] == 0.0);
  CHECK(s.f1[2] == doctest::Approx(0.5));
  const std::vector<double> unsorted{1.0, 0.5};
  CHECK_THROWS(run_sf_experiment(center_pixel, g, unsorted, 7.0, 1.0));
}

TEST_CASE("saturation index") {
  CHECK(saturation_index([](double c) { return 3.0 * c; }) == doctest::Approx(0.0).scale(1.0));
  CHECK(saturation_index([](double c) { return std::min(c, 0.5); }) == doctest::Approx(1.0));
  CHECK(saturation_index([](double c) { return std::sqrt(c); }) == doctest::Approx(1.0 - (1.0 - std::sqrt(0.5)) / std::sqrt(0.5)));
  CHECK(saturation_index([](double) { return 1.0; }) == 1.0);
  CHECK(saturation_index([](double c) { return c > 0.0 ? 2.0 : 0.0; }) == 1.0);
}

TEST_CASE("dog fit recovers its own model") {
  const double pi = std::numbers::pi;
  const DogFit truth{0.042, 0.162, pi * 0.042 * 0.042, pi * 0.035 * 0.162 * 0.162, 0.0};
  const auto curve = curve_from(Experiment::sf_tuning, log_spaced(0.1, 16.0, 16), [&](double f) { return truth.response(f); });
  const DogFit fit = fit_dog_sf(curve);
  CHECK(rel(fit.r_c_deg, truth.r_c_deg) < 0.01);
  CHECK(rel(fit.r_s_deg, truth.r_s_deg) < 0.01);
  CHECK(fit.residual < 1e-8);
  CHECK(fit.peak_sf(0.1, 16.0) == doctest::Approx(truth.peak_sf(0.1, 16.0)).epsilon(0.01));

  ResponseCurve scaled = curve;
  for (double& v : scaled.f1) v *= 123.0;
  const DogFit fs = fit_dog_sf(scaled);
  CHECK(fs.r_c_deg == doctest::Approx(fit.r_c_deg).epsilon(1e-6));
  CHECK(fs.r_s_deg == doctest::Approx(fit.r_s_deg).epsilon(1e-6));
}

TEST_CASE("area summation fit recovers its own model") {
  AreaSummationFit truth;
  truth.r_e_deg = 0.116;
  truth.r_i_deg = 0.411;
  truth.k_e = 1.0;
  // Solve for the inhibitory gain that gives a suppression index of 0.539.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    truth.k_i = 0.5 * (lo + hi);
    const double peak = truth.response(truth.peak_diameter());
    ((peak - (truth.k_e - truth.k_i)) / peak < 0.539 ? lo : hi) = truth.k_i;
  }
  const auto curve = curve_from(Experiment::size_tuning, log_spaced(0.05, 7.0, 14), [&](double d) { return truth.response(d); });
  const AreaSummationFit fit = fit_area_summation(curve);
  CHECK(fit.inhibition_identified);
  CHECK(rel(fit.r_e_deg, truth.r_e_deg) < 0.01);
  CHECK(rel(fit.r_i_deg, truth.r_i_deg) < 0.01);
  CHECK(std::abs(fit.suppression_index - 0.539) < 0.02);
}

TEST_CASE("area summation without inhibition") {
  AreaSummationFit truth;
  truth.r_e_deg = 0.3;
  truth.r_i_deg = 1.0;
  truth.k_e = 2.0;
  truth.k_i = 0.0;
  const auto curve = curve_from(Experiment::size_tuning, log_spaced(0.05, 7.0, 14), [&](double d) { return truth.response(d); });
  const AreaSummationFit fit = fit_area_summation(curve);
  CHECK(fit.suppression_index == doctest::Approx(0.0).scale(1.0));
  CHECK(rel(fit.r_e_deg, 0.3) < 0.01);
  CHECK_FALSE(fit.inhibition_identified);
}

TEST_CASE("contrast fit recovers its own model") {
  const ContrastFit truth{2.0, 0.3, 2.0, 0.0, 0.0};
  const std::vector<double> cs{0.03, 0.06, 0.125, 0.25, 0.5, 0.75, 1.0};
  const ContrastFit fit = fit_contrast_response(curve_from(Experiment::contrast_response, cs, [&](double c) { return truth.response(c); }));
  CHECK(rel(fit.c50, 0.3) < 0.01);
  CHECK(rel(fit.q, 2.0) < 0.01);
  CHECK(rel(fit.r_max, 2.0) < 0.01);
  const double r0 = 0.0, rh = truth.response(0.5), r1 = truth.response(1.0);
  CHECK(std::abs(fit.saturation_index - (1.0 - (r1 - rh) / (rh - r0))) < 0.01);

  const ContrastFit linear = fit_contrast_response(curve_from(Experiment::contrast_response, cs, [](double c) { return 4.0 * c; }));
  CHECK(linear.saturation_index < 0.01);

  const std::vector<double> no_low{0.2, 0.3, 0.5, 0.7, 0.9, 1.0};
  CHECK_THROWS_AS(fit_contrast_response(curve_from(Experiment::contrast_response, no_low, [](double c) { return c; })),
                  std::invalid_argument);
}

TEST_CASE("flat curves are unidentifiable") {
  const auto flat = curve_from(Experiment::sf_tuning, log_spaced(0.1, 16.0, 16), [](double) { return 0.0; });
  CHECK_THROWS_AS(fit_dog_sf(flat), FitError);
  const auto few = curve_from(Experiment::size_tuning, log_spaced(0.1, 7.0, 4), [](double d) { return d; });
  CHECK_THROWS(fit_area_summation(few));
}

TEST_CASE("curve and sweep validation") {
  ResponseCurve bad{{1.0, 2.0}, {1.0}, Experiment::sf_tuning};
  CHECK_THROWS(bad.validate());
  bad.f1 = {1.0, -1.0};
  CHECK_THROWS(bad.validate());
  SweepConfig s;
  CHECK(s.sf_cpd.size() == 16);
  CHECK(s.sf_cpd.front() == doctest::Approx(0.1));
  CHECK(s.sf_cpd.back() == 16.0);
  CHECK(s.diameter_deg.back() == 7.0);
  CHECK_NOTHROW(s.validate());
  s.sf_cpd = {1.0, 2.0, 3.0};
  CHECK_THROWS(s.validate());
  s = SweepConfig{};
  s.contrast = {0.5, 0.2};
  CHECK_THROWS(s.validate());
  CHECK(experiment_from_string(to_string(Experiment::size_tuning)) == Experiment::size_tuning);
}

TEST_CASE("linear dog cell follows the analytic transfer function") {
  const VisualGrid g;
  PathwayParams p;
  p.r_c_deg = 0.08;
  p.r_s_deg = 0.4;
  p.k_ratio = -0.02;
  const CellFn cell = linear_dog_cell(p, g);
  const double ppd = g.px_per_deg();
  const SweepConfig sweeps;
  const auto curve = run_sf_experiment(cell, g, sweeps.sf_cpd, 7.0, 1.0);
  std::vector<double> expected;
  for (double f : sweeps.sf_cpd) {
    const double rc = p.r_c_deg * ppd, rs = p.r_s_deg * ppd;
    const double h = std::numbers::pi * rc * rc * std::exp(-std::pow(std::numbers::pi * f * p.r_c_deg, 2)) -
                     0.02 * std::numbers::pi * rs * rs * std::exp(-std::pow(std::numbers::pi * f * p.r_s_deg, 2));
    expected.push_back(0.5 * std::abs(h));
  }
  double ss = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    ss += std::pow(curve.f1[i] - expected[i], 2);
    peak = std::max(peak, expected[i]);
  }
  CHECK(std::sqrt(ss / static_cast<double>(expected.size())) / peak < 0.01);
  const auto zero = run_sf_experiment(cell, g, sweeps.sf_cpd, 7.0, 0.0);
  for (double v : zero.f1) CHECK(v == 0.0);
}

TEST_CASE("linear cell contrast response is linear and unsaturated") {
  const VisualGrid g;
  PathwayParams p;
  p.r_c_deg = 0.08;
  p.r_s_deg = 0.4;
  const std::vector<double> cs{0.03, 0.06, 0.125, 0.25, 0.5, 0.75, 1.0};
  const auto curve = run_contrast_experiment(linear_dog_cell(p, g), g, cs, 1.0, 7.0);
  for (std::size_t i = 0; i < cs.size(); ++i) CHECK(rel(curve.f1[i], curve.f1.back() * cs[i]) < 0.01);
  CHECK(fit_contrast_response(curve).saturation_index < 0.05);
}

TEST_CASE("negligible surround gives negligible suppression") {
  const VisualGrid g;
  PathwayParams p;
  p.r_c_deg = 0.1;
  p.r_s_deg = 0.5;
  p.k_ratio = -1e-6;
  const PropertyReport rep = measure_properties(linear_dog_cell(p, g), g);
  REQUIRE_FALSE(rep.errors[4].has_value());
  CHECK(rep.properties.suppression_index < 0.05);
}

TEST_CASE("measured properties ignore the response scale") {
  const VisualGrid g;
  PathwayParams p;
  p.r_c_deg = 0.06;
  p.r_s_deg = 0.35;
  p.k_ratio = -0.03;
  const CellFn base = pathway_cell(p, g);
  const CellFn scaled = [base](const Channels& rgb) { return 7.5 * base(rgb); };
  const PropertyReport a = measure_properties(base, g);
  const PropertyReport b = measure_properties(scaled, g);
  const auto va = a.properties.values(), vb = b.properties.values();
  for (std::size_t i = 0; i < va.size(); ++i) {
    CHECK(a.errors[i].has_value() == b.errors[i].has_value());
    CHECK(vb[i] == doctest::Approx(va[i]).epsilon(1e-6));
  }
}

}
