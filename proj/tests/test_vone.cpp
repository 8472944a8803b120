#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "earlyvision/cells.hpp"
#include "earlyvision/neurophys.hpp"
#include "earlyvision/stimuli.hpp"
#include "earlyvision/vone.hpp"

using namespace earlyvision;

namespace {

Plane patch_at(const Plane& src, int row, int col, int half) { return extract_window(src, Window{row, col, half}); }

Plane negated(Plane p) {
  for (double& v : p.values()) v = -v;
  return p;
}

}  // namespace

TEST_SUITE("vone") {

TEST_CASE("gabor params validation") {
  GaborParams g;
  CHECK_NOTHROW(g.validate());
  g.sf_cpd = 0.4;
  CHECK_THROWS(g.validate());
  g.sf_cpd = 8.5;
  CHECK_THROWS(g.validate());
  g = GaborParams{};
  g.input_channel = 4;
  CHECK_THROWS(g.validate());
  g = GaborParams{};
  g.sigma_y_deg = 0.0;
  CHECK_THROWS(g.validate());
  CHECK(envelope_sigma_for_sf(2.0) == doctest::Approx(0.2));
  CHECK(gabor_cell_type_from_string("complex") == GaborCellType::complex);
  CHECK(front_end_mode_from_string("cascade") == FrontEndMode::cascade);
  CHECK_THROWS(front_end_mode_from_string("bogus"));
}

TEST_CASE("filter bank sampling statistics") {
  GfbSpec spec;
  spec.n_channels = 4000;
  spec.seed = 12;
  const auto bank = sample_gfb(spec);
  REQUIRE(bank.size() == 4000);
  double log_sum = 0.0, orient_sum = 0.0, phase_sum = 0.0;
  std::array<int, 4> per_channel{};
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& g = bank[i];
    CHECK((g.sf_cpd >= 0.5 && g.sf_cpd <= 8.0));
    CHECK((g.orientation_rad >= 0.0 && g.orientation_rad < std::numbers::pi));
    CHECK((g.phase_rad >= 0.0 && g.phase_rad < 2.0 * std::numbers::pi));
    CHECK(g.sigma_x_deg == envelope_sigma_for_sf(g.sf_cpd));
    CHECK(g.cell_type == (i < 2000 ? GaborCellType::simple : GaborCellType::complex));
    log_sum += std::log2(g.sf_cpd);
    orient_sum += g.orientation_rad;
    phase_sum += g.phase_rad;
    ++per_channel[static_cast<std::size_t>(g.input_channel)];
  }
  // log2 sf uniform on [-1, 3]: mean 1, sd 4/sqrt(12).
  CHECK(std::abs(log_sum / 4000.0 - 1.0) < 4.0 * (4.0 / std::sqrt(12.0)) / std::sqrt(4000.0));
  CHECK(std::abs(orient_sum / 4000.0 - std::numbers::pi / 2.0) < 0.07);
  CHECK(std::abs(phase_sum / 4000.0 - std::numbers::pi) < 0.14);
  for (int n : per_channel) CHECK(std::abs(n - 1000) < 120);

  GfbSpec full;
  full.n_channels = 512;
  std::array<int, 8> bins{};
  for (const auto& g : sample_gfb(full)) ++bins[static_cast<std::size_t>(std::min(7.0, g.orientation_rad / (std::numbers::pi / 8.0)))];
  for (int b : bins) CHECK(b <= 128);

  CHECK(sample_gfb(GfbSpec{}) == sample_gfb(GfbSpec{}));
  GfbSpec other;
  other.seed = 1;
  CHECK(sample_gfb(other) != sample_gfb(GfbSpec{}));
  GfbSpec odd;
  odd.n_channels = 7;
  CHECK_THROWS(sample_gfb(odd));
}

TEST_CASE("gabor kernels") {
  GaborParams g;
  g.orientation_rad = 0.7;
  g.phase_rad = 0.3;
  const VisualGrid grid;
  const GaborUnit u = make_gabor_unit(g, grid);
  CHECK(u.half() == static_cast<int>(std::ceil(3.0 * 0.2 * 32.0)));
  const int h = u.half();
  CHECK(u.even(h, h) == doctest::Approx(std::cos(0.3)));
  CHECK(u.odd(h, h) == doctest::Approx(std::cos(0.3 + std::numbers::pi / 2.0)));
  // Point symmetry of the envelope and carrier: even(-p) = cos(-wu + phi).
  for (int i = 0; i < u.even.rows(); i += 5) {
    for (int j = 0; j < u.even.cols(); j += 7) {
      const double y = (i - h) / 32.0, x = (j - h) / 32.0;
      const double uu = -x * std::sin(0.7) + y * std::cos(0.7);
      const double vv = x * std::cos(0.7) + y * std::sin(0.7);
      const double env = std::exp(-(uu * uu + vv * vv) / (2.0 * 0.04));
      CHECK(u.even(i, j) == doctest::Approx(env * std::cos(2.0 * std::numbers::pi * 2.0 * uu + 0.3)).epsilon(1e-12));
    }
  }
}

TEST_CASE("simple cell rectifies the anti-preferred stimulus") {
  GaborParams g;
  g.phase_rad = 0.9;
  const GaborUnit u = make_gabor_unit(g, {});
  double energy = 0.0;
  for (double v : u.even.values()) energy += v * v;
  CHECK(unit_response(u, u.even) == doctest::Approx(energy));
  CHECK(unit_response(u, negated(u.even)) == 0.0);
  CHECK_THROWS(unit_response(u, Plane(3, 3)));
}

TEST_CASE("complex cell is phase invariant to a drifting grating") {
  GaborParams g;
  g.cell_type = GaborCellType::complex;
  g.orientation_rad = 0.5;
  g.sf_cpd = 3.0;
  g.sigma_x_deg = g.sigma_y_deg = envelope_sigma_for_sf(3.0);
  const VisualGrid grid;
  const GaborUnit u = make_gabor_unit(g, grid);
  GratingSpec s;
  s.sf_cpd = 3.0;
  s.orientation_rad = 0.5;
  const auto frames = render_grating(s, grid);
  std::vector<double> resp;
  for (const auto& f : frames.frames) {
    const Channels in = bypass_input(f);
    resp.push_back(unit_response(u, patch_at(in[3], grid.center_px(), grid.center_px(), u.half())));
  }
  double mean = 0.0;
  for (double r : resp) mean += r / static_cast<double>(resp.size());
  CHECK(mean > 0.0);
  CHECK(f1_amplitude(resp) / mean < 0.05);
  for (double phase : {0.37, 1.9, 4.4}) {
    // Bypass luminance of the grating at an arbitrary phase: sin(2 pi sf u + phase).
    Plane patch(u.even.rows(), u.even.cols());
    for (int i = 0; i < patch.rows(); ++i) {
      for (int j = 0; j < patch.cols(); ++j) {
        const double x = (j - u.half()) / grid.px_per_deg(), y = (i - u.half()) / grid.px_per_deg();
        patch(i, j) = std::sin(2.0 * std::numbers::pi * 3.0 * (-x * std::sin(0.5) + y * std::cos(0.5)) + phase);
      }
    }
    CHECK(std::abs(unit_response(u, patch) - resp[0]) < 0.01 * resp[0]);
  }

  // The simple counterpart follows the grating's phase.
  GaborParams simple = g;
  simple.cell_type = GaborCellType::simple;
  const GaborUnit us = make_gabor_unit(simple, grid);
  std::vector<double> rs;
  for (const auto& f : frames.frames) {
    rs.push_back(unit_response(us, patch_at(bypass_input(f)[3], grid.center_px(), grid.center_px(), us.half())));
  }
  double ms = 0.0;
  for (double r : rs) ms += r / static_cast<double>(rs.size());
  CHECK(f1_amplitude(rs) / ms > 1.0);
}

TEST_CASE("bypass input") {
  Channels rgb{Plane(2, 2, 0.5), Plane(2, 2, 1.0), Plane(2, 2, 0.0)};
  const Channels b = bypass_input(rgb);
  REQUIRE(b.size() == 4);
  CHECK(b[0](0, 0) == 0.0);
  CHECK(b[1](1, 1) == 1.0);
  CHECK(b[2](0, 1) == -1.0);
  CHECK(b[3](1, 0) == doctest::Approx(0.0));
  CHECK_THROWS(bypass_input(Channels{Plane(2, 2)}));
}

TEST_CASE("filter bank forward matches per-unit responses") {
  const VisualGrid grid{7.0, 64};
  GfbSpec spec;
  spec.n_channels = 6;
  spec.seed = 3;
  spec.grid = grid;
  auto bank = sample_gfb(spec);
  const auto img = render_natural_batch(4, 1, grid)[0];
  const Channels in = bypass_input(img);
  const Channels out = gfb_forward(in, bank, grid);
  REQUIRE(out.size() == bank.size());
  for (std::size_t f = 0; f < bank.size(); ++f) {
    const GaborUnit u = make_gabor_unit(bank[f], grid);
    for (auto [r, c] : {std::pair{0, 0}, std::pair{32, 32}, std::pair{63, 5}, std::pair{17, 50}}) {
      const double direct = unit_response(u, patch_at(in[static_cast<std::size_t>(bank[f].input_channel)], r, c, u.half()));
      CHECK(out[f](r, c) == doctest::Approx(direct).epsilon(1e-9).scale(1.0));
    }
  }
  for (const Plane& p : gfb_forward(Channels(4, Plane(64, 64)), bank, grid)) {
    for (double v : p.values()) CHECK(v == 0.0);
  }
  bank[0].input_channel = 3;
  CHECK_THROWS(gfb_forward(Channels{in[0]}, bank, grid));
}

TEST_CASE("block calibration and noise") {
  const VisualGrid grid{7.0, 64};
  GfbSpec spec;
  spec.n_channels = 4;
  spec.grid = grid;
  VOneBlock block(sample_gfb(spec), grid);
  std::vector<Channels> inputs;
  for (const auto& img : render_natural_batch(5, 2, grid)) inputs.push_back(bypass_input(img));
  block.calibrate(inputs);
  double total = 0.0, count = 0.0;
  for (const auto& in : inputs) {
    for (const Plane& p : block.forward(in)) {
      for (double v : p.values()) total += std::abs(v);
      count += static_cast<double>(p.size());
    }
  }
  CHECK(total / count == doctest::Approx(kVOneSpikeTarget).epsilon(1e-12));

  CHECK_THROWS(block.set_cortical_fano(-1.0));
  block.set_cortical_fano(0.5);
  const auto a = block.forward(inputs[0], true, 9);
  const auto b = block.forward(inputs[0], true, 9);
  CHECK(a == b);
  CHECK(a != block.forward(inputs[0]));
}

TEST_CASE("cascade Fano calibration") {
  const VisualGrid grid{7.0, 96};
  PathwayParams p;
  p.r_c_deg = 0.042;
  p.r_s_deg = 0.279;
  p.k_ratio = -0.035;
  PathwayParams m{1.0, 0.063, 0.602, -0.02, 0.6, 0.1, 0.5, CellClass::M};
  SubcorticalBlock block(p, m, grid);
  block.calibrate(render_natural_batch(0, 2, grid), 0.655);
  GfbSpec spec;
  spec.n_channels = 8;
  spec.seed = 2;
  spec.grid = grid;
  GratingSpec gs;
  gs.sf_cpd = 2.0;
  const Channels stim = render_grating(gs, grid).frames[3];
  const CascadeProbe probe(block, sample_gfb(spec), stim, 1.0, 0.25);
  const double fano = calibrate_cortical_fano(probe, 4000, 1);
  CHECK(fano > 0.0);
  CHECK(fano < 1.0);
  const FanoReport rep = measure_fano(probe, 4000, 2, fano);
  CHECK(rep.trials == 4000);
  CHECK(rep.subcortical == doctest::Approx(0.25).epsilon(0.1));
  CHECK(rep.cortical == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("bypass and cascade cells respond to a preferred grating") {
  const VisualGrid grid{7.0, 96};
  GaborParams g;
  g.cell_type = GaborCellType::complex;
  const CellFn bypass = vone_cell(g, grid, FrontEndMode::bypass);
  GratingSpec gs;
  gs.sf_cpd = 2.0;
  const Channels frame = render_grating(gs, grid).frames[0];
  CHECK(bypass(frame) > 0.0);
  gs.contrast = 0.0;
  CHECK(bypass(render_grating(gs, grid).frames[0]) == 0.0);
  CHECK_THROWS(vone_cell(g, grid, FrontEndMode::cascade));
}

}
