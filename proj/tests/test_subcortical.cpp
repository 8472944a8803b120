#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "earlyvision/random.hpp"
#include "earlyvision/stimuli.hpp"
#include "earlyvision/subcortical.hpp"

using namespace earlyvision;

namespace {

Plane random_plane(int rows, int cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Plane p(rows, cols);
  CounterRng rng(seed);
  for (double& v : p.values()) v = rng.uniform(lo, hi);
  return p;
}

Channels random_rgb(int n, std::uint64_t seed) {
  return {random_plane(n, n, seed), random_plane(n, n, seed + 1), random_plane(n, n, seed + 2)};
}

Channels uniform_rgb(int n, double r, double g, double b) { return {Plane(n, n, r), Plane(n, n, g), Plane(n, n, b)}; }

PathwayParams p_params() {
  PathwayParams p;
  p.r_c_deg = 0.042;
  p.r_s_deg = 0.279;
  p.k_ratio = -0.035;
  return p;
}

}  // namespace

TEST_SUITE("subcortical") {

TEST_CASE("params invariants") {
  PathwayParams p = p_params();
  CHECK(p.violations().empty());
  p.r_s_deg = p.r_c_deg;
  CHECK_FALSE(p.violations().empty());
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = p_params();
  p.gamma = 0.0;
  CHECK_THROWS(p.validate());
  p = p_params();
  p.r_cn_deg = std::nan("");
  CHECK_THROWS(p.validate());
  CHECK(cell_class_from_string("M") == CellClass::M);
  CHECK(to_string(CellClass::P) == "P");
  CHECK_THROWS(cell_class_from_string("K"));
}

TEST_CASE("light adaptation scalar cases") {
  Plane img(1, 2);
  // mean = 2m so that a pixel at 3 * mean is representable: use external mean.
  img(0, 0) = 3.0;
  img(0, 1) = 0.5;
  const auto a = light_adapt_with_mean(img, 1.0, 1.0);
  CHECK(a.plane(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  const auto b = light_adapt_with_mean(img, 2.0, 1.0);
  CHECK(b.plane(0, 1) == doctest::Approx(-0.3).epsilon(1e-14));
}

TEST_CASE("light adaptation of a uniform image is zero") {
  const Plane flat(16, 16, 0.37);
  const auto a = light_adapt(flat, 1.7);
  CHECK_FALSE(a.degenerate);
  for (double v : a.plane.values()) CHECK(v == 0.0);
}

TEST_CASE("all-black input is degenerate") {
  const auto a = light_adapt(Plane(8, 8, 0.0), 1.0);
  CHECK(a.degenerate);
  for (double v : a.plane.values()) CHECK(v == 0.0);
  CHECK_THROWS(light_adapt(Plane(4, 4, 0.5), 0.0));
}

TEST_CASE("light adaptation is bounded and scale invariant") {
  const Plane img = random_plane(32, 32, 5);
  for (double gamma : {0.01, 0.5, 1.0, 2.0}) {
    const auto base = light_adapt(img, gamma);
    for (double v : base.plane.values()) CHECK((v >= -0.5 && v <= 0.5));
    for (double c : {0.25, 4.0}) {
      Plane scaled = img;
      for (double& v : scaled.values()) v *= c;
      const auto s = light_adapt(scaled, gamma);
      double worst = 0.0;
      for (std::size_t i = 0; i < img.size(); ++i) worst = std::max(worst, std::abs(s.plane.values()[i] - base.plane.values()[i]));
      CHECK(worst < 1e-9);
    }
  }
}

TEST_CASE("opponent weights") {
  for (auto id : {OpponentChannel::P_rg, OpponentChannel::P_gr, OpponentChannel::P_by, OpponentChannel::M_achro}) {
    const auto s = OpponentChannelSpec::standard(id);
    double lc = 0.0, ls = 0.0;
    for (int k = 0; k < 3; ++k) {
      lc += std::abs(s.center_weights[static_cast<std::size_t>(k)]);
      ls += std::abs(s.surround_weights[static_cast<std::size_t>(k)]);
    }
    CHECK(lc == doctest::Approx(1.0));
    CHECK(ls == doctest::Approx(1.0));
  }
  const auto m = OpponentChannelSpec::standard(OpponentChannel::M_achro);
  CHECK(m.center_weights == m.surround_weights);
  CHECK(readout_channel(CellClass::P) == OpponentChannel::P_rg);
  CHECK(readout_channel(CellClass::M) == OpponentChannel::M_achro);
}

TEST_CASE("opponent projection") {
  const Channels rgb = random_rgb(12, 8);
  const auto m = opponent_project(rgb, OpponentChannelSpec::standard(OpponentChannel::M_achro));
  CHECK(m.center == m.surround);
  for (int r = 0; r < 12; ++r) {
    CHECK(m.center(r, 3) == doctest::Approx((rgb[0](r, 3) + rgb[1](r, 3) + rgb[2](r, 3)) / 3.0));
  }
  const auto green = opponent_project(uniform_rgb(6, 0.0, 0.8, 0.0), OpponentChannelSpec::standard(OpponentChannel::P_rg));
  for (double v : green.center.values()) CHECK(v == 0.0);
  for (double v : green.surround.values()) CHECK(v == 0.8);
  const auto gray = opponent_project(uniform_rgb(6, 0.4, 0.4, 0.4), OpponentChannelSpec::standard(OpponentChannel::P_by));
  for (double v : gray.center.values()) CHECK(v == doctest::Approx(0.4));
  for (double v : gray.surround.values()) CHECK(v == doctest::Approx(0.4));
}

TEST_CASE("75 percent support") {
  // R = r sqrt(ln 4); half-width = ceil(R - 0.5).
  CHECK(mass75_half_width(2.0) == static_cast<int>(std::ceil(2.0 * std::sqrt(std::log(4.0)) - 0.5)));
  CHECK(mass75_half_width(10.0) == 12);
  CHECK(mass75_half_width(0.5) == 1);
  CHECK_THROWS(mass75_half_width(0.3));
  PathwayParams tiny = p_params();
  tiny.r_s_deg = 0.01;
  tiny.r_c_deg = 0.005;
  CHECK_THROWS(make_dog_kernel(tiny, VisualGrid{}));
  // Very large surround is capped at the grid.
  PathwayParams huge = p_params();
  huge.r_s_deg = 20.0;
  CHECK(make_dog_kernel(huge, VisualGrid{}).side() <= 224);
}

TEST_CASE("dog kernel with no surround is a nonnegative Gaussian") {
  PathwayParams p = p_params();
  p.k_ratio = 0.0;
  const Plane k = make_dog_kernel(p, VisualGrid{}).dense();
  for (double v : k.values()) CHECK(v >= 0.0);
  const int h = k.rows() / 2;
  for (double v : k.values()) CHECK(v <= k(h, h));
}

TEST_CASE("dog kernel symmetry and DC gain") {
  const VisualGrid g;
  for (const PathwayParams& p : {p_params(), PathwayParams{1.0, 0.066, 0.565, -0.02, 0.5, 0.1, 0.5, CellClass::M}}) {
    const DogKernel dk = make_dog_kernel(p, g);
    const Plane k = dk.dense();
    const int n = k.rows();
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        CHECK(k(r, c) == k(n - 1 - r, n - 1 - c));
        CHECK(k(r, c) == k(c, r));
      }
    }
    double sum = 0.0;
    for (double v : k.values()) sum += v;
    const double rc = p.r_c_deg * g.px_per_deg(), rs = p.r_s_deg * g.px_per_deg();
    const double expected = std::numbers::pi * (rc * rc - std::abs(p.k_ratio) * rs * rs);
    CHECK(sum == doctest::Approx(expected).epsilon(0.02));
  }
}

TEST_CASE("literal k convention adds the surround") {
  const DogKernel lit = make_dog_kernel(p_params(), {}, KernelSupport::mass75, KRatioConvention::literal);
  const DogKernel mag = make_dog_kernel(p_params(), {}, KernelSupport::mass75, KRatioConvention::magnitude);
  CHECK(lit.surround_ratio == doctest::Approx(-0.035));
  CHECK(mag.surround_ratio == doctest::Approx(0.035));
}

TEST_CASE("pooling kernel has unit sum") {
  const GaussianLobe w = make_pooling_kernel(0.28, {});
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("contrast normalization") {
  const VisualGrid g;
  const PathwayParams p = p_params();
  const Plane zero_out = contrast_normalize(Plane(40, 40), p, g);
  for (double v : zero_out.values()) CHECK(v == 0.0);

  const Plane x = random_plane(40, 40, 11, -1.0, 1.0);
  Plane neg = x;
  for (double& v : neg.values()) v = -v;
  const Plane a = contrast_normalize(x, p, g);
  const Plane b = contrast_normalize(neg, p, g);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.values()[i] == -a.values()[i]);

  PathwayParams tiny_n = p;
  tiny_n.n_cn = 1e-9;
  const Plane id = contrast_normalize(x, tiny_n, g);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(id.values()[i] - x.values()[i]));
  CHECK(worst < 1e-6);
}

TEST_CASE("contrast normalization against a direct sum") {
  const VisualGrid g{7.0, 64};
  PathwayParams p = p_params();
  p.r_cn_deg = 0.2;
  p.c50 = 0.3;
  p.n_cn = 0.7;
  const Plane x = random_plane(20, 20, 3, -1.0, 1.0);
  const Plane y = contrast_normalize(x, p, g);
  const GaussianLobe w = make_pooling_kernel(p.r_cn_deg, g);
  const Plane wd = w.dense();
  const int h = w.half();
  for (int r : {0, 7, 19}) {
    for (int c : {0, 11, 19}) {
      double pooled = 0.0;
      for (int dr = -h; dr <= h; ++dr) {
        for (int dc = -h; dc <= h; ++dc) {
          const double v = x(reflect_index(r + dr, 20), reflect_index(c + dc, 20));
          pooled += wd(dr + h, dc + h) * v * v;
        }
      }
      const double expected = x(r, c) / std::pow(p.c50 + std::sqrt(pooled), p.n_cn);
      CHECK(y(r, c) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("reflect padding") {
  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(-2, 5) == 2);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(6, 5) == 2);
  CHECK(reflect_index(2, 5) == 2);
}

TEST_CASE("dog filter matches a direct correlation") {
  const VisualGrid g{7.0, 64};
  PathwayParams p = p_params();
  p.r_c_deg = 0.06;
  p.r_s_deg = 0.2;
  const Channels rgb = random_rgb(24, 21);
  const auto drive = opponent_project(rgb, OpponentChannelSpec::standard(OpponentChannel::P_by));
  const DogKernel k = make_dog_kernel(p, g);
  const Plane out = dog_filter(drive, k);
  const Plane kc = k.center.dense(), ks = k.surround.dense();
  REQUIRE(ks.rows() == kc.rows());
  const int h = k.half();
  for (int r : {0, 12, 23}) {
    for (int c : {1, 12, 22}) {
      double acc = 0.0;
      for (int dr = -h; dr <= h; ++dr) {
        for (int dc = -h; dc <= h; ++dc) {
          const int rr = reflect_index(r + dr, 24), cc = reflect_index(c + dc, 24);
          acc += kc(dr + h, dc + h) * drive.center(rr, cc) - k.surround_ratio * ks(dr + h, dc + h) * drive.surround(rr, cc);
        }
      }
      CHECK(out(r, c) == doctest::Approx(acc).epsilon(1e-11));
    }
  }
}

TEST_CASE("push-pull identity") {
  Plane x(1, 3);
  x(0, 0) = -1.0;
  x(0, 1) = 0.0;
  x(0, 2) = 2.0;
  CHECK(push_pull_identity_check(x) == x);
  const Plane neg = random_plane(10, 10, 4, -5.0, -0.1);
  CHECK(push_pull_identity_check(neg) == neg);
  Plane z(1, 1, -0.0);
  CHECK(std::signbit(push_pull_identity_check(z)(0, 0)));
}

TEST_CASE("noise statistics") {
  Plane a(1, 2);
  a(0, 0) = 2.0;
  a(0, 1) = -2.0;
  CHECK(apply_noise(a, 0.0, 3) == a);
  CHECK_THROWS(apply_noise(a, -0.1, 3));
  CHECK(apply_noise(a, 0.5, 3) == apply_noise(a, 0.5, 3));
  const int n = 100000;
  double s0 = 0, s1 = 0, s00 = 0, s11 = 0, s01 = 0;
  for (int t = 0; t < n; ++t) {
    const Plane y = apply_noise(a, 0.5, 77, static_cast<std::uint64_t>(t));
    const double d0 = y(0, 0) - 2.0, d1 = y(0, 1) + 2.0;
    s0 += d0;
    s1 += d1;
    s00 += d0 * d0;
    s11 += d1 * d1;
    s01 += d0 * d1;
  }
  const double m0 = s0 / n, m1 = s1 / n;
  const double v0 = s00 / n - m0 * m0, v1 = s11 / n - m1 * m1;
  CHECK(v0 == doctest::Approx(1.0).epsilon(0.03));
  CHECK(v1 == doctest::Approx(1.0).epsilon(0.03));
  const double corr = (s01 / n - m0 * m1) / std::sqrt(v0 * v1);
  CHECK(std::abs(corr) < 0.02);
}

TEST_CASE("spike scaling") {
  std::vector<Plane> batch{Plane(4, 4, 1.31)};
  CHECK(scale_to_spikes(batch, 0.655) == doctest::Approx(0.5).epsilon(1e-15));
  batch = {Plane(4, 4, 0.655)};
  CHECK(scale_to_spikes(batch, 0.655) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<Plane> mixed{random_plane(8, 8, 1, -1.0, 2.0), random_plane(8, 8, 2, -3.0, 1.0)};
  const double s = scale_to_spikes(mixed, 0.655);
  double total = 0.0;
  for (const auto& p : mixed) {
    for (double v : p.values()) total += std::abs(s * v);
  }
  CHECK(total / 128.0 == doctest::Approx(0.655).epsilon(1e-12));
  std::vector<Plane> zero{Plane(3, 3)};
  CHECK_THROWS(scale_to_spikes(zero, 0.655));
}

TEST_CASE("forward pass") {
  const VisualGrid g{7.0, 96};
  PathwayParams m{1.0, 0.066, 0.565, -0.02, 0.5, 0.1, 0.5, CellClass::M};
  const SubcorticalBlock block(p_params(), m, g);
  const Channels gray = uniform_rgb(96, 0.5, 0.5, 0.5);
  const Channels out = block.forward(gray);
  REQUIRE(out.size() == 4);
  for (const auto& p : out) {
    for (double v : p.values()) CHECK(v == 0.0);
  }

  GratingSpec gs;
  gs.sf_cpd = 2.0;
  const Channels grating = render_grating(gs, g).frames[2];
  const Channels y = block.forward(grating);
  // Achromatic input: the two red-green channels see the same center and surround drive.
  CHECK(y[0] == y[1]);

  NoiseSpec noise;
  const Channels n1 = block.forward(grating, noise, 5);
  const Channels n2 = block.forward(grating, noise, 5);
  for (int k = 0; k < 4; ++k) CHECK(n1[static_cast<std::size_t>(k)] == n2[static_cast<std::size_t>(k)]);
  CHECK(n1[3] != block.forward(grating, noise, 6)[3]);
  CHECK(n1[3] != y[3]);
}

TEST_CASE("windowed readout equals the full forward pass") {
  const VisualGrid g{7.0, 96};
  PathwayParams m{0.8, 0.066, 0.565, -0.02, 0.5, 0.2, 0.6, CellClass::M};
  SubcorticalBlock block(p_params(), m, g);
  block.set_scales({1.5, 0.5, 2.0, 0.7});
  const Channels img = random_rgb(96, 31);
  const Channels full = block.forward(img);
  for (auto ch : {OpponentChannel::P_rg, OpponentChannel::P_by, OpponentChannel::M_achro}) {
    for (const Window w : {Window{48, 48, 0}, Window{48, 48, 5}, Window{3, 90, 2}}) {
      const Plane win = block.channel_window(img, ch, w);
      CHECK(win == extract_window(full[static_cast<std::size_t>(ch)], w));
    }
  }
}

TEST_CASE("calibration sets the spike scale") {
  const VisualGrid g{7.0, 64};
  PathwayParams p = p_params();
  p.r_c_deg = 0.06;
  p.r_s_deg = 0.3;
  PathwayParams m{1.0, 0.09, 0.6, -0.02, 0.5, 0.1, 0.5, CellClass::M};
  SubcorticalBlock block(p, m, g);
  const auto batch = render_natural_batch(2, 3, g);
  block.calibrate(batch, 0.655);
  for (int ch = 0; ch < 4; ++ch) {
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& img : batch) {
      const Plane out = block.forward(img)[static_cast<std::size_t>(ch)];
      total += out.mean_abs() * static_cast<double>(out.size());
      count += out.size();
    }
    CHECK(total / static_cast<double>(count) == doctest::Approx(0.655).epsilon(1e-12));
  }
}

}
