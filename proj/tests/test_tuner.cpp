#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "earlyvision/cells.hpp"
#include "earlyvision/tuner.hpp"

using namespace earlyvision;

namespace {

SearchSpace unit_interval() {
  SearchSpace s;
  s.dims = {{"x", 0.0, 1.0}};
  return s;
}

double bowl(double x) { return (x - 0.3) * (x - 0.3); }

}  // namespace

TEST_SUITE("tuner") {

TEST_CASE("loss of exact targets is zero, a 2x property costs one") {
  const PropertySet t = reference_targets(CellClass::P);
  CHECK(loss(t, t) == 0.0);
  auto v = t.values();
  v[3] *= 2.0;
  CHECK(loss(PropertySet::from_values(v), t) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("reference loss between published columns") {
  CHECK(loss(published_tuned_properties(CellClass::P), reference_targets(CellClass::P)) ==
        doctest::Approx(5.572480091629281).epsilon(1e-12));
  CHECK(loss(published_tuned_properties(CellClass::M), reference_targets(CellClass::M)) ==
        doctest::Approx(3.2199575249212264).epsilon(1e-12));
}

TEST_CASE("loss is permutation invariant and rejects nonpositive targets") {
  const auto m = published_tuned_properties(CellClass::M).values();
  const auto t = reference_targets(CellClass::M).values();
  std::array<double, 6> mp{m[5], m[0], m[4], m[1], m[3], m[2]};
  std::array<double, 6> tp{t[5], t[0], t[4], t[1], t[3], t[2]};
  CHECK(loss(PropertySet::from_values(mp), PropertySet::from_values(tp)) ==
        doctest::Approx(loss(PropertySet::from_values(m), PropertySet::from_values(t))).epsilon(1e-14));
  auto bad = t;
  bad[2] = 0.0;
  CHECK_THROWS_AS(loss(PropertySet::from_values(m), PropertySet::from_values(bad)), std::invalid_argument);
  bad[2] = -1.0;
  CHECK_THROWS_AS(loss(PropertySet::from_values(m), PropertySet::from_values(bad)), std::invalid_argument);
}

TEST_CASE("failed and nonpositive properties cost the fixed penalty") {
  PropertyReport r;
  r.properties = reference_targets(CellClass::P);
  CHECK(penalized_loss(r, reference_targets(CellClass::P)) == 0.0);
  r.errors[1] = "fit pinned";
  CHECK(penalized_loss(r, reference_targets(CellClass::P)) == 16.0);
  r.properties.saturation_index = 0.0;
  CHECK(penalized_loss(r, reference_targets(CellClass::P)) == 32.0);
}

TEST_CASE("default boxes") {
  const SearchSpace p = SearchSpace::subcortical(CellClass::P);
  REQUIRE(p.size() == 7);
  CHECK(p.dims[1].lower == 0.034);
  CHECK(p.dims[1].upper == 0.050);
  CHECK(p.dims[3].lower == -0.068);
  CHECK(p.dims[3].upper == -0.003);
  CHECK(p.dims[4].upper == 0.419);
  const SearchSpace m = SearchSpace::subcortical(CellClass::M);
  CHECK(m.dims[1].upper == 0.076);
  CHECK(m.dims[2].lower == 0.482);
  CHECK(m.dims[4].upper == 0.903);
  CHECK(SearchSpace::subcortical(CellClass::M, MRcUpperBound::printed).dims[1].upper == 0.76);
  for (const auto& s : {p, m}) CHECK_NOTHROW(s.validate());
  SearchSpace broken = p;
  broken.dims[5].upper = broken.dims[5].lower;
  CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
}

TEST_CASE("out-of-box dimensions are named") {
  const SearchSpace p = SearchSpace::subcortical(CellClass::P);
  PathwayParams q = p.to_params(sobol_point(p, 3, 1));
  CHECK(p.out_of_box(q).empty());
  q.r_cn_deg = 0.9;
  const auto out = p.out_of_box(q);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == "r_cn_deg");
}

TEST_CASE("config invariants") {
  TuneConfig c;
  c.targets = reference_targets(CellClass::P);
  CHECK_NOTHROW(c.validate());
  c.n_init = c.n_evals;
  CHECK_THROWS(c.validate());
  c.n_init = 64;
  c.targets.suppression_index = 0.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("sobol points stay in the box and are balanced") {
  const SearchSpace s = SearchSpace::subcortical(CellClass::M);
  for (int n : {16, 64, 256}) {
    const auto pts = sobol_init(s, n, 42);
    REQUIRE(pts.size() == static_cast<std::size_t>(n));
    for (const auto& p : pts) CHECK(s.contains(p));
    for (std::size_t d = 0; d < s.size(); ++d) {
      const double mid = 0.5 * (s.dims[d].lower + s.dims[d].upper);
      const auto below = std::count_if(pts.begin(), pts.end(), [&](const auto& p) { return p[d] < mid; });
      CHECK(std::abs(below - n / 2) <= 1);
    }
  }
}

TEST_CASE("sobol points are seeded and indexable") {
  const SearchSpace s = SearchSpace::subcortical(CellClass::P);
  const auto a = sobol_init(s, 32, 7);
  CHECK(a == sobol_init(s, 32, 7));
  CHECK(a != sobol_init(s, 32, 8));
  for (int i : {0, 1, 5, 31}) CHECK(sobol_point(s, i, 7) == a[static_cast<std::size_t>(i)]);
}

TEST_CASE("likelihood gradient matches finite differences") {
  const SearchSpace s = SearchSpace::subcortical(CellClass::P);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& p : sobol_init(s, 24, 3)) {
    x.push_back(s.to_unit(p));
    const auto& u = x.back();
    y.push_back(std::sin(3.0 * u[0]) + u[1] * u[2] - 0.5 * u[6]);
  }
  GpHyperparameters h;
  h.log_length = {-0.3, 0.1, 0.4, -0.2, 0.0, 0.7, -0.5};
  h.log_signal = 0.2;
  h.log_noise = -3.0;
  std::vector<double> g;
  GaussianProcess::negative_log_likelihood(x, y, h, &g);
  REQUIRE(g.size() == 9);
  auto at = [&](std::size_t i, double dv) {
    GpHyperparameters q = h;
    if (i < 7) q.log_length[i] += dv;
    else if (i == 7) q.log_signal += dv;
    else q.log_noise += dv;
    return GaussianProcess::negative_log_likelihood(x, y, q);
  };
  for (std::size_t i = 0; i < 9; ++i) {
    const double fd = (at(i, 1e-5) - at(i, -1e-5)) / 2e-5;
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("gp interpolates its training data") {
  std::vector<std::vector<double>> x{{0.1}, {0.4}, {0.8}};
  std::vector<double> y{1.0, -0.5, 0.2};
  GpHyperparameters h;
  h.log_length = {std::log(0.3)};
  h.log_noise = std::log(1e-8);
  const GaussianProcess gp(x, y, h);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto p = gp.predict(x[i]);
    CHECK(p.mean == doctest::Approx(y[i]).epsilon(1e-5));
    CHECK(p.sd < 1e-3);
  }
  CHECK(gp.predict(std::vector<double>{0.6}).sd > 0.05);
}

TEST_CASE("single history point falls back to a different in-box point") {
  const SearchSpace s = SearchSpace::subcortical(CellClass::P);
  const auto p0 = sobol_point(s, 0, 5);
  const std::vector<double> l{2.5};
  const Suggestion sg = gp_suggest({p0}, l, s, Acquisition::EI, 1.96, 0.01, 5);
  CHECK(sg.fallback);
  CHECK(sg.point != p0);
  CHECK(s.contains(sg.point));
}

TEST_CASE("identical losses are degenerate") {
  const SearchSpace s = unit_interval();
  const std::vector<std::vector<double>> pts{{0.2}, {0.7}};
  const std::vector<double> l{1.0, 1.0};
  CHECK(gp_suggest(pts, l, s, Acquisition::LCB, 1.96, 0.01, 1).fallback);
}

TEST_CASE("suggestions are reproducible") {
  const SearchSpace s = SearchSpace::subcortical(CellClass::M);
  const auto pts = sobol_init(s, 20, 11);
  std::vector<double> l;
  for (const auto& p : pts) l.push_back(std::pow(p[0] - 1.0, 2) + 10.0 * p[5]);
  for (Acquisition a : {Acquisition::LCB, Acquisition::EI, Acquisition::PI}) {
    const Suggestion first = gp_suggest(pts, l, s, a, 1.96, 0.01, 99);
    const Suggestion second = gp_suggest(pts, l, s, a, 1.96, 0.01, 99);
    CHECK_FALSE(first.fallback);
    CHECK(first.point == second.point);
    CHECK(s.contains(first.point));
  }
}

TEST_CASE("twenty evaluations find the minimum of a 1-D bowl") {
  const SearchSpace s = unit_interval();
  std::vector<std::vector<double>> pts = sobol_init(s, 4, 2);
  std::vector<double> l;
  for (const auto& p : pts) l.push_back(bowl(p[0]));
  const std::array<Acquisition, 3> acq{Acquisition::LCB, Acquisition::EI, Acquisition::PI};
  for (int i = 4; i < 20; ++i) {
    const Suggestion sg = gp_suggest(pts, l, s, acq[static_cast<std::size_t>(i) % 3], 1.96, 0.01, 100 + i);
    pts.push_back(sg.point);
    l.push_back(bowl(sg.point[0]));
  }
  const auto best = std::min_element(l.begin(), l.end()) - l.begin();
  CHECK(std::abs(pts[static_cast<std::size_t>(best)][0] - 0.3) < 0.02);
}

TEST_CASE("acquisition values") {
  const GaussianProcess::Prediction p{0.5, 2.0};
  CHECK(acquisition_value(Acquisition::LCB, p, 0.0, 1.96, 0.01) == doctest::Approx(0.5 - 3.92));
  CHECK(acquisition_value(Acquisition::PI, {0.0, 1.0}, 0.01, 1.96, 0.01) == doctest::Approx(-0.5));
  // imp = 0 gives EI = sd * phi(0).
  CHECK(acquisition_value(Acquisition::EI, {0.0, 1.0}, 0.01, 1.96, 0.01) ==
        doctest::Approx(-0.3989422804014327));
  CHECK_THROWS(acquisition_value(Acquisition::sobol, p, 0.0, 1.0, 0.0));
}

TEST_CASE("short tuning run keeps its bookkeeping invariants") {
  const VisualGrid grid{4.0, 64};
  SweepConfig sweeps;
  sweeps.sf_cpd = log_spaced(0.25, 8.0, 8);
  sweeps.diameter_deg = log_spaced(0.1, 4.0, 8);
  sweeps.sf_diameter_deg = 4.0;
  const SearchSpace space = SearchSpace::subcortical(CellClass::P);
  TuneConfig cfg;
  cfg.n_evals = 10;
  cfg.n_init = 6;
  cfg.n_candidates = 200;
  cfg.seed = 4;
  cfg.targets = reference_targets(CellClass::P);
  const CellFactory factory = [&](const PathwayParams& p) { return pathway_cell(p, grid); };
  int calls = 0;
  const TuneRun run = tune(space, cfg, factory, grid, sweeps, [&](const TuneRun&) { ++calls; });
  REQUIRE(run.history.size() == 10);
  CHECK(calls == 10);
  double lowest = run.history[0].loss;
  for (const auto& e : run.history) {
    CHECK(space.contains(e.point));
    lowest = std::min(lowest, e.loss);
  }
  CHECK(run.best_loss == lowest);
  CHECK(run.history[run.best_index].params == run.best_params);
  const auto bsf = run.best_so_far();
  for (std::size_t i = 1; i < bsf.size(); ++i) CHECK(bsf[i] <= bsf[i - 1]);
  for (int i = 0; i < 6; ++i) CHECK(run.history[static_cast<std::size_t>(i)].acquisition == Acquisition::sobol);
  for (int i = 6; i < 10; ++i) CHECK(run.history[static_cast<std::size_t>(i)].acquisition != Acquisition::sobol);

  const TuneRun again = tune(space, cfg, factory, grid, sweeps);
  for (std::size_t i = 0; i < run.history.size(); ++i) {
    CHECK(run.history[i].point == again.history[i].point);
    CHECK(run.history[i].loss == again.history[i].loss);
  }
}

TEST_CASE("evaluation failures are recorded with the penalty") {
  const SearchSpace space = SearchSpace::subcortical(CellClass::P);
  const CellFactory broken = [](const PathwayParams&) -> CellFn { throw std::runtime_error("boom"); };
  const auto e = evaluate_point(space, sobol_point(space, 0, 0), reference_targets(CellClass::P), broken, {}, {});
  CHECK(e.loss == 96.0);
  CHECK(e.errors[0].has_value());
}

}
