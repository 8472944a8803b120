#include "earlyvision/tuner.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "earlyvision/optimize.hpp"
#include "earlyvision/random.hpp"

namespace earlyvision {
namespace {

constexpr double kSqrt5 = 2.2360679774997896964;

// Bounds on the log hyperparameters.
constexpr double kLogLengthLo = -4.605170185988091;  // log 0.01
constexpr double kLogLengthHi = 4.605170185988091;
constexpr double kLogSignalLo = -4.605170185988091;
constexpr double kLogSignalHi = 4.605170185988091;
constexpr double kLogNoiseLo = -13.815510557964274;  // log 1e-6
constexpr double kLogNoiseHi = 0.0;
constexpr double kFixedJitter = 1e-10;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double s) { return std::log(s / (1.0 - s)); }

double to_latent(double v, double lo, double hi) {
  const double s = std::clamp((v - lo) / (hi - lo), 1e-9, 1.0 - 1e-9);
  return logit(s);
}

Eigen::MatrixXd as_matrix(const std::vector<std::vector<double>>& x) {
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  const Eigen::Index d = n ? static_cast<Eigen::Index>(x[0].size()) : 0;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(x[i].size()) != d) throw std::invalid_argument("GaussianProcess: ragged inputs");
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = x[i][j];
  }
  return m;
}

double matern52(double r2, double signal) {
  const double r = std::sqrt(r2);
  return signal * (1.0 + kSqrt5 * r + 5.0 / 3.0 * r2) * std::exp(-kSqrt5 * r);
}

double scaled_r2(const Eigen::MatrixXd& x, Eigen::Index i, Eigen::Index j, const Eigen::VectorXd& inv_len) {
  double r2 = 0.0;
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    const double t = (x(i, d) - x(j, d)) * inv_len(d);
    r2 += t * t;
  }
  return r2;
}

Eigen::VectorXd inverse_lengths(const GpHyperparameters& h) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(h.log_length.size()));
  for (Eigen::Index d = 0; d < v.size(); ++d) v(d) = std::exp(-h.log_length[static_cast<std::size_t>(d)]);
  return v;
}

Eigen::MatrixXd signal_covariance(const Eigen::MatrixXd& x, const GpHyperparameters& h) {
  const Eigen::VectorXd inv_len = inverse_lengths(h);
  const double signal = std::exp(h.log_signal);
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = signal;
    for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i) = matern52(scaled_r2(x, i, j, inv_len), signal);
  }
  return k;
}

void add_noise(Eigen::MatrixXd& k, const GpHyperparameters& h) {
  k.diagonal().array() += std::exp(h.log_noise) + kFixedJitter;
}

GpHyperparameters default_hyper(std::size_t d) {
  GpHyperparameters h;
  h.log_length.assign(d, 0.0);
  return h;
}

struct Standardized {
  std::vector<double> y;
  bool degenerate = false;
};

Standardized standardize(std::span<const double> y) {
  Standardized out;
  const double n = static_cast<double>(y.size());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : y) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  const bool all_equal = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (all_equal || !(sd > 0.0) || !std::isfinite(sd)) {
    out.degenerate = true;
    out.y.assign(y.size(), 0.0);
    return out;
  }
  out.y.reserve(y.size());
  for (double v : y) out.y.push_back((v - mean) / sd);
  return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

// ---------------------------------------------------------------------------
// Search space

const std::array<std::string, 7>& SearchSpace::pathway_dimension_names() {
  static const std::array<std::string, 7> names{"gamma", "r_c_deg", "r_s_deg", "k_ratio",
                                                "r_cn_deg", "c50", "n_cn"};
  return names;
}

SearchSpace SearchSpace::subcortical(CellClass c, MRcUpperBound m_rc) {
  const auto& n = pathway_dimension_names();
  SearchSpace s;
  s.cell_class = c;
  if (c == CellClass::P) {
    s.dims = {{n[0], 0.01, 2.0},    {n[1], 0.034, 0.050}, {n[2], 0.223, 0.335}, {n[3], -0.068, -0.003},
              {n[4], 0.140, 0.419}, {n[5], 0.01, 1.0},    {n[6], 0.01, 1.0}};
  } else {
    const double rc_hi = m_rc == MRcUpperBound::corrected ? 0.076 : 0.76;
    s.dims = {{n[0], 0.01, 2.0},    {n[1], 0.050, rc_hi}, {n[2], 0.482, 0.722}, {n[3], -0.037, -0.002},
              {n[4], 0.301, 0.903}, {n[5], 0.01, 1.0},    {n[6], 0.01, 1.0}};
  }
  return s;
}

void SearchSpace::validate() const {
  if (dims.empty()) throw std::invalid_argument("SearchSpace: no dimensions");
  for (const auto& d : dims) {
    if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !(d.lower < d.upper)) {
      throw std::invalid_argument("SearchSpace: dimension '" + d.name + "' needs lower < upper");
    }
  }
}

bool SearchSpace::contains(std::span<const double> point) const {
  if (point.size() != dims.size()) return false;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (!(point[i] >= dims[i].lower && point[i] <= dims[i].upper)) return false;
  }
  return true;
}

std::vector<double> SearchSpace::to_unit(std::span<const double> point) const {
  if (point.size() != dims.size()) throw std::invalid_argument("SearchSpace: point has wrong dimension");
  std::vector<double> u(point.size());
  for (std::size_t i = 0; i < dims.size(); ++i) u[i] = (point[i] - dims[i].lower) / (dims[i].upper - dims[i].lower);
  return u;
}

std::vector<double> SearchSpace::from_unit(std::span<const double> unit) const {
  if (unit.size() != dims.size()) throw std::invalid_argument("SearchSpace: point has wrong dimension");
  std::vector<double> p(unit.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const double u = std::clamp(unit[i], 0.0, 1.0);
    p[i] = std::clamp(dims[i].lower + u * (dims[i].upper - dims[i].lower), dims[i].lower, dims[i].upper);
  }
  return p;
}

PathwayParams SearchSpace::to_params(std::span<const double> point) const {
  const auto& names = pathway_dimension_names();
  if (dims.size() != names.size()) throw std::invalid_argument("SearchSpace: not a pathway space");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (dims[i].name != names[i]) throw std::invalid_argument("SearchSpace: unexpected dimension " + dims[i].name);
  }
  if (point.size() != dims.size()) throw std::invalid_argument("SearchSpace: point has wrong dimension");
  PathwayParams p;
  p.gamma = point[0];
  p.r_c_deg = point[1];
  p.r_s_deg = point[2];
  p.k_ratio = point[3];
  p.r_cn_deg = point[4];
  p.c50 = point[5];
  p.n_cn = point[6];
  p.cell_class = cell_class;
  return p;
}

std::vector<double> SearchSpace::from_params(const PathwayParams& p) const {
  return {p.gamma, p.r_c_deg, p.r_s_deg, p.k_ratio, p.r_cn_deg, p.c50, p.n_cn};
}

std::vector<std::string> SearchSpace::out_of_box(const PathwayParams& p) const {
  const std::vector<double> v = from_params(p);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < dims.size() && i < v.size(); ++i) {
    if (!(v[i] >= dims[i].lower && v[i] <= dims[i].upper)) out.push_back(dims[i].name);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config and targets

void TuneConfig::validate() const {
  if (n_init < 1) throw std::invalid_argument("TuneConfig: n_init must be >= 1");
  if (!(n_init < n_evals)) throw std::invalid_argument("TuneConfig: n_init must be < n_evals");
  if (!(kappa >= 0.0) || !(xi >= 0.0)) throw std::invalid_argument("TuneConfig: kappa and xi must be >= 0");
  if (refit_every < 1) throw std::invalid_argument("TuneConfig: refit_every must be >= 1");
  if (n_candidates < 1 || n_local < 0) throw std::invalid_argument("TuneConfig: bad acquisition search sizes");
  for (double t : targets.values()) {
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("TuneConfig: targets must be strictly positive");
  }
}

PropertySet reference_targets(CellClass c) {
  return c == CellClass::P ? PropertySet::from_values({0.042, 0.279, 0.236, 0.564, 0.808, 0.095})
                           : PropertySet::from_values({0.063, 0.602, 0.289, 0.869, 0.719, 0.365});
}

PropertySet published_tuned_properties(CellClass c) {
  return c == CellClass::P ? PropertySet::from_values({0.042, 0.162, 0.070, 0.312, 0.813, 0.200})
                           : PropertySet::from_values({0.066, 0.565, 0.116, 0.411, 0.539, 0.470});
}

double loss(const PropertySet& measured, const PropertySet& targets) {
  const auto m = measured.values();
  const auto t = targets.values();
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(t[i] > 0.0)) throw std::invalid_argument("loss: target " + PropertySet::names()[i] + " must be > 0");
    if (!(m[i] > 0.0)) throw std::domain_error("loss: measured " + PropertySet::names()[i] + " must be > 0");
    const double l = std::log2(m[i] / t[i]);
    total += l * l;
  }
  return total;
}

double penalized_loss(const PropertyReport& report, const PropertySet& targets) {
  const auto m = report.properties.values();
  const auto t = targets.values();
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(t[i] > 0.0)) throw std::invalid_argument("loss: target " + PropertySet::names()[i] + " must be > 0");
    if (report.errors[i] || !(m[i] > 0.0) || !std::isfinite(m[i])) {
      total += kFailedPropertyPenalty;
      continue;
    }
    const double l = std::log2(m[i] / t[i]);
    total += l * l;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Sobol

namespace {

using SobolEngine = boost::random::sobol_engine<std::uint32_t, 32, boost::random::default_sobol_table>;

std::vector<std::uint32_t> sobol_shift(std::size_t d, std::uint64_t seed) {
  std::vector<std::uint32_t> shift(d);
  for (std::size_t j = 0; j < d; ++j) shift[j] = static_cast<std::uint32_t>(mix_key(seed, 0x50B0, j) >> 32);
  return shift;
}

std::vector<double> shifted(const SearchSpace& space, std::span<const std::uint32_t> raw,
                            std::span<const std::uint32_t> shift) {
  std::vector<double> u(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    u[j] = (static_cast<double>(raw[j] ^ shift[j]) + 0.5) * 0x1.0p-32;
  }
  return space.from_unit(u);
}

}  // namespace

std::vector<std::vector<double>> sobol_init(const SearchSpace& space, int n, std::uint64_t seed) {
  space.validate();
  if (n < 1) throw std::invalid_argument("sobol_init: n must be >= 1");
  const std::size_t d = space.size();
  const auto shift = sobol_shift(d, seed);
  SobolEngine engine(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> points;
  points.reserve(static_cast<std::size_t>(n));
  std::vector<std::uint32_t> raw(d, 0);  // the origin, which the engine skips
  points.push_back(shifted(space, raw, shift));
  for (int i = 1; i < n; ++i) {
    for (auto& v : raw) v = engine();
    points.push_back(shifted(space, raw, shift));
  }
  return points;
}

std::vector<double> sobol_point(const SearchSpace& space, int index, std::uint64_t seed) {
  if (index < 0) throw std::invalid_argument("sobol_point: negative index");
  const std::size_t d = space.size();
  const auto shift = sobol_shift(d, seed);
  std::vector<std::uint32_t> raw(d, 0);
  if (index > 0) {
    SobolEngine engine(static_cast<std::size_t>(d));
    engine.discard(static_cast<std::uintmax_t>(index - 1) * d);
    for (auto& v : raw) v = engine();
  }
  return shifted(space, raw, shift);
}

// ---------------------------------------------------------------------------
// Acquisition

std::string to_string(Acquisition a) {
  switch (a) {
    case Acquisition::sobol: return "sobol";
    case Acquisition::LCB: return "LCB";
    case Acquisition::EI: return "EI";
    case Acquisition::PI: return "PI";
  }
  return "?";
}

Acquisition acquisition_from_string(const std::string& s) {
  if (s == "sobol") return Acquisition::sobol;
  if (s == "LCB") return Acquisition::LCB;
  if (s == "EI") return Acquisition::EI;
  if (s == "PI") return Acquisition::PI;
  throw std::invalid_argument("unknown acquisition: " + s);
}

double acquisition_value(Acquisition a, const GaussianProcess::Prediction& p, double y_best, double kappa,
                         double xi) {
  const double sd = std::max(p.sd, 1e-12);
  switch (a) {
    case Acquisition::LCB: return p.mean - kappa * sd;
    case Acquisition::EI: {
      const double imp = y_best - p.mean - xi;
      const double z = imp / sd;
      return -(imp * normal_cdf(z) + sd * normal_pdf(z));
    }
    case Acquisition::PI: return -normal_cdf((y_best - p.mean - xi) / sd);
    case Acquisition::sobol: break;
  }
  throw std::invalid_argument("acquisition_value: not a GP acquisition");
}

// ---------------------------------------------------------------------------
// Gaussian process

struct GaussianProcess::Impl {
  Eigen::MatrixXd x;
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;
  Eigen::VectorXd inv_len;
  double signal = 1.0;
};

GaussianProcess::GaussianProcess(std::vector<std::vector<double>> x_unit, std::span<const double> y,
                                 GpHyperparameters hyper)
    : hyper_(std::move(hyper)) {
  if (x_unit.empty() || x_unit.size() != y.size()) throw std::invalid_argument("GaussianProcess: bad training data");
  if (hyper_.log_length.size() != x_unit[0].size()) {
    throw std::invalid_argument("GaussianProcess: length-scale count does not match input dimension");
  }
  auto impl = std::make_shared<Impl>();
  impl->x = as_matrix(x_unit);
  impl->inv_len = inverse_lengths(hyper_);
  impl->signal = std::exp(hyper_.log_signal);
  Eigen::MatrixXd k = signal_covariance(impl->x, hyper_);
  add_noise(k, hyper_);
  double extra = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    impl->llt.compute(k);
    if (impl->llt.info() == Eigen::Success) break;
    const double add = extra == 0.0 ? 1e-8 : extra * 9.0;
    k.diagonal().array() += add;
    extra += add;
  }
  if (impl->llt.info() != Eigen::Success) throw std::runtime_error("GaussianProcess: covariance not positive definite");
  Eigen::VectorXd yv(static_cast<Eigen::Index>(y.size()));
  for (Eigen::Index i = 0; i < yv.size(); ++i) yv(i) = y[static_cast<std::size_t>(i)];
  impl->alpha = impl->llt.solve(yv);
  y_best_ = yv.minCoeff();
  impl_ = std::move(impl);
}

GaussianProcess::Prediction GaussianProcess::predict(std::span<const double> x_unit) const {
  const Impl& m = *impl_;
  const Eigen::Index n = m.x.rows();
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (Eigen::Index d = 0; d < m.x.cols(); ++d) {
      const double t = (m.x(i, d) - x_unit[static_cast<std::size_t>(d)]) * m.inv_len(d);
      r2 += t * t;
    }
    ks(i) = matern52(r2, m.signal);
  }
  const double mean = ks.dot(m.alpha);
  const Eigen::VectorXd v = m.llt.matrixL().solve(ks);
  const double var = std::max(m.signal - v.squaredNorm(), 0.0);
  return {mean, std::sqrt(var)};
}

double GaussianProcess::negative_log_likelihood(const std::vector<std::vector<double>>& x_unit,
                                                std::span<const double> y, const GpHyperparameters& h,
                                                std::vector<double>* grad) {
  const Eigen::MatrixXd x = as_matrix(x_unit);
  const Eigen::Index n = x.rows();
  const Eigen::Index dims = x.cols();
  const Eigen::MatrixXd kf = signal_covariance(x, h);
  Eigen::MatrixXd k = kf;
  add_noise(k, h);
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    if (grad) grad->assign(static_cast<std::size_t>(dims) + 2, 0.0);
    return std::numeric_limits<double>::infinity();
  }
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];
  const Eigen::VectorXd alpha = llt.solve(yv);
  const Eigen::MatrixXd& l = llt.matrixLLT();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(l(i, i));
  const double nll = 0.5 * yv.dot(alpha) + logdet + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!grad) return nll;

  // d nll / d theta = -1/2 tr((alpha alpha^T - K^-1) dK/dtheta)
  Eigen::MatrixXd w = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
  grad->assign(static_cast<std::size_t>(dims) + 2, 0.0);
  const Eigen::VectorXd inv_len = inverse_lengths(h);
  const double signal = std::exp(h.log_signal);
  std::vector<double> g_len(static_cast<std::size_t>(dims), 0.0);
  double g_signal = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    g_signal += 0.5 * w(i, i) * kf(i, i);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double wij = w(i, j);
      g_signal += wij * kf(i, j);
      const double r = std::sqrt(scaled_r2(x, i, j, inv_len));
      const double common = signal * 5.0 / 3.0 * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r) * wij;
      for (Eigen::Index d = 0; d < dims; ++d) {
        const double t = (x(i, d) - x(j, d)) * inv_len(d);
        g_len[static_cast<std::size_t>(d)] += common * t * t;
      }
    }
  }
  for (Eigen::Index d = 0; d < dims; ++d) (*grad)[static_cast<std::size_t>(d)] = -g_len[static_cast<std::size_t>(d)];
  (*grad)[static_cast<std::size_t>(dims)] = -g_signal;
  (*grad)[static_cast<std::size_t>(dims) + 1] = -0.5 * std::exp(h.log_noise) * w.trace();
  return nll;
}

GpHyperparameters GaussianProcess::fit_hyperparameters(const std::vector<std::vector<double>>& x_unit,
                                                       std::span<const double> y, const GpHyperparameters* warm) {
  if (x_unit.empty()) throw std::invalid_argument("fit_hyperparameters: no data");
  const std::size_t d = x_unit[0].size();
  std::vector<double> lo(d + 2, kLogLengthLo), hi(d + 2, kLogLengthHi);
  lo[d] = kLogSignalLo;
  hi[d] = kLogSignalHi;
  lo[d + 1] = kLogNoiseLo;
  hi[d + 1] = kLogNoiseHi;

  auto decode = [&](std::span<const double> z) {
    GpHyperparameters h;
    h.log_length.resize(d);
    for (std::size_t i = 0; i < d; ++i) h.log_length[i] = lo[i] + (hi[i] - lo[i]) * sigmoid(z[i]);
    h.log_signal = lo[d] + (hi[d] - lo[d]) * sigmoid(z[d]);
    h.log_noise = lo[d + 1] + (hi[d + 1] - lo[d + 1]) * sigmoid(z[d + 1]);
    return h;
  };
  auto encode = [&](const GpHyperparameters& h) {
    std::vector<double> z(d + 2);
    for (std::size_t i = 0; i < d; ++i) z[i] = to_latent(h.log_length[i], lo[i], hi[i]);
    z[d] = to_latent(h.log_signal, lo[d], hi[d]);
    z[d + 1] = to_latent(h.log_noise, lo[d + 1], hi[d + 1]);
    return z;
  };
  ObjectiveWithGradient fdf = [&](std::span<const double> z, std::span<double> g) {
    const GpHyperparameters h = decode(z);
    std::vector<double> gt;
    const double v = negative_log_likelihood(x_unit, y, h, &gt);
    for (std::size_t i = 0; i < d + 2; ++i) {
      const double s = sigmoid(z[i]);
      g[i] = gt[i] * (hi[i] - lo[i]) * s * (1.0 - s);
    }
    return v;
  };

  std::vector<GpHyperparameters> starts{default_hyper(d)};
  if (warm && warm->log_length.size() == d) starts.insert(starts.begin(), *warm);
  GpHyperparameters best = starts.front();
  double best_value = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const MinimizeResult r = bfgs(fdf, encode(s), 60, 1e-4);
    if (r.value < best_value) {
      best_value = r.value;
      best = decode(r.x);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Suggestion

Suggestion gp_suggest(const std::vector<std::vector<double>>& points, std::span<const double> losses,
                      const SearchSpace& space, Acquisition acquisition, double kappa, double xi, std::uint64_t seed,
                      const SuggestOptions& options) {
  space.validate();
  if (points.empty() || points.size() != losses.size()) {
    throw std::invalid_argument("gp_suggest: history must be nonempty with one loss per point");
  }
  if (acquisition == Acquisition::sobol) throw std::invalid_argument("gp_suggest: acquisition must be LCB, EI or PI");
  const std::size_t d = space.size();

  const Standardized ys = standardize(losses);
  if (ys.degenerate) {
    Suggestion s;
    s.point = sobol_point(space, static_cast<int>(points.size()), seed);
    s.fallback = true;
    if (options.hyper) s.hyper = *options.hyper;
    return s;
  }

  std::vector<std::vector<double>> x_unit;
  x_unit.reserve(points.size());
  for (const auto& p : points) x_unit.push_back(space.to_unit(p));

  GpHyperparameters hyper =
      !options.refit && options.hyper && options.hyper->log_length.size() == d
          ? *options.hyper
          : GaussianProcess::fit_hyperparameters(x_unit, ys.y, options.hyper ? &*options.hyper : nullptr);
  const GaussianProcess gp(x_unit, ys.y, hyper);
  const double y_best = gp.best_standardized();

  auto acq_at = [&](std::span<const double> u) {
    return acquisition_value(acquisition, gp.predict(u), y_best, kappa, xi);
  };

  CounterRng rng(seed, 0xAC0);
  struct Scored {
    double value;
    std::vector<double> u;
  };
  std::vector<Scored> candidates;
  candidates.reserve(static_cast<std::size_t>(options.n_candidates) + 1);
  for (int c = 0; c < options.n_candidates; ++c) {
    std::vector<double> u(d);
    for (auto& v : u) v = rng.uniform();
    candidates.push_back({acq_at(u), std::move(u)});
  }
  {
    const std::size_t best_i =
        static_cast<std::size_t>(std::min_element(losses.begin(), losses.end()) - losses.begin());
    candidates.push_back({acq_at(x_unit[best_i]), x_unit[best_i]});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Scored& a, const Scored& b) { return a.value < b.value; });

  Scored best = candidates.front();
  const Objective clamped = [&](std::span<const double> z) {
    std::vector<double> u(z.begin(), z.end());
    double outside = 0.0;
    for (auto& v : u) {
      const double c = std::clamp(v, 0.0, 1.0);
      outside += (v - c) * (v - c);
      v = c;
    }
    return acq_at(u) + outside;
  };
  const int n_local = std::min<int>(options.n_local, static_cast<int>(candidates.size()));
  for (int i = 0; i < n_local; ++i) {
    const MinimizeResult r = nelder_mead(clamped, candidates[static_cast<std::size_t>(i)].u, 0.05, 300, 1e-6);
    std::vector<double> u = r.x;
    for (auto& v : u) v = std::clamp(v, 0.0, 1.0);
    const double value = acq_at(u);
    if (value < best.value) best = {value, std::move(u)};
  }

  Suggestion s;
  s.point = space.from_unit(best.u);
  s.hyper = std::move(hyper);
  return s;
}

// ---------------------------------------------------------------------------
// Tuning loop

std::vector<double> TuneRun::best_so_far() const {
  std::vector<double> out;
  out.reserve(history.size());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : history) {
    best = std::min(best, e.loss);
    out.push_back(best);
  }
  return out;
}

TuneEvaluation evaluate_point(const SearchSpace& space, std::span<const double> point, const PropertySet& targets,
                              const CellFactory& factory, const VisualGrid& grid, const SweepConfig& sweeps) {
  TuneEvaluation e;
  e.point.assign(point.begin(), point.end());
  e.params = space.to_params(point);
  try {
    const PropertyReport report = measure_properties(factory(e.params), grid, sweeps);
    e.properties = report.properties;
    e.errors = report.errors;
    e.loss = penalized_loss(report, targets);
  } catch (const std::exception& ex) {
    for (auto& err : e.errors) err = std::string("evaluation failed: ") + ex.what();
    e.loss = kFailedPropertyPenalty * static_cast<double>(PropertySet::kCount);
  }
  return e;
}

TuneRun tune(const SearchSpace& space, const TuneConfig& config, const CellFactory& factory, const VisualGrid& grid,
             const SweepConfig& sweeps, const TuneProgress& progress) {
  space.validate();
  config.validate();
  grid.validate();
  sweeps.validate();
  if (!factory) throw std::invalid_argument("tune: missing cell factory");

  TuneRun run;
  run.space = space;
  run.config = config;
  run.seed = config.seed;
  run.history.reserve(static_cast<std::size_t>(config.n_evals));

  std::vector<std::vector<double>> points;
  std::vector<double> losses;
  auto record = [&](TuneEvaluation e) {
    points.push_back(e.point);
    losses.push_back(e.loss);
    if (run.history.empty() || e.loss < run.best_loss) {
      run.best_loss = e.loss;
      run.best_params = e.params;
      run.best_index = run.history.size();
    }
    run.history.push_back(std::move(e));
    if (progress) progress(run);
  };

  for (const auto& p : sobol_init(space, config.n_init, config.seed)) {
    TuneEvaluation e = evaluate_point(space, p, config.targets, factory, grid, sweeps);
    e.acquisition = Acquisition::sobol;
    record(std::move(e));
  }

  static constexpr std::array<Acquisition, 3> kChoices{Acquisition::LCB, Acquisition::EI, Acquisition::PI};
  std::optional<GpHyperparameters> hyper;
  for (int i = config.n_init; i < config.n_evals; ++i) {
    const auto pick = static_cast<std::size_t>(counter_uniform(config.seed, 0xAC9, static_cast<std::uint64_t>(i)) * 3.0);
    const Acquisition acq = kChoices[std::min<std::size_t>(pick, 2)];
    SuggestOptions opts;
    opts.n_candidates = config.n_candidates;
    opts.n_local = config.n_local;
    opts.hyper = hyper;
    opts.refit = !hyper || (i - config.n_init) % config.refit_every == 0;
    Suggestion s = gp_suggest(points, losses, space, acq, config.kappa, config.xi,
                              mix_key(config.seed, 0x5EE, static_cast<std::uint64_t>(i)), opts);
    if (!s.fallback) hyper = s.hyper;
    TuneEvaluation e = evaluate_point(space, s.point, config.targets, factory, grid, sweeps);
    e.acquisition = acq;
    e.fallback = s.fallback;
    record(std::move(e));
  }
  return run;
}

}  // namespace earlyvision
