#include "earlyvision/optimize.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace earlyvision {
namespace {

constexpr double kHuge = 1e300;

struct GslVectorFree {
  void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
using VectorPtr = std::unique_ptr<gsl_vector, GslVectorFree>;

VectorPtr to_gsl(const std::vector<double>& x) {
  VectorPtr v(gsl_vector_alloc(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) gsl_vector_set(v.get(), i, x[i]);
  return v;
}

std::vector<double> from_gsl(const gsl_vector* v) {
  std::vector<double> x(v->size);
  for (std::size_t i = 0; i < v->size; ++i) x[i] = gsl_vector_get(v, i);
  return x;
}

std::span<const double> view(const gsl_vector* v) { return {v->data, v->size}; }

double guarded(double v) { return std::isfinite(v) ? v : kHuge; }

double nm_trampoline(const gsl_vector* x, void* params) {
  const auto& f = *static_cast<const Objective*>(params);
  try {
    return guarded(f(view(x)));
  } catch (...) {
    return kHuge;
  }
}

struct FdfContext {
  const ObjectiveWithGradient* fdf;
  std::vector<double> grad;
};

double bfgs_f(const gsl_vector* x, void* params) {
  auto* ctx = static_cast<FdfContext*>(params);
  return guarded((*ctx->fdf)(view(x), ctx->grad));
}

void bfgs_df(const gsl_vector* x, void* params, gsl_vector* g) {
  auto* ctx = static_cast<FdfContext*>(params);
  (*ctx->fdf)(view(x), ctx->grad);
  for (std::size_t i = 0; i < g->size; ++i) gsl_vector_set(g, i, std::isfinite(ctx->grad[i]) ? ctx->grad[i] : 0.0);
}

void bfgs_fdf(const gsl_vector* x, void* params, double* f, gsl_vector* g) {
  auto* ctx = static_cast<FdfContext*>(params);
  *f = guarded((*ctx->fdf)(view(x), ctx->grad));
  for (std::size_t i = 0; i < g->size; ++i) gsl_vector_set(g, i, std::isfinite(ctx->grad[i]) ? ctx->grad[i] : 0.0);
}

struct ErrorHandlerOff {
  ErrorHandlerOff() : previous(gsl_set_error_handler_off()) {}
  ~ErrorHandlerOff() { gsl_set_error_handler(previous); }
  gsl_error_handler_t* previous;
};

}  // namespace

MinimizeResult nelder_mead(const Objective& f, std::vector<double> x0, double step, int max_iter, double size_tol) {
  if (x0.empty()) throw std::invalid_argument("nelder_mead: empty start point");
  ErrorHandlerOff guard;
  const std::size_t n = x0.size();
  gsl_multimin_function fn{&nm_trampoline, n, const_cast<Objective*>(&f)};
  VectorPtr x = to_gsl(x0);
  VectorPtr steps(gsl_vector_alloc(n));
  gsl_vector_set_all(steps.get(), step);
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> s(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n), &gsl_multimin_fminimizer_free);
  gsl_multimin_fminimizer_set(s.get(), &fn, x.get(), steps.get());
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (gsl_multimin_fminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s.get()), size_tol) == GSL_SUCCESS) break;
  }
  return {from_gsl(gsl_multimin_fminimizer_x(s.get())), gsl_multimin_fminimizer_minimum(s.get()), iter};
}

MinimizeResult nelder_mead_restarted(const Objective& f, std::vector<double> x0, double step, double rel_tol,
                                     int max_restarts) {
  MinimizeResult best = nelder_mead(f, std::move(x0), step);
  for (int r = 0; r < max_restarts; ++r) {
    MinimizeResult next = nelder_mead(f, best.x, step * 0.1);
    const bool improved = next.value < best.value;
    const double gain = best.value - next.value;
    if (improved) best = std::move(next);
    if (!improved || gain <= rel_tol * std::max(std::abs(best.value), 1e-300)) break;
  }
  return best;
}

MinimizeResult bfgs(const ObjectiveWithGradient& fdf, std::vector<double> x0, int max_iter, double grad_tol) {
  if (x0.empty()) throw std::invalid_argument("bfgs: empty start point");
  ErrorHandlerOff guard;
  const std::size_t n = x0.size();
  FdfContext ctx{&fdf, std::vector<double>(n)};
  gsl_multimin_function_fdf fn{&bfgs_f, &bfgs_df, &bfgs_fdf, n, &ctx};
  VectorPtr x = to_gsl(x0);
  std::unique_ptr<gsl_multimin_fdfminimizer, decltype(&gsl_multimin_fdfminimizer_free)> s(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n), &gsl_multimin_fdfminimizer_free);
  gsl_multimin_fdfminimizer_set(s.get(), &fn, x.get(), 0.1, 0.1);
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (gsl_multimin_fdfminimizer_iterate(s.get()) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(s.get()->gradient, grad_tol) == GSL_SUCCESS) break;
  }
  return {from_gsl(gsl_multimin_fdfminimizer_x(s.get())), gsl_multimin_fdfminimizer_minimum(s.get()), iter};
}

}  // namespace earlyvision
