#pragma once

#include <functional>
#include <span>
#include <vector>

namespace earlyvision {

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
};

using Objective = std::function<double(std::span<const double>)>;
/// Returns f(x) and writes the gradient into `grad`.
using ObjectiveWithGradient = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Derivative-free simplex search (GSL nmsimplex2). Non-finite objective
/// values are treated as +infinity. Stops when the simplex size drops below
/// `size_tol` or after `max_iter` iterations.
MinimizeResult nelder_mead(const Objective& f, std::vector<double> x0, double step, int max_iter = 2000,
                           double size_tol = 1e-10);

/// Repeats nelder_mead from its own optimum until the objective improves by
/// less than `rel_tol` (relative), which escapes collapsed simplices.
MinimizeResult nelder_mead_restarted(const Objective& f, std::vector<double> x0, double step, double rel_tol = 1e-10,
                                     int max_restarts = 12);

/// Quasi-Newton descent (GSL vector_bfgs2).
MinimizeResult bfgs(const ObjectiveWithGradient& fdf, std::vector<double> x0, int max_iter = 200,
                    double grad_tol = 1e-6);

}  // namespace earlyvision
