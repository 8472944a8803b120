#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earlyvision/neurophys.hpp"
#include "earlyvision/subcortical.hpp"

namespace earlyvision {

struct Dimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
};

enum class MRcUpperBound { corrected, printed };  // 0.076 or 0.76 deg

struct SearchSpace {
  std::vector<Dimension> dims;
  CellClass cell_class = CellClass::P;

  /// Pathway box over {gamma, r_c, r_s, k_ratio, r_cn, c50, n_cn}.
  static SearchSpace subcortical(CellClass c, MRcUpperBound m_rc = MRcUpperBound::corrected);
  static const std::array<std::string, 7>& pathway_dimension_names();

  void validate() const;
  std::size_t size() const { return dims.size(); }
  bool contains(std::span<const double> point) const;
  std::vector<double> to_unit(std::span<const double> point) const;
  std::vector<double> from_unit(std::span<const double> unit) const;
  PathwayParams to_params(std::span<const double> point) const;
  std::vector<double> from_params(const PathwayParams& p) const;
  /// Names of the dimensions where `p` falls outside the box.
  std::vector<std::string> out_of_box(const PathwayParams& p) const;
};

struct TuneConfig {
  int n_evals = 640;
  int n_init = 64;
  double kappa = 1.96;
  double xi = 0.01;
  std::uint64_t seed = 0;
  PropertySet targets;
  int refit_every = 16;
  int n_candidates = 1000;
  int n_local = 3;

  void validate() const;
};

/// Reference-column means of the empirical property distributions.
PropertySet reference_targets(CellClass c);
/// Values reported for the tuned SubcorticalBlock.
PropertySet published_tuned_properties(CellClass c);

inline constexpr double kFailedPropertyPenalty = 16.0;

/// Sum over the six properties of log2(measured / target)^2.
double loss(const PropertySet& measured, const PropertySet& targets);
/// As `loss`, but failed or nonpositive measurements contribute the fixed penalty.
double penalized_loss(const PropertyReport& report, const PropertySet& targets);

/// First n points of a digitally shifted Sobol sequence mapped into the box.
std::vector<std::vector<double>> sobol_init(const SearchSpace& space, int n, std::uint64_t seed);
/// The point with index `index` of the same sequence.
std::vector<double> sobol_point(const SearchSpace& space, int index, std::uint64_t seed);

enum class Acquisition { sobol, LCB, EI, PI };

std::string to_string(Acquisition a);
Acquisition acquisition_from_string(const std::string& s);

/// Log length scales per dimension, log signal variance, log noise variance.
struct GpHyperparameters {
  std::vector<double> log_length;
  double log_signal = 0.0;
  double log_noise = std::log(1e-4);
};

/// Matern-5/2 ARD Gaussian process on unit-cube inputs and standardized outputs.
class GaussianProcess {
 public:
  GaussianProcess(std::vector<std::vector<double>> x_unit, std::span<const double> y, GpHyperparameters hyper);

  /// Maximum-likelihood hyperparameters (BFGS in a bounded reparameterization).
  static GpHyperparameters fit_hyperparameters(const std::vector<std::vector<double>>& x_unit,
                                               std::span<const double> y, const GpHyperparameters* warm = nullptr);
  static double negative_log_likelihood(const std::vector<std::vector<double>>& x_unit, std::span<const double> y,
                                        const GpHyperparameters& hyper, std::vector<double>* grad = nullptr);

  struct Prediction {
    double mean = 0.0;  // standardized units
    double sd = 0.0;
  };
  Prediction predict(std::span<const double> x_unit) const;
  double best_standardized() const { return y_best_; }
  const GpHyperparameters& hyperparameters() const { return hyper_; }

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
  GpHyperparameters hyper_;
  double y_best_ = 0.0;
};

/// Value to minimize for the chosen acquisition (negated EI / PI).
double acquisition_value(Acquisition a, const GaussianProcess::Prediction& p, double y_best, double kappa, double xi);

struct Suggestion {
  std::vector<double> point;
  bool fallback = false;  // degenerate history, Sobol point returned
  GpHyperparameters hyper;
};

struct SuggestOptions {
  int n_candidates = 1000;
  int n_local = 3;
  /// Warm start for the refit, or the fixed hyperparameters when refit is false.
  std::optional<GpHyperparameters> hyper;
  bool refit = true;
};

Suggestion gp_suggest(const std::vector<std::vector<double>>& points, std::span<const double> losses,
                      const SearchSpace& space, Acquisition acquisition, double kappa, double xi, std::uint64_t seed,
                      const SuggestOptions& options = {});

struct TuneEvaluation {
  std::vector<double> point;
  PathwayParams params;
  PropertySet properties;
  std::array<std::optional<std::string>, PropertySet::kCount> errors;
  double loss = 0.0;
  Acquisition acquisition = Acquisition::sobol;
  bool fallback = false;
};

struct TuneRun {
  SearchSpace space;
  TuneConfig config;
  std::vector<TuneEvaluation> history;
  PathwayParams best_params;
  double best_loss = 0.0;
  std::size_t best_index = 0;
  std::uint64_t seed = 0;

  std::vector<double> best_so_far() const;
};

using CellFactory = std::function<CellFn(const PathwayParams&)>;
using TuneProgress = std::function<void(const TuneRun& partial)>;

/// One pathway, evaluated by `factory` through measure_properties.
TuneEvaluation evaluate_point(const SearchSpace& space, std::span<const double> point, const PropertySet& targets,
                              const CellFactory& factory, const VisualGrid& grid, const SweepConfig& sweeps);

TuneRun tune(const SearchSpace& space, const TuneConfig& config, const CellFactory& factory,
             const VisualGrid& grid = {}, const SweepConfig& sweeps = {}, const TuneProgress& progress = {});

}  // namespace earlyvision
