#include "earlyvision/cli.hpp"

#include <cstdlib>
#include <ostream>

#include "earlyvision/cells.hpp"
#include "earlyvision/random.hpp"
#include "earlyvision/stimuli.hpp"

namespace earlyvision {
namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <class T>
T get(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(where + ": bad value for '" + key + "'");
  }
}

KRatioConvention k_convention_from_string(const std::string& s) {
  if (s == "magnitude") return KRatioConvention::magnitude;
  if (s == "literal") return KRatioConvention::literal;
  throw FormatError("k_ratio_convention must be \"magnitude\" or \"literal\"");
}

const char* to_string(KRatioConvention k) { return k == KRatioConvention::magnitude ? "magnitude" : "literal"; }

MRcUpperBound m_rc_from_string(const std::string& s) {
  if (s == "corrected") return MRcUpperBound::corrected;
  if (s == "printed") return MRcUpperBound::printed;
  throw FormatError("tune.m_rc_upper must be \"corrected\" or \"printed\"");
}

PathwayParams pathway_entry(const Json& j, const char* inline_key, const char* file_key, CellClass expected,
                            const std::filesystem::path& base, const PathwayParams& fallback) {
  if (j.contains(inline_key) && j.contains(file_key)) {
    throw FormatError(std::string("config: give either '") + inline_key + "' or '" + file_key + "'");
  }
  PathwayParams p = fallback;
  if (j.contains(inline_key)) p = params_from_json(j.at(inline_key));
  if (j.contains(file_key)) p = load_params(resolve(base, get<std::string>(j, file_key, "config")));
  if (p.cell_class != expected) {
    throw FormatError(std::string("config: ") + inline_key + " must have cell_class " + to_string(expected));
  }
  return p;
}

Json fits_json(const PropertyReport& r) {
  Json fits = Json::object();
  if (r.dog_fit) {
    fits["dog"] = Json{{"r_c_deg", r.dog_fit->r_c_deg}, {"r_s_deg", r.dog_fit->r_s_deg},
                       {"gain_c", r.dog_fit->gain_c},   {"gain_s", r.dog_fit->gain_s},
                       {"residual", r.dog_fit->residual}};
  }
  if (r.area_fit) {
    fits["area_summation"] = Json{{"r_e_deg", r.area_fit->r_e_deg},
                                  {"r_i_deg", r.area_fit->r_i_deg},
                                  {"k_e", r.area_fit->k_e},
                                  {"k_i", r.area_fit->k_i},
                                  {"suppression_index", r.area_fit->suppression_index},
                                  {"inhibition_identified", r.area_fit->inhibition_identified},
                                  {"residual", r.area_fit->residual}};
  }
  if (r.contrast_fit) {
    fits["contrast"] = Json{{"r_max", r.contrast_fit->r_max},
                            {"c50", r.contrast_fit->c50},
                            {"q", r.contrast_fit->q},
                            {"saturation_index", r.contrast_fit->saturation_index},
                            {"residual", r.contrast_fit->residual}};
  }
  return fits;
}

Json errors_json(const std::array<std::optional<std::string>, PropertySet::kCount>& errors) {
  Json j = Json::object();
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (errors[k]) j[PropertySet::names()[k]] = *errors[k];
  }
  return j;
}

}  // namespace

PathwayParams tuned_params(CellClass c) {
  PathwayParams p;
  p.cell_class = c;
  // Best points of `tune --seed 0` for each pathway.
  if (c == CellClass::P) {
    p.gamma = 1.1719765398798598;
    p.r_c_deg = 0.05;
    p.r_s_deg = 0.223;
    p.k_ratio = -0.026467225003357034;
    p.r_cn_deg = 0.419;
    p.c50 = 1.0;
    p.n_cn = 1.0;
  } else {
    p.gamma = 1.3663301166621862;
    p.r_c_deg = 0.076;
    p.r_s_deg = 0.482;
    p.k_ratio = -0.0073958375755530485;
    p.r_cn_deg = 0.6216103496382626;
    p.c50 = 1.0;
    p.n_cn = 0.7166209195940577;
  }
  return p;
}

PathwayOptions RunConfig::options() const {
  PathwayOptions o;
  o.k_convention = k_convention;
  return o;
}

TuneConfig RunConfig::tune_config() const {
  TuneConfig t = tune;
  t.seed = seed;
  if (!targets_given) t.targets = reference_targets(cell);
  return t;
}

void RunConfig::validate() const {
  grid.validate();
  p_params.validate();
  m_params.validate();
  sweeps.validate();
  tune_config().validate();
  space().validate();
  noise_spec.validate();
  if (calibration_images < 1) throw std::invalid_argument("calibration.images must be >= 1");
  if (mode != FrontEndMode::subcortical) unit.validate();
}

RunConfig parse_run_config(const Json& j, const std::filesystem::path& base) {
  const std::string where = "config";
  reject_unknown_keys(j, {"seed", "out_dir", "cell", "mode", "grid", "p_params", "p_params_file", "m_params",
                          "m_params_file", "k_ratio_convention", "sweeps", "tune", "vone", "noise", "calibration",
                          "image"},
                      where);
  RunConfig c;
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", where);
  if (j.contains("out_dir")) c.out_dir = resolve(base, get<std::string>(j, "out_dir", where));
  if (j.contains("cell")) c.cell = cell_class_from_string(get<std::string>(j, "cell", where));
  if (j.contains("mode")) c.mode = front_end_mode_from_string(get<std::string>(j, "mode", where));
  if (j.contains("grid")) c.grid = grid_from_json(j.at("grid"));
  c.p_params = pathway_entry(j, "p_params", "p_params_file", CellClass::P, base, c.p_params);
  c.m_params = pathway_entry(j, "m_params", "m_params_file", CellClass::M, base, c.m_params);
  if (j.contains("k_ratio_convention")) {
    c.k_convention = k_convention_from_string(get<std::string>(j, "k_ratio_convention", where));
  }
  if (j.contains("sweeps")) c.sweeps = sweeps_from_json(j.at("sweeps"));
  if (j.contains("tune")) {
    const Json& t = j.at("tune");
    const std::string tw = "config.tune";
    reject_unknown_keys(t, {"n_evals", "n_init", "kappa", "xi", "targets", "m_rc_upper", "refit_every",
                            "n_candidates", "n_local"},
                        tw);
    if (t.contains("n_evals")) c.tune.n_evals = get<int>(t, "n_evals", tw);
    if (t.contains("n_init")) c.tune.n_init = get<int>(t, "n_init", tw);
    if (t.contains("kappa")) c.tune.kappa = get<double>(t, "kappa", tw);
    if (t.contains("xi")) c.tune.xi = get<double>(t, "xi", tw);
    if (t.contains("refit_every")) c.tune.refit_every = get<int>(t, "refit_every", tw);
    if (t.contains("n_candidates")) c.tune.n_candidates = get<int>(t, "n_candidates", tw);
    if (t.contains("n_local")) c.tune.n_local = get<int>(t, "n_local", tw);
    if (t.contains("m_rc_upper")) c.m_rc_upper = m_rc_from_string(get<std::string>(t, "m_rc_upper", tw));
    if (t.contains("targets")) {
      c.tune.targets = properties_from_json(t.at("targets"));
      c.targets_given = true;
    }
  }
  if (j.contains("vone")) {
    const Json& v = j.at("vone");
    reject_unknown_keys(v, {"unit", "bank"}, "config.vone");
    if (v.contains("unit")) c.unit = gabor_from_json(v.at("unit"));
    if (v.contains("bank")) c.bank = gfb_spec_from_json(v.at("bank"));
  }
  if (j.contains("noise")) {
    const Json& n = j.at("noise");
    const std::string nw = "config.noise";
    reject_unknown_keys(n, {"enabled", "fano", "spikes_mean_target", "integration_window_ms"}, nw);
    if (n.contains("enabled")) c.noise = get<bool>(n, "enabled", nw);
    if (n.contains("fano")) c.noise_spec.fano = get<double>(n, "fano", nw);
    if (n.contains("spikes_mean_target")) c.noise_spec.spikes_mean_target = get<double>(n, "spikes_mean_target", nw);
    if (n.contains("integration_window_ms")) {
      c.noise_spec.integration_window_ms = get<double>(n, "integration_window_ms", nw);
    }
  }
  if (j.contains("calibration")) {
    const Json& k = j.at("calibration");
    reject_unknown_keys(k, {"images", "seed"}, "config.calibration");
    if (k.contains("images")) c.calibration_images = get<int>(k, "images", "config.calibration");
    if (k.contains("seed")) c.calibration_seed = get<std::uint64_t>(k, "seed", "config.calibration");
  }
  if (j.contains("image")) c.image = resolve(base, get<std::string>(j, "image", where));
  c.bank.grid = c.grid;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_json(path), path.parent_path());
}

Json to_json(const RunConfig& c) {
  Json tune = to_json(c.tune_config());
  tune.erase("seed");
  tune["m_rc_upper"] = c.m_rc_upper == MRcUpperBound::corrected ? "corrected" : "printed";
  Json bank = to_json(c.bank);
  bank.erase("grid");
  Json j{{"seed", c.seed},
         {"cell", to_string(c.cell)},
         {"mode", to_string(c.mode)},
         {"grid", to_json(c.grid)},
         {"p_params", to_json(c.p_params)},
         {"m_params", to_json(c.m_params)},
         {"k_ratio_convention", to_string(c.k_convention)},
         {"sweeps", to_json(c.sweeps)},
         {"tune", tune},
         {"vone", Json{{"unit", to_json(c.unit)}, {"bank", bank}}},
         {"noise", Json{{"enabled", c.noise},
                        {"fano", c.noise_spec.fano},
                        {"spikes_mean_target", c.noise_spec.spikes_mean_target},
                        {"integration_window_ms", c.noise_spec.integration_window_ms}}},
         {"calibration", Json{{"images", c.calibration_images}, {"seed", c.calibration_seed}}}};
  if (!c.image.empty()) j["image"] = c.image.string();
  return j;
}

// ---------------------------------------------------------------------------

CommandResult cmd_tune(const RunConfig& cfg, bool dry_run, bool plots, std::ostream* log) {
  cfg.validate();
  CommandResult res;
  if (dry_run) return res;
  const SearchSpace space = cfg.space();
  const TuneConfig tc = cfg.tune_config();
  const VisualGrid grid = cfg.grid;
  const PathwayOptions options = cfg.options();
  const CellFactory factory = [grid, options](const PathwayParams& p) { return pathway_cell(p, grid, options); };
  const TuneProgress progress = [&](const TuneRun& r) {
    if (!log) return;
    const std::size_t n = r.history.size();
    if (n % 16 == 0 || n == static_cast<std::size_t>(tc.n_evals)) {
      *log << "eval " << n << "/" << tc.n_evals << "  loss " << r.history.back().loss << "  best " << r.best_loss
           << "\n";
      log->flush();
    }
  };
  const TuneRun run = tune(space, tc, factory, grid, cfg.sweeps, progress);

  const std::string cell = to_string(cfg.cell);
  const auto dir = cfg.out_dir;
  const auto run_path = dir / ("tune_" + cell + ".json");
  const auto csv_path = dir / ("tune_" + cell + "_convergence.csv");
  const auto params_path = dir / ("params_" + cell + ".json");
  write_json(run_path, to_json(run));
  write_text(csv_path, convergence_csv(run));
  save_params(params_path, run.best_params);
  res.written = {run_path, csv_path, params_path};
  if (plots) {
    ResponseCurve conv;
    conv.experiment = Experiment::sf_tuning;
    const auto best = run.best_so_far();
    for (std::size_t i = 0; i < best.size(); ++i) {
      conv.abscissa.push_back(static_cast<double>(i + 1));
      conv.f1.push_back(best[i]);
    }
    const auto svg = dir / ("tune_" + cell + "_convergence.svg");
    write_text(svg, curve_svg(conv, "best loss so far (x: evaluation)"));
    res.written.push_back(svg);
  }
  if (log) *log << "best loss " << run.best_loss << " at evaluation " << run.best_index << "\n";
  return res;
}

CellFn make_measure_cell(const RunConfig& cfg) {
  switch (cfg.mode) {
    case FrontEndMode::subcortical: return pathway_cell(cfg.pathway(), cfg.grid, cfg.options());
    case FrontEndMode::bypass: return vone_cell(cfg.unit, cfg.grid, FrontEndMode::bypass);
    case FrontEndMode::cascade: {
      auto block = std::make_shared<const SubcorticalBlock>(cfg.p_params, cfg.m_params, cfg.grid, cfg.options());
      return vone_cell(cfg.unit, cfg.grid, FrontEndMode::cascade, std::move(block));
    }
  }
  throw std::invalid_argument("unknown mode");
}

CommandResult cmd_measure(const RunConfig& cfg, bool dry_run, bool plots, std::ostream* log) {
  cfg.validate();
  CommandResult res;
  if (dry_run) return res;
  const PropertyReport rep = measure_properties(make_measure_cell(cfg), cfg.grid, cfg.sweeps);
  const auto dir = cfg.out_dir;
  Json j{{"mode", to_string(cfg.mode)},
         {"properties", to_json(rep.properties)},
         {"errors", errors_json(rep.errors)},
         {"peak_sf_cpd", rep.peak_sf_cpd},
         {"peak_diameter_deg", rep.peak_diameter_deg},
         {"fits", fits_json(rep)}};
  if (cfg.mode == FrontEndMode::subcortical) j["params"] = to_json(cfg.pathway());
  else j["unit"] = to_json(cfg.unit);
  const auto props = dir / "properties.json";
  write_json(props, j);
  res.written.push_back(props);
  const std::array<std::pair<const char*, const ResponseCurve*>, 3> curves{
      {{"sf_curve", &rep.sf_curve}, {"size_curve", &rep.size_curve}, {"contrast_curve", &rep.contrast_curve}}};
  for (const auto& [name, curve] : curves) {
    const auto csv = dir / (std::string(name) + ".csv");
    write_text(csv, curve_to_csv(*curve));
    res.written.push_back(csv);
    if (plots) {
      const auto svg = dir / (std::string(name) + ".svg");
      write_text(svg, curve_svg(*curve, name));
      res.written.push_back(svg);
    }
  }
  if (log) {
    const auto v = rep.properties.values();
    for (std::size_t k = 0; k < v.size(); ++k) {
      *log << PropertySet::names()[k] << " = " << v[k];
      if (rep.errors[k]) *log << "  (failed: " << *rep.errors[k] << ")";
      *log << "\n";
    }
  }
  return res;
}

CommandResult cmd_forward(const RunConfig& cfg, bool dry_run, std::ostream* log) {
  cfg.validate();
  if (cfg.image.empty()) throw std::invalid_argument("forward: config needs an 'image' path");
  if (!std::filesystem::exists(cfg.image)) throw std::runtime_error("forward: image not found: " + cfg.image.string());
  CommandResult res;
  if (dry_run) return res;
  const Channels rgb = read_png(cfg.image);
  if (rgb[0].rows() != cfg.grid.resolution_px || rgb[0].cols() != cfg.grid.resolution_px) {
    throw std::invalid_argument("forward: image must be " + std::to_string(cfg.grid.resolution_px) + "x" +
                                std::to_string(cfg.grid.resolution_px) + " pixels");
  }
  const std::vector<Channels> batch = render_natural_batch(cfg.calibration_seed, cfg.calibration_images, cfg.grid);
  const std::optional<NoiseSpec> noise = cfg.noise ? std::optional<NoiseSpec>(cfg.noise_spec) : std::nullopt;

  Channels out;
  if (cfg.mode == FrontEndMode::bypass) {
    VOneBlock vone(sample_gfb(cfg.bank), cfg.grid);
    std::vector<Channels> inputs;
    for (const auto& img : batch) inputs.push_back(bypass_input(img));
    vone.calibrate(inputs);
    vone.set_cortical_fano(1.0);
    out = vone.forward(bypass_input(rgb), cfg.noise, cfg.seed);
  } else {
    SubcorticalBlock block(cfg.p_params, cfg.m_params, cfg.grid, cfg.options());
    block.calibrate(batch, cfg.noise_spec.spikes_mean_target);
    if (cfg.mode == FrontEndMode::subcortical) {
      out = block.forward(rgb, noise, cfg.seed);
    } else {
      VOneBlock vone(sample_gfb(cfg.bank), cfg.grid);
      std::vector<Channels> inputs;
      for (const auto& img : batch) inputs.push_back(block.forward(img));
      vone.calibrate(inputs);
      const Channels sub = block.forward(rgb, noise, cfg.seed);
      if (cfg.noise) {
        const std::vector<GaborParams> probe_units(vone.filters().begin(),
                                                   vone.filters().begin() + std::min<std::size_t>(8, vone.filters().size()));
        const CascadeProbe probe(block, probe_units, batch.front(), vone.scale(), cfg.noise_spec.fano);
        vone.set_cortical_fano(calibrate_cortical_fano(probe, 2000, cfg.calibration_seed));
      }
      out = vone.forward(sub, cfg.noise, mix_key(cfg.seed, 0xC0, 0));
    }
  }
  const Json extra{{"mode", to_string(cfg.mode)}, {"seed", cfg.seed}, {"noise", cfg.noise}};
  res.written = write_dump(cfg.out_dir / "activations", out, extra);
  if (log) *log << "wrote " << out.size() << " x " << out[0].rows() << " x " << out[0].cols() << " activations\n";
  return res;
}

// ---------------------------------------------------------------------------

ValidationReport validate_params_file(const std::filesystem::path& path, const std::optional<SearchSpace>& space) {
  ValidationReport rep;
  PathwayParams p;
  try {
    p = load_params(path);
  } catch (const std::exception& e) {
    rep.errors.emplace_back(e.what());
    return rep;
  }
  rep.errors = p.violations();
  if (space) {
    if (space->cell_class != p.cell_class) {
      rep.warnings.push_back("search space is for cell class " + to_string(space->cell_class) + ", file is " +
                             to_string(p.cell_class));
    }
    for (const auto& name : space->out_of_box(p)) rep.warnings.push_back(name + " is outside the search box");
  }
  return rep;
}

CommandResult cmd_validate(const std::filesystem::path& path, const std::optional<SearchSpace>& space,
                           std::ostream& out) {
  const ValidationReport rep = validate_params_file(path, space);
  for (const auto& e : rep.errors) out << "error: " << e << "\n";
  for (const auto& w : rep.warnings) out << "warning: " << w << "\n";
  out << (rep.ok() ? "pass" : "fail") << ": " << path.string() << "\n";
  return {rep.ok() ? 0 : 1, {}};
}

}  // namespace earlyvision
