#include "earlyvision/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace earlyvision {
namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw FormatError(where + ": missing key '" + key + "'");
  return *it;
}

double number(const Json& j, const char* key, const std::string& where) {
  const Json& v = require(j, key, where);
  if (!v.is_number()) throw FormatError(where + ": '" + key + "' must be a number");
  return v.get<double>();
}

template <class T>
void optional_field(const Json& j, const char* key, T& out, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(where + ": bad value for '" + key + "'");
  }
}

std::vector<double> number_list(const Json& j, const std::string& where) {
  if (!j.is_array()) throw FormatError(where + ": expected a list of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw FormatError(where + ": expected a list of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

const char* abscissa_header(Experiment e) {
  switch (e) {
    case Experiment::sf_tuning: return "sf_cpd";
    case Experiment::size_tuning: return "diameter_deg";
    case Experiment::contrast_response: return "contrast";
  }
  return "x";
}

Json optional_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw FormatError(where + ": unknown key '" + key + "'");
  }
}

// ---------------------------------------------------------------------------

Json to_json(const PathwayParams& p) {
  return Json{{"schema_version", kParamSchemaVersion},
              {"cell_class", to_string(p.cell_class)},
              {"gamma", p.gamma},
              {"r_c_deg", p.r_c_deg},
              {"r_s_deg", p.r_s_deg},
              {"k_ratio", p.k_ratio},
              {"r_cn_deg", p.r_cn_deg},
              {"c50", p.c50},
              {"n_cn", p.n_cn}};
}

PathwayParams params_from_json(const Json& j) {
  const std::string where = "parameter file";
  reject_unknown_keys(j, {"schema_version", "cell_class", "gamma", "r_c_deg", "r_s_deg", "k_ratio", "r_cn_deg", "c50",
                          "n_cn"},
                      where);
  const Json& version = require(j, "schema_version", where);
  if (!version.is_number_integer() || version.get<int>() != kParamSchemaVersion) {
    throw FormatError(where + ": unsupported schema_version");
  }
  PathwayParams p;
  const Json& cls = require(j, "cell_class", where);
  if (!cls.is_string()) throw FormatError(where + ": 'cell_class' must be \"P\" or \"M\"");
  try {
    p.cell_class = cell_class_from_string(cls.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
  p.gamma = number(j, "gamma", where);
  p.r_c_deg = number(j, "r_c_deg", where);
  p.r_s_deg = number(j, "r_s_deg", where);
  p.k_ratio = number(j, "k_ratio", where);
  p.r_cn_deg = number(j, "r_cn_deg", where);
  p.c50 = number(j, "c50", where);
  p.n_cn = number(j, "n_cn", where);
  return p;
}

Json to_json(const PropertySet& p) {
  Json j = Json::object();
  const auto v = p.values();
  for (std::size_t i = 0; i < v.size(); ++i) j[PropertySet::names()[i]] = optional_number(v[i]);
  return j;
}

PropertySet properties_from_json(const Json& j) {
  const std::string where = "properties";
  const auto& n = PropertySet::names();
  reject_unknown_keys(j, {n[0].c_str(), n[1].c_str(), n[2].c_str(), n[3].c_str(), n[4].c_str(), n[5].c_str()},
                      where);
  std::array<double, PropertySet::kCount> v{};
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Json& x = require(j, n[i].c_str(), where);
    if (x.is_null()) v[i] = std::nan("");
    else if (x.is_number()) v[i] = x.get<double>();
    else throw FormatError(where + ": '" + n[i] + "' must be a number");
  }
  return PropertySet::from_values(v);
}

Json to_json(const SearchSpace& s) {
  Json dims = Json::array();
  for (const auto& d : s.dims) dims.push_back(Json{{"name", d.name}, {"lower", d.lower}, {"upper", d.upper}});
  return Json{{"cell_class", to_string(s.cell_class)}, {"dimensions", dims}};
}

SearchSpace search_space_from_json(const Json& j) {
  const std::string where = "search space";
  reject_unknown_keys(j, {"cell_class", "dimensions"}, where);
  SearchSpace s;
  s.cell_class = cell_class_from_string(require(j, "cell_class", where).get<std::string>());
  for (const auto& d : require(j, "dimensions", where)) {
    reject_unknown_keys(d, {"name", "lower", "upper"}, where);
    s.dims.push_back({require(d, "name", where).get<std::string>(), number(d, "lower", where),
                      number(d, "upper", where)});
  }
  return s;
}

Json to_json(const TuneConfig& c) {
  return Json{{"n_evals", c.n_evals},           {"n_init", c.n_init},
              {"kappa", c.kappa},               {"xi", c.xi},
              {"seed", c.seed},                 {"refit_every", c.refit_every},
              {"n_candidates", c.n_candidates}, {"n_local", c.n_local},
              {"targets", to_json(c.targets)}};
}

Json to_json(const TuneRun& run) {
  Json history = Json::array();
  for (std::size_t i = 0; i < run.history.size(); ++i) {
    const auto& e = run.history[i];
    Json errors = Json::object();
    for (std::size_t k = 0; k < e.errors.size(); ++k) {
      if (e.errors[k]) errors[PropertySet::names()[k]] = *e.errors[k];
    }
    history.push_back(Json{{"iteration", i},
                           {"acquisition", to_string(e.acquisition)},
                           {"fallback", e.fallback},
                           {"point", e.point},
                           {"properties", to_json(e.properties)},
                           {"errors", errors},
                           {"loss", e.loss}});
  }
  return Json{{"schema_version", kParamSchemaVersion},
              {"seed", run.seed},
              {"space", to_json(run.space)},
              {"config", to_json(run.config)},
              {"best_index", run.best_index},
              {"best_loss", run.best_loss},
              {"best_params", to_json(run.best_params)},
              {"history", history}};
}

Json to_json(const GaborParams& g) {
  return Json{{"orientation_rad", g.orientation_rad}, {"sf_cpd", g.sf_cpd},
              {"sigma_x_deg", g.sigma_x_deg},         {"sigma_y_deg", g.sigma_y_deg},
              {"phase_rad", g.phase_rad},             {"input_channel", g.input_channel},
              {"cell_type", to_string(g.cell_type)}};
}

GaborParams gabor_from_json(const Json& j) {
  const std::string where = "gabor unit";
  reject_unknown_keys(j, {"orientation_rad", "sf_cpd", "sigma_x_deg", "sigma_y_deg", "phase_rad", "input_channel",
                          "cell_type"},
                      where);
  GaborParams g;
  optional_field(j, "orientation_rad", g.orientation_rad, where);
  optional_field(j, "sf_cpd", g.sf_cpd, where);
  const bool sigma_given = j.contains("sigma_x_deg") || j.contains("sigma_y_deg");
  g.sigma_x_deg = g.sigma_y_deg = envelope_sigma_for_sf(g.sf_cpd);
  optional_field(j, "sigma_x_deg", g.sigma_x_deg, where);
  optional_field(j, "sigma_y_deg", g.sigma_y_deg, where);
  if (sigma_given && !(j.contains("sigma_x_deg") && j.contains("sigma_y_deg"))) {
    throw FormatError(where + ": give both sigma_x_deg and sigma_y_deg or neither");
  }
  optional_field(j, "phase_rad", g.phase_rad, where);
  optional_field(j, "input_channel", g.input_channel, where);
  if (j.contains("cell_type")) g.cell_type = gabor_cell_type_from_string(j.at("cell_type").get<std::string>());
  return g;
}

Json to_json(const VisualGrid& g) { return Json{{"fov_deg", g.fov_deg}, {"resolution_px", g.resolution_px}}; }

VisualGrid grid_from_json(const Json& j) {
  const std::string where = "grid";
  reject_unknown_keys(j, {"fov_deg", "resolution_px"}, where);
  VisualGrid g;
  optional_field(j, "fov_deg", g.fov_deg, where);
  optional_field(j, "resolution_px", g.resolution_px, where);
  return g;
}

Json to_json(const GfbSpec& s) {
  return Json{{"n_channels", s.n_channels},
              {"simple_fraction", s.simple_fraction},
              {"seed", s.seed},
              {"grid", to_json(s.grid)}};
}

GfbSpec gfb_spec_from_json(const Json& j) {
  const std::string where = "gabor bank";
  reject_unknown_keys(j, {"n_channels", "simple_fraction", "seed", "grid"}, where);
  GfbSpec s;
  optional_field(j, "n_channels", s.n_channels, where);
  optional_field(j, "simple_fraction", s.simple_fraction, where);
  optional_field(j, "seed", s.seed, where);
  if (j.contains("grid")) s.grid = grid_from_json(j.at("grid"));
  return s;
}

Json to_json(const SweepConfig& s) {
  return Json{{"sf_cpd", s.sf_cpd},
              {"diameter_deg", s.diameter_deg},
              {"contrast", s.contrast},
              {"sf_contrast", s.sf_contrast},
              {"sf_diameter_deg", s.sf_diameter_deg},
              {"size_contrast", s.size_contrast}};
}

SweepConfig sweeps_from_json(const Json& j) {
  const std::string where = "sweeps";
  reject_unknown_keys(j, {"sf_cpd", "diameter_deg", "contrast", "sf_contrast", "sf_diameter_deg", "size_contrast"},
                      where);
  SweepConfig s;
  if (j.contains("sf_cpd")) s.sf_cpd = number_list(j.at("sf_cpd"), where + ".sf_cpd");
  if (j.contains("diameter_deg")) s.diameter_deg = number_list(j.at("diameter_deg"), where + ".diameter_deg");
  if (j.contains("contrast")) s.contrast = number_list(j.at("contrast"), where + ".contrast");
  optional_field(j, "sf_contrast", s.sf_contrast, where);
  optional_field(j, "sf_diameter_deg", s.sf_diameter_deg, where);
  optional_field(j, "size_contrast", s.size_contrast, where);
  return s;
}

// ---------------------------------------------------------------------------

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

PathwayParams load_params(const std::filesystem::path& path) { return params_from_json(read_json(path)); }

void save_params(const std::filesystem::path& path, const PathwayParams& p) { write_json(path, to_json(p)); }

std::string curve_to_csv(const ResponseCurve& c) {
  std::string out = std::string(abscissa_header(c.experiment)) + ",f1\n";
  for (std::size_t i = 0; i < c.size(); ++i) out += format_double(c.abscissa[i]) + "," + format_double(c.f1[i]) + "\n";
  return out;
}

ResponseCurve curve_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("curve csv: empty");
  ResponseCurve c;
  bool matched = false;
  for (Experiment e : {Experiment::sf_tuning, Experiment::size_tuning, Experiment::contrast_response}) {
    if (line == std::string(abscissa_header(e)) + ",f1") {
      c.experiment = e;
      matched = true;
    }
  }
  if (!matched) throw FormatError("curve csv: unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("curve csv: malformed row '" + line + "'");
    char* end = nullptr;
    const double x = std::strtod(line.c_str(), &end);
    if (end != line.c_str() + comma) throw FormatError("curve csv: malformed row '" + line + "'");
    const char* ystart = line.c_str() + comma + 1;
    const double y = std::strtod(ystart, &end);
    if (end == ystart || *end != '\0') throw FormatError("curve csv: malformed row '" + line + "'");
    c.abscissa.push_back(x);
    c.f1.push_back(y);
  }
  return c;
}

std::string convergence_csv(const TuneRun& run) {
  std::string out = "iteration,loss,best_so_far\n";
  const auto best = run.best_so_far();
  for (std::size_t i = 0; i < run.history.size(); ++i) {
    out += std::to_string(i) + "," + format_double(run.history[i].loss) + "," + format_double(best[i]) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw std::runtime_error(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

}  // namespace

Channels read_png(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8)) throw FormatError(path.string() + ": not a PNG");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, &png_fail, &png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  const int depth = png_get_bit_depth(png, info);
  std::vector<png_byte> data(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = data.data() + r * rowbytes;
  png_read_image(png, rows.data());

  Channels rgb(3, Plane(static_cast<int>(height), static_cast<int>(width)));
  const double maxv = depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 r = 0; r < height; ++r) {
    for (png_uint_32 c = 0; c < width; ++c) {
      for (int k = 0; k < 3; ++k) {
        double v;
        if (depth == 16) {
          std::uint16_t s;
          std::memcpy(&s, rows[r] + (c * 3 + static_cast<png_uint_32>(k)) * 2, 2);
          v = s;
        } else {
          v = rows[r][c * 3 + static_cast<png_uint_32>(k)];
        }
        rgb[static_cast<std::size_t>(k)](static_cast<int>(r), static_cast<int>(c)) = v / maxv;
      }
    }
  }
  return rgb;
}

void write_png(const std::filesystem::path& path, const Channels& rgb) {
  if (rgb.size() != 3) throw std::invalid_argument("write_png: expected 3 channels");
  const int h = rgb[0].rows();
  const int w = rgb[0].cols();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, &png_fail, &png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int k = 0; k < 3; ++k) {
        const double v = std::clamp(rgb[static_cast<std::size_t>(k)](r, c), 0.0, 1.0);
        row[static_cast<std::size_t>(c) * 3 + static_cast<std::size_t>(k)] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

// ---------------------------------------------------------------------------
// Activation dumps

std::vector<std::filesystem::path> write_dump(const std::filesystem::path& stem, const Channels& data,
                                              const Json& extra) {
  if (data.empty()) throw std::invalid_argument("write_dump: no channels");
  const int rows = data[0].rows();
  const int cols = data[0].cols();
  for (const auto& p : data) {
    if (p.rows() != rows || p.cols() != cols) throw std::invalid_argument("write_dump: ragged channels");
  }
  std::filesystem::path bin = stem;
  bin += ".f64";
  std::filesystem::path header = stem;
  header += ".json";
  std::string bytes;
  bytes.reserve(data.size() * static_cast<std::size_t>(rows * cols) * 8);
  for (const auto& p : data) {
    for (double v : p.values()) {
      std::uint64_t u = std::bit_cast<std::uint64_t>(v);
      if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
      char b[8];
      std::memcpy(b, &u, 8);
      bytes.append(b, 8);
    }
  }
  write_text(bin, bytes);
  Json h{{"dtype", "float64"},
         {"byte_order", "little"},
         {"order", "C"},
         {"shape", {data.size(), rows, cols}},
         {"data_file", bin.filename().string()}};
  for (const auto& [k, v] : extra.items()) h[k] = v;
  write_json(header, h);
  return {header, bin};
}

Channels read_dump(const std::filesystem::path& stem) {
  std::filesystem::path header = stem;
  header += ".json";
  const Json h = read_json(header);
  const auto shape = h.at("shape").get<std::vector<int>>();
  if (shape.size() != 3 || h.at("dtype") != "float64") throw FormatError("dump: unsupported header");
  std::filesystem::path bin = stem.parent_path() / h.at("data_file").get<std::string>();
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + bin.string());
  Channels out(static_cast<std::size_t>(shape[0]), Plane(shape[1], shape[2]));
  for (auto& p : out) {
    for (double& v : p.values()) {
      char b[8];
      if (!in.read(b, 8)) throw FormatError("dump: truncated data");
      std::uint64_t u;
      std::memcpy(&u, b, 8);
      if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
      v = std::bit_cast<double>(u);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string curve_svg(const ResponseCurve& c, const std::string& title) {
  constexpr double W = 480, H = 320, L = 60, R = 20, T = 30, B = 50;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
    << title << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << abscissa_header(c.experiment)
    << " (log)</text>\n";
  s << "<text x=\"14\" y=\"" << (T + H - B) / 2 << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 "
    << (T + H - B) / 2 << ")\" text-anchor=\"middle\">F1</text>\n";
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.abscissa[i] > 0.0 && std::isfinite(c.f1[i])) pts.emplace_back(std::log10(c.abscissa[i]), c.f1[i]);
  }
  if (!pts.empty()) {
    double x0 = pts.front().first, x1 = pts.back().first, y1 = 0.0;
    for (const auto& p : pts) y1 = std::max(y1, p.second);
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= 0.0) y1 = 1.0;
    s << "<polyline fill=\"none\" stroke=\"#1f4e99\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) {
      s << L + (x - x0) / (x1 - x0) * (W - L - R) << "," << (H - B) - y / y1 * (H - B - T) << " ";
    }
    s << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace earlyvision
