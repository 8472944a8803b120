#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "earlyvision/grid.hpp"
#include "earlyvision/neurophys.hpp"
#include "earlyvision/subcortical.hpp"
#include "earlyvision/tuner.hpp"
#include "earlyvision/vone.hpp"

namespace earlyvision {

using Json = nlohmann::ordered_json;

inline constexpr int kParamSchemaVersion = 1;

/// Raised for malformed files and unknown or missing keys.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws FormatError when `j` has a key outside `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

Json to_json(const PathwayParams& p);
/// Structural parse only; invariants are left to PathwayParams::validate.
PathwayParams params_from_json(const Json& j);
Json to_json(const PropertySet& p);
PropertySet properties_from_json(const Json& j);
Json to_json(const SearchSpace& s);
SearchSpace search_space_from_json(const Json& j);
Json to_json(const TuneConfig& c);
Json to_json(const TuneRun& run);
Json to_json(const GaborParams& g);
GaborParams gabor_from_json(const Json& j);
Json to_json(const GfbSpec& s);
GfbSpec gfb_spec_from_json(const Json& j);
Json to_json(const VisualGrid& g);
VisualGrid grid_from_json(const Json& j);
Json to_json(const SweepConfig& s);
SweepConfig sweeps_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed, newline-terminated.
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

PathwayParams load_params(const std::filesystem::path& path);
void save_params(const std::filesystem::path& path, const PathwayParams& p);

/// Two columns, abscissa then f1, with a header naming the abscissa and its unit.
std::string curve_to_csv(const ResponseCurve& c);
ResponseCurve curve_from_csv(const std::string& text);
std::string convergence_csv(const TuneRun& run);

/// RGB frame in [0, 1]; grayscale and alpha inputs are expanded or dropped.
Channels read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Channels& rgb);

/// Raw little-endian float64 array (C order, channels x rows x cols) plus a
/// JSON header at `<stem>.json`. Returns the paths written.
std::vector<std::filesystem::path> write_dump(const std::filesystem::path& stem, const Channels& data,
                                              const Json& extra = Json::object());
Channels read_dump(const std::filesystem::path& stem);

/// Minimal SVG line plot with a logarithmic abscissa.
std::string curve_svg(const ResponseCurve& c, const std::string& title);

}  // namespace earlyvision
