#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <memory>

#include "earlyvision/cells.hpp"
#include "earlyvision/cli.hpp"
#include "earlyvision/io.hpp"
#include "earlyvision/neurophys.hpp"
#include "earlyvision/stimuli.hpp"
#include "earlyvision/subcortical.hpp"
#include "earlyvision/tuner.hpp"
#include "earlyvision/vone.hpp"

namespace py = pybind11;
using namespace earlyvision;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Channels& ch) {
  if (ch.empty()) return Array(std::vector<py::ssize_t>{0, 0, 0});
  const py::ssize_t rows = ch[0].rows(), cols = ch[0].cols();
  Array out({static_cast<py::ssize_t>(ch.size()), rows, cols});
  double* dst = out.mutable_data();
  for (const Plane& p : ch) {
    std::memcpy(dst, p.values().data(), p.size() * sizeof(double));
    dst += p.size();
  }
  return out;
}

Array to_array(const Plane& p) {
  Array out({static_cast<py::ssize_t>(p.rows()), static_cast<py::ssize_t>(p.cols())});
  std::memcpy(out.mutable_data(), p.values().data(), p.size() * sizeof(double));
  return out;
}

// Accepts (C, H, W) or, for a single plane, (H, W).
Channels to_channels(const Array& a) {
  if (a.ndim() == 2) {
    Plane p(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(p.values().data(), a.data(), p.size() * sizeof(double));
    return {p};
  }
  if (a.ndim() != 3) throw py::value_error("expected an array of shape (C, H, W)");
  Channels ch;
  const double* src = a.data();
  for (py::ssize_t c = 0; c < a.shape(0); ++c) {
    Plane p(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
    std::memcpy(p.values().data(), src, p.size() * sizeof(double));
    src += p.size();
    ch.push_back(std::move(p));
  }
  return ch;
}

py::dict properties_dict(const PropertySet& p) {
  py::dict d;
  const auto v = p.values();
  for (std::size_t i = 0; i < v.size(); ++i) d[py::str(PropertySet::names()[i])] = v[i];
  return d;
}

ResponseCurve make_curve(std::vector<double> x, std::vector<double> y, Experiment e) {
  ResponseCurve c{std::move(x), std::move(y), e};
  c.validate();
  return c;
}

py::dict report_dict(const PropertyReport& r) {
  py::dict d;
  d["properties"] = properties_dict(r.properties);
  py::dict errors;
  for (std::size_t i = 0; i < r.errors.size(); ++i) {
    if (r.errors[i]) errors[py::str(PropertySet::names()[i])] = *r.errors[i];
  }
  d["errors"] = errors;
  auto curve = [](const ResponseCurve& c) {
    py::dict out;
    out["abscissa"] = c.abscissa;
    out["f1"] = c.f1;
    return out;
  };
  d["sf_curve"] = curve(r.sf_curve);
  d["size_curve"] = curve(r.size_curve);
  d["contrast_curve"] = curve(r.contrast_curve);
  d["peak_sf_cpd"] = r.peak_sf_cpd;
  d["peak_diameter_deg"] = r.peak_diameter_deg;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Subcortical front-end, V1 filter bank and neurophysiology toolkit";

  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  py::enum_<CellClass>(m, "CellClass").value("P", CellClass::P).value("M", CellClass::M);
  py::enum_<OpponentChannel>(m, "OpponentChannel")
      .value("P_rg", OpponentChannel::P_rg)
      .value("P_gr", OpponentChannel::P_gr)
      .value("P_by", OpponentChannel::P_by)
      .value("M_achro", OpponentChannel::M_achro);
  py::enum_<GaborCellType>(m, "GaborCellType")
      .value("simple", GaborCellType::simple)
      .value("complex", GaborCellType::complex);
  py::enum_<FrontEndMode>(m, "FrontEndMode")
      .value("subcortical", FrontEndMode::subcortical)
      .value("bypass", FrontEndMode::bypass)
      .value("cascade", FrontEndMode::cascade);

  py::class_<VisualGrid>(m, "VisualGrid")
      .def(py::init([](double fov, int res) { return VisualGrid{fov, res}; }), py::arg("fov_deg") = 7.0,
           py::arg("resolution_px") = 224)
      .def_readwrite("fov_deg", &VisualGrid::fov_deg)
      .def_readwrite("resolution_px", &VisualGrid::resolution_px)
      .def_property_readonly("px_per_deg", &VisualGrid::px_per_deg);

  py::class_<PathwayParams>(m, "PathwayParams")
      .def(py::init<>())
      .def_readwrite("gamma", &PathwayParams::gamma)
      .def_readwrite("r_c_deg", &PathwayParams::r_c_deg)
      .def_readwrite("r_s_deg", &PathwayParams::r_s_deg)
      .def_readwrite("k_ratio", &PathwayParams::k_ratio)
      .def_readwrite("r_cn_deg", &PathwayParams::r_cn_deg)
      .def_readwrite("c50", &PathwayParams::c50)
      .def_readwrite("n_cn", &PathwayParams::n_cn)
      .def("violations", &PathwayParams::violations)
      .def("__eq__", [](const PathwayParams& a, const PathwayParams& b) { return a == b; })
      .def("__repr__", [](const PathwayParams& p) { return "PathwayParams(" + to_json(p).dump() + ")"; });

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def(py::init<>())
      .def_readwrite("fano", &NoiseSpec::fano)
      .def_readwrite("spikes_mean_target", &NoiseSpec::spikes_mean_target);

  m.def("tuned_params", &tuned_params, py::arg("cell"));
  m.def("load_params", [](const std::filesystem::path& p) { return load_params(p); });
  m.def("save_params", [](const std::filesystem::path& p, const PathwayParams& v) { save_params(p, v); });

  py::class_<SubcorticalBlock, std::shared_ptr<SubcorticalBlock>>(m, "SubcorticalBlock")
      .def(py::init([](const PathwayParams& p, const PathwayParams& mp, const VisualGrid& grid, bool light,
                       bool cn) {
             PathwayOptions o;
             o.light_adaptation = light;
             o.contrast_normalization = cn;
             return std::make_shared<SubcorticalBlock>(p, mp, grid, o);
           }),
           py::arg("p_params"), py::arg("m_params"), py::arg("grid") = VisualGrid{},
           py::arg("light_adaptation") = true, py::arg("contrast_normalization") = true)
      .def_property("scales", &SubcorticalBlock::scales, &SubcorticalBlock::set_scales)
      .def(
          "calibrate",
          [](SubcorticalBlock& b, const std::vector<Array>& batch, double target) {
            std::vector<Channels> imgs;
            for (const auto& a : batch) imgs.push_back(to_channels(a));
            b.calibrate(imgs, target);
          },
          py::arg("batch"), py::arg("target") = NoiseSpec{}.spikes_mean_target)
      .def(
          "forward",
          [](const SubcorticalBlock& b, const Array& rgb, std::optional<NoiseSpec> noise, std::uint64_t seed) {
            const Channels in = to_channels(rgb);
            Channels out;
            {
              py::gil_scoped_release release;
              out = b.forward(in, noise, seed);
            }
            return to_array(out);
          },
          py::arg("rgb"), py::arg("noise") = std::nullopt, py::arg("seed") = 0);

  py::class_<GratingSpec>(m, "GratingSpec")
      .def(py::init<>())
      .def_readwrite("diameter_deg", &GratingSpec::diameter_deg)
      .def_readwrite("sf_cpd", &GratingSpec::sf_cpd)
      .def_readwrite("contrast", &GratingSpec::contrast)
      .def_readwrite("orientation_rad", &GratingSpec::orientation_rad)
      .def_readwrite("n_phases", &GratingSpec::n_phases)
      .def_readwrite("phase_step_rad", &GratingSpec::phase_step_rad)
      .def_readwrite("background", &GratingSpec::background);

  m.def(
      "render_grating",
      [](const GratingSpec& s, const VisualGrid& g) {
        const GratingFrames f = render_grating(s, g);
        py::list frames;
        for (const auto& fr : f.frames) frames.append(to_array(fr));
        return frames;
      },
      py::arg("spec"), py::arg("grid") = VisualGrid{}, "List of (3, H, W) frames, one per phase.");
  m.def(
      "render_natural_batch",
      [](std::uint64_t seed, int count, const VisualGrid& g) {
        py::list out;
        for (const auto& img : render_natural_batch(seed, count, g)) out.append(to_array(img));
        return out;
      },
      py::arg("seed"), py::arg("count"), py::arg("grid") = VisualGrid{});

  py::class_<GaborParams>(m, "GaborParams")
      .def(py::init<>())
      .def_readwrite("orientation_rad", &GaborParams::orientation_rad)
      .def_readwrite("sf_cpd", &GaborParams::sf_cpd)
      .def_readwrite("sigma_x_deg", &GaborParams::sigma_x_deg)
      .def_readwrite("sigma_y_deg", &GaborParams::sigma_y_deg)
      .def_readwrite("phase_rad", &GaborParams::phase_rad)
      .def_readwrite("input_channel", &GaborParams::input_channel)
      .def_readwrite("cell_type", &GaborParams::cell_type);

  m.def(
      "sample_gfb",
      [](int n, double simple_fraction, std::uint64_t seed, const VisualGrid& g) {
        GfbSpec s;
        s.n_channels = n;
        s.simple_fraction = simple_fraction;
        s.seed = seed;
        s.grid = g;
        return sample_gfb(s);
      },
      py::arg("n_channels") = 32, py::arg("simple_fraction") = 0.5, py::arg("seed") = 0,
      py::arg("grid") = VisualGrid{});
  m.def(
      "gfb_forward",
      [](const Array& input4, const std::vector<GaborParams>& filters, const VisualGrid& g) {
        const Channels in = to_channels(input4);
        Channels out;
        {
          py::gil_scoped_release release;
          out = gfb_forward(in, filters, g);
        }
        return to_array(out);
      },
      py::arg("input4"), py::arg("filters"), py::arg("grid") = VisualGrid{});
  m.def("bypass_input", [](const Array& rgb) { return to_array(bypass_input(to_channels(rgb))); });

  m.def("f1_amplitude", [](const std::vector<double>& s) { return f1_amplitude(s); }, py::arg("samples"));
  m.def(
      "fit_dog_sf",
      [](std::vector<double> x, std::vector<double> y) {
        const DogFit f = fit_dog_sf(make_curve(std::move(x), std::move(y), Experiment::sf_tuning));
        return py::dict(py::arg("r_c_deg") = f.r_c_deg, py::arg("r_s_deg") = f.r_s_deg,
                        py::arg("gain_c") = f.gain_c, py::arg("gain_s") = f.gain_s, py::arg("residual") = f.residual);
      },
      py::arg("sf_cpd"), py::arg("f1"));
  m.def(
      "fit_area_summation",
      [](std::vector<double> x, std::vector<double> y) {
        const AreaSummationFit f =
            fit_area_summation(make_curve(std::move(x), std::move(y), Experiment::size_tuning));
        return py::dict(py::arg("r_e_deg") = f.r_e_deg, py::arg("r_i_deg") = f.r_i_deg, py::arg("k_e") = f.k_e,
                        py::arg("k_i") = f.k_i, py::arg("suppression_index") = f.suppression_index,
                        py::arg("residual") = f.residual,
                        py::arg("inhibition_identified") = f.inhibition_identified);
      },
      py::arg("diameter_deg"), py::arg("f1"));
  m.def(
      "fit_contrast_response",
      [](std::vector<double> x, std::vector<double> y) {
        const ContrastFit f =
            fit_contrast_response(make_curve(std::move(x), std::move(y), Experiment::contrast_response));
        return py::dict(py::arg("r_max") = f.r_max, py::arg("c50") = f.c50, py::arg("q") = f.q,
                        py::arg("saturation_index") = f.saturation_index, py::arg("residual") = f.residual);
      },
      py::arg("contrast"), py::arg("f1"));

  m.def(
      "measure_pathway",
      [](const PathwayParams& p, const VisualGrid& g) {
        PropertyReport r;
        {
          py::gil_scoped_release release;
          r = measure_properties(pathway_cell(p, g), g);
        }
        return report_dict(r);
      },
      py::arg("params"), py::arg("grid") = VisualGrid{},
      "Run the SF, size and contrast experiments on the center unit of one pathway.");
  m.def(
      "measure_vone_unit",
      [](const GaborParams& unit, FrontEndMode mode, std::shared_ptr<SubcorticalBlock> block, const VisualGrid& g) {
        PropertyReport r;
        {
          py::gil_scoped_release release;
          r = measure_properties(vone_cell(unit, g, mode, block), g);
        }
        return report_dict(r);
      },
      py::arg("unit"), py::arg("mode"), py::arg("block") = nullptr, py::arg("grid") = VisualGrid{});

  m.def("reference_targets", [](CellClass c) { return properties_dict(reference_targets(c)); });
  m.def("published_tuned_properties", [](CellClass c) { return properties_dict(published_tuned_properties(c)); });
}
