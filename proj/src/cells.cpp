#include "earlyvision/cells.hpp"

#include <stdexcept>

namespace earlyvision {

CellFn subcortical_cell(std::shared_ptr<const SubcorticalBlock> block, OpponentChannel channel) {
  if (!block) throw std::invalid_argument("subcortical_cell: null block");
  return [block = std::move(block), channel](const Channels& rgb) {
    const int c = block->grid().center_px();
    return block->channel_window(rgb, channel, Window{c, c, 0})(0, 0);
  };
}

CellFn pathway_cell(const PathwayParams& params, const VisualGrid& grid, PathwayOptions options) {
  auto block = std::make_shared<const SubcorticalBlock>(params, params, grid, options);
  return subcortical_cell(std::move(block), readout_channel(params.cell_class));
}

CellFn linear_dog_cell(const PathwayParams& params, const VisualGrid& grid) {
  PathwayOptions linear;
  linear.light_adaptation = false;
  linear.contrast_normalization = false;
  linear.support = KernelSupport::full;
  PathwayParams achromatic = params;
  achromatic.cell_class = CellClass::M;
  return pathway_cell(achromatic, grid, linear);
}

CellFn vone_cell(const GaborParams& params, const VisualGrid& grid, FrontEndMode mode,
                 std::shared_ptr<const SubcorticalBlock> block) {
  auto unit = std::make_shared<const GaborUnit>(make_gabor_unit(params, grid));
  const int c = grid.center_px();
  switch (mode) {
    case FrontEndMode::bypass:
      return [unit, c](const Channels& rgb) {
        const Window w{c, c, unit->half()};
        const int ch = unit->params.input_channel;
        if (ch < 3) {
          Plane patch = extract_window(rgb[ch], w);
          for (double& v : patch.values()) v = (v - 0.5) / 0.5;
          return unit_response(*unit, patch);
        }
        Plane patch(w.side(), w.side());
        for (int k = 0; k < 3; ++k) {
          const Plane p = extract_window(rgb[k], w);
          auto dst = patch.values();
          auto src = p.values();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += (src[i] - 0.5) / 0.5 / 3.0;
        }
        return unit_response(*unit, patch);
      };
    case FrontEndMode::cascade:
      if (!block) throw std::invalid_argument("vone_cell: cascade mode needs a subcortical block");
      return [unit, c, block = std::move(block)](const Channels& rgb) {
        const Plane patch = block->channel_window(rgb, static_cast<OpponentChannel>(unit->params.input_channel),
                                                  Window{c, c, unit->half()});
        return unit_response(*unit, patch);
      };
    case FrontEndMode::subcortical:
      break;
  }
  throw std::invalid_argument("vone_cell: mode must be bypass or cascade");
}

}  // namespace earlyvision
