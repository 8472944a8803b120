#pragma once

#include <memory>

#include "earlyvision/neurophys.hpp"
#include "earlyvision/subcortical.hpp"
#include "earlyvision/vone.hpp"

namespace earlyvision {

// Readout closures for the neurophysiology harness. Every cell reports the
// noise-free response of the unit at the grid center.

/// One subcortical channel of `block`.
CellFn subcortical_cell(std::shared_ptr<const SubcorticalBlock> block, OpponentChannel channel);

/// A single pathway in isolation, read on its standard channel (P_rg or M_achro).
CellFn pathway_cell(const PathwayParams& params, const VisualGrid& grid, PathwayOptions options = {});

/// Linear DoG on luminance minus mid-gray, with no light adaptation,
/// no contrast normalization and an untruncated kernel.
CellFn linear_dog_cell(const PathwayParams& params, const VisualGrid& grid);

/// V1 unit fed by the raw image (bypass) or by `block` (cascade).
CellFn vone_cell(const GaborParams& unit, const VisualGrid& grid, FrontEndMode mode,
                 std::shared_ptr<const SubcorticalBlock> block = nullptr);

}  // namespace earlyvision
