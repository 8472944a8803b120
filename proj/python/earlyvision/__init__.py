"""Subcortical front-end, V1 filter bank and neurophysiology toolkit."""

from ._core import (
    CellClass,
    FitError,
    FormatError,
    FrontEndMode,
    GaborCellType,
    GaborParams,
    GratingSpec,
    NoiseSpec,
    OpponentChannel,
    PathwayParams,
    SubcorticalBlock,
    VisualGrid,
    bypass_input,
    f1_amplitude,
    fit_area_summation,
    fit_contrast_response,
    fit_dog_sf,
    gfb_forward,
    load_params,
    measure_pathway,
    measure_vone_unit,
    published_tuned_properties,
    reference_targets,
    render_grating,
    render_natural_batch,
    sample_gfb,
    save_params,
    tuned_params,
)

__version__ = "0.1.0"
