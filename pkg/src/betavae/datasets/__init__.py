"""Factor-grid datasets: procedural 2D shapes and file-backed grids."""

from .factors import (
    FactorError,
    FactorSpace,
    SHAPES2D_FACTORS,
    exclude_factor,
    sample_pair_fixed_factor,
    sample_pairs,
    sample_tuples,
    shapes2d_space,
)
from .fileio import (
    BadMagicError,
    CardinalityMismatchError,
    DatasetFormatError,
    FileDataset,
    TruncatedError,
    load_dataset,
    save_dataset,
)
from .shapes2d import ShapesDataset, render_2dshape, render_batch
from .synthetic import FactorCodeDataset
