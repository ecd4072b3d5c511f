"""Tiling-system discretization of the continuous wavelet transform on M_n(R) x| GL_n(R)."""
__version__ = "0.1.0"

from ._backend import BACKEND
from .group import (AffineElement, CoordBox, GroupElement, IwasawaFactors, SingularMatrixError,
                    affine_inverse, affine_multiply, haar_density, haar_measure_mc, iwasawa_decompose,
                    iwasawa_recompose)
from .tiling import (F, F_CLOSURE, RegionKind, TileBoundaryError, TileCoords, TileIndex, TileRangeError,
                     coverage_check, equivariance_check, f_open, membership, tile_assign, tile_point)
from .overlap import (count_integer_hits, m_bound, overlap_scan, pointwise_overlap, refined_M_bound_n2,
                      theoretical_M_bound)
from .window import WindowSpec, admissibility_integral, normalize_to_wavelet, window_eval
from .calderon import FrameBoundReport, calderon_sum, frame_bound_scan
from .spectral import SpectralSignal
from .frame2d import (CubeR, Frame2D, GridError, analysis_coefficients, frame_operator_symbol,
                      reconstruct_canonical, reconstruct_frame_algorithm, synthesize)
