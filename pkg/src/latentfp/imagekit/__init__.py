"""Image container conventions, convolution engine, transforms and PGM I/O.

A gray image is a 2-D float64 array indexed ``[row, col]`` with values in
[0, 1]. Derived fields (gradients, tensors) use the same layout but are not
clamped.
"""
from .conv import (
    BORDER_MODES,
    DIRECTIONAL_ANGLES,
    BorderMode,
    DimensionError,
    Kernel,
    convolve2d,
    convolve2d_adjoint,
    correlate2d,
    directional_kernel,
    gaussian_kernel,
    make_kernel,
    motion_kernel,
)
from .pgm import (
    PGMError,
    PGMFormatError,
    PGMHeaderError,
    PGMMaxvalError,
    PGMTruncatedError,
    load_pgm,
    save_pgm,
)
from .transforms import adaptive_binarize, as_image, blend, box_mean, gray_dilate, warp_affine

__all__ = [
    "BORDER_MODES", "DIRECTIONAL_ANGLES", "BorderMode", "DimensionError", "Kernel",
    "convolve2d", "convolve2d_adjoint", "correlate2d", "directional_kernel",
    "gaussian_kernel", "make_kernel", "motion_kernel",
    "PGMError", "PGMFormatError", "PGMHeaderError", "PGMMaxvalError", "PGMTruncatedError",
    "load_pgm", "save_pgm",
    "adaptive_binarize", "as_image", "blend", "box_mean", "gray_dilate", "warp_affine",
]
