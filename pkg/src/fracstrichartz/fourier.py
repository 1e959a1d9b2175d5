"""Grid-aware Fourier transforms.

Convention: forward transform f^(xi) = int e^{-i x.xi} f(x) dx, inversion
carries (2pi)^{-d}.  Frequency nodes are xi_k = -Xi + k*dxi per axis with
dxi = 2*Xi/M; the dual spatial nodes are x_j = -L/2 + j*dx with
L = 2*pi/dxi and dx = L/M.  Both grids contain 0 as a node (M even), so
the continuum quadrature sums map onto plain FFTs after fftshift
bookkeeping.  Exactness of this mapping requires M to be a multiple of 4
(the e^{i pi M/2} twiddle is then 1); grid constructors enforce M >= 8.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

__all__ = [
    "freq_to_space",
    "space_to_freq",
    "oversample",
    "sample_freq_function",
]


def freq_to_space(values: np.ndarray, dxi: float) -> np.ndarray:
    """Evaluate (2pi)^{-d} * sum_k values_k e^{i x_j.xi_k} dxi^d on the dual grid.

    `values` is indexed in ascending node order along every axis.
    """
    d = values.ndim
    # all axes share M and dxi (cubic grids only)
    scale = (values.shape[0] * dxi / (2.0 * np.pi)) ** d
    return np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(values))) * scale


def space_to_freq(values: np.ndarray, dx: float) -> np.ndarray:
    """Inverse of :func:`freq_to_space`: sum_j values_j e^{-i x_j.xi_k} dx^d."""
    return np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(values))) * dx**values.ndim


def oversample(values: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited interpolation of frequency samples onto a `factor` x finer grid.

    Implemented by zero-padding the dual (spatial) representation, which
    evaluates the trigonometric interpolant exactly.  The returned array has
    shape factor*M per axis and covers the same frequency box with spacing
    dxi/factor; node k of the fine grid sits at -Xi + k*(dxi/factor).
    """
    if factor == 1:
        return values.copy()
    d = values.ndim
    m = values.shape[0]
    # spatial samples in ascending-x order, zero-padded to the factor-bigger box
    u = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(values)))
    pad = (factor - 1) * m // 2
    u = np.pad(u, [(pad, pad)] * d)
    return np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(u)))


def sample_freq_function(
    values: np.ndarray,
    xi_min: float,
    dxi: float,
    points: np.ndarray,
    factor: int = 4,
    order: int = 5,
) -> np.ndarray:
    """Sample the band-limited interpolant of `values` at arbitrary frequencies.

    `points` has shape (..., d).  Uses `factor` x zero-padded oversampling
    followed by an order-`order` spline on the fine grid; points outside the
    grid box evaluate to 0.
    """
    d = values.ndim
    fine = oversample(values, factor)
    dfine = dxi / factor
    coords = [(points[..., a] - xi_min) / dfine for a in range(d)]
    coords = np.stack(coords, axis=0)
    re = ndimage.map_coordinates(fine.real, coords, order=order, mode="constant", cval=0.0)
    im = ndimage.map_coordinates(fine.imag, coords, order=order, mode="constant", cval=0.0)
    return re + 1j * im
