"""Multiplier flows: exp(it|D|^alpha), D^s, the extension operator and the
large-frequency-shift operators with their quadratic limit.

Everything acts on frequency samples, so evolution is exact multiplier
algebra; the only discretisation error is the grid itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fourier
from .core import (
    ExtensionParams,
    FrequencyGrid,
    SpaceTimeField,
    SupportOverflowError,
    TrialFunction,
)

__all__ = [
    "ShiftedPhaseContext",
    "A0Transform",
    "evolve",
    "fractional_derivative",
    "extension_field",
    "shifted_phase",
    "limit_phase",
    "shifted_field",
    "limit_field",
    "a0_apply",
    "time_schedule",
    "refine_times",
    "support_radius",
]


# ---------------------------------------------------------------------------
# time sampling: linear core (dense near t=0) + geometric wings, symmetric


def time_schedule(t_max: float, dt0: float, t_dense: float = 1.0, ratio: float = 1.12) -> np.ndarray:
    """Symmetric node set: linear spacing dt0 on [0, t_dense], geometric up to t_max."""
    if t_max <= 0 or dt0 <= 0:
        raise ValueError("t_max and dt0 must be positive")
    t_dense = min(t_dense, t_max)
    pos = list(np.arange(0.0, t_dense + 0.5 * dt0, dt0))
    t = pos[-1]
    while t < t_max:
        t = min(t * ratio, t_max) if t > 0 else dt0
        pos.append(t)
    pos = np.asarray(pos)
    return np.concatenate([-pos[:0:-1], pos])


def refine_times(times: np.ndarray) -> np.ndarray:
    """Insert midpoints (doubles the node count up to one)."""
    mids = 0.5 * (times[1:] + times[:-1])
    return np.sort(np.concatenate([times, mids]))


def support_radius(f: TrialFunction, rel_threshold: float = 1e-6) -> float:
    """Radius of the essential frequency support (|f^| above rel_threshold * max)."""
    mag = np.abs(f.values)
    mask = mag > rel_threshold * mag.max()
    if not mask.any():
        return 0.0
    return float(f.grid.radii()[mask].max())


# ---------------------------------------------------------------------------
# basic flows


def evolve(f: TrialFunction, t: float, params: ExtensionParams) -> np.ndarray:
    """Spatial samples of exp(it|D|^alpha) f; the multiplier is unimodular."""
    phase = f.grid.radii() ** params.alpha
    return fourier.freq_to_space(np.exp(1j * t * phase) * f.values, f.grid.dxi)


def fractional_derivative(f: TrialFunction, s: float) -> TrialFunction:
    """f^ -> |xi|^s f^; the xi=0 node maps to 0 for s > 0."""
    r = f.grid.radii()
    zero = r == 0.0
    if s < 0:
        if np.abs(f.values[zero]).max(initial=0.0) > 1e-12:
            raise ValueError("negative-order derivative of a function with f^(0) != 0")
        mult = np.where(zero, 0.0, r) ** s
        mult[zero] = 0.0
    else:
        mult = r**s
        if s > 0:
            mult[zero] = 0.0
        else:  # s == 0: identity, including the origin
            mult = np.ones_like(r)
    return f.with_values(mult * f.values)


def _weighted_slice(f: TrialFunction, weight: np.ndarray, phase: np.ndarray, t: float) -> np.ndarray:
    return fourier.freq_to_space(weight * np.exp(1j * t * phase) * f.values, f.grid.dxi)


def _field_tail_bound(values: np.ndarray, times: np.ndarray, grid: FrequencyGrid, q0: float) -> float:
    """Heuristic |u|^{q0} mass outside the box: fitted time tail + boundary shell."""
    from .functionals import _time_tail_estimate  # local import to avoid a cycle

    dv = grid.dx**grid.d
    dens = np.abs(values) ** q0
    slice_int = dens.reshape(len(times), -1).sum(axis=1) * dv
    tail_t, _ = _time_tail_estimate(times, slice_int)
    shell = grid.m // 16
    mask = np.zeros(grid.shape, dtype=bool)
    for a in range(grid.d):
        idx = [slice(None)] * grid.d
        idx[a] = slice(0, shell)
        mask[tuple(idx)] = True
        idx[a] = slice(grid.m - shell, grid.m)
        mask[tuple(idx)] = True
    dens2 = dens.reshape(len(times), -1)
    shell_int = dens2[:, mask.ravel()].sum(axis=1) * dv
    spatial = float(np.trapezoid(shell_int, times)) if len(times) > 1 else 0.0
    return float(tail_t + spatial)


def extension_field(f: TrialFunction, times: np.ndarray, params: ExtensionParams) -> SpaceTimeField:
    """E_alpha f = D^{(alpha-2)/q0} exp(it|D|^alpha) f sampled at `times`."""
    times = np.asarray(times, float)
    weight = f.grid.radii() ** params.weight_exponent
    if params.weight_exponent > 0:
        weight[f.grid.radii() == 0.0] = 0.0
    phase = f.grid.radii() ** params.alpha
    vals = np.empty((times.size,) + f.grid.shape, dtype=np.complex128)
    for i, t in enumerate(times):
        vals[i] = _weighted_slice(f, weight, phase, t)
    tail = _field_tail_bound(vals, times, f.grid, params.q0)
    return SpaceTimeField(params, f.grid, times, vals, tail)


# ---------------------------------------------------------------------------
# frequency-shifted flow and its quadratic limit


@dataclass(frozen=True)
class ShiftedPhaseContext:
    """Shift frequency xi_n with its direction and the limiting direction xi0."""

    params: ExtensionParams
    xi_n: tuple[float, ...]
    xi_bar: tuple[float, ...] = field(init=False)
    xi0: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        xin = np.atleast_1d(np.asarray(self.xi_n, float))
        if xin.shape != (self.params.d,):
            raise ValueError("xi_n dimension mismatch")
        mag = float(np.linalg.norm(xin))
        if mag == 0.0:
            raise ValueError("xi_n must be nonzero")
        bar = xin / mag
        assert abs(np.linalg.norm(bar) - 1.0) <= 1e-12
        object.__setattr__(self, "xi_n", tuple(float(v) for v in xin))
        object.__setattr__(self, "xi_bar", tuple(float(v) for v in bar))
        object.__setattr__(self, "xi0", tuple(float(v) for v in bar))

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.xi_n))


def shifted_phase(ctx: ShiftedPhaseContext, xi: np.ndarray) -> np.ndarray:
    """Phi_n(xi) = [|xi+xi_n|^a - |xi_n|^a - a |xi_n|^{a-2} xi_n.xi] / |xi_n|^{a-2}.

    Evaluated through s = 2(xi_bar.xi)/|xi_n| + |xi|^2/|xi_n|^2 as
    |xi_n|^2 [(1+s)^{a/2} - 1 - (a/2) s] + (a/2)|xi|^2; for |xi| << |xi_n|
    the bracket is summed as a binomial series in s, which avoids the
    catastrophic cancellation of the naive difference.
    """
    xi = np.asarray(xi, float)
    scalar = xi.ndim <= 1
    pts = np.atleast_2d(xi)
    a = ctx.params.alpha
    mag = ctx.magnitude
    bar = np.asarray(ctx.xi_bar)
    dot = pts @ bar
    r2 = (pts**2).sum(axis=-1)
    mag_s = 2.0 * dot + r2 / mag  # |xi_n| * s, computed without cancellation
    s = mag_s / mag
    half = a / 2.0
    out = np.empty_like(s)
    small = np.sqrt(r2) < 1e-3 * mag
    if small.any():
        # |xi_n|^2 * sum_{k>=2} binom(a/2, k) s^k = (|xi_n| s)^2 * sum c_{k+2} s^k
        c = [_binom(half, k) for k in (2, 3, 4, 5)]
        ss = s[small]
        bracket = c[0] + ss * (c[1] + ss * (c[2] + ss * c[3]))
        out[small] = mag_s[small] ** 2 * bracket
    big = ~small
    if big.any():
        sb = s[big]
        out[big] = mag**2 * ((1.0 + sb) ** half - 1.0 - half * sb)
    out = out + half * r2
    return float(out[0]) if scalar else out.reshape(np.atleast_2d(xi).shape[:-1])


def _binom(a: float, k: int) -> float:
    v = 1.0
    for i in range(k):
        v *= (a - i) / (i + 1)
    return v


def limit_phase(xi: np.ndarray, xi0, alpha: float) -> np.ndarray:
    """Quadratic limit (alpha |xi|^2 + alpha(alpha-2) |xi.xi0|^2)/2 = |A0 xi|^2."""
    xi = np.asarray(xi, float)
    xi0 = np.atleast_1d(np.asarray(xi0, float))
    if abs(np.linalg.norm(xi0) - 1.0) > 1e-12:
        raise ValueError("xi0 must be a unit vector")
    scalar = xi.ndim <= 1
    pts = np.atleast_2d(xi)
    r2 = (pts**2).sum(axis=-1)
    par2 = (pts @ xi0) ** 2
    out = 0.5 * (alpha * r2 + alpha * (alpha - 2.0) * par2)
    return float(out[0]) if scalar else out.reshape(np.atleast_2d(xi).shape[:-1])


def shifted_field(
    f: TrialFunction,
    ctx: ShiftedPhaseContext,
    times: np.ndarray,
    normalized: bool = True,
):
    """Field of the shifted flow; `normalized` picks the rescaled form.

    normalized=True : weight |xi/|xi_n| + xi_bar|^{(a-2)/q0}, phase Phi_n
    normalized=False: weight |xi + xi_n|^{(a-2)/q0},          phase |xi+xi_n|^a
    (The two have identical L^{q0} space-time norms by exact rescaling.)

    Returns (SpaceTimeField, support_ok) where support_ok is False when the
    frequency support exceeds |xi_n|/5 (checks still run, but flagged).
    """
    times = np.asarray(times, float)
    grid = f.grid
    nodes = grid.nodes()
    mag = ctx.magnitude
    we = ctx.params.weight_exponent
    support_ok = support_radius(f) <= mag / 5.0
    if support_radius(f) >= mag:
        raise SupportOverflowError("frequency support reaches the shift magnitude |xi_n|")
    if normalized:
        shifted = nodes / mag + np.asarray(ctx.xi_bar)
        weight = np.sqrt((shifted**2).sum(axis=-1)) ** we
        phase = shifted_phase(ctx, nodes.reshape(-1, grid.d)).reshape(grid.shape)
    else:
        shifted = nodes + np.asarray(ctx.xi_n)
        weight = np.sqrt((shifted**2).sum(axis=-1)) ** we
        phase = np.sqrt((shifted**2).sum(axis=-1)) ** ctx.params.alpha
    vals = np.empty((times.size,) + grid.shape, dtype=np.complex128)
    for i, t in enumerate(times):
        vals[i] = _weighted_slice(f, weight, phase, t)
    tail = _field_tail_bound(vals, times, grid, ctx.params.q0)
    return SpaceTimeField(ctx.params, grid, times, vals, tail), support_ok


def limit_field(f: TrialFunction, xi0, alpha: float, times: np.ndarray, q0: float) -> SpaceTimeField:
    """Evolution with the quadratic limit phase |A0 xi|^2 (weight 1)."""
    times = np.asarray(times, float)
    grid = f.grid
    phase = limit_phase(grid.nodes().reshape(-1, grid.d), xi0, alpha).reshape(grid.shape)
    weight = np.ones(grid.shape)
    vals = np.empty((times.size,) + grid.shape, dtype=np.complex128)
    for i, t in enumerate(times):
        vals[i] = _weighted_slice(f, weight, phase, t)
    params = ExtensionParams(grid.d, max(alpha, 2.0))
    tail = _field_tail_bound(vals, times, grid, q0)
    return SpaceTimeField(params, grid, times, vals, tail)


# ---------------------------------------------------------------------------
# the anisotropic dilation A0


@dataclass(frozen=True)
class A0Transform:
    """xi -> sqrt(a/2) xi_perp + sqrt(a(a-1)/2) xi_par, projected along xi0."""

    xi0: tuple[float, ...]
    alpha: float
    matrix: np.ndarray = field(init=False)
    det_abs: float = field(init=False)

    def __post_init__(self):
        xi0 = np.atleast_1d(np.asarray(self.xi0, float))
        if abs(np.linalg.norm(xi0) - 1.0) > 1e-12:
            raise ValueError("xi0 must be a unit vector")
        a = self.alpha
        d = xi0.size
        proj = np.outer(xi0, xi0)
        mat = math.sqrt(a / 2.0) * (np.eye(d) - proj) + math.sqrt(a * (a - 1.0) / 2.0) * proj
        det = (a / 2.0) ** (d / 2.0) * math.sqrt(a - 1.0)
        assert abs(abs(np.linalg.det(mat)) - det) <= 1e-12 * max(det, 1.0)
        mat.flags.writeable = False
        object.__setattr__(self, "xi0", tuple(float(v) for v in xi0))
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "det_abs", det)


def a0_apply(f: TrialFunction, transform: A0Transform, max_loss: float = 1e-6) -> TrialFunction:
    """Unitary realisation f^ -> |det A0|^{-1/2} f^(A0^{-1} xi) with resampling."""
    grid = f.grid
    if len(transform.xi0) != grid.d:
        raise ValueError("transform dimension mismatch")
    if transform.alpha == 2.0:
        return f.with_values(f.values)
    inv = np.linalg.inv(transform.matrix)
    # output support is A0 * supp f^; mass that would leave the box
    nodes = grid.nodes()
    imgs = nodes @ transform.matrix.T
    outside = np.abs(imgs).max(axis=-1) >= grid.xi_max
    lost2 = (np.abs(f.values[outside]) ** 2).sum() * grid.dxi**grid.d
    lost = np.sqrt(lost2) * (2 * np.pi) ** (-grid.d / 2)
    if f.l2norm_cache > 0 and lost / f.l2norm_cache > max_loss:
        raise SupportOverflowError(
            f"A0 dilation pushes {lost/f.l2norm_cache:.2e} of the L2 norm outside the grid"
        )
    pts = nodes @ inv.T
    resampled = fourier.sample_freq_function(f.values, -grid.xi_max, grid.dxi, pts)
    return f.with_values(transform.det_abs ** (-0.5) * resampled)
