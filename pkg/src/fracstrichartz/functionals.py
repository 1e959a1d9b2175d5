"""Space-time norms and integral functionals.

Quadrature is trapezoid in t on a hybrid linear+geometric node set and an
exact lattice sum in x.  Every reported value carries the truncation tail
estimate: the time tail is a power-law fit in (1+t^2) extrapolated beyond
the box and is *included* in the value (and reported separately); when the
fitted decay is not integrable the tail is left at zero and flagged.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .core import ExtensionParams, FrequencyGrid, SpaceTimeField, TrialFunction, l2_norm
from . import fourier, propagator

__all__ = [
    "NormReport",
    "QuotientReport",
    "spacetime_norm",
    "field_sup",
    "strichartz_quotient",
    "bilinear_norm",
    "bilinear_admissible_range",
    "cube_sup_quantity",
    "local_smoothing_functional",
    "sphere_kernel_decay",
    "restrict_to_box",
]


# ---------------------------------------------------------------------------
# time-tail fitting


def _fit_tail_one_side(times: np.ndarray, values: np.ndarray, n_fit: int = 6):
    """Fit values ~ A (1+t^2)^{-beta} on the trailing nodes; return (tail, info)."""
    if times.size < 3:
        return 0.0, {"valid": False, "beta": 0.0, "reason": "too-few-nodes"}
    n = min(n_fit, times.size // 2)
    ts = times[-n:]
    vs = values[-n:]
    if np.any(vs <= 0):
        return 0.0, {"valid": False, "beta": 0.0, "reason": "nonpositive-integrand"}
    x = np.log1p(ts**2)
    y = np.log(vs)
    slope, intercept = np.polyfit(x, y, 1)
    beta = -slope
    if beta <= 0.75:
        return 0.0, {"valid": False, "beta": float(beta), "reason": "nonintegrable-fit"}
    amp = np.exp(intercept)
    t_end = times[-1]
    integrand = lambda t: amp * (1.0 + t**2) ** (-beta)
    tail, _err = integrate.quad(integrand, t_end, np.inf, limit=200)
    return float(tail), {"valid": True, "beta": float(beta), "amp": float(amp)}


def _time_tail_estimate(times: np.ndarray, slice_integrals: np.ndarray):
    """Two-sided tail of int I(t) dt beyond [times[0], times[-1]]."""
    pos_tail, pos_info = _fit_tail_one_side(times, slice_integrals)
    neg_tail, neg_info = _fit_tail_one_side(-times[::-1], slice_integrals[::-1])
    return pos_tail + neg_tail, {"pos": pos_info, "neg": neg_info}


# ---------------------------------------------------------------------------
# reports


@dataclass
class NormReport:
    """A computed norm with its quadrature and truncation metadata."""

    value: float
    q: float
    grid: dict
    tail_bound: float
    refinement_delta: float | None = None
    wall_time_ms: float = 0.0
    box_value: float = 0.0
    tail_fit: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0 or self.tail_bound < 0:
            raise ValueError("norm value and tail_bound must be >= 0")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "q": self.q,
            "grid": self.grid,
            "tail_bound": self.tail_bound,
            "refinement_delta": self.refinement_delta,
            "wall_time_ms": self.wall_time_ms,
            "box_value": self.box_value,
            "tail_fit": self.tail_fit,
        }


@dataclass
class QuotientReport:
    """A Strichartz quotient ||E_a f||_{q0} / ||f||_2 with full provenance.

    `value` is a valid lower-bound witness for the sharp constant up to the
    reported quadrature error.
    """

    value: float
    alpha: float
    d: int
    q: float
    grid: dict
    times: dict
    l2: float
    norm_value: float
    tail_bound: float
    refinement_delta: float | None = None
    quad_error: float | None = None
    wall_time_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "alpha": self.alpha,
            "d": self.d,
            "q": self.q,
            "grid": self.grid,
            "times": self.times,
            "l2": self.l2,
            "norm_value": self.norm_value,
            "tail_bound": self.tail_bound,
            "refinement_delta": self.refinement_delta,
            "quad_error": self.quad_error,
            "wall_time_ms": self.wall_time_ms,
        }


def _grid_meta(grid: FrequencyGrid) -> dict:
    return {"d": grid.d, "xi": grid.xi_max, "m": grid.m, "dxi": grid.dxi}


# ---------------------------------------------------------------------------
# norms


def _integrate_slices(times: np.ndarray, slice_integrals: np.ndarray, q: float):
    box = float(np.trapezoid(slice_integrals, times)) if times.size > 1 else 0.0
    tail, fit = _time_tail_estimate(times, slice_integrals)
    return box, tail, fit


def spacetime_norm(u: SpaceTimeField, q: float) -> NormReport:
    """(iint |u|^q dx dt)^{1/q}; trapezoid in t, exact sum in x."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if u.times.size < 2:
        raise ValueError("need at least two time nodes")
    t0 = _time.perf_counter()
    dv = u.grid.dx**u.grid.d
    dens = np.abs(u.values.reshape(u.times.size, -1)) ** q
    slice_int = dens.sum(axis=1) * dv
    box, tail, fit = _integrate_slices(u.times, slice_int, q)
    value = (box + tail) ** (1.0 / q) if box + tail > 0 else 0.0
    return NormReport(
        value=value,
        q=q,
        grid=_grid_meta(u.grid),
        tail_bound=tail + u.tail_bound,
        wall_time_ms=(_time.perf_counter() - t0) * 1e3,
        box_value=box ** (1.0 / q) if box > 0 else 0.0,
        tail_fit=fit,
    )


def field_sup(u: SpaceTimeField) -> float:
    """Grid maximum of |u|: a lower bound for the true sup at sampling density."""
    return float(np.abs(u.values).max())


# ---------------------------------------------------------------------------
# adaptive truncation and the Strichartz quotient


def _transport_horizon(grid: FrequencyGrid, amp: np.ndarray, phase: np.ndarray, t_dense: float) -> float:
    """Largest trustworthy time: the 99%-energy bulk must not reach the box edge.

    Beyond this horizon the periodic spatial box wraps the solution onto
    itself (revival artifacts), so norms are meaningless regardless of the
    tail fit.
    """
    dens = (np.abs(amp) ** 2).ravel()
    total = dens.sum()
    if total == 0.0:
        return t_dense
    radii = grid.radii().ravel()
    order = np.argsort(radii)
    cdf = np.cumsum(dens[order])
    xi_q = radii[order][int(np.searchsorted(cdf, 0.99 * total))]
    axes = [grid.axis] * grid.d
    grads = np.gradient(phase, *axes) if grid.d > 1 else [np.gradient(phase, grid.axis)]
    speed = np.sqrt(sum(g**2 for g in grads))
    mask = (grid.radii() <= xi_q + grid.dxi) & (np.abs(amp) > 1e-9 * np.abs(amp).max())
    vel = float(speed[mask].max()) if mask.any() else float(speed.max())
    vel = max(vel, 1e-9)
    u0 = fourier.freq_to_space(amp, grid.dxi)
    prof = np.abs(u0)
    big = prof > 1e-3 * prof.max()
    x_mag = np.abs(np.stack(np.meshgrid(*([grid.x_axis] * grid.d), indexing="ij"), axis=0))
    extent = float(x_mag.max(axis=0)[big].max()) if big.any() else 0.0
    horizon = (grid.box_length / 2.0 - extent) / vel
    return float(min(max(2.0 * t_dense, horizon), 4096.0))


def _auto_t_max(slice_fn, t_dense: float, tail_frac: float, t_cap: float) -> float:
    """Grow T geometrically until the fitted tail is below tail_frac of the total."""
    probes = [0.0]
    vals = [slice_fn(0.0)]
    t = t_dense
    while t <= t_cap:
        probes.append(t)
        vals.append(slice_fn(t))
        if len(probes) >= 4:
            ts, vs = np.asarray(probes), np.asarray(vals)
            total = np.trapezoid(vs, ts)
            tail, info = _fit_tail_one_side(ts, vs, n_fit=3)
            if info["valid"] and total > 0 and tail < tail_frac * total:
                return t
        t *= 2.0
    return float(t_cap)


def multiplier_times(
    grid: FrequencyGrid,
    amp: np.ndarray,
    phase: np.ndarray,
    q: float,
    dt0: float,
    t_dense: float = 1.2,
    tail_frac: float = 0.004,
    ratio: float = 1.1,
) -> np.ndarray:
    """Adaptive symmetric schedule for norms of t -> IFFT[amp e^{it phase}]."""
    dv = grid.dx**grid.d

    def slice_fn(t: float) -> float:
        u = fourier.freq_to_space(amp * np.exp(1j * t * phase), grid.dxi)
        return float((np.abs(u.ravel()) ** q).sum() * dv)

    t_cap = _transport_horizon(grid, amp, phase, t_dense)
    t_max = _auto_t_max(slice_fn, t_dense, tail_frac, t_cap)
    return propagator.time_schedule(t_max=t_max, dt0=dt0, t_dense=t_dense, ratio=ratio)


def multiplier_norm(
    grid: FrequencyGrid,
    amp: np.ndarray,
    phase: np.ndarray,
    q: float,
    times: np.ndarray | None = None,
    dt0: float = 0.05,
    t_dense: float = 1.2,
    tail_frac: float = 0.004,
):
    """L^q_{t,x} norm of the multiplier flow; returns (value, tail, fit, times)."""
    if times is None:
        times = multiplier_times(grid, amp, phase, q, dt0, t_dense, tail_frac)
    dv = grid.dx**grid.d
    slice_int = np.empty(times.size)
    for i, t in enumerate(times):
        u = fourier.freq_to_space(amp * np.exp(1j * t * phase), grid.dxi)
        slice_int[i] = (np.abs(u.ravel()) ** q).sum() * dv
    box, tail, fit = _integrate_slices(times, slice_int, q)
    value = (box + tail) ** (1.0 / q) if box + tail > 0 else 0.0
    return value, tail, fit, times


def _quotient_once(
    f: TrialFunction,
    params: ExtensionParams,
    times: np.ndarray | None,
    tail_frac: float,
    dt0: float | None,
):
    grid = f.grid
    weight = grid.radii() ** params.weight_exponent
    if params.weight_exponent > 0:
        weight[grid.radii() == 0.0] = 0.0
    phase = grid.radii() ** params.alpha
    dt = dt0 if dt0 is not None else (0.04 if grid.d == 1 else 0.05)
    norm_value, tail, fit, used = multiplier_norm(
        grid, weight * f.values, phase, params.q0, times=times, dt0=dt, tail_frac=tail_frac
    )
    return norm_value, tail, fit, used


def strichartz_quotient(
    f: TrialFunction,
    params: ExtensionParams,
    times: np.ndarray | None = None,
    compute_refinement: bool = True,
    tail_frac: float = 0.004,
    dt0: float | None = None,
) -> QuotientReport:
    """||E_alpha f||_{L^{q0}_{t,x}} / ||f||_2 with refinement and tail metadata.

    With compute_refinement=True the quotient is recomputed after one
    simultaneous doubling of the frequency grid and the time nodes; the
    change is the reported refinement_delta (also used as the quadrature
    error bar).
    """
    if l2_norm(f) == 0.0:
        raise ValueError("zero trial function")
    t_start = _time.perf_counter()
    norm_value, tail, fit, used_times = _quotient_once(f, params, times, tail_frac, dt0)
    value = norm_value / l2_norm(f)
    refinement_delta = None
    if compute_refinement:
        f2 = f.refined()
        times2 = propagator.refine_times(used_times)
        norm2, _, _, _ = _quotient_once(f2, params, times2, tail_frac, dt0)
        refinement_delta = abs(norm2 / l2_norm(f2) - value)
    quad_error = refinement_delta if refinement_delta is not None else 5e-3 * value
    return QuotientReport(
        value=value,
        alpha=params.alpha,
        d=params.d,
        q=params.q0,
        grid=_grid_meta(f.grid),
        times={
            "n": int(used_times.size),
            "t_max": float(used_times[-1]),
            "dt0": float(np.diff(used_times).min()),
        },
        l2=l2_norm(f),
        norm_value=norm_value,
        tail_bound=tail,
        refinement_delta=refinement_delta,
        quad_error=quad_error,
        wall_time_ms=(_time.perf_counter() - t_start) * 1e3,
    )


# ---------------------------------------------------------------------------
# bilinear and refined-Strichartz quantities


def bilinear_admissible_range(d: int) -> tuple[float, float]:
    """Open exponent interval ((d+3)/(d+1), (d+2)/d) of the bilinear estimate."""
    return ((d + 3) / (d + 1), (d + 2) / d)


def restrict_to_box(f: TrialFunction, lo, hi) -> TrialFunction:
    """f^ multiplied by the indicator of the half-open box [lo, hi)."""
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    nodes = f.grid.nodes()
    mask = np.ones(f.grid.shape, dtype=bool)
    for a in range(f.grid.d):
        mask &= (nodes[..., a] >= lo[a]) & (nodes[..., a] < hi[a])
    return f.with_values(np.where(mask, f.values, 0.0))


def bilinear_norm(
    f: TrialFunction,
    tau,
    tau_prime,
    p: float,
    params: ExtensionParams,
    times: np.ndarray | None = None,
) -> NormReport:
    """L^p_{t,x} norm of exp(it|D|^a) f_tau * exp(it|D|^a) f_tau'.

    The exponent must lie strictly inside the bilinear-estimate range.
    """
    p_lo, p_hi = bilinear_admissible_range(params.d)
    if not (p_lo < p < p_hi):
        raise ValueError(f"exponent p={p} outside the open interval ({p_lo}, {p_hi})")
    t0 = _time.perf_counter()
    f1 = restrict_to_box(f, tau.lo, tau.hi)
    f2 = restrict_to_box(f, tau_prime.lo, tau_prime.hi)
    grid = f.grid
    phase = grid.radii() ** params.alpha
    dv = grid.dx**grid.d
    if times is None:
        times = propagator.time_schedule(t_max=48.0, dt0=0.05, t_dense=2.0)
    slice_int = np.empty(times.size)
    for i, t in enumerate(times):
        mult = np.exp(1j * t * phase)
        u1 = fourier.freq_to_space(mult * f1.values, grid.dxi)
        u2 = fourier.freq_to_space(mult * f2.values, grid.dxi)
        slice_int[i] = (np.abs(u1 * u2) ** p).sum() * dv
    box, tail, fit = _integrate_slices(times, slice_int, p)
    value = (box + tail) ** (1.0 / p) if box + tail > 0 else 0.0
    return NormReport(
        value=value,
        q=p,
        grid=_grid_meta(grid),
        tail_bound=tail,
        wall_time_ms=(_time.perf_counter() - t0) * 1e3,
        box_value=box ** (1.0 / p) if box > 0 else 0.0,
        tail_fit=fit,
    )


def cube_sup_quantity(
    f: TrialFunction,
    params: ExtensionParams,
    cubes,
    times: np.ndarray | None = None,
):
    """max over the cube family of |Q|^{-1/2} sup_{t,x} |exp(it|D|^a) f_Q|.

    The sup is the sampled grid maximum (a lower bound of the true sup).
    Returns (maximum, per-cube list).
    """
    grid = f.grid
    phase = grid.radii() ** params.alpha
    if times is None:
        times = propagator.time_schedule(t_max=24.0, dt0=0.25, t_dense=2.0)
    per_cube = []
    for cube in cubes:
        fq = restrict_to_box(f, cube.lo, cube.hi)
        if not np.any(fq.values):
            per_cube.append(0.0)
            continue
        peak = 0.0
        for t in times:
            u = fourier.freq_to_space(np.exp(1j * t * phase) * fq.values, grid.dxi)
            peak = max(peak, float(np.abs(u).max()))
        per_cube.append(cube.volume ** (-0.5) * peak)
    return (max(per_cube) if per_cube else 0.0), per_cube


# ---------------------------------------------------------------------------
# local smoothing


def local_smoothing_functional(
    f: TrialFunction,
    params: ExtensionParams,
    weight_width: float = 2.0,
    times: np.ndarray | None = None,
    tail_frac: float = 0.01,
) -> NormReport:
    """iint exp(-|x|^2/w^2) |D^{(alpha-1)/2} exp(it|D|^a) f|^2 dx dt.

    The time step resolves the fastest beat frequency admitted by the
    Gaussian window (pairs xi, xi' with |xi - xi'| within the window
    bandwidth), and the horizon tracks the packet transit time.
    """
    t_start = _time.perf_counter()
    grid = f.grid
    s = (params.alpha - 1.0) / 2.0
    v = propagator.fractional_derivative(f, s)
    phase = grid.radii() ** params.alpha
    x_nodes = np.meshgrid(*([grid.x_axis] * grid.d), indexing="ij")
    w_spatial = np.exp(-sum(a**2 for a in x_nodes) / weight_width**2)
    dv = grid.dx**grid.d

    xi_sup = propagator.support_radius(f, 1e-4)
    xi_sup = max(xi_sup, 1.0)
    bandwidth = min(6.0 / weight_width, 2.0 * xi_sup)
    omega = params.alpha * xi_sup ** (params.alpha - 1.0) * bandwidth
    dt0 = min(0.05, 2.0 * np.pi / omega / 8.0)

    def slice_val(t: float) -> float:
        u = fourier.freq_to_space(np.exp(1j * t * phase) * v.values, grid.dxi)
        return float((w_spatial * np.abs(u) ** 2).sum() * dv)

    if times is None:
        # transit time of the packet through the window sets the dense core
        vel = params.alpha * xi_sup ** (params.alpha - 1.0)
        t_dense = max(20 * dt0, (weight_width + 4.0) / vel)
        t_cap = _transport_horizon(grid, v.values, phase, t_dense)
        t_max = _auto_t_max(slice_val, max(t_dense, 1.0), tail_frac, t_cap)
        times = propagator.time_schedule(t_max=t_max, dt0=dt0, t_dense=t_dense, ratio=1.1)
    slice_int = np.array([slice_val(t) for t in times])
    box, tail, fit = _integrate_slices(times, slice_int, 1.0)
    return NormReport(
        value=box + tail,
        q=2.0,
        grid=_grid_meta(grid),
        tail_bound=tail,
        wall_time_ms=(_time.perf_counter() - t_start) * 1e3,
        box_value=box,
        tail_fit=fit,
    )


def sphere_kernel_decay(
    weight_width: float,
    radii,
    amplitude: float = 1.0,
    n_theta: int = 1024,
) -> dict:
    """d=2 circle integrals |xi|^{d-1} int_{S^1} |phi^(|xi|(theta_xi - theta))| dtheta.

    phi(x) = amplitude * exp(-|x|^2/w^2), so phi^(k) = amplitude * pi w^2
    exp(-w^2 |k|^2 / 4) in closed form.  Returns the ladder values and the
    fitted log-log slope (boundedness means slope ~ 0).
    """
    radii = np.asarray(radii, float)
    if np.any(radii < 1):
        raise ValueError("radius ladder must satisfy |xi| >= 1")
    w = weight_width
    s = 2.0 * np.pi * np.arange(n_theta) / n_theta
    chord = 2.0 * np.abs(np.sin(s / 2.0))
    values = []
    for r in radii:
        karg = r * chord
        phat = amplitude * np.pi * w**2 * np.exp(-(w**2) * karg**2 / 4.0)
        values.append(r * phat.sum() * (2.0 * np.pi / n_theta))
    values = np.asarray(values)
    slope = float(np.polyfit(np.log(radii), np.log(values), 1)[0]) if radii.size > 1 else 0.0
    return {"radii": radii.tolist(), "values": values.tolist(), "slope": slope}
