"""Domain types, Fourier conventions, grids, trial functions and symmetries.

All quantities follow the convention f^(xi) = int e^{-i x.xi} f(x) dx, so
Plancherel reads ||f||_2^2 = (2pi)^{-d} ||f^||_2^2.  Trial functions are
stored frequency-side on a uniform symmetric grid; every operator in the
package acts as a frequency multiplier on these samples.

All types are immutable after construction and every operation returns a
fresh object, so concurrent evaluation is safe.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from . import fourier

CONVENTION_TAG = "paper-2pi-inverse"

__all__ = [
    "ExtensionParams",
    "FrequencyGrid",
    "TrialFunction",
    "SymmetryElement",
    "SpaceTimeField",
    "SupportOverflowError",
    "default_grid",
    "make_gaussian",
    "apply_symmetry",
    "modulate",
    "compose_symmetries",
    "l2_norm",
    "save_trial",
    "load_trial",
    "save_field",
    "load_field",
]


class SupportOverflowError(ValueError):
    """Raised when an operation pushes significant L2 mass outside the grid box."""


@dataclass(frozen=True)
class ExtensionParams:
    """Dimension d, surface exponent alpha and the derived endpoint exponent q0."""

    d: int
    alpha: float
    q0: float = field(init=False)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"unsupported dimension d={self.d}; only 1 and 2")
        if self.alpha < 2:
            raise ValueError(f"alpha must be >= 2, got {self.alpha}")
        q0 = (2 * self.d + 4) / self.d
        assert q0 == {1: 6.0, 2: 4.0}[self.d]
        object.__setattr__(self, "q0", q0)

    @property
    def weight_exponent(self) -> float:
        """Exponent (alpha-2)/q0 of the derivative weight in the extension operator."""
        return (self.alpha - 2.0) / self.q0


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform symmetric grid on [-Xi, Xi)^d with M (power of two) nodes per axis."""

    d: int
    xi_max: float
    m: int

    def __post_init__(self):
        if self.xi_max <= 0:
            raise ValueError("xi_max must be positive")
        if self.m < 8 or (self.m & (self.m - 1)) != 0:
            raise ValueError(f"m must be a power of two >= 8, got {self.m}")

    @property
    def dxi(self) -> float:
        return 2.0 * self.xi_max / self.m

    @property
    def axis(self) -> np.ndarray:
        return -self.xi_max + self.dxi * np.arange(self.m)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.d

    def nodes(self) -> np.ndarray:
        """All nodes, shape grid.shape + (d,)."""
        axes = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.stack(axes, axis=-1)

    def radii(self) -> np.ndarray:
        """|xi| at every node."""
        axes = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.sqrt(sum(a**2 for a in axes))

    # discrete-Fourier dual quantities
    @property
    def box_length(self) -> float:
        return 2.0 * np.pi / self.dxi

    @property
    def dx(self) -> float:
        return self.box_length / self.m

    @property
    def x_axis(self) -> np.ndarray:
        return -self.box_length / 2.0 + self.dx * np.arange(self.m)

    def refine(self) -> "FrequencyGrid":
        """Same box, doubled node count (halved spacing)."""
        return FrequencyGrid(self.d, self.xi_max, 2 * self.m)


def default_grid(d: int) -> FrequencyGrid:
    """Default grids: Gaussian baselines converge below 1e-3 at these sizes."""
    if d == 1:
        return FrequencyGrid(1, 32.0, 2048)
    if d == 2:
        return FrequencyGrid(2, 16.0, 256)
    raise ValueError(f"unsupported dimension {d}")


@dataclass(frozen=True)
class TrialFunction:
    """Complex samples of f^ on a FrequencyGrid plus the cached L2 norm of f."""

    grid: FrequencyGrid
    values: np.ndarray
    l2norm_cache: float = field(init=False)

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals.view(np.float64))):
            raise ValueError("trial function values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        norm = _l2_from_samples(vals, self.grid)
        object.__setattr__(self, "l2norm_cache", norm)

    def with_values(self, values: np.ndarray) -> "TrialFunction":
        return TrialFunction(self.grid, values)

    def to_space(self) -> np.ndarray:
        """Physical-side samples f(x_j) on the dual grid."""
        return fourier.freq_to_space(self.values, self.grid.dxi)

    def refined(self) -> "TrialFunction":
        """Band-limited resample onto the doubled grid (exact trig interpolation)."""
        fine = fourier.oversample(self.values, 2)
        return TrialFunction(self.grid.refine(), fine)


def _l2_from_samples(values: np.ndarray, grid: FrequencyGrid) -> float:
    return float(
        np.sqrt((np.abs(values) ** 2).sum() * grid.dxi**grid.d) * (2.0 * np.pi) ** (-grid.d / 2.0)
    )


def l2_norm(f: TrialFunction) -> float:
    """(2pi)^{-d/2} sqrt(sum |f^|^2 dxi^d); cached on the trial function."""
    return f.l2norm_cache


@dataclass(frozen=True)
class SymmetryElement:
    """Scaling h > 0, space translation x0 and time translation t0."""

    h: float
    x0: tuple[float, ...]
    t0: float

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("scaling h must be positive")
        object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))

    @staticmethod
    def identity(d: int) -> "SymmetryElement":
        return SymmetryElement(1.0, (0.0,) * d, 0.0)


def compose_symmetries(g2: SymmetryElement, g1: SymmetryElement, alpha: float) -> SymmetryElement:
    """The element acting like 'first g1, then g2' (alpha enters the time part)."""
    h = g1.h * g2.h
    x0 = tuple(a + g1.h * b for a, b in zip(g1.x0, g2.x0))
    t0 = g1.t0 + g2.t0 * g1.h**alpha
    return SymmetryElement(h, x0, t0)


@dataclass(frozen=True)
class SpaceTimeField:
    """Complex samples u(t_i, x_j) on the dual spatial grid of `grid`.

    `tail_bound` estimates the |u|^{q0} mass outside the truncation box
    (time tail via the fitted power law plus the spatial boundary-shell
    indicator); it accompanies every norm computed from the field.
    """

    params: ExtensionParams
    grid: FrequencyGrid
    times: np.ndarray
    values: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        vals = np.ascontiguousarray(self.values, dtype=np.complex128)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("need at least one time node")
        if np.any(np.diff(times) <= 0):
            raise ValueError("time nodes must be strictly increasing")
        if vals.shape != (times.size,) + self.grid.shape:
            raise ValueError("field shape does not match times x grid")
        if self.tail_bound < 0:
            raise ValueError("tail_bound must be >= 0")
        times.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", vals)
        # spatial box is the exact discrete-Fourier dual of the frequency grid
        assert np.isclose(self.grid.box_length, 2 * np.pi / self.grid.dxi)
        assert np.isclose(self.grid.dx, 2 * np.pi / (self.grid.m * self.grid.dxi))


# ---------------------------------------------------------------------------
# constructors and group action


def make_gaussian(grid: FrequencyGrid, center=None, sigma: float = 1.0) -> TrialFunction:
    """f^(xi) = exp(-|xi - center|^2 / (2 sigma^2)), normalised to ||f||_2 = 1."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    center = np.zeros(grid.d) if center is None else np.atleast_1d(np.asarray(center, float))
    if center.shape != (grid.d,):
        raise ValueError(f"center must have {grid.d} components")
    if np.any(np.abs(center) >= grid.xi_max):
        raise ValueError("center must lie inside the grid box")
    nodes = grid.nodes()
    dist2 = ((nodes - center) ** 2).sum(axis=-1)
    within = int((dist2 <= sigma**2).sum())
    if within < 8:
        raise ValueError(
            f"sigma={sigma} under-resolved: only {within} grid nodes within one sigma of the center"
        )
    vals = np.exp(-dist2 / (2.0 * sigma**2))
    tf = TrialFunction(grid, vals)
    return tf.with_values(tf.values / tf.l2norm_cache)


def modulate(f: TrialFunction, xi0, max_loss: float = 1e-6):
    """Frequency translation by xi0 snapped to the node lattice (exact index shift).

    Returns (shifted TrialFunction, snapped offset).  Raises
    SupportOverflowError when more than `max_loss` of the L2 norm would be
    shifted out of the box.
    """
    grid = f.grid
    xi0 = np.atleast_1d(np.asarray(xi0, float))
    if xi0.shape != (grid.d,):
        raise ValueError(f"xi0 must have {grid.d} components")
    steps = np.rint(xi0 / grid.dxi).astype(int)
    snapped = steps * grid.dxi
    out = np.zeros_like(f.values)
    src = [slice(None)] * grid.d
    dst = [slice(None)] * grid.d
    for a, s in enumerate(steps):
        if abs(s) >= grid.m:
            raise SupportOverflowError("modulation shift exceeds the grid box")
        if s >= 0:
            src[a] = slice(0, grid.m - s)
            dst[a] = slice(s, grid.m)
        else:
            src[a] = slice(-s, grid.m)
            dst[a] = slice(0, grid.m + s)
    out[tuple(dst)] = f.values[tuple(src)]
    kept = TrialFunction(grid, out)
    lost = np.sqrt(max(f.l2norm_cache**2 - kept.l2norm_cache**2, 0.0))
    if f.l2norm_cache > 0 and lost / f.l2norm_cache > max_loss:
        raise SupportOverflowError(
            f"modulation pushes {lost/f.l2norm_cache:.2e} of the L2 norm outside the grid"
        )
    return kept, snapped


def apply_symmetry(
    f: TrialFunction,
    g: SymmetryElement,
    params: ExtensionParams,
    max_loss: float = 1e-6,
    oversample_factor: int = 4,
) -> TrialFunction:
    """Frequency-side action f^ -> h^{-d/2} e^{i(t0 |xi/h|^alpha + x0.xi/h)} f^(xi/h).

    Resampling of f^(xi/h) uses band-limited interpolation on a zero-padded
    grid; the L2 norm is preserved up to the resampling tolerance.
    """
    grid = f.grid
    if len(g.x0) != grid.d:
        raise ValueError("symmetry translation dimension mismatch")
    # mass of f^ that the dilation would push outside the box
    if g.h > 1.0:
        cutoff = grid.xi_max / g.h
        nodes_max = np.abs(grid.nodes()).max(axis=-1)
        outside = nodes_max > cutoff
        lost2 = (np.abs(f.values[outside]) ** 2).sum() * grid.dxi**grid.d
        lost = np.sqrt(lost2) * (2 * np.pi) ** (-grid.d / 2)
        if f.l2norm_cache > 0 and lost / f.l2norm_cache > max_loss:
            raise SupportOverflowError(
                f"scaling h={g.h} pushes {lost/f.l2norm_cache:.2e} of the L2 norm outside the grid"
            )
    if g.h == 1.0:
        resampled = f.values
    else:
        pts = grid.nodes() / g.h
        resampled = fourier.sample_freq_function(
            f.values, -grid.xi_max, grid.dxi, pts, factor=oversample_factor
        )
    nodes = grid.nodes()
    xi_h = nodes / g.h
    phase = g.t0 * (np.sqrt((xi_h**2).sum(axis=-1))) ** params.alpha
    phase = phase + (nodes @ np.asarray(g.x0)) / g.h
    out = g.h ** (-grid.d / 2.0) * np.exp(1j * phase) * resampled
    return TrialFunction(grid, out)


# ---------------------------------------------------------------------------
# binary container (JSON header + little-endian complex64 payload)

_MAGIC = b"FSTF"


def _write_container(fh, header: dict, payload: np.ndarray) -> None:
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    fh.write(_MAGIC)
    fh.write(struct.pack("<I", len(head)))
    fh.write(head)
    fh.write(np.ascontiguousarray(payload, dtype="<c8").tobytes())


def _read_container(fh) -> tuple[dict, np.ndarray]:
    magic = fh.read(4)
    if magic != _MAGIC:
        raise ValueError("not a trial-function container (bad magic)")
    (hlen,) = struct.unpack("<I", fh.read(4))
    header = json.loads(fh.read(hlen).decode("utf-8"))
    payload = np.frombuffer(fh.read(), dtype="<c8")
    return header, payload


def save_trial(f: TrialFunction, path) -> None:
    header = {
        "kind": "trial",
        "d": f.grid.d,
        "xi": f.grid.xi_max,
        "m": f.grid.m,
        "convention": CONVENTION_TAG,
    }
    with open(path, "wb") as fh:
        _write_container(fh, header, f.values.ravel())


def load_trial(path) -> TrialFunction:
    with open(path, "rb") as fh:
        header, payload = _read_container(fh)
    if header.get("convention") != CONVENTION_TAG:
        raise ValueError(f"unknown convention tag {header.get('convention')!r}")
    grid = FrequencyGrid(int(header["d"]), float(header["xi"]), int(header["m"]))
    if payload.size != grid.m**grid.d:
        raise ValueError("payload size does not match the grid in the header")
    return TrialFunction(grid, payload.astype(np.complex128).reshape(grid.shape))


def save_field(u: SpaceTimeField, path) -> None:
    header = {
        "kind": "field",
        "d": u.grid.d,
        "xi": u.grid.xi_max,
        "m": u.grid.m,
        "alpha": u.params.alpha,
        "times": [float(t) for t in u.times],
        "tail_bound": u.tail_bound,
        "convention": CONVENTION_TAG,
    }
    with open(path, "wb") as fh:
        _write_container(fh, header, u.values.ravel())


def load_field(path) -> SpaceTimeField:
    with open(path, "rb") as fh:
        header, payload = _read_container(fh)
    if header.get("kind") != "field":
        raise ValueError("container does not hold a space-time field")
    grid = FrequencyGrid(int(header["d"]), float(header["xi"]), int(header["m"]))
    times = np.asarray(header["times"], float)
    params = ExtensionParams(grid.d, float(header["alpha"]))
    vals = payload.astype(np.complex128).reshape((times.size,) + grid.shape)
    return SpaceTimeField(params, grid, times, vals, float(header["tail_bound"]))
