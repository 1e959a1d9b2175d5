"""Dyadic annuli, Whitney pairs, angle sectors, the auxiliary surface gap
function and its Hessian, overlap counting and level-set checks.

Cube bookkeeping is integer index arithmetic at a fixed dyadic scale, so
adjacency (closures intersect = Chebyshev distance <= 1) is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

__all__ = [
    "DyadicCube",
    "DecompositionConfig",
    "SectorDecomposition",
    "enumerate_cubes",
    "whitney_related",
    "containing_cube",
    "first_adjacent_generation",
    "build_sectors",
    "minimal_sector_count",
    "preliminary_theta_scan",
    "f_eta",
    "grad_f_eta",
    "hessian_f_eta",
    "hessian_bounds_scan",
    "sumset_gap_stats",
    "overlap_count",
    "levelset_ratio",
    "levelset_comparability",
    "psi_eta",
]


# ---------------------------------------------------------------------------
# annular dyadic cubes


@dataclass(frozen=True)
class DyadicCube:
    """Axis-aligned dyadic cube of sidelength N/r at integer index `index`.

    The cube is prod_a [side*index_a, side*(index_a+1)) with side = N/r.
    """

    scale_n: float
    r: int
    index: tuple[int, ...]

    def __post_init__(self):
        if self.r < 2 or (self.r & (self.r - 1)) != 0:
            raise ValueError("r must be a power of two >= 2")
        object.__setattr__(self, "index", tuple(int(i) for i in self.index))

    @property
    def side(self) -> float:
        return self.scale_n / self.r

    @property
    def d(self) -> int:
        return len(self.index)

    @property
    def lo(self) -> np.ndarray:
        return self.side * np.asarray(self.index, float)

    @property
    def hi(self) -> np.ndarray:
        return self.side * (np.asarray(self.index, float) + 1.0)

    @property
    def center(self) -> np.ndarray:
        return self.side * (np.asarray(self.index, float) + 0.5)

    @property
    def volume(self) -> float:
        return self.side**self.d

    def parent_index(self, k: int) -> tuple[int, ...]:
        """Index of the k-th ancestor (cube of sidelength side * 2^k)."""
        return tuple(i >> k for i in self.index)

    def contains(self, point) -> bool:
        p = np.atleast_1d(np.asarray(point, float))
        return bool(np.all(p >= self.lo) and np.all(p < self.hi))


def _adjacent(ia: tuple[int, ...], ib: tuple[int, ...]) -> bool:
    return max(abs(a - b) for a, b in zip(ia, ib)) <= 1


def _annulus_indices(scale_n: float, r: int, d: int) -> np.ndarray:
    """Integer indices of all sidelength-N/r cubes inside {N <= ||xi||_max < 2N}."""
    if r < 2 or (r & (r - 1)) != 0:
        raise ValueError("r must be a power of two >= 2")
    side = scale_n / r
    ax = np.arange(-2 * r, 2 * r)
    idx = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    lo = side * idx
    hi = lo + side
    sup = np.maximum(np.abs(lo), np.abs(hi)).max(axis=1)
    per_axis_inf = np.where((lo <= 0.0) & (hi >= 0.0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
    inf = per_axis_inf.max(axis=1)
    mask = (inf >= scale_n) & (sup <= 2.0 * scale_n)
    return idx[mask]


def enumerate_cubes(scale_n: float, r: int, d: int) -> list[DyadicCube]:
    """All dyadic cubes of sidelength N/r inside {N <= ||xi||_max < 2N}."""
    return [DyadicCube(scale_n, r, tuple(row)) for row in _annulus_indices(scale_n, r, d)]


def containing_cube(point, scale_n: float, r: int) -> DyadicCube:
    """The scale-N/r dyadic cube containing `point`."""
    p = np.atleast_1d(np.asarray(point, float))
    side = scale_n / r
    return DyadicCube(scale_n, r, tuple(int(math.floor(v / side)) for v in p))


def whitney_related(tau: DyadicCube, tau_prime: DyadicCube, n_whitney: int) -> bool:
    """True iff all k-parents (k < n_whitney) are non-adjacent while the
    n_whitney-parents are adjacent.  Requires equal sidelength."""
    if tau.side != tau_prime.side or tau.d != tau_prime.d:
        return False
    for k in range(n_whitney):
        if _adjacent(tau.parent_index(k), tau_prime.parent_index(k)):
            return False
    return _adjacent(tau.parent_index(n_whitney), tau_prime.parent_index(n_whitney))


def first_adjacent_generation(tau: DyadicCube, tau_prime: DyadicCube, k_max: int = 64) -> int:
    """Smallest k with adjacent k-parents (adjacency is monotone in k)."""
    for k in range(k_max):
        if _adjacent(tau.parent_index(k), tau_prime.parent_index(k)):
            return k
    raise ValueError("no adjacent ancestors within k_max generations")


# ---------------------------------------------------------------------------
# sectors


@dataclass(frozen=True)
class DecompositionConfig:
    """Whitney depth, sector count and the angle budget tying them together.

    Constructor enforces arctan(d^{-1/2} 2^{-n_whitney}) + theta_sector <= theta_bar.
    """

    d: int
    n_whitney: int
    k_sectors: int
    theta_bar: float
    theta_sector: float = field(init=False)

    def __post_init__(self):
        if self.n_whitney < 1 or self.k_sectors < 1 or self.theta_bar <= 0:
            raise ValueError("invalid decomposition parameters")
        slack = math.atan(self.d**-0.5 * 2.0**-self.n_whitney)
        theta_sector = self.theta_bar - slack
        if theta_sector <= 0:
            raise ValueError(
                f"angle condition unsatisfiable: arctan(d^-1/2 2^-N)={slack:.4f} "
                f">= theta_bar={self.theta_bar:.4f}"
            )
        if self.d == 2 and 2.0 * np.pi / self.k_sectors >= theta_sector:
            raise ValueError(
                f"k_sectors={self.k_sectors} gives wedge opening "
                f"{2*np.pi/self.k_sectors:.4f} >= theta_sector={theta_sector:.4f}"
            )
        object.__setattr__(self, "theta_sector", theta_sector)

    @staticmethod
    def default(alpha: float, d: int, n_whitney: int = 4, seed: int = 0) -> "DecompositionConfig":
        theta_bar = preliminary_theta_scan(alpha, d, seed=seed)
        k = minimal_sector_count(alpha, d, n_whitney, theta_bar)
        return DecompositionConfig(d, n_whitney, k, theta_bar)


@dataclass(frozen=True)
class Sector:
    """Angular wedge [phi_lo, phi_hi) intersected with the annulus A_N."""

    scale_n: float
    phi_lo: float
    phi_hi: float

    @property
    def opening(self) -> float:
        return self.phi_hi - self.phi_lo

    def contains_direction(self, phi: np.ndarray) -> np.ndarray:
        wrapped = np.mod(phi - self.phi_lo, 2.0 * np.pi)
        return wrapped < self.opening

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Points of the wedge-annulus, uniform in (angle, ||.||_max radius)."""
        phi = rng.uniform(self.phi_lo, self.phi_hi, n)
        m = rng.uniform(self.scale_n, 2.0 * self.scale_n, n)
        u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        scale = m / np.abs(u).max(axis=-1)
        return u * scale[:, None]


@dataclass(frozen=True)
class SectorDecomposition:
    config: DecompositionConfig
    scale_n: float
    sectors: tuple[Sector, ...]
    max_pairwise_angle: float

    def locate(self, point) -> int:
        phi = math.atan2(point[1], point[0]) % (2.0 * np.pi)
        for j, s in enumerate(self.sectors):
            if s.contains_direction(np.asarray([phi]))[0]:
                return j
        raise ValueError("point not covered by any sector")


def build_sectors(scale_n: float, config: DecompositionConfig, d: int) -> SectorDecomposition:
    """K equal angular wedges covering A_N; per-sector angle < theta_sector."""
    if d != 2:
        raise ValueError("sector decomposition implemented for d=2 only")
    k = config.k_sectors
    opening = 2.0 * np.pi / k
    if opening >= config.theta_sector and config.theta_sector > 0:
        raise ValueError("k_sectors too small for the configured sector angle")
    sectors = tuple(Sector(scale_n, j * opening, (j + 1) * opening) for j in range(k))
    return SectorDecomposition(config, scale_n, sectors, opening)


def minimal_sector_count(alpha: float, d: int, n_whitney: int, theta_bar: float) -> int:
    """Smallest K (power-of-two-free upward scan) satisfying the angle condition."""
    slack = math.atan(d**-0.5 * 2.0**-n_whitney)
    budget = theta_bar - slack
    if budget <= 0:
        raise ValueError("theta_bar too small for this Whitney depth")
    k = 2
    while 2.0 * np.pi / k >= budget:
        k += 1
    return k


def preliminary_theta_scan(
    alpha: float,
    d: int = 2,
    seed: int = 0,
    n_samples: int = 4000,
    margin: float = 0.05,
) -> float:
    """Largest candidate opening for which a same-cone Monte Carlo scan keeps
    the gap-function Hessian uniformly positive and the angle bound intact.

    This plays the role of the fixed angle theta_bar: the decomposition
    config only constrains (n_whitney, K) jointly through it.
    """
    if alpha == 2.0:
        return np.pi / 8.0
    rng = np.random.default_rng(seed)
    candidates = np.pi / 2.0 ** np.arange(3, 12)
    cos_budget = 1.0 / (2.0 * alpha - 4.0)
    for theta in candidates:
        phi1 = rng.uniform(0.0, theta, n_samples)
        phi2 = rng.uniform(0.0, theta, n_samples)
        m1 = rng.uniform(1.0, 2.0, n_samples)
        m2 = rng.uniform(1.0, 2.0, n_samples)
        xi = _from_polar(phi1, m1)
        eta = _from_polar(phi2, m2)
        swap = np.linalg.norm(xi, axis=-1) < np.linalg.norm(eta, axis=-1)
        xi[swap], eta[swap] = eta[swap].copy(), xi[swap].copy()
        hess = hessian_f_eta(xi, eta, alpha)
        if np.min(_sym2x2_min_eig(hess)) <= margin:
            continue
        y_phi = rng.uniform(0.0, 2.0 * np.pi, n_samples)
        y = np.stack([np.cos(y_phi), np.sin(y_phi)], axis=-1)
        if np.max(_cos2_defect(xi, eta, y)) >= cos_budget:
            continue
        return float(theta)
    return float(candidates[-1])


def _from_polar(phi: np.ndarray, sup_norm: np.ndarray) -> np.ndarray:
    u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    return u * (sup_norm / np.abs(u).max(axis=-1))[:, None]


# ---------------------------------------------------------------------------
# the gap function F_eta and its Hessian


def f_eta(xi, eta, alpha: float):
    """F_eta(xi) = |xi|^a + |eta|^a - |xi+eta|^a / 2^{a-1}."""
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    rx = np.sqrt((xi**2).sum(axis=-1))
    re = np.sqrt((eta**2).sum(axis=-1))
    rs = np.sqrt(((xi + eta) ** 2).sum(axis=-1))
    return rx**alpha + re**alpha - rs**alpha / 2.0 ** (alpha - 1.0)


def grad_f_eta(xi, eta, alpha: float):
    """Gradient in xi: a|xi|^{a-2} xi - a|xi+eta|^{a-2}(xi+eta)/2^{a-1}."""
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    rx = np.sqrt((xi**2).sum(axis=-1))[..., None]
    s = xi + eta
    rs = np.sqrt((s**2).sum(axis=-1))[..., None]
    return alpha * rx ** (alpha - 2.0) * xi - alpha * rs ** (alpha - 2.0) * s / 2.0 ** (alpha - 1.0)


def hessian_f_eta(xi, eta, alpha: float):
    """Closed-form Hessian; requires xi + eta != 0 when alpha < 4."""
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    d = xi.shape[-1]
    s = xi + eta
    rx = np.sqrt((xi**2).sum(axis=-1))
    rs = np.sqrt((s**2).sum(axis=-1))
    if np.any(rs == 0.0) and alpha < 4.0:
        raise ValueError("Hessian degenerate at xi + eta = 0 for alpha < 4")
    two = 2.0 ** (alpha - 1.0)
    eye = np.eye(d)
    iso = alpha * (rx ** (alpha - 2.0) - rs ** (alpha - 2.0) / two)
    outer_x = xi[..., :, None] * xi[..., None, :]
    outer_s = s[..., :, None] * s[..., None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        term_x = np.where(rx[..., None, None] > 0, rx[..., None, None] ** (alpha - 4.0) * outer_x, 0.0)
        term_s = np.where(rs[..., None, None] > 0, rs[..., None, None] ** (alpha - 4.0) * outer_s, 0.0)
    rank = alpha * (alpha - 2.0) * (term_x - term_s / two)
    return iso[..., None, None] * eye + rank


def _sym2x2_min_eig(h: np.ndarray) -> np.ndarray:
    tr = h[..., 0, 0] + h[..., 1, 1]
    det = h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] * h[..., 1, 0]
    disc = np.sqrt(np.maximum(tr**2 - 4.0 * det, 0.0))
    return 0.5 * (tr - disc)


def _sym2x2_max_eig(h: np.ndarray) -> np.ndarray:
    tr = h[..., 0, 0] + h[..., 1, 1]
    det = h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] * h[..., 1, 0]
    disc = np.sqrt(np.maximum(tr**2 - 4.0 * det, 0.0))
    return 0.5 * (tr + disc)


def _cos2_defect(xi: np.ndarray, eta: np.ndarray, y: np.ndarray) -> np.ndarray:
    """|cos^2 angle(xi,y) - cos^2 angle(xi+eta,y)|."""
    s = xi + eta
    cx = (xi * y).sum(axis=-1) ** 2 / ((xi**2).sum(axis=-1) * (y**2).sum(axis=-1))
    cs = (s * y).sum(axis=-1) ** 2 / ((s**2).sum(axis=-1) * (y**2).sum(axis=-1))
    return np.abs(cx - cs)


def hessian_bounds_scan(
    sectors: SectorDecomposition,
    alpha: float,
    n_samples: int = 100_000,
    seed: int = 0,
) -> dict:
    """Empirical two-sided Hessian bounds over same-sector pairs with |xi| >= |eta|.

    Also verifies the angle-defect bound 1/(2a-4) (alpha > 2 only) and the
    quadratic-form lower bound 1/2 from the positive-definiteness argument.
    Violations are reported with witness points, never raised.
    """
    rng = np.random.default_rng(seed)
    per = max(n_samples // len(sectors.sectors), 1)
    report = {
        "alpha": alpha,
        "n_samples": per * len(sectors.sectors),
        "sectors": [],
        "violations": [],
    }
    min_eig_all, max_eig_all = np.inf, -np.inf
    for j, sector in enumerate(sectors.sectors):
        xi = sector.sample(rng, per)
        eta = sector.sample(rng, per)
        swap = np.linalg.norm(xi, axis=-1) < np.linalg.norm(eta, axis=-1)
        xi[swap], eta[swap] = eta[swap].copy(), xi[swap].copy()
        hess = hessian_f_eta(xi, eta, alpha)
        lo = _sym2x2_min_eig(hess)
        hi = _sym2x2_max_eig(hess)
        y_phi = rng.uniform(0.0, 2.0 * np.pi, per)
        y = np.stack([np.cos(y_phi), np.sin(y_phi)], axis=-1)
        defect = _cos2_defect(xi, eta, y)
        s = xi + eta
        qform = (
            1.0
            + (alpha - 2.0)
            * ((xi * y).sum(-1) ** 2 / (xi**2).sum(-1) - (s * y).sum(-1) ** 2 / (s**2).sum(-1))
        )
        entry = {
            "sector": j,
            "min_eig": float(lo.min()),
            "max_eig": float(hi.max()),
            "max_cos2_defect": float(defect.max()),
            "min_qform": float(qform.min()),
        }
        report["sectors"].append(entry)
        min_eig_all = min(min_eig_all, entry["min_eig"])
        max_eig_all = max(max_eig_all, entry["max_eig"])
        if alpha > 2.0 and entry["max_cos2_defect"] > 1.0 / (2.0 * alpha - 4.0):
            k = int(np.argmax(defect))
            report["violations"].append(
                {"kind": "cos2-defect", "sector": j, "xi": xi[k].tolist(), "eta": eta[k].tolist()}
            )
        if entry["min_qform"] < 0.5:
            k = int(np.argmin(qform))
            report["violations"].append(
                {"kind": "qform", "sector": j, "xi": xi[k].tolist(), "eta": eta[k].tolist()}
            )
    report["c1"] = report["min_eig"] = float(min_eig_all)
    report["c2"] = report["max_eig"] = float(max_eig_all)
    return report


# ---------------------------------------------------------------------------
# sum-set gap statistics and overlap counting


def _arc_of_box(lo: np.ndarray, hi: np.ndarray) -> tuple[float, float]:
    """Angular interval (start, length) spanned by a box not containing 0.

    For a convex set away from the origin the angular extremes sit at
    corners.  The length stays well below pi for annulus cubes.
    """
    corners = [(lo[0], lo[1]), (lo[0], hi[1]), (hi[0], lo[1]), (hi[0], hi[1])]
    phis = np.asarray([math.atan2(c[1], c[0]) for c in corners])
    ref = phis[0]
    rel = np.mod(phis - ref + np.pi, 2.0 * np.pi) - np.pi
    return float(ref + rel.min()), float(rel.max() - rel.min())


def _arcs_intersect(a_start: float, a_len: float, b_start: float, b_len: float) -> bool:
    gap = np.mod(b_start - a_start, 2.0 * np.pi)
    return gap <= a_len or gap >= 2.0 * np.pi - b_len


def cube_meets_sector(cube: DyadicCube, sector: Sector) -> bool:
    start, length = _arc_of_box(cube.lo, cube.hi)
    return _arcs_intersect(sector.phi_lo, sector.opening, start, length)


def sector_cubes(scale_n: float, r: int, sector: Sector) -> list[DyadicCube]:
    """Scale-N/r annulus cubes meeting the sector, in index order."""
    idx = _annulus_indices(scale_n, r, 2)
    side = scale_n / r
    lo = side * idx
    corners = np.stack(
        [lo, lo + [0.0, side], lo + [side, 0.0], lo + side], axis=1
    )  # (n, 4, 2)
    phis = np.arctan2(corners[..., 1], corners[..., 0])
    rel = np.mod(phis - phis[:, :1] + np.pi, 2.0 * np.pi) - np.pi
    start = phis[:, 0] + rel.min(axis=1)
    length = rel.max(axis=1) - rel.min(axis=1)
    gap = np.mod(start - sector.phi_lo, 2.0 * np.pi)
    meets = (gap <= sector.opening) | (gap >= 2.0 * np.pi - length)
    rows = idx[meets]
    order = np.lexsort(rows.T[::-1])
    return [DyadicCube(scale_n, r, tuple(row)) for row in rows[order]]


def sector_whitney_pairs(
    scale_n: float,
    r: int,
    sector: Sector,
    n_whitney: int,
    max_base_cubes: int | None = None,
    seed: int = 0,
) -> list[tuple[DyadicCube, DyadicCube]]:
    """Whitney-related unordered pairs with both cubes meeting the sector.

    Partners are enumerated by integer index arithmetic: candidates are the
    depth-n_whitney children of the 3^d neighbours of a cube's
    n_whitney-parent, so the cost is linear in the cube count.  When
    `max_base_cubes` is set the first pair member is subsampled (seeded)
    while partners still range over the full in-sector family.
    """
    cubes = sector_cubes(scale_n, r, sector)
    index_set = {c.index for c in cubes}
    base = cubes
    if max_base_cubes is not None and len(cubes) > max_base_cubes:
        rng = np.random.default_rng(seed)
        sel = rng.choice(len(cubes), size=max_base_cubes, replace=False)
        base = [cubes[i] for i in sorted(sel)]
    span = 1 << n_whitney
    offsets = list(np.ndindex(span, span))
    pairs = []
    for tau in base:
        p = tau.parent_index(n_whitney)
        for dp in np.ndindex(3, 3):
            parent = (p[0] + dp[0] - 1, p[1] + dp[1] - 1)
            for off in offsets:
                cand = (parent[0] * span + off[0], parent[1] * span + off[1])
                if cand <= tau.index or cand not in index_set:
                    continue
                other = DyadicCube(scale_n, r, cand)
                if whitney_related(tau, other, n_whitney):
                    pairs.append((tau, other))
    return pairs


def scan_config(alpha: float, d: int = 2, n_whitney: int = 2, seed: int = 0) -> DecompositionConfig:
    """Config used by the r-scaling scans.

    Depth 2 keeps the minimum Whitney separation 2^{n_whitney-1}/r inside the
    sector at every scanned scale, so the pair family is geometrically
    comparable across r; at depth 4 the coarsest scale only admits
    sector-spanning pairs and the min/max statistics are not comparable.
    """
    theta_bar = preliminary_theta_scan(alpha, d, seed=seed)
    k = minimal_sector_count(alpha, d, n_whitney, theta_bar)
    return DecompositionConfig(d, n_whitney, k, theta_bar)


def sumset_gap_stats(
    alpha: float,
    r: int,
    config: DecompositionConfig,
    scale_n: float = 1.0,
    sector_index: int = 0,
    samples_per_pair: int = 16,
    max_base_cubes: int = 512,
    seed: int = 0,
) -> dict:
    """min/max of r^2 F_{xi'}(xi) over same-sector Whitney pairs at scale r."""
    rng = np.random.default_rng(seed)
    sectors = build_sectors(scale_n, config, 2)
    sector = sectors.sectors[sector_index]
    pairs = sector_whitney_pairs(scale_n, r, sector, config.n_whitney, max_base_cubes, seed)
    if not pairs:
        raise ValueError(f"no Whitney pairs at r={r} in sector {sector_index}")
    lo, hi = np.inf, -np.inf
    for a, b in pairs:
        xi = a.lo + rng.random((samples_per_pair, 2)) * a.side
        xp = b.lo + rng.random((samples_per_pair, 2)) * b.side
        vals = r**2 * f_eta(xi, xp, alpha)
        lo = min(lo, float(vals.min()))
        hi = max(hi, float(vals.max()))
    return {
        "alpha": alpha,
        "r": r,
        "n_pairs": len(pairs),
        "min_r2F": lo,
        "max_r2F": hi,
        "ratio": hi / lo if lo > 0 else float("inf"),
    }


def overlap_count(
    alpha: float,
    r: int,
    s: int,
    config: DecompositionConfig,
    gap_constants: dict | None = None,
    scale_n: float = 1.0,
    sector_index: int = 0,
    max_base_cubes: int = 512,
    seed: int = 0,
) -> dict:
    """Max number of scale-s Whitney pairs whose slab meets a scale-r pair's slab.

    Slabs share the graph function |xi|^a/2^{a-1}, so two slabs intersect iff
    the Minkowski-sum boxes overlap and the gap intervals
    [c2/r^2, c3/r^2], [c2'/s^2, c3'/s^2] overlap.  The gap constants are the
    empirical min/max of r^2 F from `sumset_gap_stats` on the same run; when
    the intervals are disjoint (incompatible scales) the count is zero
    without any box tests.
    """
    stats_r = gap_constants or sumset_gap_stats(
        alpha, r, config, scale_n, sector_index, max_base_cubes=max_base_cubes, seed=seed
    )
    stats_s = (
        sumset_gap_stats(alpha, s, config, scale_n, sector_index, max_base_cubes=max_base_cubes, seed=seed)
        if s != r
        else stats_r
    )
    band_r = (stats_r["min_r2F"] / r**2, stats_r["max_r2F"] / r**2)
    band_s = (stats_s["min_r2F"] / s**2, stats_s["max_r2F"] / s**2)
    bands_meet = band_r[0] <= band_s[1] and band_s[0] <= band_r[1]
    report = {
        "alpha": alpha,
        "r": r,
        "s": s,
        "bands_meet": bool(bands_meet),
        "max_count": 0,
        "n_pairs_r": stats_r["n_pairs"],
        "n_pairs_s": stats_s["n_pairs"],
    }
    if not bands_meet:
        return report

    sectors = build_sectors(scale_n, config, 2)
    sector = sectors.sectors[sector_index]
    pairs_r = sector_whitney_pairs(scale_n, r, sector, config.n_whitney, max_base_cubes, seed)
    pairs_s = (
        sector_whitney_pairs(scale_n, s, sector, config.n_whitney, max_base_cubes, seed)
        if s != r
        else pairs_r
    )
    los = np.asarray([a.lo + b.lo for a, b in pairs_s])
    his = np.asarray([a.hi + b.hi for a, b in pairs_s])
    max_count = 0
    for a, b in pairs_r:
        lo, hi = a.lo + b.lo, a.hi + b.hi
        meets = np.all(los < hi, axis=1) & np.all(lo < his, axis=1)
        max_count = max(max_count, int(meets.sum()))
    report["max_count"] = max_count
    report["n_pairs_r"] = len(pairs_r)
    report["n_pairs_s"] = len(pairs_s)
    return report


# ---------------------------------------------------------------------------
# level sets of the shifted phase (Lemma 4.3 quantities)


def levelset_ratio(alpha: float, n_samples: int = 100_000, seed: int = 0, r_min: float = 1e-6) -> dict:
    """min/max over the proof neighbourhood of the normalised displacement ratio

    ((x+1)^2 + ((x+1)^2+y^2)^{2-a} - 2(x+1)((x+1)^2+y^2)^{1-a/2} + y^2) / (x^2+y^2)

    sampled log-uniformly in radius on 0 < |(x,y)| <= min(3/(a-2), 1/5).
    The stated bracket is [1/2, 3a]; the report records whether it held.
    """
    rng = np.random.default_rng(seed)
    r_max = min(3.0 / (alpha - 2.0), 0.2) if alpha > 2.0 else 0.2
    rad = np.exp(rng.uniform(np.log(r_min), np.log(r_max), n_samples))
    phi = rng.uniform(0.0, 2.0 * np.pi, n_samples)
    x = rad * np.cos(phi)
    y = rad * np.sin(phi)
    vals = _displacement_ratio(x, y, alpha)
    lo, hi = float(vals.min()), float(vals.max())
    k_lo, k_hi = int(np.argmin(vals)), int(np.argmax(vals))
    return {
        "alpha": alpha,
        "r_max": r_max,
        "min_ratio": lo,
        "max_ratio": hi,
        "bracket": [0.5, 3.0 * alpha],
        "bracket_holds": bool(lo >= 0.5 and hi <= 3.0 * alpha),
        "argmin": [float(x[k_lo]), float(y[k_lo])],
        "argmax": [float(x[k_hi]), float(y[k_hi])],
        "local_sup_reference": (alpha - 1.0) ** 2,
    }


def _displacement_ratio(x: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    a2 = (x + 1.0) ** 2 + y**2
    num = (x + 1.0) ** 2 + a2 ** (2.0 - alpha) - 2.0 * (x + 1.0) * a2 ** (1.0 - alpha / 2.0) + y**2
    return num / (x**2 + y**2)


def _shift_level_value(xi_prime: np.ndarray, eta: np.ndarray, alpha: float) -> np.ndarray:
    """G(xi') = |xi'+eta|^a - a |eta|^{a-2} eta.xi' (convex, min at xi'=0)."""
    s = xi_prime + eta
    rs = np.sqrt((s**2).sum(axis=-1))
    re = float(np.sqrt((eta**2).sum()))
    return rs**alpha - alpha * re ** (alpha - 2.0) * (xi_prime @ eta)


def levelset_comparability(
    alpha: float,
    eta_mag: float,
    xi_mag: float,
    d: int = 2,
    n_directions: int = 64,
    residual_tol: float = 1e-10,
) -> dict:
    """Solve the level-set equation along rays and report min/max |xi'|/|xi|.

    Hypotheses of the underlying lemma: |eta| >= 100, |xi| <= |eta|/5.  The
    level value is taken at xi = xi_mag * eta_bar; G is strictly increasing
    along every ray from its unique minimum at 0, so bisection is safe.
    """
    if eta_mag < 100.0:
        raise ValueError("comparability check requires |eta| >= 100")
    if xi_mag > eta_mag / 5.0:
        raise ValueError("comparability check requires |xi| <= |eta|/5")
    eta = np.zeros(d)
    eta[0] = eta_mag
    xi = np.zeros(d)
    xi[0] = xi_mag
    level = float(_shift_level_value(xi, eta, alpha))
    base = float(_shift_level_value(np.zeros(d), eta, alpha))
    ratios = []
    failures = []
    for k in range(n_directions):
        phi = 2.0 * np.pi * k / n_directions
        u = np.array([np.cos(phi), np.sin(phi)]) if d == 2 else np.array([1.0 if k % 2 == 0 else -1.0])
        fn = lambda t: float(_shift_level_value(t * u, eta, alpha)) - level
        hi = xi_mag
        while fn(hi) < 0 and hi < 10 * eta_mag:
            hi *= 2.0
        if fn(hi) < 0:
            failures.append({"direction": u.tolist(), "reason": "no-bracket"})
            continue
        sol = optimize.brentq(fn, 0.0, hi, xtol=residual_tol * max(1.0, xi_mag))
        if abs(fn(sol)) > residual_tol * max(abs(level - base), 1.0):
            failures.append({"direction": u.tolist(), "reason": "residual"})
            continue
        ratios.append(sol / xi_mag)
    ratios = np.asarray(ratios)
    return {
        "alpha": alpha,
        "eta_mag": eta_mag,
        "xi_mag": xi_mag,
        "min_ratio": float(ratios.min()),
        "max_ratio": float(ratios.max()),
        "n_solved": int(ratios.size),
        "failures": failures,
    }


def psi_eta(xi, eta, params) -> np.ndarray:
    """psi_eta(xi) = |eta|^{(a-2)/q0} |xi|^{1/2} |xi+eta|^{-(a-2)/q0}."""
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    we = params.weight_exponent
    rx = np.sqrt((xi**2).sum(axis=-1))
    re = np.sqrt((eta**2).sum(axis=-1))
    rs = np.sqrt(((xi + eta) ** 2).sum(axis=-1))
    if np.any(rs == 0.0):
        raise ValueError("psi_eta has a pole at xi = -eta")
    return re**we * np.sqrt(rx) * rs ** (-we)
