"""Lattice random walks and their centre of mass.

For a walk S_n with i.i.d. increments, the centre of mass G_n = (1/n) sum S_i
satisfies a law of large numbers towards mu/2, a CLT with covariance M/3 and,
for lattice increments, a local limit theorem on the shrinking lattice
n^{-3/2} (n(n+1)b/2 + H Z^d) with limiting density

    n(x) = exp(-(3/2) x' M^-1 x) / ((2 pi)^{d/2} sqrt(det(M/3)))

(the walk itself obeys the classical version with n^{-1/2} scaling and density
m(x)).  This module simulates both processes at scale, compares empirical
pmfs against the densities, measures the diffusive escape exponent in d >= 2,
probes one-dimensional recurrence, and provides the symmetric alpha-stable
density and a heavy-tailed integer increment law in its domain of normal
attraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from .errors import (
    ConfigurationError,
    DomainError,
    InsufficientDataError,
    OffLatticeError,
    QuadratureError,
)

_HEAVY_TABLE_SIZE = 1_000_000
_heavy_tail_cache: dict[float, tuple[np.ndarray, float, float]] = {}


# ---------------------------------------------------------------------------
# Increment laws


@dataclass(frozen=True)
class IncrementLaw:
    """A d-dimensional increment distribution: a finite table, or the
    symmetric heavy-tailed integer family with pmf proportional to
    |k|^(-1-alpha)."""

    dimension: int
    family: str  # "table" or "heavy_tail"
    support: Optional[np.ndarray] = None  # (k, d)
    probs: Optional[np.ndarray] = None
    alpha: Optional[float] = None

    def __post_init__(self) -> None:
        if self.family == "table":
            support = np.atleast_2d(np.asarray(self.support, dtype=float))
            probs = np.asarray(self.probs, dtype=float)
            if support.shape[0] != probs.shape[0]:
                raise ValueError("support and probs must have matching lengths")
            if support.shape[1] != self.dimension:
                raise ValueError("support dimension mismatch")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("probabilities must be nonnegative and sum to 1")
            object.__setattr__(self, "support", support)
            object.__setattr__(self, "probs", probs)
        elif self.family == "heavy_tail":
            if self.dimension != 1:
                raise ValueError("heavy-tailed family is one-dimensional")
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("alpha must lie in (0,1)")
        else:
            raise ValueError(f"unknown family {self.family!r}")

    @property
    def mean(self) -> Optional[np.ndarray]:
        if self.family == "table":
            return self.probs @ self.support
        return None  # no first moment for alpha < 1

    @property
    def covariance(self) -> Optional[np.ndarray]:
        if self.family == "table":
            mu = self.mean
            centred = self.support - mu
            return (centred * self.probs[:, None]).T @ centred
        return None

    @property
    def truncation_deficit(self) -> float:
        """Probability mass handled by the analytic tail extension rather than
        the exact inverse-CDF table (heavy-tailed family only)."""
        if self.family != "heavy_tail":
            return 0.0
        _, tail_mass, total = _heavy_tail_table(self.alpha)
        return tail_mass / total

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw (size, d) increments."""
        if self.family == "table":
            idx = rng.choice(self.support.shape[0], size=size, p=self.probs)
            return self.support[idx]
        return sample_heavy_tail_increments(self.alpha, rng, size)[:, None].astype(float)


def ssrw_law(d: int) -> IncrementLaw:
    """Simple symmetric random walk: +/- each basis vector w.p. 1/(2d)."""
    eye = np.eye(d)
    support = np.vstack([eye, -eye])
    probs = np.full(2 * d, 1.0 / (2 * d))
    return IncrementLaw(dimension=d, family="table", support=support, probs=probs)


def lazy_ssrw_law(d: int) -> IncrementLaw:
    """Lazy walk: stays put w.p. 1/2, otherwise +/- a basis vector w.p. 1/(4d)."""
    eye = np.eye(d)
    support = np.vstack([np.zeros((1, d)), eye, -eye])
    probs = np.concatenate([[0.5], np.full(2 * d, 1.0 / (4 * d))])
    return IncrementLaw(dimension=d, family="table", support=support, probs=probs)


def table_law(points: Sequence[Sequence[float]], probs: Sequence[float]) -> IncrementLaw:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return IncrementLaw(
        dimension=points.shape[1], family="table", support=points, probs=np.asarray(probs)
    )


def heavy_tail_law(alpha: float) -> IncrementLaw:
    return IncrementLaw(dimension=1, family="heavy_tail", alpha=alpha)


# ---------------------------------------------------------------------------
# Heavy-tailed sampler


def _heavy_tail_table(alpha: float) -> tuple[np.ndarray, float, float]:
    cached = _heavy_tail_cache.get(alpha)
    if cached is None:
        k = np.arange(1, _HEAVY_TABLE_SIZE + 1, dtype=float)
        weights = k ** (-1.0 - alpha)
        total = float(special.zeta(1.0 + alpha, 1))
        cum = np.cumsum(weights)
        tail_mass = float(special.zeta(1.0 + alpha, _HEAVY_TABLE_SIZE + 1))
        cached = (cum / total, tail_mass, total)
        _heavy_tail_cache[alpha] = cached
    return cached


def sample_heavy_tail_increments(
    alpha: float, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Symmetric integer increments with pmf proportional to |k|^(-1-alpha).

    Magnitudes use exact inverse-CDF on a precomputed table up to 10^6; beyond
    that the tail is inverted analytically through the integral approximation
    of the tail sum (a Pareto extension whose mass is the reported truncation
    deficit).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    cum, _, total = _heavy_tail_table(alpha)
    u = rng.random(size)
    k = np.searchsorted(cum, u, side="right") + 1
    beyond = k > _HEAVY_TABLE_SIZE
    if np.any(beyond):
        # invert sum_{j >= k} j^(-1-a) ~= (k - 1/2)^(-a) / a for the overflow draws
        residual = (1.0 - u[beyond]) * total
        k_tail = np.ceil(0.5 + (alpha * residual) ** (-1.0 / alpha)).astype(np.int64)
        k[beyond] = np.maximum(k_tail, _HEAVY_TABLE_SIZE + 1)
    sign = np.where(rng.random(size) < 0.5, -1, 1)
    return (sign * k).astype(np.int64)


def sample_heavy_tail_increment(alpha: float, rng: np.random.Generator) -> int:
    return int(sample_heavy_tail_increments(alpha, rng, 1)[0])


# ---------------------------------------------------------------------------
# Centre-of-mass recursion and densities


def step_com(g: np.ndarray, s_next: np.ndarray, n: int) -> np.ndarray:
    """One update of the running average: G_{n+1} = G_n + (S_{n+1} - G_n)/(n+1)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    g = np.asarray(g, dtype=float)
    s_next = np.asarray(s_next, dtype=float)
    return g + (s_next - g) / (n + 1)


def gaussian_density_walk(x: np.ndarray, m: np.ndarray) -> float:
    """Limit density of n^{-1/2} S_n."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = np.atleast_2d(np.asarray(m, dtype=float))
    d = x.shape[-1]
    det = np.linalg.det(m)
    if det <= 0:
        raise DomainError("covariance must be positive-definite")
    inv = np.linalg.inv(m)
    quad = np.einsum("...i,ij,...j->...", x, inv, x)
    val = np.exp(-0.5 * quad) / ((2 * np.pi) ** (d / 2) * math.sqrt(det))
    return float(val) if val.ndim == 0 else val


def gaussian_density_com(x: np.ndarray, m: np.ndarray) -> float:
    """Limit density of n^{-1/2} G_n: the walk's Gaussian with covariance M/3."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = np.atleast_2d(np.asarray(m, dtype=float))
    d = x.shape[-1]
    det3 = np.linalg.det(m / 3.0)
    if det3 <= 0:
        raise DomainError("covariance must be positive-definite")
    inv = np.linalg.inv(m)
    quad = np.einsum("...i,ij,...j->...", x, inv, x)
    val = np.exp(-1.5 * quad) / ((2 * np.pi) ** (d / 2) * math.sqrt(det3))
    return float(val) if val.ndim == 0 else val


# ---------------------------------------------------------------------------
# Local limit theorem check


@dataclass(frozen=True)
class LltBin:
    lo: float
    hi: float
    empirical: float
    predicted: float
    stderr: float

    @property
    def z(self) -> float:
        return abs(self.empirical - self.predicted) / self.stderr


@dataclass
class LltReport:
    """Empirical pmf of the scaled target against its limiting density."""

    target: str
    n: int
    n_samples: int
    lattice_h: float
    points_k: np.ndarray  # integer lattice coordinates (n_points, d)
    points_x: np.ndarray  # scaled positions (n_points, d)
    empirical: np.ndarray  # empirical pmf per point
    predicted: np.ndarray  # density at the (shifted) point
    scaled_discrepancy: np.ndarray  # |(n^{dd}/h) pmf - density|
    point_stderr: np.ndarray  # Monte Carlo se on the scaled pmf
    bulk_mask: np.ndarray
    bins: Optional[list[LltBin]] = None

    @property
    def sup_discrepancy_bulk(self) -> float:
        if not np.any(self.bulk_mask):
            return float("nan")
        return float(np.max(self.scaled_discrepancy[self.bulk_mask]))

    @property
    def max_bin_z(self) -> float:
        if not self.bins:
            return float("nan")
        return max(b.z for b in self.bins)


def llt_check(
    law: IncrementLaw,
    lattice,
    n: int,
    n_samples: int,
    seed: int,
    target: str = "com",
    n_bins: int = 24,
    min_expected_per_bin: float = 100.0,
    chunk_size: int = 200_000,
) -> LltReport:
    """Monte Carlo local-limit comparison for the walk or its centre of mass.

    Samples are mapped to exact integer lattice coordinates (a sample off the
    declared lattice is a hard failure: the (H, b) pair is wrong for the law),
    counted, scaled by n^{d/2}/h (walk) or n^{3d/2}/h (com), and compared per
    point with the Gaussian limit density, with Monte Carlo standard errors.
    In one dimension the bulk (within two limit standard deviations) is also
    aggregated into bins of at least ``min_expected_per_bin`` expected counts.
    """
    from .lattice import support_membership

    if target not in ("walk", "com"):
        raise ValueError("target must be 'walk' or 'com'")
    if n_samples < 100_000:
        raise ValueError("need at least 1e5 samples for a meaningful comparison")
    if law.family != "table":
        raise DomainError("local limit comparison needs a finite-support law")
    if not support_membership(law, lattice):
        raise OffLatticeError("law support is not contained in b + H Z^d")

    d = law.dimension
    m_cov = law.covariance
    mu = law.mean
    h = lattice.h
    h_inv = np.linalg.inv(lattice.H)
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    if target == "walk":
        offset = n * lattice.b
        scale_exp = 0.5
        weights = np.ones(n)
    else:
        offset = 0.5 * n * (n + 1) * lattice.b
        scale_exp = 1.5
        weights = np.arange(n, 0, -1, dtype=float)  # G_n * n = sum (n-j+1) X_j

    counts: dict[tuple, int] = {}
    remaining = n_samples
    while remaining > 0:
        size = min(chunk_size, remaining)
        remaining -= size
        x_inc = law.sample(rng, size * n).reshape(size, n, d)
        y = np.tensordot(weights, x_inc, axes=(0, 1))  # (size, d)
        k_real = (y - offset) @ h_inv.T
        k_round = np.rint(k_real)
        if np.max(np.abs(k_real - k_round)) > 1e-9:
            raise OffLatticeError(
                "simulated sample off the declared lattice (wrong H or b)"
            )
        k_int = k_round.astype(np.int64)
        uniq, cnt = np.unique(k_int, axis=0, return_counts=True)
        for row, c in zip(uniq, cnt):
            key = tuple(int(v) for v in row)
            counts[key] = counts.get(key, 0) + int(c)

    ks = np.array(sorted(counts.keys()))
    emp = np.array([counts[tuple(row)] for row in ks], dtype=float) / n_samples
    xs = (offset + ks @ lattice.H.T) * n ** (-scale_exp)

    if target == "walk":
        shift = math.sqrt(n) * mu
        limit_cov = m_cov
        density = lambda pts: _gauss_many(pts - shift, m_cov, com=False)
    else:
        shift = (n + 1) / (2 * math.sqrt(n)) * mu
        limit_cov = m_cov / 3.0
        density = lambda pts: _gauss_many(pts - shift, m_cov, com=True)

    scale = n ** (scale_exp * d) / h
    pred = density(xs)
    scaled_emp = scale * emp
    disc = np.abs(scaled_emp - pred)
    se = scale * np.sqrt(emp * (1.0 - emp) / n_samples)

    cov_inv = np.linalg.inv(limit_cov)
    centred = xs - shift
    mahal = np.sqrt(np.einsum("ki,ij,kj->k", centred, cov_inv, centred))
    bulk = mahal <= 2.0

    bins = None
    if d == 1:
        bins = _bin_1d(
            law, lattice, n, n_samples, target, counts, shift, limit_cov,
            density, scale, n_bins, min_expected_per_bin, offset, scale_exp,
        )

    return LltReport(
        target=target,
        n=n,
        n_samples=n_samples,
        lattice_h=h,
        points_k=ks,
        points_x=xs,
        empirical=emp,
        predicted=pred,
        scaled_discrepancy=disc,
        point_stderr=se,
        bulk_mask=bulk,
        bins=bins,
    )


def _gauss_many(pts: np.ndarray, m_cov: np.ndarray, com: bool) -> np.ndarray:
    fn = gaussian_density_com if com else gaussian_density_walk
    return np.array([fn(p, m_cov) for p in np.atleast_2d(pts)])


def _bin_1d(
    law, lattice, n, n_samples, target, counts, shift, limit_cov, density,
    scale, n_bins, min_expected, offset, scale_exp,
) -> list[LltBin]:
    sigma = math.sqrt(float(limit_cov[0, 0]))
    centre = float(np.atleast_1d(shift)[0])
    lo, hi = centre - 2 * sigma, centre + 2 * sigma
    edges = np.linspace(lo, hi, n_bins + 1)
    step = abs(float(lattice.H[0, 0])) * n ** (-scale_exp)
    x0 = float(offset if np.isscalar(offset) else offset[0]) * n ** (-scale_exp)
    sgn = 1.0 if lattice.H[0, 0] >= 0 else -1.0

    out: list[LltBin] = []
    for a, b in zip(edges[:-1], edges[1:]):
        k_lo = math.ceil((a - x0) / (sgn * step) - 1e-12)
        k_hi = math.floor((b - x0) / (sgn * step) + 1e-12)
        if k_hi < k_lo:
            continue
        k_range = np.arange(k_lo, k_hi + 1)
        x_pts = x0 + sgn * step * k_range
        inside = (x_pts >= a) & (x_pts < b)
        k_range, x_pts = k_range[inside], x_pts[inside]
        if k_range.size == 0:
            continue
        pred_prob = float(np.sum(density(x_pts[:, None])) / scale)
        emp_prob = sum(counts.get((int(k),), 0) for k in k_range) / n_samples
        if n_samples * pred_prob < min_expected:
            raise ConfigurationError(
                f"bin [{a:.3f},{b:.3f}) expects {n_samples * pred_prob:.0f} counts "
                f"< {min_expected}; use fewer bins"
            )
        se = math.sqrt(pred_prob * (1 - pred_prob) / n_samples)
        out.append(LltBin(lo=a, hi=b, empirical=emp_prob, predicted=pred_prob, stderr=se))
    return out


# ---------------------------------------------------------------------------
# Escape exponent and one-dimensional recurrence probe


@dataclass(frozen=True)
class EscapeEstimate:
    slope: float
    ci_half_width: float
    per_path_slopes: np.ndarray
    checkpoint_ns: np.ndarray


def geometric_checkpoints(n_lo: int, n_hi: int, count: int) -> np.ndarray:
    ns = np.unique(
        np.round(np.geomspace(max(n_lo, 1), n_hi, count)).astype(np.int64)
    )
    return ns


def escape_exponent(
    law: IncrementLaw,
    n_max: int,
    n_checkpoints: int,
    n_paths: int,
    seed: int,
    block: int = 10_000,
) -> EscapeEstimate:
    """Pooled log-log slope of ||G_n|| over geometric checkpoints.

    The regression window is [n_max/100, n_max] (the first two decades are
    burn-in).  Checkpoints where a path has G_n exactly zero are dropped for
    that path.  The pooled slope is the mean of per-path slopes, with a
    normal-theory confidence half-width (1.96 se).
    """
    ns = geometric_checkpoints(max(n_max // 100, 10), n_max, n_checkpoints)
    g_at = _g_at_checkpoints(law, ns, n_paths, seed, block)  # (n_cp, paths, d)
    norms = np.linalg.norm(g_at, axis=2)  # (n_cp, paths)
    log_n = np.log(ns.astype(float))
    slopes = np.empty(n_paths)
    for p in range(n_paths):
        good = norms[:, p] > 0
        if np.count_nonzero(good) < 3:
            slopes[p] = np.nan
            continue
        coef = np.polyfit(log_n[good], np.log(norms[good, p]), 1)
        slopes[p] = coef[0]
    slopes = slopes[~np.isnan(slopes)]
    if slopes.size < 2:
        raise InsufficientDataError("not enough usable paths for a pooled slope")
    mean = float(np.mean(slopes))
    half = float(1.96 * np.std(slopes, ddof=1) / math.sqrt(slopes.size))
    return EscapeEstimate(
        slope=mean, ci_half_width=half, per_path_slopes=slopes, checkpoint_ns=ns
    )


def _g_at_checkpoints(
    law: IncrementLaw, ns: np.ndarray, n_paths: int, seed: int, block: int
) -> np.ndarray:
    """Simulate n_paths walks to max(ns), returning G at each checkpoint."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    d = law.dimension
    n_max = int(ns[-1])
    s_carry = np.zeros((n_paths, d))
    y_carry = np.zeros((n_paths, d))
    out = np.empty((ns.size, n_paths, d))
    next_cp = 0
    t_done = 0
    while t_done < n_max:
        t_block = min(block, n_max - t_done)
        x = law.sample(rng, t_block * n_paths).reshape(t_block, n_paths, d)
        s_part = s_carry[None] + np.cumsum(x, axis=0)
        y_part = y_carry[None] + np.cumsum(s_part, axis=0)
        while next_cp < ns.size and ns[next_cp] <= t_done + t_block:
            rel = int(ns[next_cp]) - t_done - 1
            out[next_cp] = y_part[rel] / float(ns[next_cp])
            next_cp += 1
        s_carry = s_part[-1]
        y_carry = y_part[-1]
        t_done += t_block
    return out


@dataclass(frozen=True)
class RecurrenceProbe:
    checkpoint_ns: np.ndarray
    running_min: np.ndarray  # min_{m <= n} |G_m - x| at each checkpoint
    window_edges: np.ndarray
    window_min: np.ndarray  # min |G_m - x| over (edge_i, edge_{i+1}]

    def min_over(self, lo: int, hi: int) -> float:
        """Minimum of |G_n - x| over (lo, hi]; the bounds must be edges."""
        edges = self.window_edges
        i = int(np.searchsorted(edges, lo))
        j = int(np.searchsorted(edges, hi))
        if i >= j or edges[i] != lo or edges[j] != hi:
            raise ValueError(f"({lo}, {hi}] is not a union of recorded windows")
        return float(np.min(self.window_min[i:j]))


def recurrence_probe_1d(
    law: IncrementLaw,
    n_max: int,
    seed: int,
    x: float = 0.0,
    n_checkpoints: int = 25,
    window_edges: Optional[Sequence[int]] = None,
    block: int = 100_000,
) -> RecurrenceProbe:
    """Track how close G_n comes to the level x along a single trajectory.

    Returns the running minimum of |G_n - x| at geometric checkpoints (a
    monotone record) together with windowed minima over the segments between
    ``window_edges`` (a geometric grid by default), used to contrast
    recurrent laws (record drifts to zero) with heavy-tailed transient ones
    (late-window minima exceed early ones).
    """
    if law.dimension != 1:
        raise ValueError("the recurrence probe is one-dimensional")
    ns = geometric_checkpoints(10, n_max, n_checkpoints)
    if window_edges is None:
        edges = np.unique(
            np.concatenate([[0], np.round(np.geomspace(1, n_max, 61)).astype(np.int64)])
        )
    else:
        edges = np.unique(np.asarray(list(window_edges), dtype=np.int64))
        if edges[0] != 0:
            edges = np.concatenate([[0], edges])
    if edges[-1] < n_max:
        edges = np.concatenate([edges, [n_max]])
    win_min = np.full(edges.size - 1, np.inf)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    running = np.empty(ns.size)
    best = math.inf
    s_carry = 0.0
    y_carry = 0.0
    next_cp = 0
    t_done = 0
    while t_done < n_max:
        t_block = min(block, n_max - t_done)
        inc = law.sample(rng, t_block)[:, 0]
        s_part = s_carry + np.cumsum(inc)
        y_part = y_carry + np.cumsum(s_part)
        n_vals = np.arange(t_done + 1, t_done + t_block + 1, dtype=np.int64)
        dist = np.abs(y_part / n_vals.astype(float) - x)
        # windowed minima: reduce dist over the segments this block spans
        seg = np.searchsorted(edges, n_vals, side="left") - 1
        np.minimum.at(win_min, seg, dist)
        # running minima at checkpoints
        cummin = np.minimum.accumulate(dist)
        while next_cp < ns.size and ns[next_cp] <= t_done + t_block:
            rel = int(ns[next_cp]) - t_done - 1
            running[next_cp] = min(best, float(cummin[rel]))
            next_cp += 1
        best = min(best, float(cummin[-1]))
        s_carry = float(s_part[-1])
        y_carry = float(y_part[-1])
        t_done += t_block
    return RecurrenceProbe(
        checkpoint_ns=ns,
        running_min=running,
        window_edges=edges,
        window_min=win_min,
    )


# ---------------------------------------------------------------------------
# Symmetric alpha-stable density


def stable_density(x: float, alpha: float, c_scale: float = 1.0) -> float:
    """Density of the symmetric alpha-stable law with ch.f. exp(-c |t|^alpha),
    by numerical inversion of the (real, cosine) integral.

    The integrand is cut at T with exp(-c T^alpha) < 1e-16; the remaining tail
    is bounded by an explicit envelope and the quadrature error estimate is
    checked, raising QuadratureError with diagnostics on failure.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    if c_scale <= 0:
        raise ValueError("scale must be positive")
    t_cut = (36.84 / c_scale) ** (1.0 / alpha)  # exp(-c t^a) < 1e-16 beyond
    envelope = lambda t: math.exp(-c_scale * t**alpha)
    try:
        if x == 0.0:
            val, err = integrate.quad(envelope, 0.0, t_cut, limit=500)
        else:
            val, err = integrate.quad(
                envelope, 0.0, t_cut, weight="cos", wvar=abs(x), limit=2000
            )
    except Exception as exc:
        raise QuadratureError(f"stable inversion failed at x={x}: {exc}") from exc
    tail = envelope(t_cut) * t_cut ** (1 - alpha) / (c_scale * alpha)
    if err > 1e-7 + tail:
        raise QuadratureError(
            f"stable inversion error estimate {err:.2e} too large at x={x} "
            f"(alpha={alpha}, c={c_scale}, T={t_cut:.3g})"
        )
    return (val + 0.0) / math.pi  # (1/pi) * integral over [0, inf)


def stable_density_com(x: float, alpha: float, c_scale: float = 1.0) -> float:
    """Limit density for the centre of mass under the stable local limit
    theorem: (alpha+1)^{1/alpha} g((alpha+1)^{1/alpha} x)."""
    factor = (alpha + 1.0) ** (1.0 / alpha)
    return factor * stable_density(factor * x, alpha, c_scale)
