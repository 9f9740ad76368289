"""Minimal lattice data (H, b, h) for finite-support increment laws.

A law lives on the affine lattice b + H Z^d; the span h = |det H| is maximal
exactly when the set where the characteristic function has modulus one equals
S_H = 2 pi (H^T)^{-1} Z^d.  Minimality is verified numerically: |phi| must be
one on sampled points of S_H and bounded away from one on a grid of the
fundamental domain outside small balls around S_H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .comwalk import IncrementLaw

DEFAULT_RHO = math.pi / 8.0
DEFAULT_GRID = {1: 4001, 2: 201, 3: 81, 4: 41}
RANDOM_GRID_POINTS = 200_000
LATTICE_COORD_TOL = 1e-9
PHI_ONE_TOL = 1e-10
DEFAULT_MARGIN_MIN = 1e-3


@dataclass(frozen=True)
class LatticeSpec:
    """An affine lattice b + H Z^d with span h = |det H|."""

    H: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        h_mat = np.atleast_2d(np.asarray(self.H, dtype=float))
        b_vec = np.atleast_1d(np.asarray(self.b, dtype=float))
        if h_mat.shape[0] != h_mat.shape[1] or h_mat.shape[0] != b_vec.shape[0]:
            raise ValueError("H must be square and match b")
        if abs(np.linalg.det(h_mat)) <= 1e-12:
            raise ValueError("H must be invertible")
        object.__setattr__(self, "H", h_mat)
        object.__setattr__(self, "b", b_vec)

    @property
    def d(self) -> int:
        return self.H.shape[0]

    @property
    def h(self) -> float:
        return abs(float(np.linalg.det(self.H)))

    def dual_basis(self) -> np.ndarray:
        """Columns generate S_H = 2 pi (H^T)^{-1} Z^d."""
        return 2.0 * np.pi * np.linalg.inv(self.H.T)


def phi(law: IncrementLaw, t: np.ndarray) -> complex:
    """Characteristic function E exp(i t . X), an exact finite sum."""
    if law.family != "table":
        raise DomainError("characteristic function needs a finite-support law")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return complex(np.sum(law.probs * np.exp(1j * (law.support @ t))))


def phi_many(law: IncrementLaw, ts: np.ndarray, chunk: int = 200_000) -> np.ndarray:
    """|phi| is needed on large grids; this evaluates phi on (N, d) points."""
    ts = np.atleast_2d(ts)
    out = np.empty(ts.shape[0], dtype=complex)
    for lo in range(0, ts.shape[0], chunk):
        block = ts[lo : lo + chunk]
        out[lo : lo + chunk] = np.exp(1j * (block @ law.support.T)) @ law.probs
    return out


def support_membership(law: IncrementLaw, spec: LatticeSpec) -> bool:
    """True iff every support point x has H^{-1}(x - b) integer (to 1e-9)."""
    if law.family != "table":
        raise DomainError("support membership needs a finite-support law")
    coords = (law.support - spec.b) @ np.linalg.inv(spec.H).T
    return bool(np.max(np.abs(coords - np.rint(coords))) <= LATTICE_COORD_TOL)


@dataclass(frozen=True)
class MinimalityReport:
    passed: bool
    margin: float  # 1 - max |phi| outside the excluded balls
    witness: Optional[np.ndarray]  # argmax location (canonical sign)
    lattice_phi_deviation: float  # max |1 - |phi|| over sampled S_H points
    grid_points: int
    rho: float

    def __bool__(self) -> bool:  # allows `if minimality_check(...)`
        return self.passed


def minimality_check(
    law: IncrementLaw,
    spec: LatticeSpec,
    grid_resolution: Optional[int] = None,
    rho: float = DEFAULT_RHO,
    margin_min: float = DEFAULT_MARGIN_MIN,
    lattice_range: int = 2,
) -> MinimalityReport:
    """Numerical test that (H, b) is the *minimal* lattice for the law.

    Checks (a) |phi| = 1 on sampled points of S_H and (b) max |phi| over a
    grid of the fundamental domain 2 pi (H^T)^{-1} [-1/2, 1/2]^d, excluding
    balls of radius rho around S_H, stays below 1 - margin_min.  Full grids
    are used up to d = 4 (resolution defaults scale down with dimension);
    higher dimensions fall back to seeded random sampling of the domain.
    """
    if not support_membership(law, spec):
        raise DomainError("support membership fails; minimality is moot")
    d = spec.d
    dual = spec.dual_basis()

    # (a) sampled points of S_H
    ks = np.array(list(product(range(-lattice_range, lattice_range + 1), repeat=d)))
    s_points = ks @ dual.T
    dev = float(np.max(np.abs(1.0 - np.abs(phi_many(law, s_points)))))
    lattice_ok = dev <= PHI_ONE_TOL

    # (b) grid over the fundamental domain in lattice coordinates u
    if d <= 4:
        res = grid_resolution or DEFAULT_GRID[d]
        axes = [np.linspace(-0.5, 0.5, res)] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        u = np.stack([m.ravel() for m in mesh], axis=1)
        cell_diag = float(np.linalg.norm(dual @ np.full(d, 1.0 / (res - 1))))
        if cell_diag > rho:
            raise ConfigurationError(
                f"grid spacing {cell_diag:.3f} exceeds rho={rho:.3f}; "
                "raise the resolution or rho"
            )
    else:
        n_pts = grid_resolution or RANDOM_GRID_POINTS
        u = np.random.default_rng(0).uniform(-0.5, 0.5, size=(n_pts, d))

    ts = u @ dual.T
    dist = _distance_to_lattice(u, dual)
    keep = dist >= rho
    if not np.any(keep):
        raise ConfigurationError("every grid point fell inside an excluded ball")
    mags = np.abs(phi_many(law, ts[keep]))
    arg = int(np.argmax(mags))
    max_phi = float(mags[arg])
    witness = ts[keep][arg]
    nz = np.flatnonzero(np.abs(witness) > 1e-12)
    if nz.size and witness[nz[0]] < 0:
        witness = -witness
    margin = 1.0 - max_phi
    passed = lattice_ok and margin > margin_min
    return MinimalityReport(
        passed=passed,
        margin=margin,
        witness=witness,
        lattice_phi_deviation=dev,
        grid_points=int(u.shape[0]),
        rho=rho,
    )


def _distance_to_lattice(u: np.ndarray, dual: np.ndarray, chunk: int = 200_000) -> np.ndarray:
    """Distance from t = dual @ u to S_H, minimising over nearby integer points."""
    d = u.shape[1]
    offsets = np.array(list(product((-1, 0, 1), repeat=d)), dtype=float)
    offsets_t = offsets @ dual.T
    out = np.empty(u.shape[0])
    for lo in range(0, u.shape[0], chunk):
        block = u[lo : lo + chunk]
        block_t = (block - np.rint(block)) @ dual.T
        best = np.full(block.shape[0], np.inf)
        for off_t in offsets_t:
            delta = block_t - off_t
            best = np.minimum(best, np.einsum("ij,ij->i", delta, delta))
        out[lo : lo + chunk] = np.sqrt(best)
    return out


def builtin_lattice(family: str, d: int) -> LatticeSpec:
    """The known minimal lattices for the two walk families.

    The lazy walk has the trivial lattice (identity, origin, h = 1).  The
    simple symmetric walk needs h = 2: in one dimension b = -1, H = (2); in
    odd dimension d = 2n - 1 the circulant with ones where i - j is 0 or n
    mod d, all offsets -1; in even dimension d = 2n the banded matrix with
    ones where j - i is 0 or 1 mod d except a -1 in the bottom-left corner,
    offsets -1 except the last, which is 0.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    if family == "lazy_ssrw":
        return LatticeSpec(H=np.eye(d), b=np.zeros(d))
    if family != "ssrw":
        raise DomainError(f"no builtin lattice for family {family!r}")
    if d == 1:
        return LatticeSpec(H=np.array([[2.0]]), b=np.array([-1.0]))
    h_mat = np.zeros((d, d))
    if d % 2 == 1:
        n = (d + 1) // 2
        for i in range(d):
            for j in range(d):
                if (i - j) % d in (0, n):
                    h_mat[i, j] = 1.0
        b_vec = -np.ones(d)
    else:
        for i in range(d):
            for j in range(d):
                if (j - i) % d in (0, 1):
                    h_mat[i, j] = 1.0
        h_mat[d - 1, 0] = -1.0
        b_vec = -np.ones(d)
        b_vec[d - 1] = 0.0
    spec = LatticeSpec(H=h_mat, b=b_vec)
    assert abs(spec.h - 2.0) < 1e-9, "builtin SSRW lattice must have span 2"
    return spec


def minimal_lattice_1d(law: IncrementLaw) -> LatticeSpec:
    """Minimal lattice search, one dimension only: the span is the gcd of the
    support differences and the offset any support point."""
    if law.family != "table" or law.dimension != 1:
        raise DomainError("the search is implemented for finite 1-d laws only")
    pts = np.sort(law.support[:, 0])
    if pts.size < 2:
        raise DomainError("need at least two support points")
    diffs = np.diff(pts)
    g = 0.0
    for step in diffs:
        g = _float_gcd(g, float(step))
    return LatticeSpec(H=np.array([[g]]), b=np.array([float(pts[0])]))


def _float_gcd(a: float, b: float, tol: float = 1e-9) -> float:
    a, b = abs(a), abs(b)
    while b > tol:
        a, b = b, a % b
    return a
