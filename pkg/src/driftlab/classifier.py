"""Closed-form recurrence classification from a drift profile.

The pipeline: stationary distribution of the limiting line-switch matrix, a
shift vector solving the singular linear system (Q - I) a = -d, the per-line
constants after shifting each line by a_i, and finally the two scalars

    U = sum_i (2 e_i + 2 sum_j a_j gamma_ij) pi_i
    V = sum_i (t_i^2 + 2 sum_j a_j d_ij) pi_i

whose comparison decides the phase: transient when U > V, positive recurrent
when U < -V, null recurrent when |U| < V, with |U| = V a boundary verdict that
needs the sharper error-rate assumptions.  The passage-time moment threshold
is theta* = (V - U) / (2V).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateVarianceError,
    IllPosedProfileError,
    NotCriticalError,
    StructuralError,
)
from .halfstrip import (
    REGIME_CONSTANT,
    REGIME_GENERALIZED,
    REGIME_LAMPERTI,
    DriftProfile,
)

TRANSIENT = "Transient"
NULL_RECURRENT = "NullRecurrent"
POSITIVE_RECURRENT = "PositiveRecurrent"
BOUNDARY_NULL_RECURRENT = "Boundary-NullRecurrent"

PI_RESIDUAL_TOL = 1e-10
SHIFT_RESIDUAL_TOL = 1e-10
CRITICAL_TOL = 1e-10
DEFAULT_DEADBAND = 1e-9


@dataclass(frozen=True)
class ClassifierReport:
    """Everything the classification computed, in one place."""

    pi: np.ndarray
    a: np.ndarray
    transformed_c: np.ndarray
    transformed_s2: np.ndarray
    U: float
    V: float
    verdict: str
    theta_star: Optional[float]
    boundary_caveat: bool = False  # verdict needs the sharpened error rates
    theta_cap: Optional[float] = None  # p/2 ceiling from the moment bound

    def to_dict(self) -> dict:
        return {
            "pi": self.pi.tolist(),
            "a": self.a.tolist(),
            "transformed_c": self.transformed_c.tolist(),
            "transformed_s2": self.transformed_s2.tolist(),
            "U": self.U,
            "V": self.V,
            "verdict": self.verdict,
            "theta_star": self.theta_star,
            "boundary_caveat": self.boundary_caveat,
            "theta_cap": self.theta_cap,
        }


def stationary_distribution(q: np.ndarray) -> np.ndarray:
    """Stationary distribution of an irreducible row-stochastic matrix.

    Solves (Q^T - I) pi = 0 with the normalisation sum(pi) = 1 appended, as a
    dense least-squares problem; |S| is small so O(|S|^3) is irrelevant.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError("need a square matrix")
    if np.any(q < 0) or np.max(np.abs(q.sum(axis=1) - 1.0)) > 1e-9:
        raise StructuralError("matrix is not row-stochastic")
    _check_irreducible(q)
    n = q.shape[0]
    a = np.vstack([q.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    if np.any(pi <= 0):
        raise StructuralError(f"stationary solve produced non-positive entries {pi}")
    pi = pi / pi.sum()
    if np.max(np.abs(pi @ q - pi)) > PI_RESIDUAL_TOL:
        raise StructuralError("stationary distribution residual too large")
    return pi


def _check_irreducible(q: np.ndarray) -> None:
    from scipy.sparse.csgraph import connected_components

    n_comp, labels = connected_components(q > 0, directed=True, connection="strong")
    if n_comp > 1:
        classes = [list(map(int, np.flatnonzero(labels == k))) for k in range(n_comp)]
        # a class is unreachable if no other class has an edge into it
        unreachable = []
        for k, cls in enumerate(classes):
            incoming = q[np.ix_([s for s in range(q.shape[0]) if labels[s] != k], cls)]
            if incoming.size == 0 or not np.any(incoming > 0):
                unreachable.append(cls)
        raise StructuralError(
            f"matrix is reducible: classes {classes}, unreachable {unreachable}"
        )


def solve_shifts(q: np.ndarray, d: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Solve (Q - I) a = -d, gauged so the first line's shift is zero.

    Solvable exactly when d is orthogonal to the stationary distribution; the
    rank deficiency is resolved by the minimum-norm least-squares solution
    followed by the gauge shift, which is harmless because solutions are
    unique up to translation.
    """
    q = np.asarray(q, dtype=float)
    d = np.asarray(d, dtype=float)
    pi = np.asarray(pi, dtype=float)
    drift_sum = float(pi @ d)
    if abs(drift_sum) > CRITICAL_TOL:
        raise NotCriticalError(
            f"sum_i d_i pi_i = {drift_sum:.3e} != 0: not in the critical regime, "
            "classify with the constant-drift criterion instead"
        )
    n = q.shape[0]
    a, *_ = np.linalg.lstsq(q - np.eye(n), -d, rcond=None)
    a = a - a[0]
    residual = float(np.max(np.abs((q - np.eye(n)) @ a + d)))
    if residual > SHIFT_RESIDUAL_TOL:
        raise StructuralError(f"shift system residual {residual:.3e} too large")
    return a


def transform_to_lamperti(
    profile: DriftProfile, a: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-line constants after shifting line i by a_i:

    c_i = e_i + sum_j a_j gamma_ij
    s_i^2 = t_i^2 + 2 sum_j a_j d_ij + sum_j (a_j^2 - a_i^2) q_ij
    """
    if profile.regime == REGIME_LAMPERTI:
        return profile.e_or_c.copy(), profile.var.copy()
    if profile.regime != REGIME_GENERALIZED:
        raise ValueError("transformation applies to critical-regime profiles only")
    a = np.asarray(a, dtype=float)
    c = profile.e_or_c + profile.gamma @ a
    a2 = a * a
    s2 = profile.var + 2.0 * (profile.cross @ a) + profile.q_limit @ a2 - a2
    if np.any(s2 < -1e-10):
        raise IllPosedProfileError(f"transformed variance negative: {s2}")
    s2 = np.clip(s2, 0.0, None)
    if not np.any(s2 > 0):
        raise IllPosedProfileError("all transformed variances vanish")
    return c, s2


def compute_UV(
    pi: np.ndarray, a: np.ndarray, profile: DriftProfile
) -> tuple[float, float]:
    """Effective total drift U and effective total variance V."""
    pi = np.asarray(pi, dtype=float)
    a = np.asarray(a, dtype=float)
    if profile.regime == REGIME_LAMPERTI:
        u = 2.0 * float(pi @ profile.e_or_c)
        v = float(pi @ profile.var)
        return u, v
    if profile.regime != REGIME_GENERALIZED:
        raise ValueError("U and V are defined for critical-regime profiles only")
    u = float(pi @ (2.0 * profile.e_or_c + 2.0 * (profile.gamma @ a)))
    v = float(pi @ (profile.var + 2.0 * (profile.cross @ a)))
    return u, v


def moment_threshold(u: float, v: float, p: Optional[float] = None) -> float:
    """Critical moment order theta* = (V - U) / (2 V) for passage times.

    Moments E[tau^s] exist for s < min(theta*, p/2) and fail to exist for
    s > theta*; the p/2 cap comes from the increment moment bound and is the
    caller's to apply (the raw threshold is returned).
    """
    if v <= 0:
        raise DegenerateVarianceError(f"V = {v} is not positive")
    theta = (v - u) / (2.0 * v)
    if p is not None and p <= 2:
        raise ValueError("the moment machinery needs p > 2")
    return theta


def classify(
    profile: DriftProfile,
    p: Optional[float] = None,
    deadband: float = DEFAULT_DEADBAND,
) -> ClassifierReport:
    """Full recurrence classification of a drift profile.

    Constant regime: the sign of sum_i d_i pi_i decides (transient when
    positive, positive recurrent when negative); no moment threshold is
    reported there.  When the average drift vanishes, the constant regime
    carries too little information and the caller must supply a
    generalized-Lamperti profile.

    Critical regimes: verdict from the signs of U - V, U + V and |U| - V with
    a dead-band of ``deadband * (|U| + |V| + 1)``; inside the dead-band of
    |U| = V the verdict is the boundary one, which is only valid under the
    sharpened error-rate assumptions (flagged on the report).
    """
    pi = stationary_distribution(profile.q_limit)

    if profile.regime == REGIME_CONSTANT:
        mean_drift = float(pi @ profile.d)
        scale = deadband * (abs(mean_drift) + 1.0)
        if abs(mean_drift) <= scale:
            raise NotCriticalError(
                "average drift vanishes: the constant-drift criterion is silent; "
                "supply a generalized-Lamperti profile"
            )
        verdict = TRANSIENT if mean_drift > 0 else POSITIVE_RECURRENT
        zeros = np.zeros(profile.n_lines)
        return ClassifierReport(
            pi=pi,
            a=zeros,
            transformed_c=zeros,
            transformed_s2=zeros,
            U=float("nan"),
            V=float("nan"),
            verdict=verdict,
            theta_star=None,
            theta_cap=None if p is None else p / 2.0,
        )

    if profile.regime == REGIME_LAMPERTI:
        a = np.zeros(profile.n_lines)
    else:
        a = solve_shifts(profile.q_limit, profile.d, pi)
    c, s2 = transform_to_lamperti(profile, a)
    u, v = compute_UV(pi, a, profile)
    band = deadband * (abs(u) + abs(v) + 1.0)
    if v <= band:
        raise DegenerateVarianceError(f"effective variance V = {v} is degenerate")

    boundary = abs(abs(u) - v) <= band
    if boundary:
        verdict = BOUNDARY_NULL_RECURRENT
    elif u - v > band:
        verdict = TRANSIENT
    elif u + v < -band:
        verdict = POSITIVE_RECURRENT
    else:
        verdict = NULL_RECURRENT

    theta_raw = moment_threshold(u, v)
    cap = None if p is None else p / 2.0
    theta = max(theta_raw, 0.0)
    if cap is not None:
        theta = min(theta, cap)
    return ClassifierReport(
        pi=pi,
        a=a,
        transformed_c=c,
        transformed_s2=s2,
        U=u,
        V=v,
        verdict=verdict,
        theta_star=theta,
        boundary_caveat=boundary,
        theta_cap=cap,
    )
