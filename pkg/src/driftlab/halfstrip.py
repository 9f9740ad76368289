"""Half-strip Markov chain models.

A model lives on a locally finite subset of R+ x S where S is a finite set of
"lines".  Each state (x, i) carries a finite jump distribution; everything the
classifier needs (mean drifts, variances, line-switching probabilities) is an
exact expectation over that finite support.

Conventions used throughout:

* a kernel is a callable ``(x, line_label) -> sequence of (y, line_label, p)``
  with nonnegative weights summing to one,
* per-line quantities are indexed by the position of the label in
  ``model.lines`` (the first line is the gauge line for shift vectors).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, IllPosedProfileError, RegimeMismatchError

ROW_SUM_TOL = 1e-12
GAMMA_ROW_TOL = 1e-10
CROSS_SUM_TOL = 1e-10

REGIME_CONSTANT = "constant"
REGIME_LAMPERTI = "lamperti"
REGIME_GENERALIZED = "generalized_lamperti"
REGIMES = (REGIME_CONSTANT, REGIME_LAMPERTI, REGIME_GENERALIZED)

Jump = tuple[float, object, float]  # (y, line label, probability)
Kernel = Callable[[float, object], Sequence[Jump]]


@dataclass(frozen=True)
class RegularityParams:
    """Moment-order metadata: order p > 1, bound on the p-th increment moment,
    and optional polynomial error rates, all in (0, 1).  Carried for
    documentation; no computation consumes them."""

    p: float = 4.0
    c_p: float = float("inf")
    deltas: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if not self.p > 1:
            raise ValueError(f"moment order p must exceed 1, got {self.p}")
        if self.deltas is not None:
            for delta in self.deltas:
                if not 0.0 < delta < 1.0:
                    raise ValueError(f"rates must lie in (0,1), got {delta}")


@dataclass(frozen=True)
class HalfStripModel:
    """A Markov chain on R+ x S given by a per-state finite jump distribution."""

    lines: tuple
    kernel: Kernel
    regularity: RegularityParams = field(default_factory=RegularityParams)

    def __post_init__(self) -> None:
        if len(self.lines) < 1:
            raise ValueError("need at least one line")
        if len(set(self.lines)) != len(self.lines):
            raise ValueError("line labels must be distinct")

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    def line_index(self, label) -> int:
        try:
            return self.lines.index(label)
        except ValueError:
            raise DomainError(f"unknown line label {label!r}") from None

    def jumps(self, x: float, i) -> list[Jump]:
        """Validated jump distribution at state (x, i)."""
        if x < 0:
            raise DomainError(f"state x={x} outside R+")
        self.line_index(i)
        jumps = list(self.kernel(x, i))
        total = math.fsum(p for _, _, p in jumps)
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise DomainError(f"kernel weights at ({x}, {i!r}) sum to {total}")
        for y, j, p in jumps:
            if p < 0:
                raise DomainError(f"negative weight {p} at ({x}, {i!r})")
            if y < 0:
                raise DomainError(f"jump to y={y} < 0 from ({x}, {i!r})")
            if j not in self.lines:
                raise DomainError(f"jump to unknown line {j!r} from ({x}, {i!r})")
        return jumps


def validate_states(model: HalfStripModel, states: Sequence[tuple[float, object]]) -> None:
    """Assert kernel invariants on the sampled states (local finiteness can
    only be checked pointwise on finite-support kernels)."""
    for x, i in states:
        jumps = model.jumps(x, i)
        if len(jumps) != len({(y, j) for y, j, _ in jumps}):
            raise DomainError(f"duplicate support points at ({x}, {i!r})")


@dataclass(frozen=True)
class Moments:
    """Exact one-step increment moments at a single state."""

    mu: float
    sigma2: float
    mu_row: np.ndarray  # E[increment * 1{next line = j}] per line j
    q_row: np.ndarray  # probability of landing on line j


def empirical_moments(model: HalfStripModel, x: float, i) -> Moments:
    """Exact mean drift, second moment, cross moments and line-switch row at (x, i)."""
    jumps = model.jumps(x, i)
    n = model.n_lines
    mu_row = np.zeros(n)
    q_row = np.zeros(n)
    sigma2 = 0.0
    for y, j, p in jumps:
        dx = y - x
        jdx = model.line_index(j)
        mu_row[jdx] += p * dx
        q_row[jdx] += p
        sigma2 += p * dx * dx
    return Moments(mu=float(mu_row.sum()), sigma2=sigma2, mu_row=mu_row, q_row=q_row)


# ---------------------------------------------------------------------------
# Drift profiles


@dataclass(frozen=True)
class DriftProfile:
    """Asymptotic constants of a model in one of the three drift regimes.

    ``d`` holds the constant drifts, ``e_or_c`` the 1/x coefficients (e_i in
    the generalized regime, c_i in the Lamperti regime), ``var`` the limiting
    variances, ``cross`` the limiting cross moments and ``gamma`` the 1/x
    corrections of the line-switch matrix.  Fields that a regime does not use
    are None.
    """

    regime: str
    q_limit: np.ndarray
    d: Optional[np.ndarray] = None
    e_or_c: Optional[np.ndarray] = None
    var: Optional[np.ndarray] = None
    cross: Optional[np.ndarray] = None
    gamma: Optional[np.ndarray] = None
    residuals: Optional[dict] = None  # regression diagnostics when fitted

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        q = np.asarray(self.q_limit, dtype=float)
        object.__setattr__(self, "q_limit", q)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("q_limit must be square")
        if np.any(q < -ROW_SUM_TOL):
            raise ValueError("q_limit has negative entries")
        if np.max(np.abs(q.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("q_limit rows must sum to 1")
        _require_irreducible(q)
        for name in ("d", "e_or_c", "var", "cross", "gamma"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.asarray(val, dtype=float))

        n = q.shape[0]
        if self.regime == REGIME_CONSTANT:
            if self.d is None or self.d.shape != (n,):
                raise ValueError("constant regime needs per-line d")
        elif self.regime == REGIME_LAMPERTI:
            if self.e_or_c is None or self.var is None:
                raise ValueError("lamperti regime needs c and s^2")
            _require_some_variance(self.var)
        else:
            if any(v is None for v in (self.d, self.e_or_c, self.var, self.cross, self.gamma)):
                raise ValueError("generalized regime needs d, e, t^2, cross and gamma")
            _require_some_variance(self.var)
            if np.max(np.abs(self.gamma.sum(axis=1))) > GAMMA_ROW_TOL:
                raise ValueError("gamma rows must sum to 0")
            if np.max(np.abs(self.cross.sum(axis=1) - self.d)) > CROSS_SUM_TOL:
                raise ValueError("d_i must equal the row sums of the cross matrix")

    @property
    def n_lines(self) -> int:
        return self.q_limit.shape[0]


def _require_some_variance(var: np.ndarray) -> None:
    if np.any(var < 0):
        raise ValueError("variances must be nonnegative")
    if not np.any(var > 0):
        raise ValueError("at least one variance must be positive")


def _require_irreducible(q: np.ndarray) -> None:
    from scipy.sparse.csgraph import connected_components

    n_comp, labels = connected_components(q > 0, directed=True, connection="strong")
    if n_comp > 1:
        classes = [list(np.flatnonzero(labels == k)) for k in range(n_comp)]
        raise ValueError(f"q_limit is reducible; communicating classes {classes}")


def fit_drift_profile(
    model: HalfStripModel,
    regime: str,
    probe_xs: Sequence[float],
    residual_tol: float = 1e-6,
    constant_tol: float = 1e-8,
) -> DriftProfile:
    """Extract asymptotic constants by regressing exact one-step moments at
    large probe points against the basis {1, 1/x}.

    The probe points must be sorted ascending, at least three of them, with
    minimum at least 100.  If the residual of any regression exceeds
    ``residual_tol`` the requested regime does not describe the model and a
    RegimeMismatchError is raised rather than silently accepting the fit.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    xs = np.asarray(list(probe_xs), dtype=float)
    if xs.size < 3:
        raise ValueError("need at least three probe points")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("probe points must be sorted ascending")
    if xs[0] < 100:
        raise ValueError("probe points must be at least 100")

    n = model.n_lines
    mu = np.empty((xs.size, n))
    sig2 = np.empty((xs.size, n))
    q = np.empty((xs.size, n, n))
    muij = np.empty((xs.size, n, n))
    for k, x in enumerate(xs):
        for idx, label in enumerate(model.lines):
            m = empirical_moments(model, float(x), label)
            mu[k, idx] = m.mu
            sig2[k, idx] = m.sigma2
            q[k, idx] = m.q_row
            muij[k, idx] = m.mu_row

    design = np.column_stack([np.ones_like(xs), 1.0 / xs])

    def fit(series: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        flat = series.reshape(xs.size, -1)
        coef, *_ = np.linalg.lstsq(design, flat, rcond=None)
        resid = float(np.max(np.abs(flat - design @ coef))) if flat.size else 0.0
        shape = series.shape[1:]
        return coef[0].reshape(shape), coef[1].reshape(shape), resid

    mu_const, mu_slope, mu_res = fit(mu)
    sig_const, _, sig_res = fit(sig2)
    q_const, q_slope, q_res = fit(q)
    cross_const, _, cross_res = fit(muij)

    residuals = {"mu": mu_res, "sigma2": sig_res, "q": q_res, "mu_cross": cross_res}
    worst = max(residuals.values())
    if worst > residual_tol:
        raise RegimeMismatchError(
            f"moment regressions deviate from the {{1, 1/x}} basis by {worst:.3e} "
            f"(tolerance {residual_tol:.1e}); the model does not follow a clean "
            f"{regime} form at the probe points"
        )

    q_const = _project_stochastic(q_const)
    if regime == REGIME_CONSTANT:
        return DriftProfile(regime=regime, q_limit=q_const, d=mu_const, residuals=residuals)
    if regime == REGIME_LAMPERTI:
        if np.max(np.abs(mu_const)) > constant_tol:
            raise RegimeMismatchError(
                f"constant drift component {np.max(np.abs(mu_const)):.3e} present; "
                "not a Lamperti model (use the constant or generalized regime)"
            )
        return DriftProfile(
            regime=regime,
            q_limit=q_const,
            e_or_c=mu_slope,
            var=sig_const,
            residuals=residuals,
        )
    # remove the ~1e-14 regression noise that would trip the exact row-sum
    # identities (gamma rows sum to 0, cross rows sum to d)
    gamma = q_slope - q_slope.sum(axis=1, keepdims=True) / n
    cross = cross_const + (mu_const - cross_const.sum(axis=1))[:, None] / n
    return DriftProfile(
        regime=regime,
        q_limit=q_const,
        d=mu_const,
        e_or_c=mu_slope,
        var=sig_const,
        cross=cross,
        gamma=gamma,
        residuals=residuals,
    )


def _project_stochastic(q: np.ndarray) -> np.ndarray:
    """Clean tiny regression noise so rows sum to exactly one."""
    q = np.clip(q, 0.0, None)
    return q / q.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Lyapunov functions

LYAPUNOV_KINDS = ("f_nu", "g", "h_nu")


@dataclass(frozen=True)
class LyapunovSpec:
    """Exponent and per-line offsets for the diagnostic Lyapunov functions.

    The cutoff x0 below which the power functions are frozen depends on the
    kind: 1 + sqrt(|nu| max|b|) for f_nu, 1 + 2 nu max|b| for h_nu.  An
    explicit x0 must match that formula.
    """

    nu: float
    b: tuple[float, ...]
    x0: Optional[float] = None

    def cutoff(self, kind: str) -> float:
        bmax = max(abs(v) for v in self.b)
        if kind == "f_nu":
            expected = 1.0 + math.sqrt(abs(self.nu) * bmax)
        elif kind == "h_nu":
            expected = 1.0 + 2.0 * self.nu * bmax
        else:
            raise ValueError(f"kind {kind!r} has no cutoff")
        if self.x0 is not None:
            if abs(self.x0 - expected) > 1e-9:
                raise ValueError(
                    f"x0={self.x0} inconsistent with the {kind} cutoff {expected}"
                )
            return self.x0
        return expected


def lyapunov_value(spec: LyapunovSpec, kind: str, x: float, i: int) -> float:
    """Evaluate one of the diagnostic functions at (x, line index i).

    g(x,i) = x + b_i;  h_nu(x,i) = x^-nu - nu b_i x^-nu-1 frozen below x0;
    f_nu(x,i) = x^nu + (nu/2) b_i x^nu-2 frozen below x0.
    """
    if kind not in LYAPUNOV_KINDS:
        raise ValueError(f"unknown Lyapunov kind {kind!r}")
    b_i = spec.b[i]
    nu = spec.nu
    if kind == "g":
        return x + b_i
    x_eff = max(x, spec.cutoff(kind))
    if kind == "h_nu":
        return x_eff ** (-nu) - nu * b_i * x_eff ** (-nu - 1)
    return x_eff**nu + 0.5 * nu * b_i * x_eff ** (nu - 2)


def lyapunov_drift_check(
    model: HalfStripModel, spec: LyapunovSpec, x: float, i
) -> tuple[float, float]:
    """Compare the exact expected increment of f_nu with its leading term.

    Returns (empirical, predicted) where predicted is
    (nu/2) x^(nu-2) (2 c_i + (nu-1) s_i^2 + sum_j (b_j - b_i) q_ij) with the
    local Lamperti constants c_i = x mu_i(x), s_i^2 = sigma_i^2(x) read off
    the kernel at x.  The caller judges how close is close enough.
    """
    idx = model.line_index(i)
    jumps = model.jumps(x, i)
    f_here = lyapunov_value(spec, "f_nu", x, idx)
    empirical = math.fsum(
        p * (lyapunov_value(spec, "f_nu", y, model.line_index(j)) - f_here)
        for y, j, p in jumps
    )
    m = empirical_moments(model, x, i)
    c_loc = x * m.mu
    switch = sum((spec.b[j] - spec.b[idx]) * m.q_row[j] for j in range(model.n_lines))
    nu = spec.nu
    predicted = 0.5 * nu * x ** (nu - 2) * (2 * c_loc + (nu - 1) * m.sigma2 + switch)
    return empirical, predicted


# ---------------------------------------------------------------------------
# Model families


class CorrelatedRWModel(HalfStripModel):
    """Correlated (persistent) random walk on Z+ remembering its last one or
    two steps.

    With memory one the lines are the previous step directions (-1, +1); the
    walk keeps its direction with probability q + i c_i / (2x) and flips
    otherwise, stepping by the chosen direction.  With memory two the lines
    are ordered pairs (direction before last, last direction) and the
    continuation probability uses the last direction's constant.  At x = 0 the
    walk moves right.  ``perturbation(x, i)``, when given, is added to the
    continuation probability (it should vanish faster than 1/x, and must
    accept numpy arrays for the vectorised stepping lane).
    """

    def __init__(
        self,
        q: float,
        c_plus: float = 0.0,
        c_minus: float = 0.0,
        memory: int = 1,
        perturbation: Optional[Callable[[np.ndarray, int], np.ndarray]] = None,
        regularity: Optional[RegularityParams] = None,
    ):
        if not 0.0 < q < 1.0:
            raise ValueError(f"q must lie in (0,1), got {q}")
        if memory not in (1, 2):
            raise ValueError("memory must be 1 or 2")
        if memory == 1:
            lines: tuple = (-1, +1)
            sign = np.array([-1.0, +1.0])
        else:
            lines = ((-1, -1), (-1, +1), (+1, -1), (+1, +1))
            sign = np.array([lab[1] for lab in lines], dtype=float)
        c_by_dir = {-1: c_minus, +1: c_plus}
        line_c = np.array([c_by_dir[int(s)] for s in sign])
        # next line index after stepping in direction w from line k
        next_line = np.empty((len(lines), 2), dtype=np.int64)
        for k, lab in enumerate(lines):
            for w_idx, w in enumerate((-1, +1)):
                nxt = w if memory == 1 else (lab[1], w)
                next_line[k, w_idx] = lines.index(nxt)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "c_plus", c_plus)
        object.__setattr__(self, "c_minus", c_minus)
        object.__setattr__(self, "memory", memory)
        object.__setattr__(self, "perturbation", perturbation)
        object.__setattr__(self, "_sign", sign)
        object.__setattr__(self, "_line_c", line_c)
        object.__setattr__(self, "_next_line", next_line)
        super().__init__(
            lines=lines,
            kernel=self._kernel,
            regularity=regularity or RegularityParams(p=4.0, c_p=1.0),
        )

    def _continue_prob(self, x, idx):
        p = self.q + self._sign[idx] * self._line_c[idx] / (2.0 * np.maximum(x, 1e-300))
        if self.perturbation is not None:
            p = p + self.perturbation(x, idx)
        return np.clip(p, 0.0, 1.0)

    def _kernel(self, x: float, i) -> list[Jump]:
        idx = self.lines.index(i)
        if x <= 0.0:
            j = self.lines[self._next_line[idx, 1]]
            return [(1.0, j, 1.0)]
        p_cont = float(self._continue_prob(np.asarray(x, dtype=float), idx))
        s = int(self._sign[idx])
        cont_line = self.lines[self._next_line[idx, (s + 1) // 2]]
        flip_line = self.lines[self._next_line[idx, (1 - s) // 2]]
        return [(x + s, cont_line, p_cont), (x - s, flip_line, 1.0 - p_cont)]

    def step_batch(
        self, x: np.ndarray, line_idx: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        """Advance many walkers one step at once (vectorised engine lane)."""
        p_cont = self._continue_prob(x, line_idx)
        cont = rng.random(x.shape) < p_cont
        sign = self._sign[line_idx]
        w = np.where(cont, sign, -sign)
        w = np.where(x <= 0.0, 1.0, w)
        new_x = np.where(x <= 0.0, 1.0, x + w)
        w_idx = ((w + 1) // 2).astype(np.int64)
        new_line = self._next_line[line_idx, w_idx]
        return new_x, new_line


def correlated_rw_profile(q: float, c_plus: float, c_minus: float) -> DriftProfile:
    """Exact generalized-Lamperti constants of the memory-one correlated walk.

    Lines ordered (-1, +1): constant drifts +/-(2q-1), 1/x coefficients c_i,
    line-switch limit [[q, 1-q], [1-q, q]] with corrections j c_i / 2, cross
    moments j q / j (1-q) on/off the diagonal and unit variances.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0,1), got {q}")
    c = {-1: c_minus, +1: c_plus}
    lines = (-1, +1)
    d = np.array([i * (2 * q - 1) for i in lines])
    e = np.array([c[i] for i in lines])
    q_limit = np.array([[q if j == i else 1 - q for j in lines] for i in lines])
    gamma = np.array([[j * c[i] / 2 for j in lines] for i in lines])
    cross = np.array([[j * (q if j == i else 1 - q) for j in lines] for i in lines])
    var = np.ones(2)
    return DriftProfile(
        regime=REGIME_GENERALIZED,
        q_limit=q_limit,
        d=d,
        e_or_c=e,
        var=var,
        cross=cross,
        gamma=gamma,
    )


def tabular_model(
    lines: Sequence,
    table: dict[tuple[float, object], Sequence[Jump]],
    regularity: Optional[RegularityParams] = None,
) -> HalfStripModel:
    """Model from an explicit per-state support table; states outside the
    table are a domain error."""
    table = {key: list(jumps) for key, jumps in table.items()}

    def kernel(x: float, i) -> Sequence[Jump]:
        try:
            return table[(x, i)]
        except KeyError:
            raise DomainError(f"state ({x}, {i!r}) outside the tabulated domain") from None

    return HalfStripModel(
        lines=tuple(lines), kernel=kernel, regularity=regularity or RegularityParams()
    )


def lamperti_model(
    lines: Sequence,
    c: Sequence[float],
    s2: Sequence[float],
    q_limit: np.ndarray,
    x_min: float = 50.0,
) -> HalfStripModel:
    """Kernel whose drift is exactly c_i / x and variance exactly s_i^2.

    Conditional on switching to line j (probability q_ij, no x-dependence) the
    increment is c_i/x +/- r with r chosen to hit the exact variance.  Only
    valid for x >= x_min, which keeps r^2 positive and jumps inside R+.
    """
    c = np.asarray(c, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    q_limit = np.asarray(q_limit, dtype=float)
    _require_some_variance(s2)
    for i in range(len(lines)):
        if s2[i] - (c[i] / x_min) ** 2 <= 0:
            raise IllPosedProfileError(
                f"variance {s2[i]} too small for drift {c[i]} at x_min={x_min}"
            )

    labels = tuple(lines)

    def kernel(x: float, i) -> list[Jump]:
        if x < x_min:
            raise DomainError(f"Lamperti kernel defined only for x >= {x_min}")
        idx = labels.index(i)
        m = c[idx] / x
        r = math.sqrt(s2[idx] - m * m)
        out = []
        for jdx, lab in enumerate(labels):
            if q_limit[idx, jdx] <= 0:
                continue
            half = q_limit[idx, jdx] / 2.0
            out.append((x + m + r, lab, half))
            out.append((x + m - r, lab, half))
        return out

    return HalfStripModel(lines=labels, kernel=kernel)


def profile_kernel_model(profile: DriftProfile, x_min: float = 200.0,
                         curvature: float = 0.0) -> HalfStripModel:
    """Kernel realising a generalized-Lamperti profile with zero error terms.

    At (x, i) the walk lands on line j with probability q_ij + gamma_ij / x
    and, conditionally, jumps by m_ij(x) +/- r_i(x) where m_ij(x) is chosen so
    the cross moments are exactly d_ij + e_i q_ij / x and r_i(x) so the second
    moment is exactly t_i^2.  Round-tripping through fit_drift_profile is then
    exact up to floating point.  A nonzero ``curvature`` adds an extra
    curvature/x^2 term to each drift, emulating the o(.) errors the asymptotic
    assumptions permit.
    """
    if profile.regime != REGIME_GENERALIZED:
        raise ValueError("profile must be in the generalized regime")
    n = profile.n_lines
    q, gam = profile.q_limit, profile.gamma
    d_ij, e, t2 = profile.cross, profile.e_or_c, profile.var

    for i in range(n):
        for j in range(n):
            if q[i, j] <= 0 and (gam[i, j] != 0 or d_ij[i, j] != 0):
                raise IllPosedProfileError(
                    f"branch ({i},{j}) has zero limit probability but nonzero corrections"
                )

    def branch_stats(x: float, i: int) -> tuple[np.ndarray, np.ndarray, float]:
        qx = q[i] + gam[i] / x
        if np.any(qx < 0) or abs(qx.sum() - 1.0) > ROW_SUM_TOL:
            raise DomainError(f"switch probabilities invalid at x={x}, line {i}")
        target = d_ij[i] + (e[i] * q[i] + curvature / x) / x
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(qx > 0, target / np.where(qx > 0, qx, 1.0), 0.0)
        r2 = t2[i] - float(np.sum(qx * m * m))
        if r2 <= 0:
            raise IllPosedProfileError(
                f"variance {t2[i]} cannot absorb the conditional means at x={x}, line {i}"
            )
        return qx, m, math.sqrt(r2)

    for i in range(n):
        branch_stats(x_min, i)  # fail fast if ill-posed at the domain edge

    labels = tuple(range(n))

    def kernel(x: float, i) -> list[Jump]:
        if x < x_min:
            raise DomainError(f"synthetic kernel defined only for x >= {x_min}")
        qx, m, r = branch_stats(x, int(i))
        out = []
        for j in labels:
            if qx[j] <= 0:
                continue
            out.append((x + m[j] + r, j, qx[j] / 2.0))
            out.append((x + m[j] - r, j, qx[j] / 2.0))
        return out

    return HalfStripModel(lines=labels, kernel=kernel)
