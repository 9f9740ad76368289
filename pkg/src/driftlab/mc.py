"""Seeded Monte Carlo simulation of half-strip chains.

Two execution lanes share one result format: a generic per-path loop that
works for any finite-support kernel (optionally fanned out over worker
threads), and a vectorised lane used automatically when the model provides a
``step_batch`` method.  Both are deterministic functions of (model, plan);
per-path streams in the generic lane come from spawning the plan seed, so the
merge order never depends on scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError
from .halfstrip import HalfStripModel

COMPACT_EVERY = 256  # steps between dead-path compactions in the batch lane


@dataclass(frozen=True)
class SimulationPlan:
    seed: int
    n_paths: int
    n_steps: int
    start: tuple[float, object] = (1.0, None)  # None = first line
    tau_level: float = 0.0
    absorb_at_tau: bool = False
    checkpoint_ns: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("need at least one path and one step")
        if self.tau_level < 0:
            raise ValueError("tau_level must be nonnegative")
        if any(n < 1 or n > self.n_steps for n in self.checkpoint_ns):
            raise ValueError("checkpoints must lie in [1, n_steps]")
        object.__setattr__(self, "checkpoint_ns", tuple(sorted(self.checkpoint_ns)))


@dataclass
class EnsembleResult:
    """Summary of one simulated ensemble, merged in path order."""

    plan: SimulationPlan
    lines: tuple
    final_x: np.ndarray
    final_line: np.ndarray  # line indices
    tau: np.ndarray  # passage time, -1 when censored
    censored: np.ndarray  # bool per path
    occupation: np.ndarray  # (n_paths, n_lines) time fractions
    max_x: np.ndarray
    checkpoint_x: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def uncensored_tau(self) -> np.ndarray:
        return self.tau[~self.censored]


def derive_seed(seed: int, index: int) -> int:
    """Documented split rule: child streams of a root seed are indexed
    deterministically; pooling ensembles run under different children is
    statistically equivalent to one larger ensemble."""
    return int(np.random.SeedSequence(entropy=(seed, index)).generate_state(1)[0])


def simulate(
    model: HalfStripModel, plan: SimulationPlan, threads: int = 1
) -> EnsembleResult:
    """Run the ensemble described by the plan.

    Paths start at plan.start, run for at most n_steps, record the passage
    time tau = min{n >= 0 : X_n <= tau_level} (censored if the cap is hit
    first) and, when absorb_at_tau is set, freeze at the passage state.
    """
    x0, lab = plan.start
    if lab is None:
        lab = model.lines[0]
    i0 = model.line_index(lab)
    if x0 < 0:
        raise DomainError("start must lie in R+")
    if hasattr(model, "step_batch"):
        return _simulate_batch(model, plan, float(x0), i0)
    return _simulate_generic(model, plan, float(x0), i0, threads)


def _simulate_batch(
    model: HalfStripModel, plan: SimulationPlan, x0: float, i0: int
) -> EnsembleResult:
    rng = np.random.default_rng(np.random.SeedSequence(plan.seed))
    n_paths, n_lines = plan.n_paths, model.n_lines

    x_cur = np.full(n_paths, x0)
    li_cur = np.full(n_paths, i0, dtype=np.int64)
    tau = np.full(n_paths, -1, dtype=np.int64)
    if x0 <= plan.tau_level:
        tau[:] = 0
    occ = np.zeros((n_paths, n_lines), dtype=np.int64)
    steps_counted = np.zeros(n_paths, dtype=np.int64)
    max_x = x_cur.copy()
    checkpoints: dict[int, np.ndarray] = {}

    frozen_now = plan.absorb_at_tau and x0 <= plan.tau_level
    active_idx = (
        np.array([], dtype=np.int64) if frozen_now else np.arange(n_paths, dtype=np.int64)
    )
    x_act = x_cur[active_idx].copy()
    li_act = li_cur[active_idx].copy()
    frozen_act = np.zeros(active_idx.size, dtype=bool)

    for t in range(1, plan.n_steps + 1):
        if active_idx.size:
            x_act, li_act = model.step_batch(x_act, li_act, rng)
            x_cur[active_idx] = x_act
            li_cur[active_idx] = li_act
            for k in range(n_lines):
                sel = active_idx[li_act == k]
                occ[sel, k] += 1
            steps_counted[active_idx] += 1
            np.maximum.at(max_x, active_idx, x_act)
            hit = (x_act <= plan.tau_level) & (tau[active_idx] < 0)
            if hit.any():
                tau[active_idx[hit]] = t
                if plan.absorb_at_tau:
                    frozen_act |= hit
        if t in plan.checkpoint_ns:
            checkpoints[t] = x_cur.copy()
        if frozen_act.any() and (t % COMPACT_EVERY == 0 or frozen_act.all()):
            keep = ~frozen_act
            active_idx = active_idx[keep]
            x_act = x_act[keep]
            li_act = li_act[keep]
            frozen_act = np.zeros(active_idx.size, dtype=bool)
        if active_idx.size == 0 and plan.absorb_at_tau:
            for n in plan.checkpoint_ns:
                if n > t:
                    checkpoints[n] = x_cur.copy()
            break

    occupation = _occupation_fractions(occ, steps_counted, i0)
    return EnsembleResult(
        plan=plan,
        lines=model.lines,
        final_x=x_cur,
        final_line=li_cur,
        tau=tau,
        censored=tau < 0,
        occupation=occupation,
        max_x=max_x,
        checkpoint_x=checkpoints,
    )


def _occupation_fractions(
    occ: np.ndarray, steps: np.ndarray, i0: int
) -> np.ndarray:
    frac = np.zeros(occ.shape, dtype=float)
    moved = steps > 0
    frac[moved] = occ[moved] / steps[moved, None]
    frac[~moved, i0] = 1.0  # a path absorbed at time zero sat on its start line
    return frac


def _simulate_generic(
    model: HalfStripModel, plan: SimulationPlan, x0: float, i0: int, threads: int
) -> EnsembleResult:
    children = np.random.SeedSequence(plan.seed).spawn(plan.n_paths)
    cache: dict[tuple[float, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def run_path(path: int):
        rng = np.random.default_rng(children[path])
        x, idx = x0, i0
        tau = 0 if x0 <= plan.tau_level else -1
        occ = np.zeros(model.n_lines, dtype=np.int64)
        steps = 0
        mx = x
        cps = {}
        frozen = plan.absorb_at_tau and tau == 0
        for t in range(1, plan.n_steps + 1):
            if not frozen:
                key = (x, idx)
                entry = cache.get(key)
                if entry is None:
                    try:
                        jumps = model.jumps(x, model.lines[idx])
                    except DomainError as exc:
                        raise DomainError(
                            f"kernel failed at path {path}, step {t}, "
                            f"state ({x}, {model.lines[idx]!r}): {exc}"
                        ) from exc
                    ys = np.array([y for y, _, _ in jumps])
                    jidx = np.array(
                        [model.line_index(j) for _, j, _ in jumps], dtype=np.int64
                    )
                    cum = np.cumsum([p for _, _, p in jumps])
                    cum[-1] = 1.0
                    entry = (ys, jidx, cum)
                    cache[key] = entry
                ys, jidx, cum = entry
                k = int(np.searchsorted(cum, rng.random(), side="right"))
                k = min(k, len(ys) - 1)
                x, idx = float(ys[k]), int(jidx[k])
                occ[idx] += 1
                steps += 1
                mx = max(mx, x)
                if tau < 0 and x <= plan.tau_level:
                    tau = t
                    if plan.absorb_at_tau:
                        frozen = True
            if t in plan.checkpoint_ns:
                cps[t] = x
        return x, idx, tau, occ, steps, mx, cps

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_path, range(plan.n_paths)))
    else:
        results = [run_path(p) for p in range(plan.n_paths)]

    final_x = np.array([r[0] for r in results])
    final_line = np.array([r[1] for r in results], dtype=np.int64)
    tau = np.array([r[2] for r in results], dtype=np.int64)
    occ = np.stack([r[3] for r in results])
    steps = np.array([r[4] for r in results], dtype=np.int64)
    max_x = np.array([r[5] for r in results])
    checkpoints = {
        n: np.array([r[6][n] for r in results]) for n in plan.checkpoint_ns
    }
    return EnsembleResult(
        plan=plan,
        lines=model.lines,
        final_x=final_x,
        final_line=final_line,
        tau=tau,
        censored=tau < 0,
        occupation=_occupation_fractions(occ, steps, i0),
        max_x=max_x,
        checkpoint_x=checkpoints,
    )


def occupation_fractions(result: EnsembleResult) -> np.ndarray:
    """Pooled per-line time fractions; for recurrent chains these estimate the
    stationary distribution up to Monte Carlo error."""
    if result.occupation.size == 0:
        raise InsufficientDataError("empty ensemble")
    return result.occupation.mean(axis=0)


@dataclass(frozen=True)
class TailIndexEstimate:
    theta_hat: float
    stderr: float
    n_tail: int
    light_tail: bool
    window: tuple[float, float]


def estimate_tail_index(
    tau_samples: Sequence[int],
    n_censored: int = 0,
    tail_fraction: float = 0.1,
    upper_quantile: float = 0.999,
    light_tail_bound: float = 3.0,
    min_samples: int = 1000,
) -> TailIndexEstimate:
    """Slope of the empirical survival function on log-log axes, sign-flipped.

    Uses the samples above the (1 - tail_fraction) quantile, trimming the very
    top order statistics (above upper_quantile) where the survival estimate is
    dominated by a handful of points.  Censored passage times contribute no
    sample values, but ``n_censored`` must be passed so the survival estimate
    counts them as exceedances; leaving them out bends the tail downward and
    inflates the index.  A slope steeper than light_tail_bound is reported as
    a light tail rather than a power law.
    """
    tau = np.asarray(tau_samples, dtype=float)
    tau = tau[tau > 0]
    n = tau.size
    if n < min_samples:
        raise InsufficientDataError(
            f"need at least {min_samples} uncensored samples, got {n}"
        )
    tau.sort()
    total = n + int(n_censored)
    lo = float(np.quantile(tau, 1.0 - tail_fraction))
    hi = float(np.quantile(tau, upper_quantile))
    ts, counts = np.unique(tau, return_counts=True)
    exceed = total - np.cumsum(counts)  # censored samples exceed every t
    sel = (ts >= lo) & (ts <= hi) & (exceed > 0)
    if np.count_nonzero(sel) < 5:
        raise InsufficientDataError("too few distinct values in the tail window")
    log_t = np.log(ts[sel])
    log_s = np.log(exceed[sel] / total)
    design = np.column_stack([np.ones_like(log_t), log_t])
    coef, res_ss, *_ = np.linalg.lstsq(design, log_s, rcond=None)
    slope = coef[1]
    dof = log_t.size - 2
    if dof > 0 and res_ss.size:
        sigma2 = float(res_ss[0]) / dof
        cov = sigma2 * np.linalg.inv(design.T @ design)
        stderr = float(np.sqrt(cov[1, 1]))
    else:
        stderr = float("nan")
    theta = -float(slope)
    return TailIndexEstimate(
        theta_hat=theta,
        stderr=stderr,
        n_tail=int(np.count_nonzero(sel)),
        light_tail=theta > light_tail_bound,
        window=(lo, hi),
    )
