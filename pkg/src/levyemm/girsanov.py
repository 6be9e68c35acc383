"""Density processes, Q-characteristics and the compensator criterion.

The measure change only touches the jump part, so every density process
here is a purely discontinuous stochastic exponential: a product of
per-jump factors alpha(T_n-, Z_n) times exp of the compensator drift
-int int (alpha - 1) dF ds (identically zero for the mass-preserving
tail kernel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .emm_construct import (
    GirsanovKernelH1,
    GirsanovKernelH2,
    _reweight_region,
)
from .errors import (
    DomainError,
    DominanceViolated,
    NonIntegrable,
    NonPositiveAlpha,
    UnsupportedModel,
    ZetaOutOfRange,
)
from .kernel import Kernel
from .levy_model import (
    DensityMeasure,
    DiscreteMeasure,
    Interval,
    LevyTriplet,
    levy_integrate,
)
from .path_sim import (
    LatticePath,
    MovingAveragePath,
    PathSimulator,
    SimConfig,
    moving_average,
    y_at,
)


# ---------------------------------------------------------------------------
# stochastic exponential
# ---------------------------------------------------------------------------


def stoch_exp(times, M, jump_times, jump_sizes, qv_cont=None) -> np.ndarray:
    """E(M)_t = exp(M_t - M_0 - qv/2) prod_{s<=t} (1 + dM_s) e^{-dM_s}.

    M is the semimartingale on the grid (jumps already included in its
    values); qv_cont is <M^c> on the grid, zero if omitted. After a jump
    with dM = -1 the exponential is absorbed at 0; dM < -1 flips sign.
    """
    times = np.asarray(times, dtype=float)
    M = np.asarray(M, dtype=float)
    qv = np.zeros_like(M) if qv_cont is None else np.asarray(qv_cont, dtype=float)
    out = np.exp(M - M[0] - 0.5 * qv)
    if len(jump_times):
        jt = np.asarray(jump_times, dtype=float)
        jz = np.asarray(jump_sizes, dtype=float)
        safe = np.where(jz != -1.0, np.abs(1.0 + jz), 1.0)
        log_abs = np.where(jz != -1.0, np.log(safe) - jz, 0.0)
        sign = np.sign(1.0 + jz)
        # factors apply from the first grid time >= jump time onwards
        for t_n, la, sg, z in sorted(zip(jt, log_abs, sign, jz)):
            mask = times >= t_n
            if z == -1.0:
                out[mask] = 0.0
            else:
                out[mask] *= sg * math.exp(la)
    return out


# ---------------------------------------------------------------------------
# density processes
# ---------------------------------------------------------------------------


@dataclass
class DensityProcess:
    times: np.ndarray
    Z: np.ndarray
    jump_times: np.ndarray
    jump_factors: np.ndarray
    compensator_drift: np.ndarray  # accumulated -int int (alpha-1) dF ds

    @property
    def Z_T(self) -> float:
        return float(self.Z[-1])

    def log_identity_residual(self) -> float:
        """max_t |log Z_t - (sum log factors + compensator drift)|."""
        log_prod = np.zeros_like(self.times)
        for t_n, f in zip(self.jump_times, self.jump_factors):
            log_prod[self.times >= t_n] += math.log(f)
        return float(np.max(np.abs(np.log(self.Z) - log_prod - self.compensator_drift)))


def _h1_excess_rate(gk: GirsanovKernelH1, triplet: LevyTriplet, y: float) -> float:
    """int (alpha(y, x) - 1) F(dx); linear in the split parts of y + xi."""
    F = triplet.F
    d = y + gk.xi
    pos, neg = max(d, 0.0), max(-d, 0.0)
    m_pos = levy_integrate(F, lambda x: x, [Interval(gk.a, gk.b, True, True)])
    m_neg = levy_integrate(F, lambda x: x, [Interval(-gk.b, -gk.a, True, True)])
    return neg * m_pos / gk.sigma_plus_sq - pos * m_neg / gk.sigma_minus_sq


def density_process(
    gk,
    ma_path: MovingAveragePath,
    jumps: tuple[np.ndarray, np.ndarray],
    triplet: LevyTriplet,
    y_at_jumps: np.ndarray | None = None,
) -> DensityProcess:
    """Z on the grid of ma_path from the per-jump factors alpha(Y_{T_n-}, Z_n).

    jumps are the explicit (T_n, Z_n) in (0, T]. y_at_jumps supplies the
    predictable pre-jump drift values; defaults to grid interpolation of Y.
    """
    times = ma_path.times
    jt, jz = jumps
    if y_at_jumps is None:
        idx = np.clip(np.searchsorted(times, jt, side="left") - 1, 0, len(times) - 1)
        y_at_jumps = ma_path.Y[idx]
    factors = np.array(
        [float(np.asarray(gk.evaluate(y, z)).reshape(())) for y, z in zip(y_at_jumps, jz)]
    )
    if np.any(factors <= 0.0):
        raise NonPositiveAlpha("alpha factor <= 0 at a jump")

    if gk.kind == "h2":
        comp = np.zeros_like(times)
    else:
        # left-point integral of the excess intensity along the grid
        m_pos = levy_integrate(triplet.F, lambda x: x,
                               [Interval(gk.a, gk.b, True, True)])
        m_neg = levy_integrate(triplet.F, lambda x: x,
                               [Interval(-gk.b, -gk.a, True, True)])
        d = ma_path.Y + gk.xi
        rate = (np.maximum(-d, 0.0) * m_pos / gk.sigma_plus_sq
                - np.maximum(d, 0.0) * m_neg / gk.sigma_minus_sq)
        dt = np.diff(times)
        comp = -np.concatenate([[0.0], np.cumsum(rate[:-1] * dt)])

    log_z = comp.copy()
    for t_n, f in zip(jt, factors):
        log_z[times >= t_n] += math.log(f)
    return DensityProcess(times, np.exp(log_z), np.asarray(jt, dtype=float),
                          factors, comp)


# ---------------------------------------------------------------------------
# Q-characteristics
# ---------------------------------------------------------------------------


@dataclass
class QCharacteristics:
    c: float
    alpha: Callable  # Q Levy measure is alpha(x) F(dx)
    drift_t: float
    total_q_drift: float  # drift_t + int (x - h(x)) alpha(x) F(dx)


def q_characteristics(gk, triplet: LevyTriplet, y_t: float) -> QCharacteristics:
    alpha = lambda x: gk.evaluate(y_t, x)  # noqa: E731
    F, h = triplet.F, triplet.h
    region = _reweight_region(gk)
    corr = levy_integrate(F, lambda x: (alpha(x) - 1.0) * h(x), region)
    drift_t = triplet.b_h + y_t + corr
    big = levy_integrate(F, lambda x: (x - h(x)) * alpha(x), h.nonidentity_region())
    return QCharacteristics(triplet.c, alpha, drift_t, drift_t + big)


# ---------------------------------------------------------------------------
# the compensator criterion
# ---------------------------------------------------------------------------


def f_lm(x):
    """f(x) = (1+x) log(1+x) - x; nonnegative, convex, f(0) = 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= -1.0):
        raise DomainError("f_lm requires x > -1")
    out = (1.0 + arr) * np.log1p(arr) - arr
    return out if np.ndim(x) else float(out)


def lm_compensator(W, triplet: LevyTriplet, times, y_values,
                   window: tuple[float, float]) -> float:
    """A_t - A_s = int_s^t int f(W(u, x)) F(dx) du, left-point in u.

    W(u, x) must exceed -1 on the support of F; the inner integral is
    evaluated per grid cell with the cell's left y-value bound into W.
    """
    times = np.asarray(times, dtype=float)
    s, t = window
    total = 0.0
    for i in range(len(times) - 1):
        lo, hi = times[i], times[i + 1]
        if hi <= s or lo >= t:
            continue
        frac = (min(hi, t) - max(lo, s))
        u, y = times[i], y_values[i]
        inner = levy_integrate(
            triplet.F, lambda x: f_lm(W(u, y, x)),
            g_quadratic_near_zero=True,
        )
        if not math.isfinite(inner):
            raise NonIntegrable("inner f(W) integral diverges")
        total += inner * frac
    return total


def fit_envelope(h_vals: np.ndarray, y_grid: np.ndarray) -> tuple[float, float]:
    """gamma1, gamma2 with h(y) <= gamma1 y log(1+y) + gamma2 on the grid."""
    ylog = y_grid * np.log1p(y_grid)
    big = ylog >= 1.0
    if np.any(big):
        gamma1 = float(np.max(h_vals[big] / ylog[big]))
    else:
        gamma1 = 1.0
    gamma2 = float(max(0.0, np.max(h_vals - gamma1 * ylog)))
    return gamma1, gamma2


@dataclass
class LMReport:
    certified: bool
    condition_b: float
    gamma1: float
    gamma2: float
    mesh: float
    finite_expect: "object"
    cell_reports: list
    dominance_checked: bool

    def to_dict(self) -> dict:
        return {
            "certified": self.certified,
            "condition_b": self.condition_b,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "mesh": self.mesh,
            "finite_expect": self.finite_expect.to_dict(),
            "cells": self.cell_reports,
            "dominance_checked": self.dominance_checked,
        }


def lm_criterion_check(
    times: np.ndarray,
    p_paths: np.ndarray,
    g,
    triplet: LevyTriplet,
    *,
    eps: float = 0.05,
    w_fn=None,
    x_probes=None,
    dominance_tol: float = 1e-9,
) -> LMReport:
    """Exercise the compensator-domination criterion on a sampled ensemble.

    p_paths holds |P_t|-dominating path samples, shape (n_paths, n_times).
    g is the jump-size factor of the dominating product W <= |P_t| g(x).
    When w_fn(p, x) is supplied the dominance itself is spot-checked.
    """
    from .verify import finite_expect

    F = triplet.F
    cond_b = levy_integrate(
        F, lambda x: g(x) * (1.0 + np.log1p(g(x))), g_quadratic_near_zero=True
    )

    p_abs = np.abs(np.asarray(p_paths, dtype=float))
    if w_fn is not None:
        probes = np.asarray(
            x_probes if x_probes is not None else _default_x_probes(F), dtype=float
        )
        p_sample = p_abs[: min(200, p_abs.shape[0])].ravel()
        for x in probes:
            w_vals = np.asarray(w_fn(p_sample, x), dtype=float)
            bound = p_sample * float(g(np.asarray(x)))
            if np.any(w_vals > bound + dominance_tol):
                raise DominanceViolated(
                    f"W exceeds |P| g(x) at x={x}"
                )

    # envelope for h(y) = int f(y g(x)) F(dx)
    y_grid = np.geomspace(1e-3, max(1e3, 4.0 * float(np.max(p_abs)) + 1.0), 200)
    h_vals = np.array([
        levy_integrate(F, lambda x: f_lm(y * g(x)), g_quadratic_near_zero=True)
        for y in y_grid
    ])
    gamma1, gamma2 = fit_envelope(h_vals, y_grid)

    fe = finite_expect(p_abs, eps)

    T = float(times[-1] - times[0])
    mesh = min(T, eps / gamma1) if gamma1 > 0 else T
    n_cells = max(1, int(math.ceil(T / mesh - 1e-9)))
    edges = np.linspace(times[0], times[-1], n_cells + 1)
    dt = np.diff(np.asarray(times, dtype=float))
    h_of_p = np.interp(p_abs, y_grid, h_vals)  # h monotone on the grid
    cell_reports = []
    all_cells_ok = True
    for k in range(n_cells):
        in_cell = (times[:-1] >= edges[k] - 1e-12) & (times[:-1] < edges[k + 1] - 1e-12)
        a_inc = np.sum(h_of_p[:, :-1][:, in_cell] * dt[in_cell], axis=1)
        stats = _doubling_estimates(np.exp(a_inc))
        ok = stats["verdict"] == "pass"
        all_cells_ok = all_cells_ok and ok
        cell_reports.append({
            "cell": [float(edges[k]), float(edges[k + 1])],
            "estimate": stats["estimates"][-1],
            "verdict": stats["verdict"],
        })

    certified = (
        math.isfinite(cond_b)
        and fe.verdict == "pass"
        and all_cells_ok
    )
    return LMReport(certified, cond_b, gamma1, gamma2, mesh, fe,
                    cell_reports, w_fn is not None)


def _default_x_probes(F):
    if isinstance(F, DiscreteMeasure):
        return F.x
    return np.array([-5.0, -1.0, -0.1, 0.1, 1.0, 5.0])


def _doubling_estimates(samples: np.ndarray, doublings: int = 4) -> dict:
    """Running means on nested prefixes of doubling size, with a
    stabilization verdict (see verify.finite_expect for the rules)."""
    from .verify import doubling_verdict

    n = len(samples)
    sizes = [max(8, n // 2 ** (doublings - k)) for k in range(doublings)] + [n]
    ests = [float(np.mean(samples[:s])) for s in sizes]
    return {"estimates": ests, "verdict": doubling_verdict(ests)}


# ---------------------------------------------------------------------------
# direct simulation under Q
# ---------------------------------------------------------------------------


@dataclass
class QPathRecord:
    ma: MovingAveragePath | None
    jump_times: np.ndarray  # tail jumps in (0, T]
    jump_sizes: np.ndarray
    y_pre: np.ndarray  # Y_{T_n-} at those jumps
    n_tail_jumps: int


class _TailMarkSamplerQ:
    """Draws one tail mark from alpha(y, .) F^a / lam by rejection against
    the P-law of the mark; the two-level structure of f_zeta bounds the
    acceptance ratio."""

    def __init__(self, gk: GirsanovKernelH2, F):
        self.gk = gk
        if isinstance(F, DiscreteMeasure):
            mask = np.abs(F.x) > gk.a
            self.x = F.x[mask]
            self.w = F.w[mask]
        else:
            raise UnsupportedModel(
                "direct Q mark sampling is implemented for discrete measures"
            )

    def sample(self, y: float, rng: np.random.Generator) -> float:
        weights = self.w * np.asarray(self.gk.evaluate(y, self.x), dtype=float)
        p = weights / weights.sum()
        return float(rng.choice(self.x, p=p))


def simulate_under_q(
    gk: GirsanovKernelH2,
    triplet: LevyTriplet,
    kernel: Kernel,
    config: SimConfig,
    path_index: int,
    sim: PathSimulator | None = None,
    want_ma: bool = True,
) -> QPathRecord:
    """One path with the tail jumps on (0, T] resampled under Q.

    Arrivals stay Poisson with the P-intensity lam = F([-a,a]^c); each mark
    on (0, T] is drawn sequentially from alpha(Y_{T_n-}, .) F^a / lam. The
    Gaussian part, the sub-threshold approximation and all pre-0 jumps keep
    their P-law. Requires eps_jump <= a so no tail jump hides in the
    Gaussian approximation.
    """
    if gk.kind != "h2":
        raise UnsupportedModel("direct Q simulation needs the tail kernel")
    if config.eps_jump > gk.a:
        raise UnsupportedModel("eps_jump must not exceed the tail threshold a")

    if sim is None:
        sim = PathSimulator(triplet, config)
    rng = sim.rng_for(path_index)
    base = sim.simulate(rng)

    # keep pre-0 jumps and sub-a jumps; drop P tail jumps on (0, T]
    keep = (base.jump_times <= 0.0) | (np.abs(base.jump_sizes) <= gk.a)
    kept_t = base.jump_times[keep]
    kept_z = base.jump_sizes[keep]
    inc = base.diffuse_increments()

    n_arr = rng.poisson(gk.lam * config.T)
    arr = np.sort(rng.uniform(0.0, config.T, n_arr))
    sampler = _TailMarkSamplerQ(gk, triplet.F)

    # sequential marks: Y_{T_n-} sees everything strictly before T_n
    part = LatticePath(base.times, inc.copy(), kept_t, kept_z)
    q_t, q_z, y_pre = [], [], []
    for t_n in arr:
        y = y_at(kernel, part, float(t_n), diffuse=inc)
        z = sampler.sample(y, rng)
        q_t.append(float(t_n))
        q_z.append(z)
        y_pre.append(y)
        jt = np.concatenate([part.jump_times, [t_n]])
        jz = np.concatenate([part.jump_sizes, [z]])
        order = np.argsort(jt)
        part = LatticePath(base.times, inc, jt[order], jz[order])

    ma = None
    if want_ma:
        final_inc = inc.copy()
        all_t = part.jump_times
        all_z = part.jump_sizes
        if len(all_t):
            from .path_sim import _cell_index

            idx = _cell_index(all_t, float(base.times[0]), base.dt,
                              len(final_inc))
            np.add.at(final_inc, idx, all_z)
        full = LatticePath(base.times, final_inc, all_t, all_z)
        ma = moving_average(kernel, full, m_cells=config.m_cells)
    return QPathRecord(
        ma,
        np.asarray(q_t), np.asarray(q_z), np.asarray(y_pre), len(q_t),
    )
