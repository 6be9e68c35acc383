"""Scenario plumbing and verification pipelines.

A scenario is a plain dict-shaped config (YAML on disk) naming a triplet,
a kernel, simulation settings and the measure-change hypothesis. The
pipelines here run the classification, the kernel construction and the
Monte Carlo verification batteries, and assemble the JSON report.

Scientifically meaningful parameters (a, b, eps_jump, tolerance) have no
defaults: a scenario that omits them fails to load.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import emm_construct, girsanov, kernel as kernel_mod, verify
from .errors import ConfigError, TruncationViolated, ZetaOutOfRange
from .kernel import Kernel, emm_classify
from .levy_model import (
    DiscreteMeasure,
    LevyTriplet,
    TruncationFunction,
    ZeroMeasure,
    gaussian_only,
    indicator_inside,
    indicator_outside_band,
    symmetric_alpha_stable,
    tempered_stable,
    uniform_band,
)
from .path_sim import (
    LatticePath,
    PathSimulator,
    SimConfig,
    moving_average,
    write_jumps_csv,
    write_path_csv,
)

REPORT_SCHEMA_VERSION = "1"


# ---------------------------------------------------------------------------
# scenario schema
# ---------------------------------------------------------------------------

_MEASURE_BUILDERS = {
    "discrete": lambda s: DiscreteMeasure([tuple(a) for a in s["atoms"]]),
    "symmetric-alpha-stable": lambda s: symmetric_alpha_stable(
        s["alpha"], s.get("scale", 1.0)
    ),
    "tempered-stable": lambda s: tempered_stable(s["eta"], s["lam"], s["alpha"]),
    "uniform-band": lambda s: uniform_band(s["a"], s["b"], s.get("height", 1.0)),
    "zero": lambda s: gaussian_only(),
}

_KERNEL_BUILDERS = {
    "exponential": lambda s: kernel_mod.exponential_kernel(
        s["kappa"], s.get("amplitude", 1.0)
    ),
    "power": lambda s: kernel_mod.power_kernel(s["gamma"]),
    "power-density": lambda s: kernel_mod.power_density_kernel(
        s["q"], s.get("phi0", 1.0)
    ),
    "zero-start": lambda s: kernel_mod.zero_start_kernel(s.get("kappa", 1.0)),
    "constant": lambda s: kernel_mod.constant_kernel(s.get("value", 1.0)),
}


@dataclass
class Scenario:
    name: str
    triplet: dict
    kernel: dict
    sim: dict
    emm: dict
    verify: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "triplet": self.triplet,
            "kernel": self.kernel,
            "sim": self.sim,
            "emm": self.emm,
            "verify": self.verify,
        }


def _require(d: dict, keys, where: str):
    for k in keys:
        if k not in d:
            raise ConfigError(f"missing required key {k!r} in {where}")


def scenario_from_dict(d: dict) -> Scenario:
    _require(d, ["name", "triplet", "kernel", "sim", "emm"], "scenario")
    t = d["triplet"]
    _require(t, ["c", "b_h", "measure", "truncation"], "triplet")
    _require(t["measure"], ["type"], "triplet.measure")
    if t["measure"]["type"] not in _MEASURE_BUILDERS:
        raise ConfigError(f"unknown measure type {t['measure']['type']!r}")
    trunc = t["truncation"]
    _require(trunc, ["kind"], "triplet.truncation")
    if trunc["kind"] == "inside":
        _require(trunc, ["a"], "triplet.truncation")
    elif trunc["kind"] == "outside-band":
        _require(trunc, ["a", "b"], "triplet.truncation")
    else:
        raise ConfigError(f"unknown truncation kind {trunc['kind']!r}")
    k = d["kernel"]
    _require(k, ["type"], "kernel")
    if k["type"] not in _KERNEL_BUILDERS:
        raise ConfigError(f"unknown kernel type {k['type']!r}")
    _require(d["sim"], ["T", "M", "dt", "eps_jump", "n_paths", "seed"], "sim")
    emm = d["emm"]
    _require(emm, ["hypothesis"], "emm")
    hyp = emm["hypothesis"]
    if hyp == "h1":
        _require(emm, ["a", "b", "tolerance"], "emm (h1)")
    elif hyp == "h2":
        _require(emm, ["a", "tolerance"], "emm (h2)")
    elif hyp not in ("gaussian", "lm", "none"):
        raise ConfigError(f"unknown hypothesis {hyp!r}")
    if hyp == "h2" and t["measure"]["type"] == "zero":
        raise ConfigError("h2 requires two-sided tail mass; measure is zero")
    return Scenario(
        name=d["name"], triplet=t, kernel=k, sim=dict(d["sim"]),
        emm=dict(emm), verify=dict(d.get("verify", {})),
    )


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: scenario file must hold a mapping")
    return scenario_from_dict(data)


def save_scenario(scn: Scenario, path: str) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scn.to_dict(), fh, sort_keys=False)


def build_truncation(spec: dict) -> TruncationFunction:
    if spec["kind"] == "inside":
        return indicator_inside(spec["a"])
    return indicator_outside_band(spec["a"], spec["b"])


def build_triplet(spec: dict) -> LevyTriplet:
    F = _MEASURE_BUILDERS[spec["measure"]["type"]](spec["measure"])
    return LevyTriplet(
        c=float(spec["c"]), F=F, b_h=float(spec["b_h"]),
        h=build_truncation(spec["truncation"]),
        integrable=bool(spec.get("integrable", True)),
    )


def build_kernel(spec: dict) -> Kernel:
    return _KERNEL_BUILDERS[spec["type"]](spec)


def build_sim_config(spec: dict, n_paths=None, seed=None) -> SimConfig:
    return SimConfig(
        T=float(spec["T"]), M=float(spec["M"]), dt=float(spec["dt"]),
        eps_jump=float(spec["eps_jump"]),
        n_paths=int(n_paths if n_paths is not None else spec["n_paths"]),
        seed=int(seed if seed is not None else spec["seed"]),
        small_jump_mode=spec.get("small_jump_mode", "gaussian-approx"),
    )


# ---------------------------------------------------------------------------
# built-in scenarios
# ---------------------------------------------------------------------------


def builtin_scenario(name: str) -> Scenario:
    try:
        return scenario_from_dict(_BUILTINS[name]())
    except KeyError:
        raise ConfigError(
            f"unknown builtin scenario {name!r}; known: {sorted(_BUILTINS)}"
        )


def _two_atom_base(n_paths=100_000, seed=20260823):
    return {
        "name": "h2-two-atom",
        "triplet": {
            "c": 0.0, "b_h": 0.0, "integrable": True,
            "truncation": {"kind": "inside", "a": 0.5},
            "measure": {"type": "discrete", "atoms": [[-1.0, 1.0], [1.0, 1.0]]},
        },
        "kernel": {"type": "exponential", "kappa": 0.05, "amplitude": 1.0},
        "sim": {"T": 1.0, "M": 60.0, "dt": 0.25, "eps_jump": 0.25,
                "n_paths": n_paths, "seed": seed,
                "small_jump_mode": "gaussian-approx"},
        "emm": {"hypothesis": "h2", "a": 0.5, "tolerance": 1e-9},
        "verify": {
            "tail_regime": "second-moment-finite",
            "tests": ["mean_density", "q_martingale", "jump_intensity"],
            "probe_times": [0.25, 0.5, 1.0],
        },
    }


def _builtin_h2_two_atom():
    return _two_atom_base()


def _builtin_q_two_atom_zeta05():
    d = _two_atom_base(n_paths=50_000, seed=91)
    d["name"] = "q-two-atom-zeta05"
    d["emm"]["frozen_zeta"] = 0.5
    d["verify"]["tests"] = ["jump_intensity", "conditional_jump_law"]
    d["verify"]["mode"] = "direct-q"
    return d


def _builtin_gaussian_baseline():
    return {
        "name": "gaussian-baseline",
        "triplet": {
            "c": 1.0, "b_h": 0.0, "integrable": True,
            "truncation": {"kind": "inside", "a": 1.0},
            "measure": {"type": "zero"},
        },
        "kernel": {"type": "exponential", "kappa": 1.0, "amplitude": 1.0},
        # T = 0.5 keeps the Girsanov exposure int theta^2 dt near 0.25, so
        # Z_T has a light enough tail for raw 3-s.e. tests at 1e5 paths;
        # at T = 1 the exposure doubles and E[Z^2] becomes seed-unstable
        "sim": {"T": 0.5, "M": 10.0, "dt": 1.0 / 512, "eps_jump": 0.5,
                "n_paths": 100_000, "seed": 3117},
        "emm": {"hypothesis": "gaussian"},
        "verify": {
            "tail_regime": "second-moment-finite",
            "tests": ["mean_density", "brownian_invariance"],
            "probe_times": [0.0, 0.125, 0.25, 0.5],
        },
    }


def _builtin_bremaud():
    return {
        "name": "bremaud",
        "triplet": {
            "c": 0.0, "b_h": 0.0, "integrable": True,
            "truncation": {"kind": "inside", "a": 0.5},
            "measure": {"type": "discrete", "atoms": [[1.0, 1.0]]},
        },
        "kernel": {"type": "constant", "value": 1.0},
        "sim": {"T": 1.0, "M": 0.0, "dt": 1.0 / 64, "eps_jump": 0.5,
                "n_paths": 16_384, "seed": 5150},
        "emm": {"hypothesis": "lm", "style": "bremaud",
                "K1": 1.0, "K2": 1.0, "gamma": 2.0, "eps": 0.05},
        "verify": {"tests": ["lm_criterion"]},
    }


def _builtin_lmrelax():
    return {
        "name": "lmrelax",
        "triplet": {
            "c": 0.0, "b_h": 0.0, "integrable": True,
            "truncation": {"kind": "inside", "a": 0.5},
            "measure": {"type": "discrete", "atoms": [[1.0, 1.0]]},
        },
        "kernel": {"type": "constant", "value": 1.0},
        "sim": {"T": 1.0, "M": 0.0, "dt": 1.0, "eps_jump": 0.5,
                "n_paths": 16_384, "seed": 7001},
        "emm": {"hypothesis": "lm", "style": "lmrelax", "eps": 3.0,
                "cp_rate": 1.0},
        "verify": {"tests": ["finite_expect"]},
    }


def _builtin_negative_broken_alpha():
    d = _two_atom_base(n_paths=20_000, seed=404)
    d["name"] = "negative-broken-alpha"
    d["emm"]["break_positive_factor"] = 1.2
    d["verify"]["tests"] = ["mean_density"]
    return d


def _builtin_negative_wrong_intensity():
    d = _two_atom_base(n_paths=20_000, seed=405)
    d["name"] = "negative-wrong-intensity"
    d["emm"]["declared_intensity_factor"] = 1.5
    d["verify"]["tests"] = ["jump_intensity"]
    return d


def _builtin_negative_phi0():
    d = _builtin_gaussian_baseline()
    d["name"] = "negative-phi0-misdeclared"
    d["sim"]["n_paths"] = 20_000
    d["sim"]["seed"] = 406
    d["emm"]["declared_phi0"] = 1.2
    d["verify"]["tests"] = ["brownian_invariance"]
    return d


def _builtin_classify(alpha=None, kernel_type="exponential"):
    if alpha is not None:
        measure = {"type": "symmetric-alpha-stable", "alpha": alpha, "scale": 1.0}
        c = 0.0
    else:
        measure = {"type": "symmetric-alpha-stable", "alpha": 1.5, "scale": 1.0}
        c = 1.0
    if kernel_type == "exponential":
        kern = {"type": "exponential", "kappa": 1.0}
    elif kernel_type == "zero-start":
        kern = {"type": "zero-start", "kappa": 1.0}
    else:
        kern = {"type": "power-density", "q": 0.4, "phi0": 1.0}
    return {
        "name": f"classify-{kernel_type}-{alpha}",
        "triplet": {
            "c": c, "b_h": 0.0, "integrable": alpha is None or alpha > 1.0,
            "truncation": {"kind": "inside", "a": 1.0},
            "measure": measure,
        },
        "kernel": kern,
        "sim": {"T": 1.0, "M": 10.0, "dt": 0.125, "eps_jump": 0.1,
                "n_paths": 1000, "seed": 1},
        "emm": {"hypothesis": "none"},
        "verify": {"tail_regime": "regularly-varying"},
    }


_BUILTINS = {
    "h2-two-atom": _builtin_h2_two_atom,
    "q-two-atom-zeta05": _builtin_q_two_atom_zeta05,
    "gaussian-baseline": _builtin_gaussian_baseline,
    "bremaud": _builtin_bremaud,
    "lmrelax": _builtin_lmrelax,
    "negative-broken-alpha": _builtin_negative_broken_alpha,
    "negative-wrong-intensity": _builtin_negative_wrong_intensity,
    "negative-phi0-misdeclared": _builtin_negative_phi0,
    "classify-sas-1.2": lambda: _builtin_classify(alpha=1.2),
    "classify-sas-1.5": lambda: _builtin_classify(alpha=1.5),
    "classify-sas-1.9": lambda: _builtin_classify(alpha=1.9),
    "classify-zero-start": lambda: _builtin_classify(kernel_type="zero-start"),
    "classify-power-density": lambda: _builtin_classify(kernel_type="power-density"),
}


# ---------------------------------------------------------------------------
# check-kernel and construct
# ---------------------------------------------------------------------------


def run_check_kernel(scn: Scenario) -> dict:
    triplet = build_triplet(scn.triplet)
    kern = build_kernel(scn.kernel)
    regime = scn.verify.get("tail_regime", "other")
    cls = emm_classify(kern, triplet, regime)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "scenario": scn.name,
        "classification": cls.to_dict(),
    }


class _BrokenAlpha:
    """Negative-control wrapper: inflates positive-tail factors."""

    def __init__(self, gk, factor):
        self._gk = gk
        self._factor = factor
        self.kind = gk.kind
        self.a = gk.a
        self.lam = gk.lam
        self.tail = gk.tail
        self.b_h = gk.b_h

    def evaluate(self, y, x):
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.atleast_1d(np.asarray(self._gk.evaluate(y, arr), dtype=float))
        out = np.where(arr > self.a, out * self._factor, out)
        return out if np.ndim(x) else float(out[0])


class _FrozenZeta:
    """h2 kernel evaluated at a fixed zeta (state-independent alpha)."""

    def __init__(self, gk, zeta):
        self._gk = gk
        self.kind = gk.kind
        self.a = gk.a
        self.lam = gk.lam
        self.tail = gk.tail
        self.b_h = gk.b_h
        self._y = -zeta * gk.lam - gk.b_h

    def evaluate(self, y, x):
        return self._gk.evaluate(self._y, x)


def make_girsanov_kernel(scn: Scenario, triplet: LevyTriplet):
    hyp = scn.emm["hypothesis"]
    if hyp == "h1":
        gk = emm_construct.make_h1_kernel(triplet, scn.emm["a"], scn.emm["b"])
    elif hyp == "h2":
        gk = emm_construct.make_h2_kernel(triplet, scn.emm["a"])
    else:
        raise ConfigError(f"no Girsanov kernel for hypothesis {hyp!r}")
    if "frozen_zeta" in scn.emm:
        gk = _FrozenZeta(gk, float(scn.emm["frozen_zeta"]))
    if "break_positive_factor" in scn.emm:
        gk = _BrokenAlpha(gk, float(scn.emm["break_positive_factor"]))
    return gk


def run_construct(scn: Scenario, n_y: int = 100) -> dict:
    triplet = build_triplet(scn.triplet)
    gk = make_girsanov_kernel(scn, triplet)
    y_span = float(scn.emm.get("y_span", 1.0))
    ys = np.linspace(-y_span, y_span, n_y)
    report = emm_construct.validate_girsanov_kernel(
        gk, triplet, ys, abs_tol=float(scn.emm["tolerance"])
    )
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "scenario": scn.name,
        "validation": report,
    }


# ---------------------------------------------------------------------------
# per-path evaluation helpers (exact jump responses, no full-grid pass)
# ---------------------------------------------------------------------------


def _response_at(kernel, t, jt, jz, left, diffuse, have_diffuse, derivative,
                 strict):
    total = 0.0
    if have_diffuse:
        m = left < t
        fn = kernel.dphi if derivative else kernel
        if np.any(m):
            total += float(np.dot(np.asarray(fn(t - left[m]), dtype=float),
                                  diffuse[m]))
    m = (jt < t) if strict else (jt <= t)
    if np.any(m):
        fn = kernel.dphi if derivative else kernel
        total += float(np.dot(np.asarray(fn(t - jt[m]), dtype=float), jz[m]))
    return total


def _h2_chunk(scn_dict: dict, start: int, stop: int) -> dict:
    """Weighted-P statistics for a contiguous block of path indices."""
    scn = scenario_from_dict(scn_dict)
    triplet = build_triplet(scn.triplet)
    kern = build_kernel(scn.kernel)
    cfg = build_sim_config(scn.sim)
    gk = make_girsanov_kernel(scn, triplet)
    sim = PathSimulator(triplet, cfg)
    probes = [0.0] + [float(t) for t in scn.verify.get("probe_times", [cfg.T])]
    left = sim.times[:-1]

    n = stop - start
    z_T = np.empty(n)
    x_probe = np.empty((n, len(probes)))
    counts = np.zeros(n, dtype=np.int64)
    y_pre_all, marks_all = [], []
    for i, idx in enumerate(range(start, stop)):
        path = sim.simulate(sim.rng_for(idx))
        jt, jz = path.jump_times, path.jump_sizes
        diffuse = path.diffuse_increments()
        have_diffuse = bool(np.any(diffuse))
        z = 1.0
        win = (jt > 0.0) & (np.abs(jz) > gk.a)
        counts[i] = int(np.sum(win))
        for t_n, z_n in zip(jt[win], jz[win]):
            y = _response_at(kern, t_n, jt, jz, left, diffuse, have_diffuse,
                             derivative=True, strict=True)
            f = float(np.asarray(gk.evaluate(y, z_n)).reshape(()))
            z *= f
            y_pre_all.append(y)
            marks_all.append(z_n)
        z_T[i] = z
        for j, t_p in enumerate(probes):
            x_probe[i, j] = _response_at(kern, t_p, jt, jz, left, diffuse,
                                         have_diffuse, derivative=False,
                                         strict=False)
    return {
        "z_T": z_T, "x_probe": x_probe, "counts": counts,
        "y_pre": np.asarray(y_pre_all), "marks": np.asarray(marks_all),
        "probes": np.asarray(probes),
    }


def _q_chunk(scn_dict: dict, start: int, stop: int) -> dict:
    """Direct-Q mark and count statistics for a block of path indices."""
    scn = scenario_from_dict(scn_dict)
    triplet = build_triplet(scn.triplet)
    kern = build_kernel(scn.kernel)
    cfg = build_sim_config(scn.sim)
    gk = make_girsanov_kernel(scn, triplet)
    sim = PathSimulator(triplet, cfg)
    counts = np.zeros(stop - start, dtype=np.int64)
    y_pre, marks = [], []
    for i, idx in enumerate(range(start, stop)):
        rec = girsanov.simulate_under_q(gk, triplet, kern, cfg, idx, sim=sim,
                                        want_ma=False)
        counts[i] = rec.n_tail_jumps
        y_pre.extend(rec.y_pre.tolist())
        marks.extend(rec.jump_sizes.tolist())
    return {
        "counts": counts, "y_pre": np.asarray(y_pre),
        "marks": np.asarray(marks),
    }


def _gaussian_chunk(scn_dict: dict, start: int, stop: int) -> dict:
    """Classical-Girsanov statistics for the pure-Gaussian baseline."""
    scn = scenario_from_dict(scn_dict)
    triplet = build_triplet(scn.triplet)
    kern = build_kernel(scn.kernel)
    cfg = build_sim_config(scn.sim)
    sim = PathSimulator(triplet, cfg)
    m = cfg.m_cells
    n_out = cfg.n_out
    sqc = math.sqrt(triplet.c)
    phi0 = kern.phi0
    xi = triplet.xi()
    probes = [float(t) for t in scn.verify.get("probe_times", [0.0, cfg.T])]
    p_idx = [round(t / cfg.dt) for t in probes]

    from . import _backend
    from .path_sim import _weight_table

    n_cells = cfg.n_cells
    w_phi = _weight_table(kern, n_cells, cfg.dt)
    w_dphi = _weight_table(kern.dphi, n_cells, cfg.dt)

    block = 512
    z_parts, x_parts = [], []
    for lo in range(start, stop, block):
        hi = min(lo + block, stop)
        inc = np.empty((hi - lo, n_cells))
        for r, idx in enumerate(range(lo, hi)):
            inc[r] = sim.simulate(sim.rng_for(idx)).increments
        X = _backend.ma_correlate(inc, w_phi, n_out, m)
        Y = _backend.ma_correlate(inc, w_dphi, n_out, m)
        theta = -(Y + phi0 * xi) / (phi0 * sqc)
        dB = (inc[:, m:] - sim.drift_rate * cfg.dt) / sqc
        log_z = np.sum(theta[:, :-1] * dB, axis=1) \
            - 0.5 * np.sum(theta[:, :-1] ** 2, axis=1) * cfg.dt
        z_parts.append(np.exp(log_z))
        x_parts.append(X[:, p_idx])
    return {
        "z_T": np.concatenate(z_parts),
        "x_probe": np.vstack(x_parts),
        "probes": np.asarray(probes),
    }


def _run_chunked(worker, scn: Scenario, n_paths: int, workers: int) -> dict:
    """Split [0, n_paths) into index blocks and merge results in index
    order, so the ensemble is independent of scheduling."""
    scn_dict = scn.to_dict()
    n_blocks = max(1, workers) * 4 if workers > 1 else 1
    edges = np.linspace(0, n_paths, n_blocks + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    if workers <= 1 or len(spans) == 1:
        parts = [worker(scn_dict, a, b) for a, b in spans]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(worker, scn_dict, a, b) for a, b in spans]
            parts = [f.result() for f in futs]
    merged = {}
    for key in parts[0]:
        arrs = [p[key] for p in parts]
        if key == "probes":
            merged[key] = arrs[0]
        elif arrs[0].ndim == 1:
            merged[key] = np.concatenate(arrs)
        else:
            merged[key] = np.vstack(arrs)
    return merged


# ---------------------------------------------------------------------------
# verification batteries
# ---------------------------------------------------------------------------


def _battery_h2(scn: Scenario, n_paths: int, seed: int, workers: int) -> dict:
    data = _run_chunked(_h2_chunk, scn, n_paths, workers)
    tests = scn.verify.get("tests", ["mean_density"])
    lam_factor = float(scn.emm.get("declared_intensity_factor", 1.0))
    triplet = build_triplet(scn.triplet)
    gk = make_girsanov_kernel(scn, triplet)
    reports = []
    if "mean_density" in tests:
        reports.append(verify.mean_density_test(data["z_T"], seed=seed))
    if "q_martingale" in tests:
        reports.append(verify.q_martingale_test(
            data["x_probe"][:, 1:], data["x_probe"][:, 0], data["z_T"],
            data["probes"][1:], seed=seed,
        ))
    if "jump_intensity" in tests:
        T = float(scn.sim["T"])
        reports.append(verify.jump_intensity_test(
            data["counts"], gk.lam * lam_factor, T, weights=data["z_T"],
            seed=seed,
        ))
    if "conditional_jump_law" in tests and scn.verify.get("mode") != "direct-q":
        reports.append(verify.conditional_jump_law_test(
            data["y_pre"], data["marks"], gk,
            n_state_bins=int(scn.verify.get("state_bins", 1)), seed=seed,
        ))
    out = {"reports": reports}
    out["plot"] = _plot_rows(data["probes"], data["x_probe"], data["z_T"])
    return out


def _battery_direct_q(scn: Scenario, n_paths: int, seed: int,
                      workers: int) -> dict:
    data = _run_chunked(_q_chunk, scn, n_paths, workers)
    triplet = build_triplet(scn.triplet)
    gk = make_girsanov_kernel(scn, triplet)
    lam_factor = float(scn.emm.get("declared_intensity_factor", 1.0))
    tests = scn.verify.get("tests", [])
    reports = []
    if "jump_intensity" in tests:
        reports.append(verify.jump_intensity_test(
            data["counts"], gk.lam * lam_factor, float(scn.sim["T"]),
            seed=seed,
        ))
    if "conditional_jump_law" in tests:
        reports.append(verify.conditional_jump_law_test(
            data["y_pre"], data["marks"], gk,
            n_state_bins=int(scn.verify.get("state_bins", 1)), seed=seed,
        ))
    return {"reports": reports, "n_marks": int(len(data["marks"]))}


def _battery_gaussian(scn: Scenario, n_paths: int, seed: int,
                      workers: int) -> dict:
    data = _run_chunked(_gaussian_chunk, scn, n_paths, workers)
    kern = build_kernel(scn.kernel)
    triplet = build_triplet(scn.triplet)
    phi0 = float(scn.emm.get("declared_phi0", kern.phi0))
    probes = data["probes"]
    pairs = [(j, j + 1) for j in range(len(probes) - 1)]
    tests = scn.verify.get("tests", ["brownian_invariance"])
    reports = []
    if "mean_density" in tests:
        reports.append(verify.mean_density_test(data["z_T"], seed=seed))
    if "brownian_invariance" in tests:
        reports.append(verify.brownian_invariance_test(
            data["x_probe"], probes, data["z_T"], pairs, phi0, triplet.c,
            seed=seed,
        ))
    out = {"reports": reports}
    out["plot"] = _plot_rows(probes, data["x_probe"], data["z_T"])
    return out


def _battery_lm(scn: Scenario, n_paths: int, seed: int, workers: int) -> dict:
    style = scn.emm.get("style")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    reports = []
    details = {}
    if style == "bremaud":
        K1 = float(scn.emm["K1"])
        K2 = float(scn.emm["K2"])
        gamma = float(scn.emm["gamma"])
        eps = float(scn.emm["eps"])
        triplet = build_triplet(scn.triplet)
        lam = float(np.sum(triplet.F.w))
        cfg = build_sim_config(scn.sim, n_paths=n_paths, seed=seed)
        times = np.arange(cfg.n_out) * cfg.dt
        # Poisson counting paths on the grid
        incs = rng.poisson(lam * cfg.dt, size=(n_paths, cfg.n_out - 1))
        L = np.concatenate(
            [np.zeros((n_paths, 1)), np.cumsum(incs, axis=1)], axis=1
        )
        P = 2.0 + K1 + K2 * (L + lam * times[None, :])

        def w_fn(p, x):
            return np.maximum(p - 2.0, 0.0) ** (1.0 / gamma) - 1.0

        lm = girsanov.lm_criterion_check(
            times, P, lambda x: np.ones_like(np.asarray(x, dtype=float)),
            triplet, eps=eps, w_fn=w_fn,
        )
        details["lm"] = lm.to_dict()
        verdict = "pass" if lm.certified else "fail"
        reports.append(verify.StatReport(
            "lm_criterion", lm.condition_b, 0.0, n_paths, verdict,
            "dominance + condition (b) + cell exponential moments", seed,
            details["lm"],
        ))
        reports.append(lm.finite_expect)
    elif style == "lmrelax":
        eps = float(scn.emm["eps"])
        rate = float(scn.emm.get("cp_rate", 1.0))
        counts = rng.poisson(rate, size=n_paths)
        y = np.array([
            float(np.sum(rng.exponential(1.0, k))) if k else 0.0
            for k in counts
        ])
        fe = verify.finite_expect(y, eps, seed=seed)
        reports.append(fe)
    else:
        raise ConfigError(f"unknown lm style {style!r}")
    return {"reports": reports}


def _plot_rows(times, x_probe, z):
    """Plot-ready rows: t, weighted mean of X_t, 3-s.e. CI band."""
    rows = []
    zbar = float(np.mean(z))
    for j, t in enumerate(np.asarray(times, dtype=float)):
        rs = verify.RunningStats().add(z * x_probe[:, j])
        mean = rs.mean / zbar
        half = 3.0 * rs.stderr / zbar
        rows.append((t, mean, mean - half, mean + half))
    return rows


def run_verify(scn: Scenario, n_paths=None, seed=None, workers: int = 1) -> dict:
    """Run the scenario's test battery and assemble the report document."""
    n = int(n_paths if n_paths is not None else scn.sim["n_paths"])
    sd = int(seed if seed is not None else scn.sim["seed"])
    if seed is not None or n_paths is not None:
        scn = scenario_from_dict({
            **scn.to_dict(),
            "sim": {**scn.sim, "n_paths": n, "seed": sd},
        })
    hyp = scn.emm["hypothesis"]
    mode = scn.verify.get("mode", "weighted")
    if hyp == "h2" and mode == "direct-q":
        out = _battery_direct_q(scn, n, sd, workers)
    elif hyp in ("h1", "h2"):
        out = _battery_h2(scn, n, sd, workers)
    elif hyp == "gaussian":
        out = _battery_gaussian(scn, n, sd, workers)
    elif hyp == "lm":
        out = _battery_lm(scn, n, sd, workers)
    else:
        raise ConfigError(f"hypothesis {hyp!r} has no verification battery")
    reports = out["reports"]
    overall = all(r.verdict == "pass" for r in reports)
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "scenario": scn.name,
        "seed": sd,
        "n_paths": n,
        "overall": "pass" if overall else "fail",
        "reports": [r.to_dict() for r in reports],
    }
    if "plot" in out:
        doc["plot"] = [list(map(float, row)) for row in out["plot"]]
    return doc


# ---------------------------------------------------------------------------
# simulate command and exports
# ---------------------------------------------------------------------------


def run_simulate(scn: Scenario, out_dir: str, n_paths=None, seed=None,
                 max_path_csv: int = 5) -> dict:
    cfg = build_sim_config(scn.sim, n_paths=n_paths, seed=seed)
    triplet = build_triplet(scn.triplet)
    kern = build_kernel(scn.kernel)
    sim = PathSimulator(triplet, cfg)
    os.makedirs(out_dir, exist_ok=True)
    jump_records = []
    for idx in range(cfg.n_paths):
        path = sim.simulate(sim.rng_for(idx))
        ma = moving_average(kern, path, m_cells=cfg.m_cells)
        if idx < max_path_csv:
            with open(os.path.join(out_dir, f"path_{idx}.csv"), "w",
                      newline="") as fh:
                write_path_csv(fh, path, ma, cfg.m_cells)
        w = path.jump_times > 0.0
        for t, z in zip(path.jump_times[w], path.jump_sizes[w]):
            jump_records.append((idx, float(t), float(z)))
    with open(os.path.join(out_dir, "jumps.csv"), "w", newline="") as fh:
        write_jumps_csv(fh, jump_records)
    summary = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "scenario": scn.name,
        "n_paths": cfg.n_paths,
        "seed": cfg.seed,
        "n_jumps_in_window": len(jump_records),
        "backend": _backend_name(),
    }
    with open(os.path.join(out_dir, "simulate.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def _backend_name() -> str:
    from . import _backend

    return _backend.backend_name()


def write_report_files(doc: dict, out_dir: str, stem: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, f"{stem}.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
    if "plot" in doc:
        with open(os.path.join(out_dir, f"{stem}_plot.csv"), "w",
                  newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "weighted_mean_X", "ci_lo", "ci_hi"])
            for row in doc["plot"]:
                w.writerow([f"{v:.10g}" for v in row])
