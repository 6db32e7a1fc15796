"""Euler discretization of the jump diffusion with exact jump-event
bookkeeping, plus the instrumented empirical-process functionals.

Within a step the continuous Euler increment (including the compensator drift
correction -gamma(X) m_nu dt) is applied first; jump displacements
gamma(X_{s-}) z follow in time order, each using the state just before that
jump.  All randomness is drawn from a single numpy Generator in a fixed
order, so a record is bit-reproducible from (model, T, dt, seed) regardless
of which engine (numba or numpy) executes the recursion.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    ExplosionError,
    InstrumentationRequiredError,
)
from .model import ModelSpec

__all__ = [
    "JumpLog",
    "JumpEvent",
    "PathRecord",
    "simulate",
    "burn_in",
    "instrumented_functionals",
    "FunctionalDecomposition",
    "save_path",
    "load_path",
]


@dataclass(frozen=True)
class JumpEvent:
    """One jump: raw mark z, displacement gamma(X_{s-}) z, pre-jump state."""

    time: float
    mark: np.ndarray
    displacement: np.ndarray
    pre_state: np.ndarray
    step_index: int


@dataclass(frozen=True)
class JumpLog:
    """Struct-of-arrays jump record; iterate for JumpEvent views."""

    times: np.ndarray          # (M,)
    marks: np.ndarray          # (M, d)
    displacements: np.ndarray  # (M, d)
    pre_states: np.ndarray     # (M, d)
    step_index: np.ndarray     # (M,)

    def __len__(self):
        return self.times.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield JumpEvent(float(self.times[i]), self.marks[i],
                            self.displacements[i], self.pre_states[i],
                            int(self.step_index[i]))

    @classmethod
    def empty(cls, d):
        return cls(np.empty(0), np.empty((0, d)), np.empty((0, d)),
                   np.empty((0, d)), np.empty(0, dtype=np.int64))


@dataclass(frozen=True)
class PathRecord:
    """Discretized observation of one trajectory.

    ``states[i]`` is X at t_grid[i]; ``jumps`` logs every jump event exactly;
    ``brownian_increments`` is kept only in instrumented mode.
    """

    t_grid: np.ndarray
    states: np.ndarray
    jumps: Optional[JumpLog]
    seed: int
    dt: float
    brownian_increments: Optional[np.ndarray] = None
    model_name: Optional[str] = None

    @property
    def T(self) -> float:
        return float(self.t_grid[-1])

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def n_steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def events(self):
        return iter(self.jumps) if self.jumps is not None else iter(())

    def increments(self, coord: Optional[int] = None) -> np.ndarray:
        d = np.diff(self.states, axis=0)
        return d if coord is None else d[:, coord]


def _numba_driver():
    try:
        from numba import njit
    except ImportError:                                        # pragma: no cover
        return None

    @njit(nogil=True, cache=False)
    def run(drift, dispersion, jump_coeff, x0, dW, dt, comp_vec, has_comp,
            counts, marks, states, pre_states, disps):
        d = x0.shape[0]
        n = dW.shape[0]
        x = x0.copy()
        b = np.empty(d)
        s = np.empty((d, d))
        g = np.empty((d, d))
        states[0] = x
        ev = 0
        for i in range(n):
            drift(x, b)
            dispersion(x, s)
            if has_comp:
                jump_coeff(x, g)
            for k in range(d):
                acc = x[k] + b[k] * dt
                if has_comp:
                    ck = 0.0
                    for m in range(d):
                        ck += g[k, m] * comp_vec[m]
                    acc -= ck * dt
                for m in range(d):
                    acc += s[k, m] * dW[i, m]
                x[k] = acc
            for _ in range(counts[i]):
                jump_coeff(x, g)
                for k in range(d):
                    pre_states[ev, k] = x[k]
                for k in range(d):
                    acc = 0.0
                    for m in range(d):
                        acc += g[k, m] * marks[ev, m]
                    disps[ev, k] = acc
                for k in range(d):
                    x[k] = x[k] + disps[ev, k]
                ev += 1
            states[i + 1] = x
        return ev

    return run


_NUMBA_RUN = None


def _get_numba_run():
    global _NUMBA_RUN
    if _NUMBA_RUN is None:
        _NUMBA_RUN = _numba_driver()
    return _NUMBA_RUN


def _numpy_engine(spec, x0, dW, dt, comp_vec, has_comp, counts, marks,
                  states, pre_states, disps):
    x = x0.copy()
    states[0] = x
    ev = 0
    xr = x.reshape(1, -1)
    for i in range(dW.shape[0]):
        b = np.asarray(spec.drift(xr), dtype=float)[0]
        s = np.asarray(spec.dispersion(xr), dtype=float)[0]
        acc = x + b * dt
        if has_comp:
            g = np.asarray(spec.jump_coeff(xr), dtype=float)[0]
            acc = acc - (g @ comp_vec) * dt
        x = acc + s @ dW[i]
        xr = x.reshape(1, -1)
        for _ in range(counts[i]):
            g = np.asarray(spec.jump_coeff(xr), dtype=float)[0]
            pre_states[ev] = x
            disps[ev] = g @ marks[ev]
            x = x + disps[ev]
            xr = x.reshape(1, -1)
            ev += 1
        states[i + 1] = x
    return ev


def simulate(spec: ModelSpec, horizon: float, step: float, seed: int,
             x0: Optional[np.ndarray] = None, instrument: bool = False) -> PathRecord:
    """Simulate one path of the dynamics on the uniform grid of width ``step``.

    Raises ExplosionError when the state leaves the finite range, reporting
    the first bad time.  Identical arguments produce a bit-identical record.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if not 0 < step <= horizon:
        raise ValueError("need 0 < step <= horizon")
    lam = spec.jump_law.intensity
    if lam * step > 0.1:
        warnings.warn(f"intensity*step = {lam * step:.3g} > 0.1; consider a smaller step",
                      stacklevel=2)

    n = int(round(horizon / step))
    if abs(n * step - horizon) > 1e-9 * max(horizon, 1.0):
        warnings.warn(f"horizon adjusted to {n * step:.12g} = n*step", stacklevel=2)
    d = spec.dim
    rng = np.random.default_rng(seed)

    # fixed draw order: initial state, Gaussian block, jump counts/offsets/marks
    start = np.asarray(spec.initial_law(rng), dtype=float).reshape(d) if x0 is None \
        else np.asarray(x0, dtype=float).reshape(d)
    dW = rng.normal(0.0, math.sqrt(step), size=(n, d))

    if lam > 0:
        counts = rng.poisson(lam * step, size=n)
        m_total = int(counts.sum())
        offsets = 1.0 - rng.random(m_total)          # in (0, 1]: times land in (t_i, t_{i+1}]
        marks = np.asarray(spec.jump_law.jump_sampler(rng, m_total),
                           dtype=float).reshape(m_total, d)
        step_idx = np.repeat(np.arange(n, dtype=np.int64), counts)
        order = np.lexsort((offsets, step_idx))
        offsets = offsets[order]
        marks = marks[order]
        times = (step_idx + offsets) * step
    else:
        counts = np.zeros(n, dtype=np.int64)
        m_total = 0
        marks = np.empty((0, d))
        step_idx = np.empty(0, dtype=np.int64)
        times = np.empty(0)

    comp_vec = np.asarray(spec.jump_law.mean_mark, dtype=float)
    has_comp = lam > 0 and bool(np.any(comp_vec != 0.0))

    states = np.empty((n + 1, d))
    pre_states = np.empty((m_total, d))
    disps = np.empty((m_total, d))

    run = _get_numba_run() if spec.jit_coeffs is not None else None
    if run is not None:
        run(spec.jit_coeffs[0], spec.jit_coeffs[1], spec.jit_coeffs[2],
            start, dW, float(step), comp_vec, has_comp,
            counts.astype(np.int64), marks, states, pre_states, disps)
    else:
        _numpy_engine(spec, start, dW, float(step), comp_vec, has_comp,
                      counts, marks, states, pre_states, disps)

    finite = np.isfinite(states).all(axis=1)
    if not finite.all():
        bad = int(np.argmin(finite))
        raise ExplosionError(bad * step)

    log = JumpLog(times=times, marks=marks, displacements=disps,
                  pre_states=pre_states, step_index=step_idx)
    return PathRecord(
        t_grid=np.arange(n + 1) * step,
        states=states,
        jumps=log,
        seed=int(seed),
        dt=float(step),
        brownian_increments=dW if instrument else None,
        model_name=spec.name,
    )


def burn_in(spec: ModelSpec, duration: float, step: float, seed: int,
            x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Terminal state of a throwaway path, used as an approximately
    stationary initial condition.  duration 0 returns the initial draw."""
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    if duration == 0.0:
        rng = np.random.default_rng(seed)
        return (np.asarray(spec.initial_law(rng), dtype=float).reshape(spec.dim)
                if x0 is None else np.asarray(x0, dtype=float).reshape(spec.dim))
    return simulate(spec, duration, step, seed, x0=x0).states[-1]


@dataclass(frozen=True)
class FunctionalDecomposition:
    """Discretized empirical-process components for one test function.

    ``total`` is the increment functional with jump displacements weighted at
    their pre-jump states; it equals H + M + J up to rounding.  ``total_grid``
    is the plain left-point grid sum over raw increments (the estimator-side
    discretization), which differs from ``total`` by O(step) per jump.
    """

    H: float
    M: float
    J: float
    total: float
    total_grid: float


def instrumented_functionals(spec: ModelSpec, path: PathRecord, test_fns,
                             coord: int) -> list[FunctionalDecomposition]:
    """Drift, martingale and jump components of the normalized increment
    functional for each test function, from an instrumented path."""
    if path.brownian_increments is None:
        raise InstrumentationRequiredError(
            "path lacks Brownian increments; simulate with instrument=True")
    j = coord
    if not 0 <= j < path.dim:
        raise ValueError(f"coord must be in [0, {path.dim})")

    X = path.states[:-1]                       # left endpoints
    dW = path.brownian_increments
    dt = path.dt
    sqT = math.sqrt(path.T)

    b = np.asarray(spec.drift(X), dtype=float)[:, j]
    sig = np.asarray(spec.dispersion(X), dtype=float)[:, j, :]
    mart = np.einsum("nk,nk->n", sig, dW)

    lam = spec.jump_law.intensity
    comp_vec = np.asarray(spec.jump_law.mean_mark, dtype=float)
    if lam > 0 and np.any(comp_vec != 0.0):
        gm = np.asarray(spec.jump_coeff(X), dtype=float)[:, j, :] @ comp_vec
    else:
        gm = np.zeros(X.shape[0])

    log = path.jumps if path.jumps is not None else JumpLog.empty(path.dim)
    disp_j = log.displacements[:, j] if len(log) else np.empty(0)
    steps = log.step_index

    inc_j = np.diff(path.states[:, j])
    cont_inc = inc_j.copy()
    if len(log):
        np.subtract.at(cont_inc, steps, disp_j)

    out = []
    for g in test_fns:
        gX = np.asarray(g(X), dtype=float)
        g_pre = np.asarray(g(log.pre_states), dtype=float) if len(log) else np.empty(0)
        H = float(np.dot(gX, b) * dt / sqT)
        M = float(np.dot(gX, mart) / sqT)
        J = float((np.dot(g_pre, disp_j) - np.dot(gX, gm) * dt) / sqT)
        total = float((np.dot(gX, cont_inc) + np.dot(g_pre, disp_j)) / sqT)
        total_grid = float(np.dot(gX, inc_j) / sqT)
        out.append(FunctionalDecomposition(H, M, J, total, total_grid))
    return out


# ---------------------------------------------------------------------------
# path export / import


def save_path(path: PathRecord, base):
    """Write a record either as ``.npz`` (full, including instrumentation) or
    as CSV (t, X1..Xd) plus a jump-event sidecar and a JSON meta sidecar."""
    base = Path(base)
    if base.suffix == ".npz":
        payload = dict(t_grid=path.t_grid, states=path.states, seed=path.seed,
                       dt=path.dt, model_name=path.model_name or "")
        if path.jumps is not None:
            payload.update(jump_times=path.jumps.times, jump_marks=path.jumps.marks,
                           jump_disps=path.jumps.displacements,
                           jump_pre=path.jumps.pre_states,
                           jump_steps=path.jumps.step_index)
        if path.brownian_increments is not None:
            payload["dW"] = path.brownian_increments
        np.savez_compressed(base, **payload)
        return base

    d = path.dim
    with open(base, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t"] + [f"X{i + 1}" for i in range(d)])
        for i in range(path.states.shape[0]):
            w.writerow([repr(float(path.t_grid[i]))]
                       + [repr(float(v)) for v in path.states[i]])
    if path.jumps is not None:
        jf = base.with_suffix(base.suffix + ".jumps.csv")
        with open(jf, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["time"] + [f"mark{i + 1}" for i in range(d)]
                       + [f"displacement{i + 1}" for i in range(d)])
            for k in range(len(path.jumps)):
                w.writerow([repr(float(path.jumps.times[k]))]
                           + [repr(float(v)) for v in path.jumps.marks[k]]
                           + [repr(float(v)) for v in path.jumps.displacements[k]])
    meta = dict(seed=path.seed, dt=path.dt, T=path.T, dim=d,
                model_name=path.model_name)
    with open(base.with_suffix(base.suffix + ".meta.json"), "w") as f:
        json.dump(meta, f, indent=1)
    return base


def load_path(base) -> PathRecord:
    base = Path(base)
    if base.suffix == ".npz":
        z = np.load(base, allow_pickle=False)
        jumps = None
        if "jump_times" in z:
            jumps = JumpLog(times=z["jump_times"], marks=z["jump_marks"],
                            displacements=z["jump_disps"], pre_states=z["jump_pre"],
                            step_index=z["jump_steps"])
        t = z["t_grid"]
        return PathRecord(t_grid=t, states=z["states"], jumps=jumps,
                          seed=int(z["seed"]), dt=float(z["dt"]),
                          brownian_increments=z["dW"] if "dW" in z else None,
                          model_name=str(z["model_name"]) or None)

    data = np.genfromtxt(base, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    t = data[:, 0]
    states = data[:, 1:]
    dt = float(t[1] - t[0]) if t.shape[0] > 1 else float(t[0])
    jumps = None
    jf = base.with_suffix(base.suffix + ".jumps.csv")
    if jf.exists():
        d = states.shape[1]
        raw = np.genfromtxt(jf, delimiter=",", skip_header=1)
        raw = raw.reshape(-1, 1 + 2 * d)
        times = raw[:, 0]
        # times lie in (t_i, t_{i+1}]; recover the step index from the grid
        steps = np.searchsorted(t, times, side="left") - 1
        # pre-states are not part of the observable CSV record
        jumps = JumpLog(times=times, marks=raw[:, 1:1 + d],
                        displacements=raw[:, 1 + d:1 + 2 * d],
                        pre_states=np.full((times.shape[0], d), np.nan),
                        step_index=steps.astype(np.int64))
    meta_file = base.with_suffix(base.suffix + ".meta.json")
    seed, model_name = -1, None
    if meta_file.exists():
        meta = json.loads(meta_file.read_text())
        seed = int(meta.get("seed", -1))
        model_name = meta.get("model_name")
    return PathRecord(t_grid=t, states=states, jumps=jumps, seed=seed,
                      dt=dt, model_name=model_name)
