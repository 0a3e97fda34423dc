"""Executable semantics: numerical trajectories, guarded orbit sampling and
a seeded Monte-Carlo interpreter.

The simulator is a falsifier and cross-check, not a prover.  Guards are
monitored at sample points and the admissible time set is truncated at the
first failure, which under-approximates the true orbit; that is the safe
direction for differential testing.  Violation checks accept a small
positive slack so integrator round-off at a boundary does not count as a
counterexample (default 1e-9, documented here rather than hidden).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .expr import Number, Pred, compile_expr, compile_pred
from .store import Store
from .syntax import (
    Assign,
    Choice,
    Evol,
    HybridProgram,
    If,
    Loop,
    Midpoint,
    Ode,
    Seq,
    Spec,
    Star,
    Test,
    TimeDomain,
    While,
)

DEFAULT_HORIZON = 100.0
DEFAULT_STEP = 1e-2
WHILE_CAP = 100_000
VIOLATION_SLACK = 1e-9


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Infeasible:
    """A run that died on a false test or an immediately violated guard."""

    reason: str


@dataclass
class Trajectory:
    step: float
    samples: list[tuple[float, Store]]

    def final(self) -> tuple[float, Store]:
        return self.samples[-1]


@dataclass
class OrbitSample:
    origin: Store
    samples: list[tuple[float, Store]]
    guard_fail_time: Optional[float]


def _check_finite(values) -> None:
    for v in values:
        if not math.isfinite(v):
            raise SimulationError("numerical overflow during integration")


def _rk4_step(state: list, rates: list, idx: list, dt: float) -> list:
    def deriv(vec):
        return [f(vec) for f in rates]

    k1 = deriv(state)
    s2 = list(state)
    for j, i in enumerate(idx):
        s2[i] = state[i] + 0.5 * dt * k1[j]
    k2 = deriv(s2)
    s3 = list(state)
    for j, i in enumerate(idx):
        s3[i] = state[i] + 0.5 * dt * k2[j]
    k3 = deriv(s3)
    s4 = list(state)
    for j, i in enumerate(idx):
        s4[i] = state[i] + dt * k3[j]
    k4 = deriv(s4)
    out = list(state)
    for j, i in enumerate(idx):
        out[i] = state[i] + dt / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j])
    return out


class Simulator:
    """Caches compiled right-hand sides so repeated runs stay cheap."""

    def __init__(
        self,
        var_order: tuple[str, ...],
        parameters: Mapping[str, Number],
        step: float = DEFAULT_STEP,
        horizon: float = DEFAULT_HORIZON,
        star_bound: int = 16,
    ):
        self.var_order = tuple(var_order)
        self.parameters = dict(parameters)
        self.step = step
        self.horizon = horizon
        self.star_bound = star_bound
        self._expr_cache: dict = {}
        self._pred_cache: dict = {}

    # -- compilation caches --------------------------------------------------

    def _fn(self, e):
        hit = self._expr_cache.get(e)
        if hit is None:
            hit = compile_expr(e, self.var_order, self.parameters)
            self._expr_cache[e] = hit
        return hit

    def _pf(self, p: Pred):
        hit = self._pred_cache.get(p)
        if hit is None:
            hit = compile_pred(p, self.var_order, self.parameters)
            self._pred_cache[p] = hit
        return hit

    def _as_list(self, s: Store) -> list[float]:
        d = s.as_dict()
        return [float(d[name]) for name in self.var_order]

    def _as_store(self, values) -> Store:
        return Store(tuple(zip(self.var_order, values)))

    def _end_time(self, dom: TimeDomain) -> float:
        if dom.bound is None:
            return self.horizon
        from .expr import eval_expr

        return float(eval_expr(dom.bound, {}, self.parameters))

    # -- integration ----------------------------------------------------------

    def integrate(self, field_map, s: Store, dom: TimeDomain, step: float | None = None) -> Trajectory:
        """Classical fourth-order Runge-Kutta at a fixed step.

        Local error is O(step^5) per step; unbounded time domains are
        truncated at the configured horizon.
        """
        h = step or self.step
        if h <= 0:
            raise ValueError("step size must be positive")
        names = [x for x, _ in field_map]
        rates = [self._fn(e) for _, e in field_map]
        idx = [self.var_order.index(x) for x in names]

        state = self._as_list(s)
        t_end = self._end_time(dom)
        samples = [(0.0, list(state))]
        t = 0.0
        while t < t_end - 1e-15:
            dt = min(h, t_end - t)
            state = _rk4_step(state, rates, idx, dt)
            _check_finite(state)
            t += dt
            samples.append((t, list(state)))
        return Trajectory(h, [(tt, self._as_store(vec)) for tt, vec in samples])

    def flow_samples(self, flow_comps, s: Store, dom: TimeDomain, step: float | None = None) -> Trajectory:
        """Evaluate an explicit flow on the sample grid (no integration)."""
        h = step or self.step
        fns = [(x, self._fn(e)) for x, e in flow_comps]
        listed = {x for x, _ in flow_comps}
        base = self._as_list(s)
        t_end = self._end_time(dom)
        samples = []
        t = 0.0
        while True:
            vec = list(base)
            for x, f in fns:
                vec[self.var_order.index(x)] = f(base, t)
            _check_finite(vec)
            samples.append((t, self._as_store(vec)))
            if t >= t_end - 1e-15:
                break
            t = min(t + h, t_end)
        return Trajectory(h, samples)

    def guarded_orbit(self, src: Union[Ode, Evol], s: Store, step: float | None = None) -> OrbitSample:
        """Sampled reachable set: the longest prefix of the trajectory on
        which the guard held at every earlier sample too.  Sampling stops
        at the first guard failure (conservative truncation), so unbounded
        domains cost only as much as the guard allows."""
        h = step or self.step
        gfn = self._pf(src.guard)
        t_end = self._end_time(src.dom)
        admissible: list[tuple[float, Store]] = []
        fail_time: Optional[float] = None

        if isinstance(src, Evol):
            fns = [(self.var_order.index(x), self._fn(e)) for x, e in src.flow.comps]
            base = self._as_list(s)
            t = 0.0
            while True:
                vec = list(base)
                for i, f in fns:
                    vec[i] = f(base, t)
                _check_finite(vec)
                if not gfn(vec, t):
                    fail_time = t
                    break
                admissible.append((t, self._as_store(vec)))
                if t >= t_end - 1e-15:
                    break
                t = min(t + h, t_end)
            return OrbitSample(s, admissible, fail_time)

        names = [x for x, _ in src.field.derivs]
        rates = [self._fn(e) for _, e in src.field.derivs]
        idx = [self.var_order.index(x) for x in names]
        state = self._as_list(s)
        t = 0.0
        while True:
            _check_finite(state)
            if not gfn(state, t):
                fail_time = t
                break
            admissible.append((t, self._as_store(state)))
            if t >= t_end - 1e-15:
                break
            dt = min(h, t_end - t)
            state = _rk4_step(state, rates, idx, dt)
            t += dt
        return OrbitSample(s, admissible, fail_time)

    # -- interpreter -----------------------------------------------------------

    def run(
        self,
        prog: HybridProgram,
        s: Store,
        rng: random.Random,
        trace: Optional[list] = None,
        clock: float = 0.0,
    ) -> Union[Store, Infeasible]:
        """One Monte-Carlo execution: choices uniform, star iterations a
        uniform count up to the bound, evolutions a uniform admissible
        sample time.  With ``trace`` given, evolution samples are appended
        as (global time, store) rows."""
        out = self._run(prog, s, rng, trace, clock)
        return out[0] if isinstance(out, tuple) else out

    def _run(self, prog, s, rng, trace, clock):
        if isinstance(prog, Assign):
            return (prog.update.apply(s, self.parameters), clock)
        if isinstance(prog, Test):
            if self._pf(prog.cond)(self._as_list(s)):
                return (s, clock)
            return Infeasible("failed test")
        if isinstance(prog, Midpoint):
            return (s, clock)
        if isinstance(prog, Seq):
            cur, t = s, clock
            for part in prog.parts:
                res = self._run(part, cur, rng, trace, t)
                if isinstance(res, Infeasible):
                    return res
                cur, t = res
            return (cur, t)
        if isinstance(prog, Choice):
            pick = rng.randrange(len(prog.parts))
            return self._run(prog.parts[pick], s, rng, trace, clock)
        if isinstance(prog, (Star, Loop)):
            count = rng.randint(0, self.star_bound)
            cur, t = s, clock
            for _ in range(count):
                res = self._run(prog.body, cur, rng, trace, t)
                if isinstance(res, Infeasible):
                    return res
                cur, t = res
            return (cur, t)
        if isinstance(prog, If):
            branch = prog.then if self._pf(prog.cond)(self._as_list(s)) else prog.orelse
            return self._run(branch, s, rng, trace, clock)
        if isinstance(prog, While):
            cur, t = s, clock
            for _ in range(WHILE_CAP):
                if not self._pf(prog.cond)(self._as_list(cur)):
                    return (cur, t)
                res = self._run(prog.body, cur, rng, trace, t)
                if isinstance(res, Infeasible):
                    return res
                cur, t = res
            return Infeasible("while iteration cap reached")
        if isinstance(prog, (Ode, Evol)):
            orbit = self.guarded_orbit(prog, s)
            if not orbit.samples:
                return Infeasible("guard violated at entry")
            pick = rng.randrange(len(orbit.samples))
            if trace is not None:
                for t_local, st in orbit.samples[: pick + 1]:
                    trace.append((clock + t_local, st))
            dt, final = orbit.samples[pick]
            return (final, clock + dt)
        if isinstance(prog, Spec):
            raise SimulationError("specification statements are not executable")
        raise SimulationError(f"cannot interpret {prog!r}")

    def check(self, p: Pred, s: Store, slack: float = 0.0) -> bool:
        return self._pf(p)(self._as_list(s), 0.0, slack)


def export_trajectory_csv(traj: Trajectory, fh) -> None:
    names = traj.samples[0][1].names() if traj.samples else ()
    fh.write("time," + ",".join(names) + "\n")
    for t, st in traj.samples:
        row = [repr(t)] + [repr(float(v)) for _, v in st.items]
        fh.write(",".join(row) + "\n")
