"""Continuous-time dynamics: legal rings, transition enumeration, KMC.

Two engines simulate the same law.  The reference engine replays the
graphical construction literally (rate-1 marked Poisson clock per site,
mark drawn from nu, state updated only on a legal ring); the aggregate
engine is total-rate Gillespie sampling over the enumerated transitions.
They agree in law, not pathwise, and a trajectory records which one
produced it.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .lattice import (
    NEUTRAL,
    CapExceeded,
    Configuration,
    SpecError,
    constraint_code,
)


@dataclass(frozen=True)
class Transition:
    site: tuple
    h: tuple
    to_vacancy: bool       # False: h -> neutral
    rate: float


@dataclass
class Trajectory:
    """A simulated path: initial state, applied flips, final state."""

    initial: Configuration
    events: list            # (time, site_index, old_code, new_code)
    final: Configuration
    t_max: float
    engine: str

    def replay(self):
        """Re-apply the event list to the initial state; returns the result."""
        cfg = self.initial.copy()
        for _, idx, old, new in self.events:
            if cfg.states[idx] != old:
                raise SpecError(f"replay mismatch at site index {idx}")
            cfg.states[idx] = new
        return cfg


def legal_ring(spec, cfg, x, mark):
    """Outcome of a ring with the given mark at x, or None when illegal.

    Legal cases: mark is neutral and x holds a facilitated vacancy; mark is a
    facilitated vacancy type and x is neutral; mark equals the (facilitated)
    current vacancy, which changes nothing.  A vacancy never turns directly
    into another vacancy.
    """
    cur = cfg.get(x)
    if mark == NEUTRAL:
        if cur != NEUTRAL and constraint_code(spec, cfg, tuple(x), cur):
            return NEUTRAL
        return None
    if cur == NEUTRAL:
        if constraint_code(spec, cfg, tuple(x), mark):
            return mark
        return None
    if mark == cur and constraint_code(spec, cfg, tuple(x), cur):
        return cur
    return None


def enumerate_transitions(spec, cfg, rates=None):
    """All positive-rate flips of a configuration.

    For every site x and type h with c_x^h = 1: star -> h at rate q_h when x
    is neutral, h -> star at rate p when x holds h.  ``rates`` optionally
    overrides the rate lookup (diagnostic hook used by negative-control
    tests); it maps (to_vacancy, code) -> rate.
    """
    out = []
    region = cfg.region
    for x in region.sites:
        cur = cfg.states[region.index(x)]
        if cur == NEUTRAL:
            for code in range(1, spec.n_states):
                if constraint_code(spec, cfg, x, code):
                    r = spec.q_of(code) if rates is None else rates(True, code)
                    out.append(Transition(x, spec.type_of(code), True, r))
        else:
            if constraint_code(spec, cfg, x, int(cur)):
                r = spec.p if rates is None else rates(False, int(cur))
                out.append(Transition(x, spec.type_of(int(cur)), False, r))
    return out


def kmc_run(spec, cfg0, t_max, rng, engine="clock"):
    """Simulate the finite-volume process up to time t_max.

    ``engine="clock"`` replays the graphical construction exactly (per-site
    rate-1 clocks; no-op rings advance the clocks but are not recorded);
    ``engine="gillespie"`` samples the embedded jump chain from the total
    rate.  Both are deterministic given the rng state.
    """
    if t_max < 0:
        raise SpecError("t_max must be >= 0")
    if engine == "clock":
        return _run_clock(spec, cfg0, t_max, rng)
    if engine == "gillespie":
        return _run_gillespie(spec, cfg0, t_max, rng)
    raise SpecError(f"unknown engine {engine!r}")


def _run_clock(spec, cfg0, t_max, rng):
    cfg = cfg0.copy()
    region = cfg.region
    n = region.size
    probs = spec.state_probs()
    cum = np.cumsum(probs)
    heap = []
    for i in range(n):
        heapq.heappush(heap, (rng.exponential(1.0), i))
    events = []
    while heap:
        t, i = heapq.heappop(heap)
        if t > t_max:
            break
        mark = int(np.searchsorted(cum, rng.random(), side="right"))
        new = legal_ring(spec, cfg, region.coord(i), mark)
        if new is not None and new != cfg.states[i]:
            events.append((t, i, int(cfg.states[i]), int(new)))
            cfg.states[i] = new
        heapq.heappush(heap, (t + rng.exponential(1.0), i))
    return Trajectory(cfg0.copy(), events, cfg, t_max, engine="clock")


def _run_gillespie(spec, cfg0, t_max, rng):
    cfg = cfg0.copy()
    region = cfg.region
    t = 0.0
    events = []
    while True:
        transitions = enumerate_transitions(spec, cfg)
        if not transitions:
            break
        total = sum(tr.rate for tr in transitions)
        t += rng.exponential(1.0 / total)
        if t > t_max:
            break
        u = rng.random() * total
        acc = 0.0
        chosen = transitions[-1]
        for tr in transitions:
            acc += tr.rate
            if u <= acc:
                chosen = tr
                break
        i = region.index(chosen.site)
        old = int(cfg.states[i])
        new = spec.code(chosen.h) if chosen.to_vacancy else NEUTRAL
        events.append((t, i, old, new))
        cfg.states[i] = new
    return Trajectory(cfg0.copy(), events, cfg, t_max, engine="gillespie")


def enumerate_state_space(spec, region, cap=10 ** 6):
    """Mixed-radix enumeration of S(G)^region as a (n_configs, n_sites) array."""
    base = spec.n_states
    n = region.size
    total = base ** n
    if total > cap:
        raise CapExceeded(f"|Omega| = {total} exceeds cap {cap}")
    idx = np.arange(total)
    strides = base ** np.arange(n)
    return ((idx[:, None] // strides[None, :]) % base).astype(np.uint8)


def constraint_table(spec, region, boundary, states):
    """Facilitation indicators c_x^h over many configurations at once.

    ``states`` is (n_configs, n_sites); the result is boolean of shape
    (n_configs, n_sites, |G|).
    """
    from .lattice import AllFacilitating, Frozen

    n_cfg, n_sites = states.shape
    out = np.zeros((n_cfg, n_sites, spec.n_states - 1), dtype=bool)
    for si, x in enumerate(region.sites):
        for code in range(1, spec.n_states):
            if isinstance(boundary, AllFacilitating) and boundary.covers(x):
                out[:, si, code - 1] = True
                continue
            col = out[:, si, code - 1]
            for v in spec.prop_dirs(code):
                y = tuple(a - b for a, b in zip(x, v))
                if y in region:
                    np.logical_or(col, states[:, region.index(y)] == code, out=col)
                elif isinstance(boundary, Frozen) and boundary.state(y) == code:
                    col[:] = True
    return out


def detailed_balance_check(spec, region, boundary, rates=None, cap=10 ** 6):
    """Max |mu(w) r(w->e) - mu(e) r(e->w)| over all single-site transitions.

    Exact reversibility holds because c_x^h never reads the flipping site:
    mu(w) c q_h against mu(e) c p cancel to p q_h times the shared weight.
    The optional ``rates`` hook deliberately breaks this for negative
    controls (and falls back to the scalar transition enumeration).
    """
    if rates is not None:
        return _detailed_balance_scalar(spec, region, boundary, rates, cap)
    states = enumerate_state_space(spec, region, cap=cap)
    probs = spec.state_probs()
    mu = np.prod(probs[states], axis=1)
    cx = constraint_table(spec, region, boundary, states)
    strides = spec.n_states ** np.arange(region.size, dtype=np.int64)
    idx = np.arange(states.shape[0], dtype=np.int64)
    worst = 0.0
    for si in range(region.size):
        here = states[:, si].astype(np.int64)
        for code in range(1, spec.n_states):
            sel = cx[:, si, code - 1] & (here == NEUTRAL)
            if not np.any(sel):
                continue
            lo = idx[sel]
            hi = lo + code * strides[si]
            flux = np.abs(mu[lo] * spec.q_of(code) - mu[hi] * spec.p)
            worst = max(worst, float(flux.max()))
    return worst


def _detailed_balance_scalar(spec, region, boundary, rates, cap):
    states = enumerate_state_space(spec, region, cap=cap)
    probs = spec.state_probs()
    mu = np.prod(probs[states], axis=1)
    strides = spec.n_states ** np.arange(region.size, dtype=np.int64)
    worst = 0.0
    for i in range(states.shape[0]):
        cfg = Configuration(region, states[i], boundary)
        for tr in enumerate_transitions(spec, cfg, rates=rates):
            j_site = region.index(tr.site)
            new_code = spec.code(tr.h) if tr.to_vacancy else NEUTRAL
            j = i + (new_code - int(states[i, j_site])) * int(strides[j_site])
            back_rate = 0.0
            cfg_other = Configuration(region, states[j], boundary)
            for back in enumerate_transitions(spec, cfg_other, rates=rates):
                if (
                    back.site == tr.site
                    and back.h == tr.h
                    and back.to_vacancy != tr.to_vacancy
                ):
                    back_rate = back.rate
                    break
            worst = max(worst, abs(mu[i] * tr.rate - mu[j] * back_rate))
    return worst


def empirical_marginals(trajectory, burn_in=0.0, n_states=None):
    """Per-site time-averaged state occupancy on (burn_in, t_max].

    Returns an (n_sites, n_states) array whose rows sum to one.
    """
    t_max = trajectory.t_max
    if not t_max > burn_in:
        raise SpecError("trajectory total time must exceed burn_in")
    cfg = trajectory.initial.copy()
    n = cfg.region.size
    if n_states is None:
        n_states = int(max(cfg.states.max(initial=0) + 1, 2))
        for _, _, old, new in trajectory.events:
            n_states = max(n_states, old + 1, new + 1)
    occ = np.zeros((n, n_states))
    last = np.full(n, burn_in)
    for t, i, old, new in trajectory.events:
        if cfg.states[i] != old:
            raise SpecError("trajectory does not replay")
        if t > burn_in:
            occ[i, old] += t - last[i]
            last[i] = t
        cfg.states[i] = new
    for i in range(n):
        occ[i, cfg.states[i]] += t_max - last[i]
    return occ / (t_max - burn_in)
