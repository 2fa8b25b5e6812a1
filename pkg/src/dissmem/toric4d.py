"""Event-driven sector Monte Carlo of the 4D toric code under the quantum
Toom rule, plus the sweep-order recovery decoder and the two lattice
experiments (dynamic lifetime, static decoder threshold).

The depolarizing noise and the Toom Lindblad terms split into two
non-interacting sectors (X errors / edge syndromes and Z errors / cube
syndromes) that are exactly mapped onto each other by the lattice duality, so
one sector simulation serves both. A face is *active* when both of its
lower-side syndromes are violated; correction events on inactive faces act as
the identity and are excluded from the rates, which is statistically exact.

Hot loops are numba-compiled over the precomputed incidence arrays; the
module-level Python API mirrors them one-to-one for direct testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from . import engine
from .engine import TrialOutcome
from .lattice4d import CellId, Lattice4D, build

CONVENTION_HALF = "half"
CONVENTION_FULL = "full"


@dataclass
class ToomParams:
    """Simulation parameters; all rates in events per unit time."""

    N: int
    gamma_c: float = 1.0
    gamma_eps: float = 0.0
    check_interval: float | None = None  # defaults to 1/gamma_c
    t_max: float = 1e5
    max_sweeps: int | None = None  # defaults to 4N
    seed: int = 0
    # depolarization -> sector mapping: 'half' randomizes the sector bit
    # (flip probability 1/2 per noise event), 'full' flips at every event
    noise_convention: str = CONVENTION_HALF
    halved_noise: bool = False  # rate Gamma_eps/2 deterministic-flip variant
    all_observables: bool = True  # track all six plane observables

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.gamma_c < 0 or self.gamma_eps < 0:
            raise ValueError("rates must be >= 0")
        if self.check_interval is None:
            self.check_interval = 1.0 / self.gamma_c if self.gamma_c > 0 else 1.0
        if self.check_interval <= 0:
            raise ValueError("check_interval must be > 0")
        if self.max_sweeps is None:
            self.max_sweeps = 4 * self.N
        if self.noise_convention not in (CONVENTION_HALF, CONVENTION_FULL):
            raise ValueError(f"unknown noise convention {self.noise_convention!r}")

    def noise_params(self) -> tuple[float, float]:
        """(per-face event rate, flip probability per event)."""
        if self.noise_convention == CONVENTION_FULL:
            return self.gamma_eps, 1.0
        if self.halved_noise:
            return self.gamma_eps * 0.5, 1.0
        return self.gamma_eps, 0.5


# -- numba kernels ----------------------------------------------------------

@njit(cache=True)
def _flip_kernel(f, err, synd, fe, ef, active_pos, active_list, n_active):
    """Toggle face f; update syndromes and the active-face set incrementally."""
    err[f] ^= 1
    for i in range(4):
        synd[fe[f, i]] ^= 1
    for i in range(4):
        e = fe[f, i]
        for j in range(6):
            g = ef[e, j]
            want = synd[fe[g, 0]] == 1 and synd[fe[g, 1]] == 1
            p = active_pos[g]
            if want and p < 0:
                active_pos[g] = n_active
                active_list[n_active] = g
                n_active += 1
            elif (not want) and p >= 0:
                last = active_list[n_active - 1]
                active_list[p] = last
                active_pos[last] = p
                active_pos[g] = -1
                n_active -= 1
    return n_active


@njit(cache=True)
def _sweep_kernel(err, synd, fe):
    """One lattice sweep in ascending face index; flips propagate in-sweep."""
    flips = 0
    for f in range(err.shape[0]):
        if synd[fe[f, 0]] == 1 and synd[fe[f, 1]] == 1:
            err[f] ^= 1
            for i in range(4):
                synd[fe[f, i]] ^= 1
            flips += 1
    return flips


@njit(cache=True)
def _recover_kernel(err, synd, fe, max_sweeps):
    """Sweep until a fixpoint or the sweep cap. Returns (flips, converged)."""
    total = 0
    for _ in range(max_sweeps):
        flips = _sweep_kernel(err, synd, fe)
        total += flips
        if flips == 0:
            return total, True
    return total, False


@njit(cache=True)
def _plane_parities(err, support):
    out = np.zeros(support.shape[0], np.uint8)
    for p in range(support.shape[0]):
        s = np.uint8(0)
        for i in range(support.shape[1]):
            s ^= err[support[p, i]]
        out[p] = s
    return out


@njit(cache=True)
def _syndromes_from_scratch(err, fe, n_edges):
    synd = np.zeros(n_edges, np.uint8)
    for f in range(err.shape[0]):
        if err[f]:
            for i in range(4):
                synd[fe[f, i]] ^= 1
    return synd


@njit(cache=True)
def _lifetime_kernel(fe, ef, support, n_edges, gamma_c, noise_event_rate,
                     flip_prob, check_interval, t_max, max_sweeps,
                     all_observables, rng):
    nf = fe.shape[0]
    err = np.zeros(nf, np.uint8)
    synd = np.zeros(n_edges, np.uint8)
    active_pos = np.full(nf, -1, np.int64)
    active_list = np.empty(nf, np.int64)
    n_active = 0
    err2 = np.empty(nf, np.uint8)
    synd2 = np.empty(n_edges, np.uint8)

    noise_rate = nf * noise_event_rate
    t = 0.0
    next_check = check_interval
    n_noise = 0
    n_corr = 0
    n_checks = 0
    n_nonconverged = 0

    while True:
        r_tot = noise_rate + n_active * gamma_c
        if r_tot > 0.0:
            t_event = t + rng.exponential(1.0 / r_tot)
        else:
            t_event = np.inf
        horizon = min(t_event, t_max)
        while next_check <= horizon:
            err2[:] = err
            synd2[:] = synd
            _, conv = _recover_kernel(err2, synd2, fe, max_sweeps)
            if not conv:
                n_nonconverged += 1
            par = _plane_parities(err2, support)
            n_checks += 1
            failed = False
            if all_observables:
                for p in range(par.shape[0]):
                    if par[p] == 1:
                        failed = True
            else:
                failed = par[0] == 1
            if failed:
                return next_check, False, n_noise, n_corr, n_checks, n_nonconverged
            next_check += check_interval
        if t_event >= t_max:
            return t_max, True, n_noise, n_corr, n_checks, n_nonconverged
        u = rng.random() * r_tot
        if u < noise_rate:
            f = rng.integers(0, nf)
            n_noise += 1
            if flip_prob >= 1.0 or rng.random() < flip_prob:
                n_active = _flip_kernel(f, err, synd, fe, ef,
                                        active_pos, active_list, n_active)
        else:
            f = active_list[rng.integers(0, n_active)]
            n_corr += 1
            n_active = _flip_kernel(f, err, synd, fe, ef,
                                    active_pos, active_list, n_active)
        t = t_event


@njit(cache=True)
def _static_kernel(fe, support, n_edges, flip_prob, max_sweeps, rng):
    nf = fe.shape[0]
    err = np.zeros(nf, np.uint8)
    for f in range(nf):
        if rng.random() < flip_prob:
            err[f] = 1
    synd = _syndromes_from_scratch(err, fe, n_edges)
    _, conv = _recover_kernel(err, synd, fe, max_sweeps)
    par = _plane_parities(err, support)
    success = True
    for p in range(par.shape[0]):
        if par[p] == 1:
            success = False
    return success, conv


# -- sector state -----------------------------------------------------------

class SectorState:
    """Binary error field over faces with incrementally maintained edge
    syndromes and active-face set for one commuting sector."""

    def __init__(self, lattice: Lattice4D, dual: bool = False):
        self.lattice = lattice
        self.dual = dual
        fe, ef, support = lattice.sector_tables(dual=dual)
        self.face_table = np.ascontiguousarray(fe)
        self.cell_table = np.ascontiguousarray(ef)
        self.support = np.ascontiguousarray(support)
        self.n_syndromes = self.cell_table.shape[0]
        self.err = np.zeros(lattice.n_faces, np.uint8)
        self.synd = np.zeros(self.n_syndromes, np.uint8)
        self.active_pos = np.full(lattice.n_faces, -1, np.int64)
        self.active_list = np.empty(lattice.n_faces, np.int64)
        self.n_active = 0

    def copy(self) -> "SectorState":
        other = SectorState.__new__(SectorState)
        other.lattice = self.lattice
        other.dual = self.dual
        other.face_table = self.face_table
        other.cell_table = self.cell_table
        other.support = self.support
        other.n_syndromes = self.n_syndromes
        other.err = self.err.copy()
        other.synd = self.synd.copy()
        other.active_pos = self.active_pos.copy()
        other.active_list = self.active_list.copy()
        other.n_active = self.n_active
        return other

    @property
    def active_faces(self) -> set:
        return set(int(f) for f in self.active_list[:self.n_active])

    def _face_index(self, f) -> int:
        if isinstance(f, CellId):
            return self.lattice.face_index(f)
        return int(f)

    def recompute(self):
        """From-scratch syndromes and active set, for consistency checks."""
        synd = _syndromes_from_scratch(self.err, self.face_table, self.n_syndromes)
        active = set(
            f for f in range(self.err.shape[0])
            if synd[self.face_table[f, 0]] == 1 and synd[self.face_table[f, 1]] == 1
        )
        return synd, active


def apply_flip(state: SectorState, f) -> None:
    """Toggle a face error bit; syndromes and active statuses of the <= 24
    faces incident to the touched syndromes are updated incrementally."""
    idx = state._face_index(f)
    state.n_active = _flip_kernel(idx, state.err, state.synd,
                                  state.face_table, state.cell_table,
                                  state.active_pos, state.active_list,
                                  state.n_active)


EVENT_NOISE = "noise"
EVENT_CORRECTION = "correction"


def kmc_step(state: SectorState, params: ToomParams, rng: np.random.Generator,
             t: float):
    """One exact KMC step: returns (t', event kind). Reports stasis when all
    rates vanish."""
    nf = state.err.shape[0]
    event_rate, flip_prob = params.noise_params()
    noise_rate = nf * event_rate
    r_tot = noise_rate + state.n_active * params.gamma_c
    if r_tot <= 0.0:
        return math.inf, engine.STASIS
    t_next = t + rng.exponential(1.0 / r_tot)
    u = rng.random() * r_tot
    if u < noise_rate:
        f = int(rng.integers(0, nf))
        if flip_prob >= 1.0 or rng.random() < flip_prob:
            apply_flip(state, f)
        return t_next, EVENT_NOISE
    f = int(state.active_list[rng.integers(0, state.n_active)])
    apply_flip(state, f)
    return t_next, EVENT_CORRECTION


def recovery_sweep(state: SectorState) -> int:
    """One sweep through the lattice in the canonical order; flips every face
    whose two lower-side syndromes are violated, propagating within the
    sweep. Returns the number of flips."""
    flips = _sweep_kernel(state.err, state.synd, state.face_table)
    if flips:
        # active bookkeeping is rebuilt wholesale after a sweep
        synd, active = state.recompute()
        state.active_pos[:] = -1
        state.n_active = 0
        for f in sorted(active):
            state.active_pos[f] = state.n_active
            state.active_list[state.n_active] = f
            state.n_active += 1
    return flips


def full_recovery(state: SectorState, max_sweeps: int | None = None):
    """Sweep a copy of the state to a fixpoint (or the sweep cap).

    Returns (recovered_state, converged); non-convergence is reported, never
    hidden.
    """
    if max_sweeps is None:
        max_sweeps = 4 * state.lattice.N
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    out = state.copy()
    _, converged = _recover_kernel(out.err, out.synd, out.face_table, max_sweeps)
    return out, converged


def ec_observable(state: SectorState, p_rank: int, max_sweeps: int | None = None):
    """Error-corrected plane observable for face-orientation rank `p_rank`.

    Runs full recovery on a copy and returns (+1 or -1, converged): the sign
    of the corrected error parity on the logical support plane.
    """
    recovered, converged = full_recovery(state, max_sweeps)
    par = _plane_parities(recovered.err, state.support)
    return (-1 if par[p_rank] else 1), converged


# -- experiments ------------------------------------------------------------

def lifetime_trial(params: ToomParams, rng: np.random.Generator,
                   lattice: Lattice4D | None = None,
                   dual: bool = False) -> TrialOutcome:
    """One dynamic-lifetime trial: start error-free, alternate KMC evolution
    with EC-observable checks every check_interval; fail at the first check
    whose observable differs from +1, censor at t_max."""
    if lattice is None:
        lattice = build(params.N)
    fe, ef, support = lattice.sector_tables(dual=dual)
    event_rate, flip_prob = params.noise_params()
    failure_time, censored, n_noise, n_corr, n_checks, n_nonconv = _lifetime_kernel(
        np.ascontiguousarray(fe), np.ascontiguousarray(ef),
        np.ascontiguousarray(support), ef.shape[0],
        params.gamma_c, event_rate, flip_prob, params.check_interval,
        params.t_max, params.max_sweeps,
        params.all_observables, rng)
    out = TrialOutcome(failure_time=failure_time, censored=censored,
                       n_noise_events=n_noise, n_correction_events=n_corr,
                       n_checks=n_checks)
    out.n_nonconverged = n_nonconv
    return out


def static_trial(N_or_lattice, q: float, convention: str,
                 rng: np.random.Generator, max_sweeps: int | None = None,
                 dual: bool = False) -> bool:
    """One static decoder trial: independent face depolarization followed by
    full recovery; success iff every plane observable is recovered."""
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    if convention not in (CONVENTION_HALF, CONVENTION_FULL):
        raise ValueError(f"unknown convention {convention!r}")
    lattice = N_or_lattice if isinstance(N_or_lattice, Lattice4D) else build(N_or_lattice)
    if max_sweeps is None:
        max_sweeps = 4 * lattice.N
    flip_prob = q / 2.0 if convention == CONVENTION_HALF else q
    fe, _, support = lattice.sector_tables(dual=dual)
    success, _ = _static_kernel(np.ascontiguousarray(fe),
                                np.ascontiguousarray(support),
                                lattice.n_edges, flip_prob, max_sweeps, rng)
    return bool(success)


def _lifetime_trial_fn(params, lattice, rng, index):
    return lifetime_trial(params, rng, lattice=lattice)


def _static_trial_fn(lattice, q, convention, max_sweeps, rng, index):
    return static_trial(lattice, q, convention, rng, max_sweeps=max_sweeps)


def lifetime_estimate(params: ToomParams, trials: int,
                      parallelism: int | None = None,
                      lattice: Lattice4D | None = None) -> engine.Estimate:
    """Mean lifetime over independent seeded trials."""
    from functools import partial
    if lattice is None:
        lattice = build(params.N)
    outcomes = engine.run_trials(partial(_lifetime_trial_fn, params, lattice),
                                 trials, params.seed, parallelism)
    return engine.estimate_times(outcomes)


def static_estimate(N: int, q: float, convention: str, trials: int, seed: int,
                    parallelism: int | None = None,
                    lattice: Lattice4D | None = None,
                    max_sweeps: int | None = None) -> engine.Estimate:
    """Recovery success probability of the static decoder experiment."""
    from functools import partial
    if lattice is None:
        lattice = build(N)
    results = engine.run_trials(partial(_static_trial_fn, lattice, q,
                                        convention, max_sweeps),
                                trials, seed, parallelism)
    values = [1.0 if ok else 0.0 for ok in results]
    est = engine.Estimate.from_outcomes(values, [False] * len(values))
    # binomial standard error is the right scale for a success probability
    p = est.mean
    est.stderr = math.sqrt(p * (1.0 - p) / trials)
    return est
