"""2D open-boundary nearest-neighbour majority-vote dissipative memory.

Spins live in the X basis on an N x N grid. Dephasing flips single spins at
rate gamma_phase per site; the protective dissipation flips the centre of any
*active* triple (centre disagreeing with both chosen neighbours) at rate
gamma_c per triple. The majority observable fails once the magnetization
drops to the tie or below (configurable to strictly below).

Depolarization is not simulated in the spin dynamics; it enters only through
the analytic parity-observable lifetime 1/(gamma_dep * N^2). The encoded
qubit lifetime is the minimum of the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from itertools import combinations

import numpy as np

from . import engine
from .engine import TrialOutcome


@dataclass
class ToyParams:
    N: int
    gamma_c: float = 1.0
    gamma_phase: float = 0.0
    gamma_dep: float = 0.0
    t_max: float = 1e6
    seed: int = 0
    check_interval: float | None = None
    tie_fails: bool = True  # failure at M <= 0; False requires M < 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if min(self.gamma_c, self.gamma_phase, self.gamma_dep) < 0:
            raise ValueError("rates must be >= 0")
        if self.check_interval is None:
            self.check_interval = 1.0 / self.gamma_c if self.gamma_c > 0 else 1.0


def _neighbours(N: int, s: int):
    r, c = divmod(s, N)
    out = []
    if r > 0:
        out.append(s - N)
    if r < N - 1:
        out.append(s + N)
    if c > 0:
        out.append(s - 1)
    if c < N - 1:
        out.append(s + 1)
    return out


def make_triples(N: int) -> list[tuple[int, int, int]]:
    """All (centre, neighbour, neighbour) voting triples of the open grid:
    6 per interior site, 3 per edge site, 1 per corner."""
    triples = []
    for s in range(N * N):
        for r, t in combinations(_neighbours(N, s), 2):
            triples.append((s, r, t))
    return triples


class SpinGrid:
    """N x N spins in {+1,-1} with magnetization and the active-triple set
    maintained incrementally."""

    def __init__(self, N: int):
        self.N = N
        self.spins = np.ones(N * N, np.int8)
        self.magnetization = N * N
        self.triples = make_triples(N)
        # triples whose active status can change when a given site flips
        touched = [[] for _ in range(N * N)]
        for i, (s, r, t) in enumerate(self.triples):
            touched[s].append(i)
            touched[r].append(i)
            touched[t].append(i)
        self._touched = touched
        nt = len(self.triples)
        self._active_pos = [-1] * nt
        self._active_list = [0] * nt
        self.n_active = 0

    def triple_active(self, i: int) -> bool:
        s, r, t = self.triples[i]
        return self.spins[s] != self.spins[r] and self.spins[s] != self.spins[t]

    @property
    def active_triples(self) -> set:
        return set(self._active_list[:self.n_active])

    def flip(self, site: int) -> None:
        self.spins[site] = -self.spins[site]
        self.magnetization += 2 * int(self.spins[site])
        for i in self._touched[site]:
            want = self.triple_active(i)
            p = self._active_pos[i]
            if want and p < 0:
                self._active_pos[i] = self.n_active
                self._active_list[self.n_active] = i
                self.n_active += 1
            elif not want and p >= 0:
                last = self._active_list[self.n_active - 1]
                self._active_list[p] = last
                self._active_pos[last] = p
                self._active_pos[i] = -1
                self.n_active -= 1

    def recompute_active(self) -> set:
        return set(i for i in range(len(self.triples)) if self.triple_active(i))


def triple_active(grid: SpinGrid, triple) -> bool:
    """True iff the centre spin disagrees with both neighbours of the triple."""
    s, r, t = triple
    return bool(grid.spins[s] != grid.spins[r] and grid.spins[s] != grid.spins[t])


def evolve_trial(params: ToyParams, rng: np.random.Generator) -> TrialOutcome:
    """One majority-observable lifetime trial: start all-up, KMC with
    dephasing and triple corrections, fail at the first periodic check with
    magnetization at/below the tie."""
    grid = SpinGrid(params.N)
    n_sites = params.N * params.N
    noise_rate = n_sites * params.gamma_phase
    t = 0.0
    next_check = params.check_interval
    n_noise = 0
    n_corr = 0
    n_checks = 0

    def failed():
        m = grid.magnetization
        return m <= 0 if params.tie_fails else m < 0

    while True:
        r_tot = noise_rate + grid.n_active * params.gamma_c
        t_event = t + rng.exponential(1.0 / r_tot) if r_tot > 0 else math.inf
        while next_check <= min(t_event, params.t_max):
            n_checks += 1
            if failed():
                return TrialOutcome(next_check, False, n_noise, n_corr, n_checks)
            next_check += params.check_interval
        if t_event >= params.t_max:
            return TrialOutcome(params.t_max, True, n_noise, n_corr, n_checks)
        u = rng.random() * r_tot
        if u < noise_rate:
            grid.flip(int(rng.integers(0, n_sites)))
            n_noise += 1
        else:
            i = grid._active_list[int(rng.integers(0, grid.n_active))]
            grid.flip(grid.triples[i][0])
            n_corr += 1
        t = t_event


def parity_lifetime(N: int, gamma_dep: float) -> float:
    """Analytic lifetime of the dephasing-immune parity observable under
    depolarization: 1/(gamma_dep * N^2); unbounded when gamma_dep = 0."""
    if gamma_dep < 0:
        raise ValueError("gamma_dep must be >= 0")
    if gamma_dep == 0:
        return math.inf
    return 1.0 / (gamma_dep * N * N)


def _evolve_trial_fn(params, rng, index):
    return evolve_trial(params, rng)


def majority_lifetime(params: ToyParams, trials: int,
                      parallelism: int | None = None) -> engine.Estimate:
    """Monte Carlo estimate of the majority-observable lifetime."""
    outcomes = engine.run_trials(partial(_evolve_trial_fn, params), trials,
                                 params.seed, parallelism)
    return engine.estimate_times(outcomes)


def qubit_lifetime(N: int, params: ToyParams, trials: int,
                   parallelism: int | None = None):
    """Encoded-qubit lifetime min(majority MC estimate, analytic parity
    lifetime) for one size. Returns (lifetime, majority Estimate)."""
    p = ToyParams(N=N, gamma_c=params.gamma_c, gamma_phase=params.gamma_phase,
                  gamma_dep=params.gamma_dep, t_max=params.t_max,
                  seed=params.seed, check_interval=None,
                  tie_fails=params.tie_fails)
    est = majority_lifetime(p, trials, parallelism)
    tau_parity = parity_lifetime(N, params.gamma_dep)
    if math.isnan(est.mean):
        # fully censored: the majority lifetime exceeds t_max
        tau = min(p.t_max, tau_parity) if math.isfinite(tau_parity) else p.t_max
    else:
        tau = min(est.mean, tau_parity)
    return tau, est


def optimal_size(params: ToyParams, sizes, trials: int,
                 parallelism: int | None = None):
    """Scan lattice sizes and pick the one maximizing the qubit lifetime
    (the curve-intersection construction). Returns (best_N, rows) where each
    row is (N, majority Estimate, parity lifetime, qubit lifetime)."""
    rows = []
    for N in sizes:
        tau, est = qubit_lifetime(N, params, trials, parallelism)
        rows.append((N, est, parity_lifetime(N, params.gamma_dep), tau))
    best_N = max(rows, key=lambda r: r[3])[0]
    return best_N, rows
