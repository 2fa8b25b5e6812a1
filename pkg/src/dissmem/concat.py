"""Concatenated-code dissipative memory: closed-form threshold and lifetime
bounds, a Pauli-frame event-history Monte Carlo with hierarchical recovery,
and the single-jump saturation demonstration.

Pauli letters are encoded 0=I, 1=X, 2=Z, 3=Y with the X component in bit 0
and the Z component in bit 1, so letterwise multiplication mod phase is XOR.

A block address is a vector (v_1, .., v_l) of child indices in 1..k read
deepest-first: c:v (prepending c) addresses child c of block v, and the
ancestors of an address are its suffixes. A block with |v| = l sits at depth
n = M - l above the leaves and spans k^n contiguous leaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from itertools import product

import numpy as np

from . import engine
from .engine import TrialOutcome

LETTERS = "IXZY"

I, X, Z, Y = 0, 1, 2, 3


def letters_from_str(s: str) -> np.ndarray:
    return np.array([LETTERS.index(c) for c in s], np.int8)


def letters_to_str(a) -> str:
    return "".join(LETTERS[int(l)] for l in a)


def anticommute(a: int, b: int) -> int:
    """1 iff single-qubit Paulis a and b anticommute (symplectic form)."""
    return ((a & 1) & (b >> 1)) ^ ((a >> 1) & (b & 1))


def string_anticommute(a, b) -> int:
    return int(sum(anticommute(int(x), int(y)) for x, y in zip(a, b)) % 2)


class StabilizerCode:
    """Single-logical-qubit stabilizer code with a brute-force syndrome
    lookup over {identity} union weight-1 errors."""

    def __init__(self, k: int, generators, logical_x: str, logical_z: str):
        self.k = k
        self.generators = [letters_from_str(g) for g in generators]
        self.logical_x = letters_from_str(logical_x)
        self.logical_z = letters_from_str(logical_z)
        for g in self.generators:
            if len(g) != k:
                raise ValueError("generator length must equal k")
        for i, g in enumerate(self.generators):
            for h in self.generators[i + 1:]:
                if string_anticommute(g, h):
                    raise ValueError("generators must commute")
            for lg in (self.logical_x, self.logical_z):
                if string_anticommute(g, lg):
                    raise ValueError("logicals must commute with generators")
        if not string_anticommute(self.logical_x, self.logical_z):
            raise ValueError("logical X and Z must anticommute")
        self.n_gen = len(self.generators)
        self.lookup = self._build_lookup()
        self.distance = self._distance(max_weight=3)

    def syndrome(self, letters) -> int:
        s = 0
        for bit, g in enumerate(self.generators):
            s |= string_anticommute(letters, g) << bit
        return s

    def _build_lookup(self):
        lookup = {0: np.zeros(self.k, np.int8)}
        for pos in range(self.k):
            for letter in (X, Z, Y):
                e = np.zeros(self.k, np.int8)
                e[pos] = letter
                s = self.syndrome(e)
                if s in lookup:
                    raise ValueError("weight-1 syndromes are not unique")
                lookup[s] = e
        return lookup

    def recovery(self, syndrome: int) -> np.ndarray:
        return self.lookup[syndrome]

    def in_stabilizer_group(self, letters) -> bool:
        if self.syndrome(letters) != 0:
            return False
        return (not string_anticommute(letters, self.logical_x)
                and not string_anticommute(letters, self.logical_z))

    def logical_class(self, letters) -> int:
        """Logical letter of a syndrome-free error: I, X, Z or Y."""
        x_part = string_anticommute(letters, self.logical_z)
        z_part = string_anticommute(letters, self.logical_x)
        return x_part | (z_part << 1)

    def _distance(self, max_weight: int) -> int:
        """Smallest weight of a nontrivial logical (undetected, acting on
        the encoded qubit), searched up to max_weight."""
        for w in range(1, max_weight + 1):
            from itertools import combinations
            for positions in combinations(range(self.k), w):
                for ls in product((X, Z, Y), repeat=w):
                    e = np.zeros(self.k, np.int8)
                    for p, l in zip(positions, ls):
                        e[p] = l
                    if self.syndrome(e) == 0 and self.logical_class(e) != I:
                        return w
        return max_weight + 1


def five_qubit_code() -> StabilizerCode:
    """The perfect [[5,1,3]] code: cyclic shifts of XZZXI, transversal
    logicals."""
    return StabilizerCode(5, ["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"],
                          "XXXXX", "ZZZZZ")


@dataclass
class ConcatParams:
    code: StabilizerCode
    M: int
    Gamma_correct: float = 1.0
    delta: float = 0.2
    Gamma_noise: float = 0.0
    t_max: float = 1e6
    seed: int = 0
    check_interval: float | None = None
    # per-letter noise rates; default splits Gamma_noise uniformly over X/Y/Z
    letter_rates: tuple | None = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must be in (0, 1]")
        if min(self.Gamma_correct, self.Gamma_noise) < 0:
            raise ValueError("rates must be >= 0")
        if self.letter_rates is None:
            self.letter_rates = (self.Gamma_noise / 3,) * 3
        if self.check_interval is None:
            self.check_interval = (1.0 / self.Gamma_correct
                                   if self.Gamma_correct > 0 else 1.0)


# closed-form bounds

def threshold(k: int, delta: float, Gamma: float) -> float:
    """Noise rate below which the level-wise error probabilities contract:
    delta^2 * Gamma / k^2."""
    if k < 1 or delta <= 0:
        raise ValueError("need k >= 1 and delta > 0")
    return delta * delta * Gamma / (k * k)


def p_n_bound(n: int, Gamma_noise: float, Gamma_correct: float,
              delta: float, k: int) -> float:
    """Closed-form bound on the level-n block error probability, clamped to
    1 when vacuous: (Gn k^2/(Gc d^2))^(2^(n-1)) * d/k."""
    if n < 1:
        raise ValueError("n must be >= 1")
    base = Gamma_noise * k * k / (Gamma_correct * delta * delta)
    val = base ** (2 ** (n - 1)) * delta / k
    return min(1.0, val)


def p_n_recursive(n: int, Gamma_noise: float, Gamma_correct: float,
                  delta: float, k: int) -> float:
    """Same bound via the level-wise fixed-point recursion; cross-check for
    the closed form."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ps = [k * Gamma_noise / (Gamma_correct * delta)]
    prod = ps[0]
    for m in range(1, n):
        nxt = (k ** (m + 1) * Gamma_noise * prod
               / (Gamma_correct * delta ** (m + 1)))
        ps.append(nxt)
        prod *= nxt
    return min(1.0, ps[n - 1])


def lifetime_bound(M: int, Gamma_noise: float, Gamma_correct: float,
                   delta: float, k: int) -> float:
    """Upper bound on the top-level failure rate of an M-level encoding:
    Gn * d^M * (Gn/Gn_star)^(2^M - 1)."""
    if M < 0:
        raise ValueError("M must be >= 0")
    if M == 0:
        return Gamma_noise
    ratio = Gamma_noise / threshold(k, delta, Gamma_correct)
    return Gamma_noise * delta ** M * ratio ** (2 ** M - 1)


# hierarchical frame

class ConcatFrame:
    """Pauli frame over the k^M leaves of an M-level concatenation, with
    cached per-block decoded logicals and syndromes.

    Internal blocks are indexed (level, j): level l in 0..M-1 from the root,
    j in 0..k^l-1, spanning leaves [j*k^(M-l), (j+1)*k^(M-l)).
    """

    def __init__(self, code: StabilizerCode, M: int):
        self.code = code
        self.M = M
        self.k = code.k
        self.n_leaves = code.k ** M
        self.letters = np.zeros(self.n_leaves, np.int8)
        # logical[l][j]: decoded logical of block j at level l (level M = leaves)
        self.logical = [np.zeros(self.k ** l, np.int8) for l in range(M + 1)]
        self.logical[M] = self.letters  # leaves decode to themselves
        self.syndromes = [np.zeros(self.k ** l, np.int64) for l in range(M)]

    def block_span(self, level: int, j: int) -> tuple[int, int]:
        size = self.k ** (self.M - level)
        return j * size, (j + 1) * size

    def address_block(self, address) -> tuple[int, int]:
        """(level, j) of the block at a deepest-first address vector."""
        level = len(address)
        if not 0 <= level <= self.M:
            raise ValueError("address too long")
        j = 0
        for c in reversed(address):  # suffixes are ancestors: root side last
            if not 1 <= c <= self.k:
                raise ValueError("address components must be in 1..k")
            j = j * self.k + (c - 1)
        return level, j

    def _refresh_block(self, level: int, j: int) -> None:
        children = self.logical[level + 1][j * self.k:(j + 1) * self.k]
        s = self.code.syndrome(children)
        self.syndromes[level][j] = s
        residual = children ^ self.code.recovery(s)
        self.logical[level][j] = self.code.logical_class(residual)

    def refresh_path(self, leaf: int) -> None:
        """Recompute cached decodes/syndromes for all blocks containing a
        leaf, bottom-up."""
        for level in range(self.M - 1, -1, -1):
            self._refresh_block(level, leaf // self.k ** (self.M - level))

    def recompute_all(self) -> None:
        for level in range(self.M - 1, -1, -1):
            for j in range(self.k ** level):
                self._refresh_block(level, j)

    def apply_noise(self, leaf: int, letter: int) -> None:
        self.letters[leaf] ^= letter
        self.refresh_path(leaf)

    def has_error(self, level: int, j: int) -> bool:
        return bool(self.syndromes[level][j] != 0)

    def enabled(self, address) -> bool:
        """Parent syndrome nontrivial and not explained by one logical
        letter on the addressed child."""
        if len(address) < 1:
            raise ValueError("enabled takes a child address")
        child = address[0]
        level, j = self.address_block(address[1:])
        if level >= self.M:
            raise ValueError("parent must be an internal block")
        s = int(self.syndromes[level][j])
        if s == 0:
            return False
        for letter in (X, Z, Y):
            e = np.zeros(self.k, np.int8)
            e[child - 1] = letter
            if s == self.code.syndrome(e):
                return False
        return True

    def apply_recovery(self, level: int, j: int) -> bool:
        """One recovery event at an internal block: correct the child-level
        logicals indicated by the block's current syndrome. Returns True if
        the frame changed."""
        s = int(self.syndromes[level][j])
        if s == 0:
            return False
        rec = self.code.recovery(s)
        for c in range(self.k):
            letter = int(rec[c])
            if letter != I:
                self._expand(level + 1, j * self.k + c, letter)
        return True

    def _expand(self, level: int, j: int, letter: int) -> None:
        """Multiply the transversal expansion of a logical letter on block
        (level, j) into the frame and update caches."""
        lo, hi = self.block_span(level, j)
        self.letters[lo:hi] ^= letter  # logical[M] aliases letters
        # decoded logicals at and below the block shift by the letter
        # without touching syndromes there (logicals commute with
        # stabilizers); ancestor syndromes see the changed child decode
        for lv in range(level, self.M):
            lo_b = lo // self.k ** (self.M - lv)
            hi_b = hi // self.k ** (self.M - lv)
            self.logical[lv][lo_b:hi_b] ^= letter
        jj = j
        for lv in range(level - 1, -1, -1):
            jj //= self.k
            self._refresh_block(lv, jj)

    def decode(self, address=()) -> int:
        level, j = self.address_block(address)
        return int(self.logical[level][j])


def decode_block(frame: ConcatFrame, address=()) -> int:
    """Logical letter at an address: the leaf letter, or the residual class
    of the block after its lookup recovery."""
    return frame.decode(address)


def recovery_event(frame: ConcatFrame, address=()) -> bool:
    """Correct the highest-level errors of the block at `address`; returns
    True if the frame changed."""
    level, j = frame.address_block(address)
    if level >= frame.M:
        raise ValueError("recovery needs an internal block")
    return frame.apply_recovery(level, j)


@dataclass
class ConcatResult:
    outcome: TrialOutcome
    has_error_avg: dict = field(default_factory=dict)  # depth -> time average
    enabled_samples: list = field(default_factory=list)


def mc_trial(params: ConcatParams, rng: np.random.Generator,
             sample_chain=None, sample_interval: float | None = None) -> ConcatResult:
    """Event-history Monte Carlo of one trial.

    Noise events hit a uniform leaf with a letter drawn per `letter_rates`;
    recovery events hit a uniform block of depth n at total rate
    k^(M-n) * Gamma * delta^n. Failure is the first periodic check with a
    nontrivial root decode. `sample_chain` is an optional tuple of
    predicate addresses whose joint Enabled indicators are recorded every
    `sample_interval`.
    """
    code, M, k = params.code, params.M, params.code.k
    frame = ConcatFrame(code, M)
    n_leaves = frame.n_leaves
    lr = params.letter_rates
    noise_rate = n_leaves * sum(lr)
    letter_cdf = np.cumsum(lr) / sum(lr) if sum(lr) > 0 else None
    # recovery classes by depth n = M - level
    depth_rates = []
    for n in range(1, M + 1):
        level = M - n
        depth_rates.append((level, k ** level * params.Gamma_correct
                            * params.delta ** n))
    total_rate = noise_rate + sum(r for _, r in depth_rates)

    t = 0.0
    next_check = params.check_interval
    next_sample = sample_interval if sample_interval else math.inf
    n_noise = n_corr = n_checks = 0
    # time-averaged HasError per depth (mean over that depth's blocks)
    he_acc = {M - level: 0.0 for level in range(M)}
    samples = []

    def accumulate(dt):
        for level in range(M):
            depth = M - level
            frac = np.count_nonzero(frame.syndromes[level]) / (k ** level)
            he_acc[depth] += frac * dt

    while True:
        t_event = (t + rng.exponential(1.0 / total_rate)
                   if total_rate > 0 else math.inf)
        while next_sample <= min(t_event, next_check, params.t_max):
            if sample_chain:
                samples.append(tuple(frame.enabled(a) for a in sample_chain))
            next_sample += sample_interval
        while next_check <= min(t_event, params.t_max):
            n_checks += 1
            if frame.decode(()) != I:
                accumulate(next_check - t)
                out = TrialOutcome(next_check, False, n_noise, n_corr, n_checks)
                return ConcatResult(out, {d: a / next_check
                                          for d, a in he_acc.items()}, samples)
            next_check += params.check_interval
        if t_event >= params.t_max:
            accumulate(params.t_max - t)
            out = TrialOutcome(params.t_max, True, n_noise, n_corr, n_checks)
            return ConcatResult(out, {d: a / params.t_max
                                      for d, a in he_acc.items()}, samples)
        accumulate(t_event - t)
        u = rng.random() * total_rate
        if u < noise_rate:
            leaf = int(rng.integers(0, n_leaves))
            letter = (X, Y, Z)[int(np.searchsorted(letter_cdf, rng.random(),
                                                   side="right"))]
            frame.apply_noise(leaf, letter)
            n_noise += 1
        else:
            u -= noise_rate
            chosen = depth_rates[-1][0]
            for level, rate in depth_rates:
                if u < rate:
                    chosen = level
                    break
                u -= rate
            frame.apply_recovery(chosen, int(rng.integers(0, k ** chosen)))
            n_corr += 1
        t = t_event


def _mc_trial_fn(params, sample_chain, sample_interval, rng, index):
    return mc_trial(params, rng, sample_chain, sample_interval)


def mc_estimate(params: ConcatParams, trials: int,
                parallelism: int | None = None, sample_chain=None,
                sample_interval: float | None = None):
    """Run trials; returns (Estimate of failure times, list of ConcatResult)."""
    results = engine.run_trials(
        partial(_mc_trial_fn, params, sample_chain, sample_interval),
        trials, params.seed, parallelism)
    est = engine.estimate_times([r.outcome for r in results])
    return est, results


def failure_rate(results) -> tuple[float, float]:
    """Exponential-MLE failure rate with censoring: failures over total
    simulated time, stderr sqrt(failures)/time."""
    n_fail = sum(not r.outcome.censored for r in results)
    total_time = sum(r.outcome.failure_time for r in results)
    if total_time <= 0:
        return math.nan, math.nan
    return n_fail / total_time, math.sqrt(max(n_fail, 1)) / total_time


def factorization_gap(results, chain_len: int) -> tuple[float, float, float, float]:
    """From per-trial Enabled samples, estimate |<prod> - prod<>| with a
    jackknife stderr over trials. Returns (lhs, rhs, gap, gap_stderr)."""
    per_trial = [np.array(r.enabled_samples, dtype=float).reshape(-1, chain_len)
                 for r in results if r.enabled_samples]
    if not per_trial:
        return math.nan, math.nan, math.nan, math.nan
    counts = np.array([len(p) for p in per_trial], float)
    sums = np.array([p.sum(axis=0) for p in per_trial])          # per predicate
    joint = np.array([p.prod(axis=1).sum() for p in per_trial])  # all-true count

    def gap_from(idx):
        n = counts[idx].sum()
        means = sums[idx].sum(axis=0) / n
        lhs = joint[idx].sum() / n
        return lhs, float(np.prod(means))

    all_idx = np.arange(len(per_trial))
    lhs, rhs = gap_from(all_idx)
    gap = lhs - rhs
    if len(per_trial) > 1:
        jk = np.array([np.subtract(*gap_from(all_idx[all_idx != i]))
                       for i in all_idx])
        gap_stderr = float(np.sqrt((len(jk) - 1) * np.var(jk)))
    else:
        gap_stderr = math.nan
    return lhs, rhs, gap, gap_stderr


def single_jump_trial(params: ConcatParams, rng: np.random.Generator) -> TrialOutcome:
    """Monolithic-recovery variant: a single event class at rate
    Gamma_correct performs a full bottom-up recovery of every block. Used to
    demonstrate that the lifetime saturates with system size."""
    code, M, k = params.code, params.M, params.code.k
    frame = ConcatFrame(code, M)
    lr = params.letter_rates
    noise_rate = frame.n_leaves * sum(lr)
    letter_cdf = np.cumsum(lr) / sum(lr) if sum(lr) > 0 else None
    total_rate = noise_rate + params.Gamma_correct
    t = 0.0
    next_check = params.check_interval
    n_noise = n_corr = n_checks = 0
    while True:
        t_event = (t + rng.exponential(1.0 / total_rate)
                   if total_rate > 0 else math.inf)
        while next_check <= min(t_event, params.t_max):
            n_checks += 1
            if frame.decode(()) != I:
                return TrialOutcome(next_check, False, n_noise, n_corr, n_checks)
            next_check += params.check_interval
        if t_event >= params.t_max:
            return TrialOutcome(params.t_max, True, n_noise, n_corr, n_checks)
        u = rng.random() * total_rate
        if u < noise_rate:
            leaf = int(rng.integers(0, frame.n_leaves))
            letter = (X, Y, Z)[int(np.searchsorted(letter_cdf, rng.random(),
                                                   side="right"))]
            frame.apply_noise(leaf, letter)
            n_noise += 1
        else:
            for level in range(M - 1, -1, -1):
                for j in range(k ** level):
                    frame.apply_recovery(level, j)
            n_corr += 1
        t = t_event


def _single_jump_fn(params, rng, index):
    return single_jump_trial(params, rng)


def single_jump_estimate(params: ConcatParams, trials: int,
                         parallelism: int | None = None) -> engine.Estimate:
    outcomes = engine.run_trials(partial(_single_jump_fn, params), trials,
                                 params.seed, parallelism)
    return engine.estimate_times(outcomes)
