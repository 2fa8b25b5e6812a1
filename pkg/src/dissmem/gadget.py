"""Damped-ancilla dissipation gadget: integrate the reduced-block ODEs of a
system weakly coupled (strength epsilon, in units of the ancilla decay) to a
strongly damped qubit, compare against the target engineered Lindblad
evolution at rate 2*epsilon^2, and check the derived deviation bounds.

All times are unitless (rescaled by the ancilla decay rate). Blocks rho00,
rho01, rho11 are the ancilla-basis components of the joint state; rho10 is
rho01^dagger throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class IntegratorError(RuntimeError):
    """Halving the step changed the trajectory beyond tolerance."""


def trace_norm(a: np.ndarray) -> float:
    return float(np.linalg.svd(a, compute_uv=False).sum())


def operator_norm(a: np.ndarray) -> float:
    return float(np.linalg.svd(a, compute_uv=False).max())


def lindblad_dissipator(op: np.ndarray):
    """D[op](rho) = op rho op^dag - (1/2){op^dag op, rho}."""
    opd = op.conj().T
    anti = opd @ op

    def dissipator(rho):
        return op @ rho @ opd - 0.5 * (anti @ rho + rho @ anti)

    return dissipator


def liouvillian_norm(lsys, d: int) -> float:
    """Induced trace-norm of a superoperator, estimated by maximization over
    a Hermitian operator basis normalized in trace norm."""
    best = 0.0
    basis = []
    for i in range(d):
        e = np.zeros((d, d), complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), complex)
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
            e = np.zeros((d, d), complex)
            e[i, j] = -1j
            e[j, i] = 1j
            basis.append(e)
    for b in basis:
        b = b / trace_norm(b)
        best = max(best, trace_norm(lsys(b)))
    return best


def zero_liouvillian(rho):
    return np.zeros_like(rho)


def dephasing_liouvillian(d: int, strength: float):
    """Dephasing in the computational basis scaled to induced trace-norm
    `strength`."""
    z = np.diag(np.linspace(1.0, -1.0, d)).astype(complex)
    raw = lindblad_dissipator(z)
    nrm = liouvillian_norm(raw, d)

    def lsys(rho):
        return (strength / nrm) * raw(rho)

    return lsys


def random_liouvillian(d: int, strength: float, rng: np.random.Generator):
    """Random single-jump Lindblad generator scaled to induced trace-norm
    `strength`."""
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    a /= operator_norm(a)
    raw = lindblad_dissipator(a)
    nrm = liouvillian_norm(raw, d)

    def lsys(rho):
        return (strength / nrm) * raw(rho)

    return lsys


@dataclass
class GadgetConfig:
    d: int
    L: np.ndarray
    epsilon: float
    E: float = 0.0
    tau_max: float = 50.0
    dt: float = 1e-3
    sample_interval: float = 0.5
    lsys: object = None  # callable rho -> drho, induced norm <= E*epsilon^2

    def __post_init__(self):
        self.L = np.asarray(self.L, complex)
        if self.L.shape != (self.d, self.d):
            raise ValueError("L must be d x d")
        if operator_norm(self.L) > 1.0 + 1e-9:
            raise ValueError("operator norm of L must be <= 1")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must be in [0, 1)")
        if self.E * self.epsilon ** 2 >= 1:
            raise ValueError("need E*epsilon^2 < 1 for epsilon-tilde")
        if self.lsys is None:
            self.lsys = zero_liouvillian

    @property
    def epsilon_tilde(self) -> float:
        return self.epsilon / (1.0 - self.E * self.epsilon ** 2)


@dataclass
class BlockTrajectory:
    taus: np.ndarray
    rho00: np.ndarray  # (n, d, d)
    rho01: np.ndarray
    rho11: np.ndarray
    rhs00: np.ndarray  # exact d(rho00)/dtau at samples
    trace_drift: float  # max |tr rho00 + tr rho11 - 1|
    step_error: float = math.nan  # max deviation vs a dt/2 integration


def _full_rhs(cfg: GadgetConfig, r00, r01, r11):
    L = cfg.L
    Ld = L.conj().T
    eps = cfg.epsilon
    r10 = r01.conj().T
    d00 = 2.0 * r11 - 1j * eps * (Ld @ r10) + 1j * eps * (r01 @ L) + cfg.lsys(r00)
    d01 = -r01 + 1j * eps * (r00 @ Ld) - 1j * eps * (Ld @ r11) + cfg.lsys(r01)
    d11 = -2.0 * r11 - 1j * eps * (L @ r01) + 1j * eps * (r10 @ Ld) + cfg.lsys(r11)
    return d00, d01, d11


def _hermitize(a):
    return 0.5 * (a + a.conj().T)


def evolve_full(cfg: GadgetConfig, rho00_0: np.ndarray,
                check_convergence: bool = True,
                convergence_tol: float = 1e-7) -> BlockTrajectory:
    """Fixed-step 4th-order integration of the coupled blocks from an
    ancilla-ground-state initial condition (rho01 = rho11 = 0)."""
    traj = _integrate_full(cfg, rho00_0, cfg.dt)
    if check_convergence:
        fine = _integrate_full(cfg, rho00_0, cfg.dt / 2)
        dev = max(
            float(np.abs(traj.rho00 - fine.rho00).max()),
            float(np.abs(traj.rho01 - fine.rho01).max()),
            float(np.abs(traj.rho11 - fine.rho11).max()),
        )
        traj.step_error = dev
        if dev > convergence_tol:
            raise IntegratorError(
                f"dt/2 check deviates by {dev:.3e} > {convergence_tol:.1e}")
    return traj


def _pack(blocks) -> np.ndarray:
    """Real vector encoding of a tuple of complex matrices."""
    return np.concatenate([np.concatenate([b.real.ravel(), b.imag.ravel()])
                           for b in blocks])


def _unpack(x, d, n_blocks):
    out = []
    m = d * d
    for b in range(n_blocks):
        re = x[2 * b * m:(2 * b + 1) * m].reshape(d, d)
        im = x[(2 * b + 1) * m:(2 * b + 2) * m].reshape(d, d)
        out.append(re + 1j * im)
    return out


def _real_linear_matrix(fn, n: int) -> np.ndarray:
    """Matrix of a real-linear map on R^n, built by probing unit vectors.
    (The block flow is only real-linear: it involves rho01^dagger.)"""
    a = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        a[:, j] = fn(e)
        e[j] = 0.0
    return a


def _integrate_full(cfg, rho00_0, dt):
    d = cfg.d
    m = 2 * d * d

    def rhs_vec(x):
        r00, r01, r11 = _unpack(x, d, 3)
        return _pack(_full_rhs(cfg, r00, r01, r11))

    def herm_vec(x):
        r00, r01, r11 = _unpack(x, d, 3)
        return _pack((_hermitize(r00), r01, _hermitize(r11)))

    a = _real_linear_matrix(rhs_vec, 3 * m)
    h = _real_linear_matrix(herm_vec, 3 * m)
    x = _pack((np.asarray(rho00_0, complex),
               np.zeros((d, d), complex), np.zeros((d, d), complex)))

    n_samples = int(round(cfg.tau_max / cfg.sample_interval)) + 1
    stride = max(1, int(round(cfg.sample_interval / dt)))
    taus = np.empty(n_samples)
    s00 = np.empty((n_samples, d, d), complex)
    s01 = np.empty_like(s00)
    s11 = np.empty_like(s00)
    srhs = np.empty_like(s00)
    drift = 0.0
    n_steps = (n_samples - 1) * stride
    si = 0
    for step in range(n_steps + 1):
        if step % stride == 0:
            taus[si] = step * dt
            r00, r01, r11 = _unpack(x, d, 3)
            s00[si], s01[si], s11[si] = r00, r01, r11
            srhs[si] = _unpack(a @ x, d, 3)[0]
            drift = max(drift, abs(np.trace(r00).real + np.trace(r11).real - 1.0))
            si += 1
        if step == n_steps:
            break
        k1 = a @ x
        k2 = a @ (x + 0.5 * dt * k1)
        k3 = a @ (x + 0.5 * dt * k2)
        k4 = a @ (x + dt * k3)
        x = h @ (x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
    return BlockTrajectory(taus, s00, s01, s11, srhs, drift)


def target_liouvillian(cfg: GadgetConfig):
    """The engineered term 2 eps^2 D[L] plus the system Liouvillian."""
    diss = lindblad_dissipator(cfg.L)
    rate = 2.0 * cfg.epsilon ** 2

    def rhs(rho):
        return rate * diss(rho) + cfg.lsys(rho)

    return rhs


def evolve_target(cfg: GadgetConfig, rho00_0: np.ndarray,
                  check_convergence: bool = True,
                  convergence_tol: float = 1e-7):
    """Integrate the target Lindblad evolution on the system alone.
    Returns (taus, rho trajectory)."""
    traj = _integrate_target(cfg, rho00_0, cfg.dt)
    if check_convergence:
        fine = _integrate_target(cfg, rho00_0, cfg.dt / 2)
        dev = float(np.abs(traj[1] - fine[1]).max())
        if dev > convergence_tol:
            raise IntegratorError(
                f"dt/2 check deviates by {dev:.3e} > {convergence_tol:.1e}")
    return traj


def _integrate_target(cfg, rho0, dt):
    rhs = target_liouvillian(cfg)
    d = cfg.d

    def rhs_vec(x):
        return _pack((rhs(_unpack(x, d, 1)[0]),))

    def herm_vec(x):
        return _pack((_hermitize(_unpack(x, d, 1)[0]),))

    a = _real_linear_matrix(rhs_vec, 2 * d * d)
    h = _real_linear_matrix(herm_vec, 2 * d * d)
    x = _pack((np.asarray(rho0, complex),))
    n_samples = int(round(cfg.tau_max / cfg.sample_interval)) + 1
    stride = max(1, int(round(cfg.sample_interval / dt)))
    taus = np.empty(n_samples)
    out = np.empty((n_samples, d, d), complex)
    si = 0
    n_steps = (n_samples - 1) * stride
    for step in range(n_steps + 1):
        if step % stride == 0:
            taus[si] = step * dt
            out[si] = _unpack(x, d, 1)[0]
            si += 1
        if step == n_steps:
            break
        k1 = a @ x
        k2 = a @ (x + 0.5 * dt * k1)
        k3 = a @ (x + 0.5 * dt * k2)
        k4 = a @ (x + dt * k3)
        x = h @ (x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))
    return taus, out


@dataclass
class BoundReport:
    taus: np.ndarray
    residuals: np.ndarray  # (n, 4)
    bounds: np.ndarray     # (n, 4)
    passes: list           # per inequality
    trace_drift: float
    step_error: float
    norm: str = "trace"
    inconclusive: bool = False
    fd_cross_check: float = math.nan  # max |exact rhs - finite difference|

    def all_pass(self) -> bool:
        return all(self.passes)


def check_bounds(cfg: GadgetConfig, traj: BlockTrajectory,
                 norm: str = "trace") -> BoundReport:
    """Evaluate the four deviation inequalities at every sample.

    Group 1 is reported as the larger of the two normalized utilizations
    |rho01|/et and |rho11|/et^2 against a bound of 1. Groups 2 and 3 bound
    the adiabatic-elimination residuals of rho01 and rho11; group 4 bounds
    the deviation of the exact d(rho00)/dtau from the target generator.
    """
    nf = trace_norm if norm == "trace" else operator_norm
    L = cfg.L
    Ld = L.conj().T
    eps = cfg.epsilon
    et = cfg.epsilon_tilde
    E = cfg.E
    target = target_liouvillian(cfg)
    n = len(traj.taus)
    residuals = np.zeros((n, 4))
    bounds = np.zeros((n, 4))
    for i, tau in enumerate(traj.taus):
        r00, r01, r11 = traj.rho00[i], traj.rho01[i], traj.rho11[i]
        decay = math.exp(-tau)
        if eps == 0:
            residuals[i, 0] = 0.0 if nf(r01) == 0 and nf(r11) == 0 else math.inf
        else:
            residuals[i, 0] = max(nf(r01) / et, nf(r11) / et ** 2)
        bounds[i, 0] = 1.0
        residuals[i, 1] = nf(r01 - 1j * eps * (r00 @ Ld))
        bounds[i, 1] = (2 * E + 5) * et ** 3 + eps * decay
        residuals[i, 2] = nf(r11 - eps ** 2 * (L @ r00 @ Ld))
        bounds[i, 2] = (3 * E + 7) * et ** 4 + 2 * eps ** 2 * decay
        residuals[i, 3] = nf(traj.rhs00[i] - target(r00))
        bounds[i, 3] = (10 * E + 24) * et ** 4 + 4 * eps ** 2 * decay
    margin = max(traj.step_error if math.isfinite(traj.step_error) else 0.0,
                 1e-9)
    passes = [bool(np.all(residuals[:, j] <= bounds[:, j] + margin))
              for j in range(4)]
    # finite-difference cross-check of the exact rhs
    fd = np.gradient(traj.rho00, traj.taus, axis=0)
    interior = slice(1, -1)
    fd_dev = float(np.abs(fd[interior] - traj.rhs00[interior]).max())
    return BoundReport(taus=traj.taus, residuals=residuals, bounds=bounds,
                       passes=passes, trace_drift=traj.trace_drift,
                       step_error=traj.step_error, norm=norm,
                       fd_cross_check=fd_dev)


def verify(cfg: GadgetConfig, rho00_0: np.ndarray,
           norm: str = "trace") -> BoundReport:
    """Integrate the full gadget from an ancilla-ground initial state and
    check all bounds."""
    traj = evolve_full(cfg, rho00_0)
    return check_bounds(cfg, traj, norm)


def residual_slope(configs_and_reports, transient_factor: float = 3.0) -> float:
    """Log-log slope of the max final-inequality residual versus epsilon,
    excluding the transient window tau < transient_factor*log(1/eps)."""
    xs, ys = [], []
    for cfg, report in configs_and_reports:
        cutoff = transient_factor * math.log(1.0 / cfg.epsilon)
        sel = report.taus >= cutoff
        r = float(report.residuals[sel, 3].max())
        xs.append(math.log(cfg.epsilon))
        ys.append(math.log(r))
    slope = np.polyfit(xs, ys, 1)[0]
    return float(slope)


def sigma_minus(d: int = 2) -> np.ndarray:
    """Lowering operator on the first two levels of a d-level system."""
    m = np.zeros((d, d), complex)
    m[0, 1] = 1.0
    return m
