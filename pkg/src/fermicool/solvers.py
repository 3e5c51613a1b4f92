"""Cooling integrators for finite-temperature density matrices.

The continuous flows integrated here all have the symmetrized generator form

    dP/dbeta = B(P) P + P B(P)^T,

which makes congruence ("Kraus") stepping natural:

* first order:   P' = (1 + db B) P (1 + db B)^T
* second order:  P' = A P A^T with A = 1 + db B + (db^2 / 2)(B^2 + B'),

where B' is the total beta-derivative of B along the flow.  Both updates are
congruences of a positive semidefinite matrix and therefore preserve
positivity exactly, for any step size.  A Taylor expansion (worked out in
docs/second_order_scheme.md) shows the single congruence by A matches the
exact flow through second order; appending a further congruence term of size
O(db) would inject an uncompensated O(db^2) error, so none is used.

Classic RK4 is provided as well.  It does not have the congruence structure,
so the integrator monitors the smallest eigenvalue at every recorded step and
reports violations instead of clipping.

Grand canonical flows use a fixed chemical potential.  Canonical flows
replace it by the trace-preserving scalar

    sigma(P) = Tr[X S^-1 H + H S^-1 X^T] / Tr[X + X^T],
    X = P (1 - S^-1 P / N),

chosen so that d Tr[P] / dbeta = 0 identically, and track mu(beta) through
d mu/dbeta = (sigma - mu)/beta from mu(0) = Tr[H]/Tr[S].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DegenerateTraceError,
    DimensionMismatchError,
    SolverAbortError,
)
from .matcore import HermitianMatrix, OverlapMatrix, symmetrize
from .models import (
    Canonical,
    Ensemble,
    GrandCanonical,
    HamiltonianModel,
    canonical_normalization,
    check_canonical_feasible,
    effective_hamiltonian,
)

SCHEMES = ("kraus1", "kraus2", "rk4")

#: |Tr[X + X^T]| below this is a degenerate canonical constraint.
TRACE_DEGENERACY_TOL = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    """Integration parameters.

    ``delta_beta`` is snapped to divide ``beta_final`` exactly
    (``n_steps = round(beta_final / delta_beta)``); the snapped value is
    recorded in the resulting trajectory.
    """

    scheme: str
    beta_final: float
    delta_beta: float
    record_every: int = 1
    positivity_tol: float = 1e-10
    hermiticity_tol: float = 1e-10

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        if not self.beta_final > 0:
            raise ValueError(f"beta_final must be positive, got {self.beta_final}")
        if not self.delta_beta > 0:
            raise ValueError(f"delta_beta must be positive, got {self.delta_beta}")
        if self.delta_beta > self.beta_final:
            raise ValueError(
                f"delta_beta {self.delta_beta} exceeds beta_final {self.beta_final}"
            )
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.beta_final / self.delta_beta)))

    @property
    def snapped_delta_beta(self) -> float:
        return self.beta_final / self.n_steps


@dataclass(frozen=True)
class CanonicalWorkspace:
    """Intermediates of one canonical right-hand-side evaluation.

    ``fluct`` is the occupation-fluctuation matrix P (1 - S^-1 P / N) and
    ``lagrange_scalar`` the trace-ratio mu + beta dmu/dbeta that keeps the
    electron count constant.
    """

    fluct: np.ndarray
    lagrange_scalar: float


@dataclass(frozen=True)
class KrausStepOperators:
    """Operators of one congruence step.

    ``generator`` is the first-order operator K with 1 + K the one-step map;
    ``propagator`` is the full second-order map A (None for first order).
    """

    generator: np.ndarray
    propagator: np.ndarray | None = None


@dataclass
class TrajectoryDiagnostics:
    """Per-recorded-step health indicators, aligned with ``Trajectory.betas``."""

    min_eigenvalue: np.ndarray
    hermiticity_defect: np.ndarray
    trace: np.ndarray
    commutator_norm: np.ndarray
    h_refresh_defect: np.ndarray


@dataclass
class Trajectory:
    """Recorded cooling history."""

    betas: np.ndarray
    densities: list
    mu_trace: np.ndarray | None
    diagnostics: TrajectoryDiagnostics
    scheme: str
    delta_beta: float
    beta_final: float
    positivity_violations: list = field(default_factory=list)
    hermiticity_violations: list = field(default_factory=list)

    @property
    def final_density(self) -> HermitianMatrix:
        return self.densities[-1]

    @property
    def final_mu(self):
        return None if self.mu_trace is None else float(self.mu_trace[-1])


def _inverse_of(s, s_inv):
    if s_inv is not None:
        return np.asarray(s_inv, dtype=float)
    if isinstance(s, OverlapMatrix):
        return s.inverse
    return OverlapMatrix(s).inverse


def _check_dims(*mats):
    dims = {np.asarray(m).shape[0] for m in mats}
    if len(dims) != 1:
        raise DimensionMismatchError(f"matrix dimensions differ: {sorted(dims)}")


def grand_rhs(p, h, s, mu, s_inv=None) -> np.ndarray:
    """Symmetrized grand canonical cooling derivative.

    dP/dbeta = -P (1 - S^-1 P)(S^-1 H - mu)/2 - (H S^-1 - mu)(1 - P S^-1) P / 2.
    The second term is the transpose of the first for symmetric P, H, S, so
    the result is symmetric by construction.
    """
    p = np.asarray(p, dtype=float)
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    _check_dims(p, h, s)
    si = _inverse_of(s, s_inv)
    n = p.shape[0]
    f = si @ h - mu * np.eye(n)
    flow = p @ (np.eye(n) - si @ p) @ f
    return -0.5 * (flow + flow.T)


def canonical_rhs(p, h, s, normalization, s_inv=None):
    """Symmetrized canonical cooling derivative and its workspace.

    The derivative is traceless by construction: the lagrange scalar is the
    unique value making d Tr[P]/dbeta vanish.

    Returns
    -------
    (ndarray, CanonicalWorkspace)

    Raises
    ------
    DegenerateTraceError
        When |Tr[X + X^T]| < 1e-14 (state fully occupied or empty).
    """
    p = np.asarray(p, dtype=float)
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    _check_dims(p, h, s)
    si = _inverse_of(s, s_inv)
    n = p.shape[0]
    x = p - (p @ si @ p) / normalization
    den = 2.0 * float(np.trace(x))
    if abs(den) < TRACE_DEGENERACY_TOL:
        raise DegenerateTraceError(
            f"Tr[X + X^T] = {den:.3e} is degenerate; the state is fully "
            f"occupied or empty and the trace constraint cannot be enforced"
        )
    t1 = si @ h
    num = 2.0 * float(np.trace(x @ t1))
    scalar = num / den
    flow = x @ (t1 - scalar * np.eye(n))
    rhs = -0.5 * (flow + flow.T)
    return rhs, CanonicalWorkspace(fluct=x, lagrange_scalar=scalar)


def mu_rhs(mu, beta, workspace: CanonicalWorkspace) -> float:
    """Chemical potential derivative (lagrange_scalar - mu) / beta, beta > 0."""
    if not beta > 0:
        raise ValueError(f"mu derivative requires beta > 0, got {beta}")
    return (workspace.lagrange_scalar - mu) / beta


def bloch_rhs(rho, h) -> np.ndarray:
    """Symmetrized Gibbs cooling derivative -(H rho + rho H)/2."""
    rho = np.asarray(rho, dtype=float)
    h = np.asarray(h, dtype=float)
    _check_dims(rho, h)
    return -0.5 * (h @ rho + rho @ h)


def _grand_generator(p, h, si, mu, delta_beta):
    n = p.shape[0]
    f = h @ si - mu * np.eye(n)
    return -0.5 * delta_beta * (f @ (np.eye(n) - p @ si)), f


def step_kraus1(p, h, s, mu, delta_beta, s_inv=None):
    """First-order positivity-preserving step P' = (1 + K) P (1 + K)^T.

    K = -(delta_beta / 2)(H S^-1 - mu)(1 - P S^-1).  The update is a
    congruence, so positive semidefiniteness of P is preserved exactly.
    """
    p = np.asarray(p, dtype=float)
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    _check_dims(p, h, s)
    si = _inverse_of(s, s_inv)
    k, _ = _grand_generator(p, h, si, mu, delta_beta)
    a1 = np.eye(p.shape[0]) + k
    return symmetrize(a1 @ p @ a1.T), KrausStepOperators(generator=k)


def step_kraus2(p, h, s, mu, delta_beta, s_inv=None):
    """Second-order positivity-preserving step P' = A P A^T.

    A = 1 + K (1 + K/2) + (delta_beta / 4)(H S^-1 - mu)(P K^T + K P) S^-1
    with the first-order K of :func:`step_kraus1`.  A single congruence by A
    reproduces the flow through O(delta_beta^2); see the module docstring and
    docs/second_order_scheme.md for the expansion.
    """
    p = np.asarray(p, dtype=float)
    h = np.asarray(h, dtype=float)
    s = np.asarray(s, dtype=float)
    _check_dims(p, h, s)
    si = _inverse_of(s, s_inv)
    n = p.shape[0]
    k, f = _grand_generator(p, h, si, mu, delta_beta)
    a = (
        np.eye(n)
        + k @ (np.eye(n) + 0.5 * k)
        + 0.25 * delta_beta * f @ (p @ k.T + k @ p) @ si
    )
    return symmetrize(a @ p @ a.T), KrausStepOperators(generator=k, propagator=a)


def step_rk4(y, rhs: Callable, delta_beta):
    """Classic four-stage Runge-Kutta update of an arbitrary ndarray state."""
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * delta_beta * k1)
    k3 = rhs(y + 0.5 * delta_beta * k2)
    k4 = rhs(y + delta_beta * k3)
    return y + (delta_beta / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def commutator_defect(h, h_next, delta_beta) -> float:
    """Frobenius norm of [H, (H_next - H) / delta_beta].

    A scalar watch for how strongly a density-dependent Hamiltonian fails to
    commute with its own rate of change; identically zero for linear models.
    """
    h = np.asarray(h, dtype=float)
    h_next = np.asarray(h_next, dtype=float)
    _check_dims(h, h_next)
    if not delta_beta > 0:
        raise ValueError(f"delta_beta must be positive, got {delta_beta}")
    rate = (h_next - h) / delta_beta
    comm = h @ rate - rate @ h
    return float(np.linalg.norm(comm, "fro"))


def _scalar_rate(p, pdot, t1, si, norm, x, scalar):
    # d/dbeta of the lagrange scalar along the flow: differentiate the trace
    # ratio with Xdot = Pdot - (Pdot S^-1 P + P S^-1 Pdot)/N.
    xdot = pdot - (pdot @ si @ p + p @ si @ pdot) / norm
    trx = float(np.trace(x))
    return (float(np.trace(xdot @ t1)) - scalar * float(np.trace(xdot))) / trx


def _step_kraus_canonical(p, h, s_mat, si, norm, delta_beta, second_order):
    """Congruence step for the canonical flow.

    The trace-preserving scalar replaces the chemical potential and the
    fluctuation factor carries the canonical normalization:
    B = -1/2 (H S^-1 - sigma)(1 - P S^-1 / N).  Returns the new density, the
    scalar, and its flow derivative (second order only).
    """
    n = p.shape[0]
    eye = np.eye(n)
    pdot, ws = canonical_rhs(p, h, s_mat, norm, s_inv=si)
    scalar = ws.lagrange_scalar
    g = h @ si - scalar * eye
    b = -0.5 * (g @ (eye - (p @ si) / norm))
    if not second_order:
        a = eye + delta_beta * b
        return symmetrize(a @ p @ a.T), scalar, None
    t1 = si @ h
    sdot = _scalar_rate(p, pdot, t1, si, norm, ws.fluct, scalar)
    bdot = 0.5 * sdot * (eye - (p @ si) / norm) + (g @ pdot @ si) / (2.0 * norm)
    a = eye + delta_beta * b + 0.5 * delta_beta**2 * (b @ b + bdot)
    return symmetrize(a @ p @ a.T), scalar, sdot


def cool(model: HamiltonianModel, ensemble: Ensemble, config: SolverConfig,
         refresh_per_stage: bool = False) -> Trajectory:
    """Integrate the cooling flow from beta = 0 to ``config.beta_final``.

    Grand canonical runs start from P(0) = S/2 with the ensemble's fixed mu.
    Canonical runs start from P(0) = (N/2) S with mu(0) = Tr[H]/Tr[S] and
    integrate mu alongside P (RK4 treats the pair as one state vector; the
    congruence schemes accumulate beta mu = integral of the lagrange scalar).

    For density-dependent models the Hamiltonian is rebuilt from the current
    density at the start of every step and held fixed across the step's
    stages; ``refresh_per_stage`` switches RK4 to rebuilding inside each stage
    instead (experimental).

    Recorded every ``config.record_every`` steps (plus beta = 0 and the final
    step): the density, mu, the smallest eigenvalue of P, the max-abs
    hermiticity defect of the raw update, Tr[P], the commutator norm
    ||[S^-1 P, S^-1 H]||_F, and the Hamiltonian refresh defect
    ||[H, dH/dbeta]||_F.

    Raises
    ------
    SolverAbortError
        If the state stops being finite; carries the last good beta.
    InfeasibleEnsembleError, DegenerateTraceError
        Propagated from the canonical constraint machinery.
    """
    system = model.system
    s_mat = system.s.mat
    si = system.s.inverse
    n = system.dim
    n_steps = config.n_steps
    db = config.snapped_delta_beta
    canonical = isinstance(ensemble, Canonical)
    second_order = config.scheme == "kraus2"

    if canonical:
        check_canonical_feasible(ensemble.n_electrons, s_mat)
        norm = canonical_normalization(ensemble.n_electrons, s_mat)
        p = 0.5 * norm * s_mat
        mu = float(np.trace(system.h_core.mat)) / float(np.trace(s_mat))
        beta_mu = 0.0  # running integral of the lagrange scalar, equals beta * mu
    else:
        norm = 1.0
        p = 0.5 * s_mat
        mu = float(ensemble.mu)

    h_eff = effective_hamiltonian(model, p, norm).mat

    betas, densities, mus = [], [], []
    d_mineig, d_herm, d_trace, d_comm, d_refresh = [], [], [], [], []
    pos_viol, herm_viol = [], []

    def record(beta, p_now, h_now, herm_defect, refresh_defect, mu_now):
        betas.append(beta)
        densities.append(HermitianMatrix(p_now))
        mus.append(mu_now)
        eigmin = float(np.linalg.eigvalsh(p_now)[0])
        q = si @ p_now
        t = si @ h_now
        comm = float(np.linalg.norm(q @ t - t @ q, "fro"))
        d_mineig.append(eigmin)
        d_herm.append(herm_defect)
        d_trace.append(float(np.trace(p_now)))
        d_comm.append(comm)
        d_refresh.append(refresh_defect)
        if eigmin < -config.positivity_tol:
            pos_viol.append((beta, eigmin))
        if herm_defect > config.hermiticity_tol:
            herm_viol.append((beta, herm_defect))

    record(0.0, p, h_eff, 0.0, 0.0, mu)

    def grand_rk4_rhs(q):
        if refresh_per_stage and not model.is_linear:
            h_stage = effective_hamiltonian(model, symmetrize(q), norm).mat
            return grand_rhs(q, h_stage, s_mat, mu, s_inv=si)
        return grand_rhs(q, h_eff, s_mat, mu, s_inv=si)

    def canonical_rk4_rhs(y):
        # packed autonomous state [vec(P), mu, beta]
        q = y[: n * n].reshape(n, n)
        mu_y = y[n * n]
        beta_y = y[n * n + 1]
        if refresh_per_stage and not model.is_linear:
            h_stage = effective_hamiltonian(model, symmetrize(q), norm).mat
        else:
            h_stage = h_eff
        dq, ws = canonical_rhs(q, h_stage, s_mat, norm, s_inv=si)
        if beta_y > 0.0:
            dmu = mu_rhs(mu_y, beta_y, ws)
        else:
            # limiting slope at beta = 0: half the scalar's flow derivative
            t1 = si @ h_stage
            dmu = 0.5 * _scalar_rate(q, dq, t1, si, norm, ws.fluct, ws.lagrange_scalar)
        return np.concatenate([dq.ravel(), [dmu, 1.0]])

    for i in range(n_steps):
        beta_i = config.beta_final * i / n_steps
        beta_next = config.beta_final * (i + 1) / n_steps

        refresh_defect = 0.0
        if not model.is_linear:
            h_new = effective_hamiltonian(model, p, norm).mat
            if i > 0:
                refresh_defect = commutator_defect(h_eff, h_new, db)
            h_eff = h_new

        # non-finite values are detected and turned into SolverAbortError below
        with np.errstate(over="ignore", invalid="ignore"):
            if config.scheme == "rk4":
                if canonical:
                    y = np.concatenate([p.ravel(), [mu, beta_i]])
                    y = step_rk4(y, canonical_rk4_rhs, db)
                    p_raw = y[: n * n].reshape(n, n)
                    mu = float(y[n * n])
                else:
                    p_raw = step_rk4(p, grand_rk4_rhs, db)
            elif canonical:
                p_raw, scalar, sdot = _step_kraus_canonical(
                    p, h_eff, s_mat, si, norm, db, second_order
                )
                # d(beta mu)/dbeta equals the scalar exactly; integrate it at
                # the scheme's own order (Euler / trapezoid-by-Taylor).
                beta_mu += db * scalar if sdot is None else db * (scalar + 0.5 * db * sdot)
                mu = beta_mu / beta_next
            else:
                step = step_kraus2 if second_order else step_kraus1
                p_raw, _ops = step(p, h_eff, s_mat, mu, db, s_inv=si)

            if not np.all(np.isfinite(p_raw)) or (canonical and not np.isfinite(mu)):
                raise SolverAbortError(beta_i)
            herm_defect = float(np.abs(p_raw - p_raw.T).max())
            p = symmetrize(p_raw)

        if (i + 1) % config.record_every == 0 or i + 1 == n_steps:
            record(beta_next, p, h_eff, herm_defect, refresh_defect, mu)

    diagnostics = TrajectoryDiagnostics(
        min_eigenvalue=np.array(d_mineig),
        hermiticity_defect=np.array(d_herm),
        trace=np.array(d_trace),
        commutator_norm=np.array(d_comm),
        h_refresh_defect=np.array(d_refresh),
    )
    return Trajectory(
        betas=np.array(betas),
        densities=densities,
        mu_trace=np.array(mus) if canonical else None,
        diagnostics=diagnostics,
        scheme=config.scheme,
        delta_beta=db,
        beta_final=config.beta_final,
        positivity_violations=pos_viol,
        hermiticity_violations=herm_viol,
    )
