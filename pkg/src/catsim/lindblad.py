"""Master-equation integration and Liouvillian spectral analysis.

Vectorization is column-stacking: vec(A X B) = (B^T kron A) vec(X), with
``reshape(order='F')`` mapping between matrices and vectors.  The integrator
is an adaptive explicit Runge-Kutta (DOP853) at rtol 1e-8 / atol 1e-10 with
no trace renormalization: trace drift is asserted, not corrected.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import hilbert
from .errors import DegenerateGapError, DimensionError, NumericalError, TruncationError
from .hilbert import QOperator, QState, SpaceDims
from .pulse import TimeDependentProblem

#: Default cap on the Hilbert dimension d for dense d^2 x d^2 Liouvillians.
LIOUVILLIAN_DIM_CAP = 60


@dataclass(frozen=True)
class Liouvillian:
    dims: SpaceDims
    matrix: np.ndarray  # (d^2, d^2) complex


@dataclass
class EvolutionResult:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    states: list[QState] | None
    final_state: QState


@dataclass(frozen=True)
class GapResult:
    lambda_min: complex
    steady_dim: int
    zero_tol: float

    @property
    def rate(self) -> float:
        """Confinement-style rate -2 Re(lambda_min)."""
        return -2.0 * self.lambda_min.real


@dataclass
class SteadyStateResult:
    dim: int
    state: QState | None  # set when the steady space is one-dimensional
    basis: list[np.ndarray] | None  # orthonormal kernel basis otherwise


def lindblad_rhs(h: np.ndarray, c_ops: list[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """d(rho)/dt for a constant Hamiltonian and collapse set."""
    out = -1j * (h @ rho - rho @ h)
    for c in c_ops:
        cd = c.conj().T
        cdc = cd @ c
        out += c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)
    return out


def _interval_rhs(h: np.ndarray, c_ops: list[np.ndarray]):
    """Closure computing K rho + rho K' + sum C rho C' with K precomputed."""
    k = -1j * h
    for c in c_ops:
        k = k - 0.5 * (c.conj().T @ c)
    kd = k.conj().T
    cs = [(c, c.conj().T) for c in c_ops]
    d = h.shape[0]

    def rhs(_t, y):
        rho = y.reshape(d, d)
        out = k @ rho + rho @ kd
        for c, cd in cs:
            out += c @ rho @ cd
        return out.ravel()

    return rhs


def _check_state(rho: np.ndarray, t: float, edge_warn: float, edge_error: float,
                 dims: SpaceDims, warned: list):
    tr = np.trace(rho)
    if abs(tr - 1.0) > 1e-6:
        raise NumericalError(f"trace drifted to {tr} at t = {t:.6g}")
    if np.abs(rho - rho.conj().T).max() > 1e-8:
        raise NumericalError(f"Hermiticity lost at t = {t:.6g}")
    if edge_error is None:
        return
    top_m, top_b = hilbert.edge_populations_matrix(rho, dims)
    worst = max(top_m, top_b)
    if worst > edge_error:
        raise TruncationError(
            f"truncation-edge population {worst:.3g} at t = {t:.6g}; enlarge the space"
        )
    if worst > edge_warn and not warned:
        warned.append(t)
        warnings.warn(f"truncation-edge population {worst:.3g} at t = {t:.6g}")


def evolve(
    problem: TimeDependentProblem,
    times,
    observables: dict[str, QOperator] | None = None,
    store_states: bool = False,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    edge_warn: float = 1e-8,
    edge_error: float = 1e-6,
) -> EvolutionResult:
    """Integrate the master equation, sampling at the requested times.

    Piecewise-constant intervals are integrated in sequence; instantaneous
    unitaries attached to a breakpoint are applied before any sample taken
    at that time.  Set ``edge_error=None`` to disable the truncation-edge
    monitor.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    tol = 1e-9 * max(problem.total_time, 1e-30)
    if times[0] < -tol or times[-1] > problem.total_time + tol:
        raise ValueError("sample times outside the problem window")

    observables = observables or {}
    for name, op in observables.items():
        if op.dims != problem.dims:
            raise DimensionError(f"observable {name!r} has mismatched dims")
    obs_out = {name: np.empty(len(times), dtype=complex) for name in observables}
    states: list[QState] | None = [] if store_states else None

    rho = problem.initial.density_matrix().copy()
    dims = problem.dims
    warned: list = []
    cmats = [c.mat for c in problem.collapse]
    next_sample = 0

    def take_sample(t, rho):
        nonlocal next_sample
        _check_state(rho, t, edge_warn, edge_error, dims, warned)
        for name, op in observables.items():
            obs_out[name][next_sample] = np.trace(op.mat @ rho)
        if states is not None:
            sym = 0.5 * (rho + rho.conj().T)
            states.append(QState(dims, sym, trace_tol=2e-6, herm_tol=1e-8))
        next_sample += 1

    bps = problem.breakpoints
    for k in range(len(bps) - 1):
        t0, t1 = bps[k], bps[k + 1]
        for u in problem.unitaries.get(t0, []):
            rho = u.mat @ rho @ u.mat.conj().T
        while next_sample < len(times) and times[next_sample] <= t0 + tol:
            take_sample(t0, rho)
        interior = [t for t in times[next_sample:] if t < t1 - tol]
        t_eval = sorted(set(interior + [t1]))
        rhs = _interval_rhs(problem.hamiltonians[k].mat, cmats)
        sol = solve_ivp(
            rhs, (t0, t1), rho.ravel(), method="DOP853", t_eval=t_eval,
            rtol=rtol, atol=atol,
        )
        if not sol.success:
            nrm = float(np.abs(rho).max())
            raise NumericalError(
                f"integration failed in [{t0:.6g}, {t1:.6g}]: {sol.message} "
                f"(state max-abs {nrm:.3g})"
            )
        d = dims.total
        for j, tj in enumerate(sol.t[:-1]):
            take_sample(tj, sol.y[:, j].reshape(d, d))
        rho = sol.y[:, -1].reshape(d, d)
    for u in problem.unitaries.get(bps[-1], []):
        rho = u.mat @ rho @ u.mat.conj().T
    while next_sample < len(times):
        take_sample(problem.total_time, rho)

    sym = 0.5 * (rho + rho.conj().T)
    final = QState(dims, sym, trace_tol=2e-6, herm_tol=1e-8)
    return EvolutionResult(times=times, observables=obs_out, states=states, final_state=final)


def evolve_adjoint(problem: TimeDependentProblem, op: QOperator,
                   rtol: float = 1e-8, atol: float = 1e-10) -> QOperator:
    """Propagate an observable through the adjoint (Heisenberg) channel.

    Returns M such that Tr[op . E(rho)] = Tr[M . rho] for the channel E
    realized by the problem (intervals are traversed in reverse; breakpoint
    unitaries become U' M U).
    """
    if op.dims != problem.dims:
        raise DimensionError("observable dims do not match the problem")
    m = op.mat.copy()
    d = problem.dims.total
    cmats = [c.mat for c in problem.collapse]
    bps = problem.breakpoints
    for u in reversed(problem.unitaries.get(bps[-1], [])):
        m = u.mat.conj().T @ m @ u.mat
    for k in range(len(bps) - 2, -1, -1):
        h = problem.hamiltonians[k].mat
        kd = 1j * h
        for c in cmats:
            kd = kd - 0.5 * (c.conj().T @ c)
        kdd = kd.conj().T
        pairs = [(c, c.conj().T) for c in cmats]

        def rhs(_t, y):
            mm = y.reshape(d, d)
            out = kd @ mm + mm @ kdd
            for c, cd in pairs:
                out += cd @ mm @ c
            return out.ravel()

        span = bps[k + 1] - bps[k]
        sol = solve_ivp(rhs, (0.0, span), m.ravel(), method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            raise NumericalError(f"adjoint integration failed on interval {k}: {sol.message}")
        m = sol.y[:, -1].reshape(d, d)
        for u in reversed(problem.unitaries.get(bps[k], [])):
            m = u.mat.conj().T @ m @ u.mat
    return QOperator(problem.dims, m)


# ---------------------------------------------------------------------------
# Liouvillian construction and spectra

def build_liouvillian(h: QOperator, collapse, dim_cap: int = LIOUVILLIAN_DIM_CAP) -> Liouvillian:
    """Dense superoperator L with vec(d rho/dt) = L vec(rho)."""
    d = h.dims.total
    if d > dim_cap:
        raise DimensionError(f"dimension {d} exceeds the Liouvillian cap {dim_cap}")
    eye = np.eye(d)
    hm = h.mat
    lio = -1j * (np.kron(eye, hm) - np.kron(hm.T, eye))
    for c in collapse:
        cm = c.mat
        cdc = cm.conj().T @ cm
        lio += np.kron(cm.conj(), cm)
        lio -= 0.5 * (np.kron(eye, cdc) + np.kron(cdc.T, eye))
    # trace preservation: rows must annihilate vec(identity) under L'
    resid = np.linalg.norm(lio.conj().T @ eye.ravel(order="F"))
    scale = max(1.0, float(np.abs(lio).max()))
    if resid > 1e-8 * scale:
        raise NumericalError(f"Liouvillian violates trace preservation (residual {resid:.3g})")
    return Liouvillian(h.dims, lio)


def apply_liouvillian(lio: Liouvillian, rho: np.ndarray) -> np.ndarray:
    return (lio.matrix @ rho.ravel(order="F")).reshape(rho.shape, order="F")


def spectral_gap(lio: Liouvillian, rate_scale: float | None = None) -> GapResult:
    """Nonzero eigenvalue of smallest |Re|, plus the steady-space dimension.

    Eigenvalues with |Re| below 1e-9 times the rate scale (by default the
    largest decay rate in the spectrum) count as steady.
    """
    ev = np.linalg.eigvals(lio.matrix)
    if rate_scale is None:
        rate_scale = max(1.0, float(np.abs(ev.real).max()))
    zero_tol = 1e-9 * rate_scale
    steady = ev[np.abs(ev.real) < zero_tol]
    moving = ev[np.abs(ev.real) >= zero_tol]
    if moving.size == 0:
        raise DegenerateGapError(
            "no eigenvalue separated from the steady space", cluster=ev.tolist()
        )
    order = np.lexsort((moving.imag, np.abs(moving.real)))
    return GapResult(complex(moving[order[0]]), int(steady.size), zero_tol)


def alpha0_confinement_closed_form(g2: float, kappa_b: float) -> float:
    """Confinement rate of the undriven pair-exchange model at alpha = 0.

    (kappa_b/2) Re(1 - sqrt(1 - 32 g2^2 / kappa_b^2)): quadratic in g2 when
    overdamped (-> 8 g2^2/kappa_b), saturating at kappa_b/2 above the
    critical coupling kappa_b/sqrt(32).
    """
    if g2 < 0 or kappa_b <= 0:
        raise ValueError("rates must be positive")
    r = 1.0 - 32.0 * g2**2 / kappa_b**2
    return 0.5 * kappa_b * float(np.real(1.0 - np.sqrt(complex(r))))


def _effective_generator(g2: float, kappa_b: float, dims: SpaceDims) -> np.ndarray:
    from . import model

    a, b = model.mode_ops_cached(dims)
    a2 = a @ a
    return -1j * g2 * (a2 @ b.conj().T + a2.conj().T @ b) - 0.5 * kappa_b * (b.conj().T @ b)


def two_photon_alpha0_gap(g2: float, kappa_b: float, dims: SpaceDims) -> GapResult:
    """Numeric Liouvillian gap of the undriven model, any truncation.

    The jump term strictly lowers the weighted excitation n_mem + 2 n_buf
    while the drift preserves it, so the superoperator is block triangular
    and its spectrum is exactly {lambda_i + conj(lambda_j)} over the
    eigenvalues of the d x d effective generator
    G = -i g2 (a^2 b' + a'^2 b) - (kappa_b/2) b'b.  This reaches truncations
    far beyond the dense d^2 x d^2 solver and is cross-checked against it
    in the test suite.
    """
    ev = np.linalg.eigvals(_effective_generator(g2, kappa_b, dims))
    pair_re = ev.real[:, None] + ev.real[None, :]
    pair_im = ev.imag[:, None] - ev.imag[None, :]
    zero_tol = 1e-9 * kappa_b
    flat_re = pair_re.ravel()
    flat_im = pair_im.ravel()
    steady = np.abs(flat_re) < zero_tol
    moving_re = flat_re[~steady]
    moving_im = flat_im[~steady]
    if moving_re.size == 0:
        raise DegenerateGapError("all pair eigenvalues are steady", cluster=ev.tolist())
    order = np.lexsort((moving_im, np.abs(moving_re)))
    lam = complex(moving_re[order[0]], moving_im[order[0]])
    return GapResult(lam, int(np.count_nonzero(steady)), zero_tol)


def alpha0_gap_reduced(g2: float, kappa_b: float) -> complex:
    """Fast path: the same gap from the minimal two-state excitation block.

    The decaying subspace reached from the steady pair {|0,0>, |1,0>} by one
    memory excitation is spanned by {|2,0>, |0,1>}; the generator there is a
    2 x 2 matrix whose slowest eigenvalue is the gap.
    """
    g1 = np.array(
        [[0.0, -1j * math.sqrt(2.0) * g2], [-1j * math.sqrt(2.0) * g2, -0.5 * kappa_b]],
        dtype=complex,
    )
    ev = np.linalg.eigvals(g1)
    return complex(ev[np.argmin(np.abs(ev.real))])


def steady_state(lio: Liouvillian, zero_tol: float | None = None) -> SteadyStateResult:
    """Steady density matrix, or an orthonormal kernel basis when degenerate."""
    ev, vecs = np.linalg.eig(lio.matrix)
    if zero_tol is None:
        zero_tol = 1e-9 * max(1.0, float(np.abs(ev.real).max()))
    idx = np.nonzero(np.abs(ev) < zero_tol)[0]
    if idx.size == 0:
        raise DegenerateGapError("no steady eigenvector found", cluster=ev.tolist())
    d = lio.dims.total
    if idx.size == 1:
        rho = vecs[:, idx[0]].reshape(d, d, order="F")
        rho = 0.5 * (rho + rho.conj().T)
        tr = np.trace(rho)
        if abs(tr) < 1e-12:
            raise NumericalError("steady eigenvector is traceless")
        rho = rho / tr
        wmin = float(np.linalg.eigvalsh(rho).min())
        if wmin < -1e-6:
            raise NumericalError(f"steady state indefinite (eigenvalue {wmin:.3g})")
        return SteadyStateResult(dim=1, state=QState(lio.dims, rho), basis=None)
    q, _ = np.linalg.qr(vecs[:, idx])
    basis = [q[:, j].reshape(d, d, order="F") for j in range(idx.size)]
    return SteadyStateResult(dim=int(idx.size), state=None, basis=basis)
