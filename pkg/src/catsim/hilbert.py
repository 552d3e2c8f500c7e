"""Truncated two-mode Fock-space linear algebra.

The memory mode is the first tensor factor, the buffer the second, so a
joint basis index factors as ``i = i_mem * n_buf + i_buf``.  Everything is
dense complex double precision; values are immutable after construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, TruncationError

#: Default cap on the total Hilbert-space dimension n_mem * n_buf.
DIM_CAP = 512

#: Escalate a truncation warning to an error above this norm deficit.
DEFICIT_ERROR = 1e-4


def levels_for(alpha) -> int:
    """Fock levels needed to hold a coherent amplitude comfortably.

    Rule: n >= ceil(|alpha|^2 + 6|alpha| + 5), i.e. the Poisson mean plus a
    six-sigma tail margin.
    """
    a = abs(alpha)
    return int(math.ceil(a * a + 6.0 * a + 5.0))


@dataclass(frozen=True)
class SpaceDims:
    """Truncation sizes of the memory and buffer modes."""

    n_mem: int
    n_buf: int
    cap: int = field(default=DIM_CAP, compare=False)

    def __post_init__(self):
        if self.n_mem < 2 or self.n_buf < 2:
            raise DimensionError(f"need at least 2 Fock levels per mode, got {self}")
        if self.n_mem * self.n_buf > self.cap:
            raise DimensionError(
                f"total dimension {self.n_mem * self.n_buf} exceeds cap {self.cap}"
            )

    @property
    def total(self) -> int:
        return self.n_mem * self.n_buf

    def __repr__(self):
        return f"SpaceDims(n_mem={self.n_mem}, n_buf={self.n_buf})"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=complex)
    arr.flags.writeable = False
    return arr


class QOperator:
    """Dense operator on the truncated two-mode space."""

    __slots__ = ("dims", "mat")

    def __init__(self, dims: SpaceDims, mat: np.ndarray):
        mat = np.asarray(mat, dtype=complex)
        if mat.shape != (dims.total, dims.total):
            raise DimensionError(f"matrix shape {mat.shape} does not match {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "mat", _freeze(mat))

    def __setattr__(self, name, value):
        raise AttributeError("QOperator is immutable")

    def dag(self) -> "QOperator":
        return QOperator(self.dims, self.mat.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.abs(self.mat).max()))
        return bool(np.abs(self.mat - self.mat.conj().T).max() <= tol * scale)

    def _check(self, other: "QOperator"):
        if self.dims != other.dims:
            raise DimensionError(f"dims mismatch: {self.dims} vs {other.dims}")

    def __add__(self, other):
        self._check(other)
        return QOperator(self.dims, self.mat + other.mat)

    def __sub__(self, other):
        self._check(other)
        return QOperator(self.dims, self.mat - other.mat)

    def __neg__(self):
        return QOperator(self.dims, -self.mat)

    def __mul__(self, scalar):
        return QOperator(self.dims, self.mat * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, QOperator):
            self._check(other)
            return QOperator(self.dims, self.mat @ other.mat)
        return self.mat @ other

    def __repr__(self):
        return f"QOperator({self.dims})"


class QState:
    """Ket or density matrix on the truncated two-mode space.

    Kets must be normalized to 1e-9; densities must be unit trace and
    Hermitian at construction.  Positivity is checked by :meth:`validate`
    (it requires an eigendecomposition, so it is not run on every
    construction).
    """

    __slots__ = ("dims", "data")

    def __init__(self, dims: SpaceDims, data: np.ndarray,
                 trace_tol: float = 1e-9, herm_tol: float = 1e-10):
        data = np.asarray(data, dtype=complex)
        d = dims.total
        if data.shape == (d,):
            nrm = np.linalg.norm(data)
            if abs(nrm - 1.0) > trace_tol:
                raise ValueError(f"ket norm {nrm} deviates from 1 beyond {trace_tol}")
        elif data.shape == (d, d):
            tr = np.trace(data)
            if abs(tr - 1.0) > trace_tol:
                raise ValueError(f"density trace {tr} deviates from 1 beyond {trace_tol}")
            if np.abs(data - data.conj().T).max() > herm_tol:
                raise ValueError(f"density matrix is not Hermitian to {herm_tol}")
        else:
            raise DimensionError(f"state shape {data.shape} does not match {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", _freeze(data))

    def __setattr__(self, name, value):
        raise AttributeError("QState is immutable")

    @property
    def kind(self) -> str:
        return "ket" if self.data.ndim == 1 else "density"

    def to_density(self) -> "QState":
        if self.kind == "density":
            return self
        return QState(self.dims, np.outer(self.data, self.data.conj()))

    def density_matrix(self) -> np.ndarray:
        if self.kind == "ket":
            return np.outer(self.data, self.data.conj())
        return self.data

    def validate(self, eig_floor: float = -1e-8) -> "QState":
        """Full invariant check including spectral positivity."""
        if self.kind == "density":
            ev = np.linalg.eigvalsh(self.data)
            if ev.min() < eig_floor:
                raise ValueError(f"density has eigenvalue {ev.min()} below {eig_floor}")
        return self

    def __repr__(self):
        return f"QState({self.dims}, kind={self.kind})"


# ---------------------------------------------------------------------------
# single-mode building blocks

def destroy(n: int) -> np.ndarray:
    """Single-mode annihilation matrix on n Fock levels."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)


def fock_ket(n: int, k: int) -> np.ndarray:
    if not 0 <= k < n:
        raise TruncationError(f"Fock level {k} outside truncation {n}")
    v = np.zeros(n, dtype=complex)
    v[k] = 1.0
    return v


def coherent_vec(n: int, alpha: complex, *, warn: bool = True) -> np.ndarray:
    """Truncated coherent-state amplitudes, renormalized to unit norm.

    Warns when the truncation comfort rule is violated; raises once the
    truncated norm deficit exceeds ``DEFICIT_ERROR``.
    """
    alpha = complex(alpha)
    if warn and levels_for(alpha) > n:
        warnings.warn(
            f"coherent amplitude {abs(alpha):.3g} is uncomfortable at {n} levels "
            f"(want >= {levels_for(alpha)})",
            stacklevel=2,
        )
    k = np.arange(n)
    # log-domain to avoid overflow in alpha**n / sqrt(n!)
    with np.errstate(divide="ignore"):
        logmag = k * np.log(max(abs(alpha), 1e-300)) - 0.5 * np.cumsum(
            np.concatenate(([0.0], np.log(np.arange(1, n))))
        )
    phase = np.exp(1j * k * np.angle(alpha)) if alpha != 0 else np.ones(n)
    amps = np.exp(-0.5 * abs(alpha) ** 2 + logmag) * phase
    if alpha == 0:
        amps = fock_ket(n, 0)
    deficit = 1.0 - float(np.sum(np.abs(amps) ** 2))
    if deficit > DEFICIT_ERROR:
        raise TruncationError(
            f"coherent state alpha={alpha} loses {deficit:.3g} norm at {n} levels"
        )
    return amps / np.linalg.norm(amps)


def cat_vec(n: int, alpha: complex, parity: str) -> np.ndarray:
    """Normalized even/odd coherent superposition on one mode."""
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    alpha = complex(alpha)
    if parity == "odd" and alpha == 0:
        raise ValueError("odd cat at alpha=0 is degenerate (zero norm)")
    plus = coherent_vec(n, alpha)
    minus = coherent_vec(n, -alpha)
    v = plus + minus if parity == "even" else plus - minus
    # exact cancellation of the off-parity Fock components happens here
    return v / np.linalg.norm(v)


def displacement_matrix(n: int, lam: complex) -> np.ndarray:
    a = destroy(n)
    return expm(lam * a.conj().T - np.conj(lam) * a)


def _comfort_block(n: int, lam: complex) -> int:
    """Largest Fock index whose displaced image stays inside the truncation."""
    a = abs(lam)
    m = 0
    while m + 1 < n and (m + 1) + a * a + 6.0 * a * math.sqrt(2 * (m + 1) + 1) + 5.0 <= n:
        m += 1
    return m


# ---------------------------------------------------------------------------
# two-mode operators and states

def embed_mem(op1: np.ndarray, dims: SpaceDims) -> np.ndarray:
    return np.kron(op1, np.eye(dims.n_buf))


def embed_buf(op1: np.ndarray, dims: SpaceDims) -> np.ndarray:
    return np.kron(np.eye(dims.n_mem), op1)


def _embed(op1: np.ndarray, dims: SpaceDims, mode: str) -> np.ndarray:
    if mode == "mem":
        return embed_mem(op1, dims)
    if mode == "buf":
        return embed_buf(op1, dims)
    raise ValueError(f"mode must be 'mem' or 'buf', got {mode!r}")


def identity(dims: SpaceDims) -> QOperator:
    return QOperator(dims, np.eye(dims.total))


def mode_operators(dims: SpaceDims) -> tuple[QOperator, QOperator]:
    """Annihilation operators (a, b) of the memory and buffer modes."""
    a = QOperator(dims, embed_mem(destroy(dims.n_mem), dims))
    b = QOperator(dims, embed_buf(destroy(dims.n_buf), dims))
    return a, b


def number_operator(dims: SpaceDims, mode: str) -> QOperator:
    n = dims.n_mem if mode == "mem" else dims.n_buf
    return QOperator(dims, _embed(np.diag(np.arange(n, dtype=complex)), dims, mode))


def parity_operator(dims: SpaceDims, mode: str = "mem") -> QOperator:
    """exp(i*pi*n) on the chosen mode: diagonal +/-1, squares to identity."""
    n = dims.n_mem if mode == "mem" else dims.n_buf
    diag = np.where(np.arange(n) % 2 == 0, 1.0, -1.0).astype(complex)
    return QOperator(dims, _embed(np.diag(diag), dims, mode))


def displacement_operator(lam: complex, dims: SpaceDims, mode: str = "mem") -> QOperator:
    """Coherent displacement on one mode, unitarity-checked on the comfort block."""
    n = dims.n_mem if mode == "mem" else dims.n_buf
    lam = complex(lam)
    if levels_for(lam) > n:
        warnings.warn(
            f"displacement {abs(lam):.3g} is uncomfortable at {n} levels",
            stacklevel=2,
        )
    d1 = displacement_matrix(n, lam)
    m = _comfort_block(n, lam)
    err = np.abs((d1.conj().T @ d1) - np.eye(n))[: m + 1, : m + 1].max()
    if err > 1e-8:
        raise TruncationError(
            f"displacement {lam} non-unitary at {n} levels (block error {err:.3g})"
        )
    deficit = 1.0 - float(np.linalg.norm(d1[:, 0]) ** 2)
    if deficit > DEFICIT_ERROR:
        raise TruncationError(
            f"displacement {lam} loses {deficit:.3g} norm from vacuum at {n} levels"
        )
    return QOperator(dims, _embed(d1, dims, mode))


def vacuum_state(dims: SpaceDims) -> QState:
    v = np.zeros(dims.total, dtype=complex)
    v[0] = 1.0
    return QState(dims, v)


def fock_state(dims: SpaceDims, n_mem: int = 0, n_buf: int = 0) -> QState:
    v = np.kron(fock_ket(dims.n_mem, n_mem), fock_ket(dims.n_buf, n_buf))
    return QState(dims, v)


def coherent_state(alpha: complex, dims: SpaceDims, mode: str = "mem") -> QState:
    """Coherent ket on the chosen mode, vacuum on the other."""
    if mode == "mem":
        v = np.kron(coherent_vec(dims.n_mem, alpha), fock_ket(dims.n_buf, 0))
    else:
        v = np.kron(fock_ket(dims.n_mem, 0), coherent_vec(dims.n_buf, alpha))
    return QState(dims, v)


def cat_state(alpha: complex, parity: str, dims: SpaceDims) -> QState:
    """Even or odd cat ket on the memory, buffer in vacuum."""
    v = np.kron(cat_vec(dims.n_mem, alpha, parity), fock_ket(dims.n_buf, 0))
    return QState(dims, v)


def expectation(op: QOperator, state: QState) -> complex:
    """<O> = <psi|O|psi> for kets, Tr(O rho) for densities."""
    if op.dims != state.dims:
        raise DimensionError(f"dims mismatch: {op.dims} vs {state.dims}")
    if state.kind == "ket":
        return complex(state.data.conj() @ (op.mat @ state.data))
    return complex(np.trace(op.mat @ state.data))


def partial_trace_matrix(rho: np.ndarray, dims: SpaceDims, keep: str = "mem") -> np.ndarray:
    """Reduced density matrix of one mode from a joint (d x d) array."""
    rho = rho.reshape(dims.n_mem, dims.n_buf, dims.n_mem, dims.n_buf)
    if keep == "mem":
        return np.ascontiguousarray(np.einsum("ajbj->ab", rho))
    if keep == "buf":
        return np.ascontiguousarray(np.einsum("jajb->ab", rho))
    raise ValueError(f"keep must be 'mem' or 'buf', got {keep!r}")


def partial_trace(state: QState, keep: str = "mem") -> np.ndarray:
    """Reduced density matrix of one mode as a plain (n x n) array."""
    return partial_trace_matrix(state.density_matrix(), state.dims, keep)


def overlap(a: QState, b: QState) -> complex:
    if a.dims != b.dims:
        raise DimensionError(f"dims mismatch: {a.dims} vs {b.dims}")
    if a.kind == "ket" and b.kind == "ket":
        return complex(a.data.conj() @ b.data)
    raise ValueError("overlap is defined for kets; use state_fidelity for densities")


def state_fidelity(a: QState, b: QState) -> float:
    """Uhlmann fidelity, simplified when at least one state is pure."""
    if a.dims != b.dims:
        raise DimensionError(f"dims mismatch: {a.dims} vs {b.dims}")
    if a.kind == "ket" and b.kind == "ket":
        return float(abs(a.data.conj() @ b.data) ** 2)
    if a.kind == "ket":
        return float(np.real(a.data.conj() @ (b.data @ a.data)))
    if b.kind == "ket":
        return state_fidelity(b, a)
    # general case: (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2
    w, v = np.linalg.eigh(a.data)
    w = np.clip(w, 0.0, None)
    sq = (v * np.sqrt(w)) @ v.conj().T
    inner = sq @ b.data @ sq
    ev = np.linalg.eigvalsh(inner)
    return float(np.sum(np.sqrt(np.clip(ev, 0.0, None))) ** 2)


def edge_populations_matrix(rho: np.ndarray, dims: SpaceDims) -> tuple[float, float]:
    """Population in the top two Fock levels of each mode (mem, buf).

    Modes with fewer than 4 levels report 0: their top two levels are not
    distinguishable from the bulk.
    """
    rho_m = partial_trace_matrix(rho, dims, "mem")
    rho_b = partial_trace_matrix(rho, dims, "buf")
    top_m = float(np.real(rho_m[-1, -1] + rho_m[-2, -2])) if dims.n_mem >= 4 else 0.0
    top_b = float(np.real(rho_b[-1, -1] + rho_b[-2, -2])) if dims.n_buf >= 4 else 0.0
    return top_m, top_b


def edge_populations(state: QState) -> tuple[float, float]:
    return edge_populations_matrix(state.density_matrix(), state.dims)
