"""Physical parameter sets and Hamiltonian / dissipator builders.

All rates stored in :class:`PhysicalParams` are angular (rad/s).  Circuit
quantities (:class:`CircuitParams`) are ordinary frequencies in Hz, matching
how device parameters are tabulated; pump-to-coupling formulas convert to
rad/s at their return boundary.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import hilbert
from .errors import TruncationError
from .hilbert import QOperator, SpaceDims

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicalParams:
    """Rates and couplings of the memory-buffer model, in rad/s.

    ``g2`` may be complex; the stabilized amplitude then satisfies
    alpha^2 = eps_d / conj(g2).  ``kappa_a_reset`` is the effective memory
    decay produced by the reset pump after adiabatic elimination of the
    buffer; ``g_reset`` keeps the full beam-splitter interaction available
    for verification.  ``kerr_buf`` is an optional buffer self-Kerr
    (coefficient of b'^2 b^2), zero by default.
    """

    g2: complex
    kappa_b: float
    kappa_a: float = 0.0
    n_th_mem: float = 0.0
    n_th_buf: float = 0.0
    delta_mem: float = 0.0
    delta_buf: float = 0.0
    g_l: float = 0.0
    g_sp: float = 0.0
    eta_het: float = 1.0
    kerr_buf: float = 0.0
    g_reset: float = 0.0
    kappa_a_reset: float = 0.0

    def __post_init__(self):
        if not self.kappa_b > 0:
            raise ValueError(f"kappa_b must be positive, got {self.kappa_b}")
        if self.kappa_a < 0 or self.kappa_a_reset < 0:
            raise ValueError("memory decay rates must be >= 0")
        if self.n_th_mem < 0 or self.n_th_buf < 0:
            raise ValueError("thermal occupations must be >= 0")
        if not 0.0 < self.eta_het <= 1.0:
            raise ValueError(f"eta_het must be in (0, 1], got {self.eta_het}")

    def stabilized_alpha(self, eps_d: complex) -> complex:
        """Amplitude alpha with alpha^2 = eps_d / conj(g2)."""
        if self.g2 == 0:
            raise ValueError("alpha undefined at g2 = 0")
        return complex(np.sqrt(complex(eps_d) / np.conj(self.g2)))

    def drive_for_alpha(self, alpha: complex) -> complex:
        """Buffer drive eps_d stabilizing the requested amplitude."""
        return complex(alpha) ** 2 * np.conj(self.g2)


@dataclass(frozen=True)
class CircuitParams:
    """Josephson circuit constants (frequencies in Hz, i.e. energy / h).

    ``E_L`` is recorded for provenance but enters no formula here.
    """

    E_J: float
    dE_J: float
    phi_a: float
    phi_b: float
    omega_a0: float
    omega_b0: float
    E_L: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.phi_a < 1.0 and 0.0 < self.phi_b < 1.0):
            raise ValueError("zero-point phases must lie in (0, 1)")
        if self.E_J <= 0:
            raise ValueError("E_J must be positive")


@dataclass(frozen=True)
class DriveSpec:
    """Buffer drive eps_d and memory drive eps_Z (complex rad/s)."""

    eps_d: complex = 0.0
    eps_Z: complex = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.eps_d) and np.isfinite(self.eps_Z)):
            raise ValueError("drive amplitudes must be finite")


# ---------------------------------------------------------------------------
# pump-amplitude -> coupling-rate formulas

def coupling_rates(
    circuit: CircuitParams,
    pump_kind: str,
    eps_p: float,
    kappa_b: float | None = None,
) -> dict[str, float]:
    """Coupling rates (rad/s) produced by a flux pump of amplitude eps_p.

    ``pump_kind`` selects the parametric process: "two_photon" gives the
    pair-exchange rate g2, "longitudinal" the conditional-displacement set
    (g_lin, g_l, g_sp), and "reset" the beam-splitter rate g_reset together
    with the induced memory decay 4*g_reset^2/kappa_b (kappa_b in rad/s is
    then required).
    """
    if not 0.0 <= eps_p <= 0.5:
        raise ValueError(f"pump amplitude {eps_p} outside the expansion range [0, 0.5]")
    if eps_p > 0.3:
        warnings.warn(f"pump amplitude {eps_p} > 0.3: expansion accuracy degrades")
    ej, dej = circuit.E_J, circuit.dE_J
    pa, pb = circuit.phi_a, circuit.phi_b
    if pump_kind == "two_photon":
        return {"g2": TWO_PI * 0.5 * ej * eps_p * pa**2 * pb}
    if pump_kind == "longitudinal":
        g_l = TWO_PI * ej * eps_p * pa**2 * pb
        return {
            "g_lin": -TWO_PI * ej * eps_p * pb,
            "g_l": g_l,
            "g_sp": 0.5 * (pb / pa) ** 2 * g_l,
        }
    if pump_kind == "reset":
        if kappa_b is None or kappa_b <= 0:
            raise ValueError("reset rate requires a positive kappa_b (rad/s)")
        g_reset = TWO_PI * dej * eps_p**2 * pa * pb / 8.0
        return {"g_reset": g_reset, "kappa_a_reset": 4.0 * g_reset**2 / kappa_b}
    raise ValueError(f"unknown pump kind {pump_kind!r}")


def saddle_frequencies(circuit: CircuitParams) -> dict[str, float]:
    """Mode frequencies (Hz) at the two flux saddle points.

    Junction asymmetry shifts each bare frequency by -/+ 2*dE_J*phi^2 at the
    (pi/2, +/-pi/2) bias points.
    """
    shifts = {
        "omega_a_plus": circuit.omega_a0 - 2.0 * circuit.dE_J * circuit.phi_a**2,
        "omega_a_minus": circuit.omega_a0 + 2.0 * circuit.dE_J * circuit.phi_a**2,
        "omega_b_plus": circuit.omega_b0 - 2.0 * circuit.dE_J * circuit.phi_b**2,
        "omega_b_minus": circuit.omega_b0 + 2.0 * circuit.dE_J * circuit.phi_b**2,
    }
    return shifts


def flux_shift(circuit: CircuitParams, phi_sigma: float, phi_delta: float) -> float:
    """Buffer frequency shift (Hz) at a DC flux bias point.

    Second-order coefficient of the nonlinear potential in the buffer phase:
    2*phi_b^2 * (E_J cos(phi_sigma) cos(phi_delta)
                 - dE_J sin(phi_sigma) sin(phi_delta)).
    At the saddles (pi/2, +/-pi/2) only the asymmetry term survives and the
    shift reduces to -/+ 2*dE_J*phi_b^2.
    """
    if not (-math.pi <= phi_sigma <= math.pi and -math.pi <= phi_delta <= math.pi):
        raise ValueError("flux biases must lie in [-pi, pi]")
    return (
        2.0
        * circuit.phi_b**2
        * (
            circuit.E_J * math.cos(phi_sigma) * math.cos(phi_delta)
            - circuit.dE_J * math.sin(phi_sigma) * math.sin(phi_delta)
        )
    )


# ---------------------------------------------------------------------------
# Hamiltonian and dissipator builders

def _assert_hermitian(mat: np.ndarray, what: str):
    scale = max(1.0, float(np.abs(mat).max()))
    err = np.abs(mat - mat.conj().T).max()
    if err > 1e-12 * scale:
        raise AssertionError(f"{what} lost Hermiticity (error {err:.3g})")


def hamiltonian_two_photon(
    params: PhysicalParams,
    drive: DriveSpec,
    dims: SpaceDims,
    pump_scale: complex = 1.0,
) -> QOperator:
    """Pair-exchange Hamiltonian with detunings and drives.

    H = delta_mem a'a + delta_buf b'b
        + conj(g2_eff) a^2 b' + g2_eff a'^2 b
        - conj(eps_d) b - eps_d b'
        + eps_Z a' + conj(eps_Z) a   (+ optional buffer Kerr)

    ``pump_scale`` multiplies g2 (pump on/off or partial amplitude).
    """
    g2 = complex(pump_scale) * complex(params.g2)
    if g2 != 0 and drive.eps_d != 0:
        alpha = math.sqrt(abs(drive.eps_d) / abs(g2))
        if hilbert.levels_for(alpha) > dims.n_mem:
            raise TruncationError(
                f"target |alpha|^2 = {alpha**2:.3g} needs n_mem >= "
                f"{hilbert.levels_for(alpha)}, got {dims.n_mem}"
            )
    a, b = mode_ops_cached(dims)
    ad, bd = a.conj().T, b.conj().T
    h = params.delta_mem * (ad @ a) + params.delta_buf * (bd @ b)
    if g2 != 0:
        a2 = a @ a
        h += np.conj(g2) * (a2 @ bd) + g2 * (a2.conj().T @ b)
    if drive.eps_d != 0:
        h += -np.conj(drive.eps_d) * b - drive.eps_d * bd
    if drive.eps_Z != 0:
        h += drive.eps_Z * ad + np.conj(drive.eps_Z) * a
    if params.kerr_buf != 0:
        h += params.kerr_buf * (bd @ bd @ b @ b)
    _assert_hermitian(h, "two-photon Hamiltonian")
    return QOperator(dims, h)


def hamiltonian_longitudinal(
    params: PhysicalParams,
    dims: SpaceDims,
    residual_g_lin: float = 0.0,
    pump_scale: float = 1.0,
) -> QOperator:
    """Conditional-displacement (longitudinal) Hamiltonian.

    H = g_lin (b + b') + g_l a'a (b + b') + g_sp (b'^2 b + b' b^2)

    The linear buffer drive generated by the pump is canceled by a dedicated
    tone in hardware, so ``residual_g_lin`` defaults to zero; pass a nonzero
    value for robustness studies.
    """
    a, b = mode_ops_cached(dims)
    ad, bd = a.conj().T, b.conj().T
    xb = b + bd
    h = pump_scale * params.g_l * (ad @ a @ xb)
    if params.g_sp != 0:
        h += pump_scale * params.g_sp * (bd @ bd @ b + bd @ b @ b)
    if residual_g_lin != 0:
        h += residual_g_lin * xb
    _assert_hermitian(h, "longitudinal Hamiltonian")
    return QOperator(dims, h)


def hamiltonian_reset(params: PhysicalParams, dims: SpaceDims, pump_scale: float = 1.0) -> QOperator:
    """Memory-buffer beam-splitter g_reset (a b' + a' b), for verification runs."""
    a, b = mode_ops_cached(dims)
    g = pump_scale * params.g_reset
    h = g * (a @ b.conj().T) + g * (a.conj().T @ b)
    _assert_hermitian(h, "reset Hamiltonian")
    return QOperator(dims, h)


def collapse_operators(
    params: PhysicalParams,
    dims: SpaceDims,
    mem_loss: bool = True,
    mem_thermal: bool = True,
    buf_loss: bool = True,
    buf_thermal: bool = True,
    reset: bool = False,
) -> list[QOperator]:
    """Lindblad collapse operators with sqrt-rate prefactors folded in.

    Channels with zero rate are omitted.  The reset flag adds the effective
    memory decay kappa_a_reset on top of kappa_a.
    """
    a, b = mode_ops_cached(dims)
    kappa_a = params.kappa_a + (params.kappa_a_reset if reset else 0.0)
    ops: list[QOperator] = []
    rate = kappa_a * (1.0 + params.n_th_mem)
    if mem_loss and rate > 0:
        ops.append(QOperator(dims, math.sqrt(rate) * a))
    rate = kappa_a * params.n_th_mem
    if mem_thermal and rate > 0:
        ops.append(QOperator(dims, math.sqrt(rate) * a.conj().T))
    rate = params.kappa_b * (1.0 + params.n_th_buf)
    if buf_loss and rate > 0:
        ops.append(QOperator(dims, math.sqrt(rate) * b))
    rate = params.kappa_b * params.n_th_buf
    if buf_thermal and rate > 0:
        ops.append(QOperator(dims, math.sqrt(rate) * b.conj().T))
    return ops


# small per-dims cache: the bare mode matrices are rebuilt constantly by the
# pulse compiler and trajectory code
_MODE_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def mode_ops_cached(dims: SpaceDims) -> tuple[np.ndarray, np.ndarray]:
    key = (dims.n_mem, dims.n_buf)
    if key not in _MODE_CACHE:
        a, b = hilbert.mode_operators(dims)
        _MODE_CACHE[key] = (a.mat, b.mat)
    return _MODE_CACHE[key]
