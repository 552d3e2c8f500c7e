"""Pulse sequences, protocol builders and compilation to solvable problems.

Envelopes are piecewise constant (square pulses).  Drive channels carry
complex amplitudes in rad/s; pump channels carry dimensionless scale factors
on the calibrated coupling rates; memory-displacement segments have zero
duration and become instantaneous unitaries.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import hilbert, model, semiclassical
from .errors import CatsimError
from .hilbert import QOperator, QState, SpaceDims
from .model import DriveSpec, PhysicalParams


class Channel(Enum):
    TWO_PHOTON_PUMP = "two_photon_pump"
    BUFFER_DRIVE = "buffer_drive"
    MEMORY_DRIVE = "memory_drive"
    LONGITUDINAL_PUMP = "longitudinal_pump"
    RESET_PUMP = "reset_pump"
    MEMORY_DISPLACEMENT = "memory_displacement"


#: Channels whose envelope scales a pump-calibrated rate (dimensionless).
PUMP_CHANNELS = (Channel.TWO_PHOTON_PUMP, Channel.LONGITUDINAL_PUMP, Channel.RESET_PUMP)


@dataclass(frozen=True)
class Segment:
    channel: Channel
    t_start: float
    duration: float
    envelope: complex

    def __post_init__(self):
        if self.t_start < 0 or self.duration < 0:
            raise ValueError("segment times must be >= 0")
        if self.channel is Channel.MEMORY_DISPLACEMENT and self.duration != 0:
            raise ValueError("displacement segments are instantaneous (duration 0)")

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple[Segment, ...]
    total_time: float

    def __init__(self, segments, total_time: float | None = None):
        segs = tuple(sorted(segments, key=lambda s: (s.t_start, s.channel.value)))
        t_last = max((s.t_end for s in segs), default=0.0)
        if total_time is None:
            total_time = t_last
        if total_time < t_last:
            raise ValueError(f"total_time {total_time} shorter than last segment end {t_last}")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "total_time", float(total_time))

    def shifted(self, dt: float) -> "PulseSequence":
        return PulseSequence(
            [replace(s, t_start=s.t_start + dt) for s in self.segments],
            self.total_time + dt,
        )


@dataclass(frozen=True)
class TimeDependentProblem:
    """Piecewise-constant Lindblad problem ready for integration.

    ``hamiltonians[k]`` rules the interval [breakpoints[k], breakpoints[k+1]);
    ``unitaries`` maps a breakpoint time to the ordered unitaries applied
    there.  Collapse operators are constant over the whole problem.
    """

    dims: SpaceDims
    breakpoints: tuple[float, ...]
    hamiltonians: tuple[QOperator, ...]
    collapse: tuple[QOperator, ...]
    initial: QState
    unitaries: dict = field(default_factory=dict)

    @property
    def total_time(self) -> float:
        return self.breakpoints[-1]

    @classmethod
    def constant(cls, h: QOperator, collapse, initial: QState, t_final: float) -> "TimeDependentProblem":
        """Single-interval problem with a fixed Hamiltonian."""
        return cls(
            dims=h.dims,
            breakpoints=(0.0, float(t_final)),
            hamiltonians=(h,),
            collapse=tuple(collapse),
            initial=initial,
            unitaries={},
        )


def _merge_times(times, tol: float) -> list[float]:
    out: list[float] = []
    for t in sorted(times):
        if not out or t - out[-1] > tol:
            out.append(t)
        # duplicates within tol collapse onto the earlier value
    return out


def compile(
    seq: PulseSequence,
    params: PhysicalParams,
    dims: SpaceDims,
    initial: QState | None = None,
    allow_pump_overlap: bool = False,
    reset_effective: bool = False,
) -> TimeDependentProblem:
    """Realize a pulse sequence as a piecewise-constant Lindblad problem.

    Overlapping two-photon and longitudinal pumps are rejected unless
    ``allow_pump_overlap`` is set (no protocol here uses both at once).
    """
    if initial is None:
        initial = hilbert.vacuum_state(dims)
    tol = 1e-12 * max(seq.total_time, 1e-30)
    times = {0.0, seq.total_time}
    for s in seq.segments:
        times.add(s.t_start)
        times.add(s.t_end)
    breakpoints = _merge_times(times, tol)

    for s in seq.segments:
        if s.channel in PUMP_CHANNELS:
            if abs(s.envelope.imag) > 1e-12 * max(1.0, abs(s.envelope)) and s.channel is not Channel.TWO_PHOTON_PUMP:
                raise ValueError(f"{s.channel.value} envelope must be real, got {s.envelope}")
            if abs(s.envelope) > 1.0 + 1e-12:
                warnings.warn(
                    f"{s.channel.value} envelope {abs(s.envelope):.3g} exceeds the calibrated amplitude"
                )

    unitaries: dict[float, list[QOperator]] = {}
    for s in seq.segments:
        if s.channel is Channel.MEMORY_DISPLACEMENT:
            if s.envelope == 0:
                continue
            t = min(breakpoints, key=lambda x: abs(x - s.t_start))
            unitaries.setdefault(t, []).append(
                hilbert.displacement_operator(s.envelope, dims, "mem")
            )

    hams: list[QOperator] = []
    for t0, t1 in zip(breakpoints[:-1], breakpoints[1:]):
        env = {ch: 0.0 + 0.0j for ch in Channel}
        for s in seq.segments:
            if s.channel is Channel.MEMORY_DISPLACEMENT or s.duration == 0:
                continue
            if s.t_start <= t0 + tol and s.t_end >= t1 - tol:
                env[s.channel] += s.envelope
        if (
            env[Channel.TWO_PHOTON_PUMP] != 0
            and env[Channel.LONGITUDINAL_PUMP] != 0
            and not allow_pump_overlap
        ):
            raise CatsimError(
                f"two-photon and longitudinal pumps overlap in [{t0:.3g}, {t1:.3g}]"
            )
        h = model.hamiltonian_two_photon(
            params,
            DriveSpec(eps_d=env[Channel.BUFFER_DRIVE], eps_Z=env[Channel.MEMORY_DRIVE]),
            dims,
            pump_scale=env[Channel.TWO_PHOTON_PUMP],
        )
        if env[Channel.LONGITUDINAL_PUMP] != 0:
            h = h + model.hamiltonian_longitudinal(
                params, dims, pump_scale=env[Channel.LONGITUDINAL_PUMP].real
            )
        if env[Channel.RESET_PUMP] != 0:
            h = h + model.hamiltonian_reset(params, dims, pump_scale=env[Channel.RESET_PUMP].real)
        hams.append(h)

    return TimeDependentProblem(
        dims=dims,
        breakpoints=tuple(breakpoints),
        hamiltonians=tuple(hams),
        collapse=tuple(model.collapse_operators(params, dims, reset=reset_effective)),
        initial=initial,
        unitaries=unitaries,
    )


# ---------------------------------------------------------------------------
# protocol builders

def build_cat_prep(alpha: complex, duration: float, params: PhysicalParams) -> PulseSequence:
    """Pump + buffer drive from vacuum: stabilizes the even cat of size alpha."""
    if duration <= 0:
        raise ValueError("preparation time must be positive")
    eps_d = params.drive_for_alpha(alpha)
    return PulseSequence(
        [
            Segment(Channel.TWO_PHOTON_PUMP, 0.0, duration, 1.0),
            Segment(Channel.BUFFER_DRIVE, 0.0, duration, eps_d),
        ]
    )


def build_zeno_gate(
    alpha: complex,
    eps_Z: complex,
    angle: float,
    params: PhysicalParams,
    lead: float = 0.0,
) -> PulseSequence:
    """In-manifold rotation by ``angle`` on a stabilization background.

    The memory drive is set 90 degrees out of phase with alpha and lasts
    angle / (4 |alpha| |eps_Z|); the pump and buffer drive stay on
    throughout (plus an optional stabilization ``lead`` time).
    """
    if alpha == 0:
        raise ValueError("zero alpha: no manifold to rotate in")
    if abs(eps_Z) == 0:
        raise ValueError("need a nonzero memory drive amplitude")
    t_gate = angle / (4.0 * abs(alpha) * abs(eps_Z))
    total = lead + t_gate
    drive = 1j * np.exp(1j * np.angle(alpha)) * abs(eps_Z) if alpha != 0 else 1j * abs(eps_Z)
    segs = [
        Segment(Channel.TWO_PHOTON_PUMP, 0.0, total, 1.0),
        Segment(Channel.BUFFER_DRIVE, 0.0, total, params.drive_for_alpha(alpha)),
    ]
    if t_gate > 0:
        segs.append(Segment(Channel.MEMORY_DRIVE, lead, t_gate, drive))
    return PulseSequence(segs, total)


@dataclass(frozen=True)
class HolonomicTimings:
    """Window durations of the parity-to-photon-number mapping sequence."""

    prep: float
    rotation: float
    settle: float
    deflation: float
    inflation: float
    readout: float
    eps_z: float  # rad/s, magnitude of the pi/2 rotation drive

    @classmethod
    def defaults(cls, params: PhysicalParams, alpha1: float) -> "HolonomicTimings":
        kc = semiclassical.kappa_conf_closed_form(abs(params.g2), params.kappa_b, abs(alpha1))
        t_rot = 3.0 / kc
        return cls(
            prep=3.0 / kc,
            rotation=t_rot,
            settle=1.0 / kc,
            deflation=3.0 / kc,
            inflation=3.0 / kc,
            readout=10e-6,
            eps_z=(math.pi / 2.0) / (4.0 * abs(alpha1) * t_rot),
        )


def _holonomic_core(
    alpha1: float, alpha2: float, params: PhysicalParams, timings: HolonomicTimings
) -> tuple[list[Segment], float]:
    """Pump/drive schedule from stabilization through inflation (no readout)."""
    kc = semiclassical.kappa_conf_closed_form(abs(params.g2), params.kappa_b, abs(alpha1))
    for name in ("prep", "deflation", "inflation"):
        if getattr(timings, name) < 1.0 / kc:
            warnings.warn(f"holonomic {name} window shorter than 1/kappa_conf: mapping is not adiabatic")
    t1 = timings.prep
    t2 = t1 + timings.rotation
    t3 = t2 + timings.settle
    t4 = t3 + timings.deflation
    t5 = t4 + timings.inflation
    # rotation drive 90 degrees out of phase with alpha1, sign chosen so that
    # even-parity inputs end on the bright readout branch
    zeno_env = -1j * timings.eps_z
    segs = [
        Segment(Channel.TWO_PHOTON_PUMP, 0.0, t5, 1.0),
        Segment(Channel.BUFFER_DRIVE, 0.0, t3, params.drive_for_alpha(alpha1)),
        Segment(Channel.MEMORY_DRIVE, t1, timings.rotation, zeno_env),
        Segment(Channel.BUFFER_DRIVE, t4, timings.inflation, params.drive_for_alpha(1j * alpha2)),
    ]
    return segs, t5


def build_holonomic_tomography(
    lam: complex,
    alpha1: float = 1.6,
    alpha2: float = 2.4,
    params: PhysicalParams | None = None,
    timings: HolonomicTimings | None = None,
) -> PulseSequence:
    """Full tomography sequence for one displacement point.

    Steps: displace by ``lam``, stabilize at alpha1, pi/2 in-manifold
    rotation, pump-only deflation, inflation onto the imaginary axis,
    displace by i*alpha2, then a longitudinal readout window.  Even-parity
    inputs end bright (4*alpha2^2 photons), odd inputs end dark.
    """
    if params is None:
        raise ValueError("params is required")
    if timings is None:
        timings = HolonomicTimings.defaults(params, alpha1)
    segs, t5 = _holonomic_core(alpha1, alpha2, params, timings)
    segs.insert(0, Segment(Channel.MEMORY_DISPLACEMENT, 0.0, 0.0, lam))
    segs.append(Segment(Channel.MEMORY_DISPLACEMENT, t5, 0.0, 1j * alpha2))
    segs.append(Segment(Channel.LONGITUDINAL_PUMP, t5, timings.readout, 1.0))
    return PulseSequence(segs, t5 + timings.readout)


def build_bitflip_probe(
    alpha: float,
    alpha_prime: float = 2.1,
    stabilize_time: float = 0.0,
    params: PhysicalParams | None = None,
    ramp_time: float | None = None,
    ramp_steps: int = 8,
    readout_time: float = 10e-6,
) -> PulseSequence:
    """Branch-population probe: stabilize, ramp to alpha', displace, read out.

    The final displacement by alpha' maps |-alpha'> to vacuum (dark) and
    |+alpha'> to a bright coherent state of (2 alpha')^2 photons.
    """
    if params is None:
        raise ValueError("params is required")
    if alpha <= 0:
        raise ValueError("alpha must be real positive")
    kc = semiclassical.kappa_conf_closed_form(abs(params.g2), params.kappa_b, alpha)
    if ramp_time is None:
        ramp_time = ramp_steps / kc
    dt = ramp_time / ramp_steps
    t_ramp0 = stabilize_time
    t_end = t_ramp0 + ramp_time
    segs = [
        Segment(Channel.MEMORY_DISPLACEMENT, 0.0, 0.0, alpha),
        Segment(Channel.TWO_PHOTON_PUMP, 0.0, t_end, 1.0),
    ]
    if stabilize_time > 0:
        segs.append(Segment(Channel.BUFFER_DRIVE, 0.0, stabilize_time, params.drive_for_alpha(alpha)))
    for k in range(ramp_steps):
        a_k = alpha + (alpha_prime - alpha) * (k + 1) / ramp_steps
        segs.append(Segment(Channel.BUFFER_DRIVE, t_ramp0 + k * dt, dt, params.drive_for_alpha(a_k)))
    segs.append(Segment(Channel.MEMORY_DISPLACEMENT, t_end, 0.0, alpha_prime))
    segs.append(Segment(Channel.LONGITUDINAL_PUMP, t_end, readout_time, 1.0))
    return PulseSequence(segs, t_end + readout_time)


def build_deflation_probe(
    alpha: complex,
    dT: float,
    params: PhysicalParams | None = None,
    readout_time: float = 10e-6,
) -> PulseSequence:
    """Displace, run the pump without buffer drive for dT, then read out."""
    segs = [
        Segment(Channel.MEMORY_DISPLACEMENT, 0.0, 0.0, alpha),
        Segment(Channel.TWO_PHOTON_PUMP, 0.0, dT, 1.0),
        Segment(Channel.LONGITUDINAL_PUMP, dT, readout_time, 1.0),
    ]
    return PulseSequence(segs, dT + readout_time)


# ---------------------------------------------------------------------------
# end-to-end tomography map

def holonomic_wigner_map(
    rho_mem,
    lambdas,
    params: PhysicalParams,
    dims: SpaceDims,
    alpha1: float = 1.6,
    alpha2: float = 2.4,
    timings: HolonomicTimings | None = None,
):
    """Tomography estimate of W(lambda) for each displacement in ``lambdas``.

    The protocol is linear in the input state, so the whole pump/drive
    schedule is propagated once in the Heisenberg picture onto the displaced
    photon-number readout observable; each grid point then costs one memory
    displacement and a trace.  Returns the estimated Wigner values, scaled
    so that an ideal even (odd) state reads +2/pi (-2/pi).
    """
    from . import lindblad  # deferred: lindblad depends on this module's types

    if timings is None:
        timings = HolonomicTimings.defaults(params, alpha1)
    rho_mem = np.asarray(rho_mem, dtype=complex)
    if rho_mem.shape != (dims.n_mem, dims.n_mem):
        raise ValueError(f"rho_mem shape {rho_mem.shape} does not match n_mem={dims.n_mem}")

    segs, t5 = _holonomic_core(alpha1, alpha2, params, timings)
    problem = compile(PulseSequence(segs, t5), params, dims)

    a, _ = model.mode_ops_cached(dims)
    eye = np.eye(dims.total)
    n_disp = (a.conj().T - 1j * alpha2 * eye) @ (a + 1j * alpha2 * eye)
    m_heis = lindblad.evolve_adjoint(problem, QOperator(dims, n_disp))
    # buffer starts in vacuum: keep only its (0, 0) block
    m4 = m_heis.mat.reshape(dims.n_mem, dims.n_buf, dims.n_mem, dims.n_buf)
    m_mem = np.ascontiguousarray(m4[:, 0, :, 0])

    bright = 4.0 * alpha2**2
    out = np.empty(len(lambdas), dtype=float)
    for i, lam in enumerate(np.asarray(lambdas, dtype=complex)):
        # parity of the state displaced by -lam realizes W(lam)
        d = hilbert.displacement_matrix(dims.n_mem, -lam)
        rho_l = d @ rho_mem @ d.conj().T
        n_read = float(np.real(np.trace(m_mem @ rho_l)))
        out[i] = (2.0 / math.pi) * (2.0 * n_read / bright - 1.0)
    return out


# ---------------------------------------------------------------------------
# serialization (CLI boundary)

def segments_to_rows(seq: PulseSequence) -> list[dict]:
    return [
        {
            "channel": s.channel.value,
            "t_start": s.t_start,
            "duration": s.duration,
            "re": s.envelope.real,
            "im": s.envelope.imag,
        }
        for s in seq.segments
    ]


def sequence_from_rows(rows, total_time: float | None = None) -> PulseSequence:
    segs = [
        Segment(
            Channel(r["channel"]),
            float(r["t_start"]),
            float(r["duration"]),
            complex(float(r.get("re", 0.0)), float(r.get("im", 0.0))),
        )
        for r in rows
    ]
    return PulseSequence(segs, total_time)
