"""Mean-field model of the pair-exchange dynamics.

Replacing operators by their expectation values (a = <a>, b = <b>) turns the
two-mode master equation into the flow

    da/dt = -2i g2 conj(a) b - i eps_Z
    db/dt = -i conj(g2) (a^2 - alpha^2) - (kappa_b/2) b

whose fixed points, linear stability and drive response are computed here in
closed form.  Stability formulas assume the gauge where g2 and alpha are
real positive; complex inputs are rotated into that gauge first (eigenvalues
are gauge invariant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NumericalError


@dataclass(frozen=True)
class SemiclassicalState:
    """Mean-field amplitudes of the memory (a) and buffer (b)."""

    a: complex
    b: complex

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("amplitudes must be finite")


@dataclass(frozen=True)
class StabilityReport:
    fixed_point: SemiclassicalState
    eigenvalues: tuple
    classification: str  # stable | unstable | critical
    kappa_conf: float


def flow_rhs(
    state: SemiclassicalState,
    g2: complex,
    kappa_b: float,
    alpha: complex,
    eps_Z: complex = 0.0,
) -> tuple[complex, complex]:
    a, b = state.a, state.b
    da = -2j * g2 * np.conj(a) * b - 1j * eps_Z
    db = -1j * np.conj(g2) * (a * a - complex(alpha) ** 2) - 0.5 * kappa_b * b
    return complex(da), complex(db)


def flow_jacobian(
    state: SemiclassicalState, g2: complex, kappa_b: float, alpha: complex
) -> np.ndarray:
    """4x4 real Jacobian of the flow in coordinates (Re a, Im a, Re b, Im b)."""
    a, b = state.a, state.b
    # complex partials: d(da)/d(x_a) etc., using d(conj a)/dx = 1, /dy = -i
    dda = (-2j * g2 * b, -2.0 * g2 * b, -2j * g2 * np.conj(a), 2.0 * g2 * np.conj(a))
    ddb = (-2j * np.conj(g2) * a, 2.0 * np.conj(g2) * a, -0.5 * kappa_b, -0.5j * kappa_b)
    jac = np.empty((4, 4))
    for col, (pa, pb) in enumerate(zip(dda, ddb)):
        jac[0, col] = np.real(pa)
        jac[1, col] = np.imag(pa)
        jac[2, col] = np.real(pb)
        jac[3, col] = np.imag(pb)
    return jac


def fixed_points(g2: complex, kappa_b: float, alpha: complex) -> list[SemiclassicalState]:
    """The three equilibria of the undriven flow.

    One buffer-displaced unstable point at a = 0 and the two stabilized
    amplitudes (+/-alpha, 0).
    """
    if kappa_b <= 0:
        raise ValueError("kappa_b must be positive")
    alpha = complex(alpha)
    return [
        SemiclassicalState(0.0, 2j * np.conj(g2) * alpha**2 / kappa_b),
        SemiclassicalState(alpha, 0.0),
        SemiclassicalState(-alpha, 0.0),
    ]


def stability_at(
    point: SemiclassicalState, g2: complex, kappa_b: float, alpha: complex
) -> StabilityReport:
    """Linearized spectrum and classification at one of the fixed points."""
    pts = fixed_points(g2, kappa_b, alpha)
    scale = max(abs(alpha), abs(2 * g2 * alpha**2 / kappa_b), 1.0)
    matches = [p for p in pts if abs(p.a - point.a) + abs(p.b - point.b) < 1e-9 * scale]
    if not matches:
        raise ValueError(f"{point} is not a fixed point of the flow")
    # gauge rotation: eigenvalues depend only on |g2| and |alpha|
    g, al = abs(g2), abs(alpha)
    ref = matches[0]
    gauge_pt = (
        SemiclassicalState(0.0, 2j * g * al**2 / kappa_b)
        if abs(ref.a) < 1e-12 * scale and al > 0
        else SemiclassicalState(al if ref.a.real * alpha.real + ref.a.imag * alpha.imag >= 0 or al == 0 else -al, 0.0)
    )
    ev = np.linalg.eigvals(flow_jacobian(gauge_pt, g, kappa_b, al))
    ev = ev[np.argsort(-ev.real)]
    tol = 1e-12 * kappa_b
    max_re = float(ev.real.max())
    if max_re > tol:
        cls, kconf = "unstable", float("nan")
    elif max_re < -tol:
        cls, kconf = "stable", -2.0 * max_re
    else:
        cls, kconf = "critical", float("nan")
    return StabilityReport(point, tuple(complex(x) for x in ev), cls, kconf)


def kappa_conf_closed_form(g2: float, kappa_b: float, alpha: float) -> float:
    """Local convergence rate onto the stabilized amplitudes.

    Overdamped branch (8 g2 alpha < kappa_b):
        (kappa_b/2) (1 - sqrt(1 - (8 g2 alpha / kappa_b)^2)),
    saturating at kappa_b/2 beyond the critical point.  alpha = 0 delegates
    to the zero-amplitude Liouvillian-gap formula.
    """
    g, al = abs(g2), abs(alpha)
    if al == 0:
        from .lindblad import alpha0_confinement_closed_form

        return alpha0_confinement_closed_form(g, kappa_b)
    r = 8.0 * g * al / kappa_b
    return 0.5 * kappa_b * float(np.real(1.0 - np.sqrt(complex(1.0 - r * r))))


def integrate_flow(
    initial: SemiclassicalState,
    g2: complex,
    kappa_b: float,
    alpha: complex,
    t_span: tuple[float, float],
    eps_Z: complex = 0.0,
    t_eval=None,
    rtol: float = 1e-10,
    blowup: float = 1e3,
):
    """Integrate the mean-field flow; returns (times, a(t), b(t)).

    Raises on amplitude blow-up (|a| or |b| exceeding ``blowup``).
    """

    def rhs(_t, y):
        st = SemiclassicalState(complex(y[0], y[1]), complex(y[2], y[3]))
        da, db = flow_rhs(st, g2, kappa_b, alpha, eps_Z)
        return [da.real, da.imag, db.real, db.imag]

    def escape(_t, y):
        return blowup - max(math.hypot(y[0], y[1]), math.hypot(y[2], y[3]))

    escape.terminal = True
    y0 = [initial.a.real, initial.a.imag, initial.b.real, initial.b.imag]
    sol = solve_ivp(
        rhs, t_span, y0, t_eval=t_eval, rtol=rtol, atol=1e-12, events=escape,
        method="DOP853",
    )
    if sol.t_events[0].size:
        raise NumericalError(f"flow blew up at t = {sol.t_events[0][0]:.3g}")
    if not sol.success:
        raise NumericalError(f"flow integration failed: {sol.message}")
    return sol.t, sol.y[0] + 1j * sol.y[1], sol.y[2] + 1j * sol.y[3]


def buffer_pointer(eps_Z: complex, alpha: complex, g2: complex) -> tuple[complex, complex]:
    """Steady buffer amplitudes conditioned on the memory branch +/-alpha.

    b_+/- = -/+ eps_Z / (2 conj(alpha) g2): the buffer leaks which-branch
    information under a weak memory drive.
    """
    if alpha == 0:
        raise ValueError("pointer amplitudes undefined at alpha = 0")
    b_plus = -eps_Z / (2.0 * np.conj(alpha) * g2)
    return complex(b_plus), complex(-b_plus)


def drive_dephasing_rate(eps_Z: complex, alpha: complex, g2: complex, kappa_b: float) -> float:
    """Measurement-back-action dephasing (kappa_b/2) |eps_Z / (alpha g2)|^2."""
    if alpha == 0:
        raise ValueError("dephasing rate undefined at alpha = 0")
    b_plus, b_minus = buffer_pointer(eps_Z, alpha, g2)
    return 0.5 * kappa_b * abs(b_plus - b_minus) ** 2


def rate_predictors(
    alpha: complex, kappa_a: float, eps_Z: complex, g2: complex, kappa_b: float
) -> dict[str, float]:
    """Closed-form rate set for the driven cat qubit.

    gamma_z_kappa_a = 2 kappa_a |alpha|^2      (loss-induced dephasing)
    omega_z         = 4 |alpha| |eps_Z|        (in-manifold rotation rate)
    quality         = omega_z / (gamma_z_kappa_a + drive dephasing)
    eps_z_opt       = 2 |alpha|^2 |g2| sqrt(kappa_a / kappa_b), the drive
                      amplitude maximizing ``quality``.
    """
    if kappa_a < 0:
        raise ValueError("kappa_a must be >= 0")
    al = abs(alpha)
    gamma_kappa = 2.0 * kappa_a * al**2
    omega = 4.0 * al * abs(eps_Z)
    if omega == 0:
        quality = 0.0
    else:
        gamma_drive = drive_dephasing_rate(eps_Z, alpha, g2, kappa_b)
        quality = omega / (gamma_kappa + gamma_drive)
    eps_opt = 2.0 * al**2 * abs(g2) * math.sqrt(kappa_a / kappa_b)
    return {
        "gamma_z_kappa_a": gamma_kappa,
        "omega_z": omega,
        "quality": quality,
        "eps_z_opt": eps_opt,
    }


def longitudinal_response(
    n_a: int, g_l: float, g_sp: float, kappa_b: float, max_iter: int = 100
) -> complex:
    """Steady buffer amplitude when the memory holds exactly n_a photons.

    Solves 0 = -i g_l n_a - i g_sp (2|b|^2 + b^2) - (kappa_b/2) b by damped
    Newton from the linear response b0 = -2i g_l n_a / kappa_b; the spurious
    two-photon buffer term compresses the response at large n_a.
    """
    if n_a < 0:
        raise ValueError("photon number must be >= 0")
    if n_a == 0:
        return 0.0

    def resid(b: complex) -> complex:
        return -1j * g_l * n_a - 1j * g_sp * (2.0 * abs(b) ** 2 + b * b) - 0.5 * kappa_b * b

    b = -2j * g_l * n_a / kappa_b
    if g_sp == 0:
        return complex(b)
    for _ in range(max_iter):
        f = resid(b)
        if abs(f) < 1e-14 * kappa_b * max(1.0, abs(b)):
            return complex(b)
        x, y = b.real, b.imag
        dfx = -1j * g_sp * (4.0 * x + 2.0 * b) - 0.5 * kappa_b
        dfy = -1j * g_sp * (4.0 * y + 2j * b) - 0.5j * kappa_b
        jac = np.array([[dfx.real, dfy.real], [dfx.imag, dfy.imag]])
        try:
            step = np.linalg.solve(jac, [-f.real, -f.imag])
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular Newton step at b = {b}") from exc
        scale = 1.0
        for _ in range(30):
            cand = complex(b + scale * (step[0] + 1j * step[1]))
            if abs(resid(cand)) < abs(f):
                b = cand
                break
            scale *= 0.5
        else:
            raise NumericalError(f"Newton step stalled at b = {b}")
    raise NumericalError(f"buffer response did not converge after {max_iter} iterations")
