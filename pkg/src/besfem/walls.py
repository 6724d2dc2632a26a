"""Frequency-domain wall characterization and its discrete surrogates.

Slab transfer matrices give the exact cyclic response of a layered wall. Two
low-order models are fitted to it:

* per envelope part, hourly response factors ``(L_yx, a1, a2, b1, b2)`` for
  the cross transmission ``Y_xy``, a second-order recursion in the hourly
  temperature difference;
* per zone, two parallel series-RC branches reproducing the summed interior
  storage admittance ``sum(Y_x)`` at 24 h and 1 h periods.

Sign conventions: a transfer matrix maps the exterior-side state to the
interior-side state, ``[T_x, q_x] = M @ [T_y, q_y]``, with ``q`` positive
from interior to exterior.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .model import EnvelopePart, Glazing, Layer, WallConstruction

DT = 3600.0
OMEGA_24 = 2 * np.pi / 86400.0
OMEGA_1 = 2 * np.pi / 3600.0

# Periods (h) over which the two remaining degrees of freedom of the
# response-factor fit are tuned; must stay above the 2 h Nyquist period.
FIT_BAND_HOURS = tuple(np.geomspace(3.0, 24.0, 13))
MAX_POLE = 0.99
MAX_LOG_STEP = 2.0  # Newton step cap in log-parameter space


class FitError(RuntimeError):
    """Fitting a discrete surrogate failed."""


class DegenerateSpectrumError(FitError):
    def __init__(self, detail=""):
        super().__init__("degenerate wall spectrum" + (f": {detail}" if detail else ""))


class UnstablePolesError(FitError):
    def __init__(self, moduli):
        self.moduli = tuple(float(m) for m in moduli)
        super().__init__(f"unstable response-factor poles, |z| = {self.moduli}")


# -- transfer matrices ----------------------------------------------------------

def _slab_matrix(k: float, rho_c: float, d: float, omega: float) -> np.ndarray:
    if omega == 0.0 or rho_c == 0.0:
        return np.array([[1.0, d / k], [0.0, 1.0]], dtype=complex)
    gamma = np.sqrt(1j * omega * rho_c / k)
    gd = gamma * d
    with np.errstate(over="ignore", invalid="ignore"):
        ch, sh = np.cosh(gd), np.sinh(gd)
    return np.array([[ch, sh / (k * gamma)], [k * gamma * sh, ch]])


def layer_matrix(layer: Layer, omega: float) -> np.ndarray:
    """Per-unit-area transfer matrix of one homogeneous layer at ``omega`` (rad/s)."""
    if omega < 0:
        raise ValueError("omega must be >= 0")
    m = layer.material
    return _slab_matrix(m.conductivity, m.rho_c, layer.thickness, omega)


def film_matrix(h: float) -> np.ndarray:
    return np.array([[1.0, 1.0 / h], [0.0, 1.0]], dtype=complex)


def wall_matrix(wall: WallConstruction, omega: float, h_e: float | None = None) -> np.ndarray:
    """Product of layer matrices, interior layer first.

    With ``h_e`` given, the exterior surface film is appended as a massless
    resistance ``1/h_e``.
    """
    M = np.eye(2, dtype=complex)
    for layer in wall.layers:
        M = M @ layer_matrix(layer, omega)
    if h_e is not None:
        M = M @ film_matrix(h_e)
    return M


# -- admittances ----------------------------------------------------------------

@dataclass(frozen=True)
class AdmittanceTriple:
    Y_x: complex  # interior surplus admittance, W/K
    Y_y: complex  # exterior surplus admittance, W/K
    Y_xy: complex  # cross admittance, W/K
    omega: float


def admittances(part: EnvelopePart, omega: float, h_e: float | None = None) -> AdmittanceTriple:
    """Area-scaled admittances of an opaque envelope part.

    The interior heat flow is ``Phi_x = -Y_x T_x + Y_xy (T_y - T_x)``. The
    exterior film is included when ``h_e`` is given; the interior film never is.
    """
    if isinstance(part.construction, Glazing):
        raise ValueError(f"{part.id}: glazing has no admittance (thermal mass neglected)")
    with np.errstate(over="ignore", invalid="ignore"):
        M = wall_matrix(part.construction, omega, h_e)
    if not np.all(np.isfinite(M)):
        raise DegenerateSpectrumError(f"{part.id}: transfer matrix overflows at omega = {omega:.3g} rad/s")
    M11, M12, M22 = M[0, 0], M[0, 1], M[1, 1]
    if M12 == 0:
        raise FitError(f"{part.id}: zero transfer resistance")
    A = part.area
    return AdmittanceTriple(
        Y_x=complex(A * (M22 - 1) / M12),
        Y_y=complex(A * (M11 - 1) / M12),
        Y_xy=complex(A / M12),
        omega=omega,
    )


def admittance_sweep(part: EnvelopePart, periods_h, h_e: float | None = None) -> list[AdmittanceTriple]:
    return [admittances(part, 2 * np.pi / (p * 3600.0), h_e) for p in periods_h]


# -- response factors -----------------------------------------------------------

@dataclass(frozen=True)
class ResponseFactors:
    """Hourly cross-transmission model of one envelope part.

    ``Phi(tn) = L_yx dT(tn) + dPhi(tn)`` with
    ``dPhi(tn) = a1 dT(tn-1) + a2 dT(tn-2) + b1 dPhi(tn-1) + b2 dPhi(tn-2)``.
    """

    L_yx: float
    a1: float = 0.0
    a2: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    dt: float = DT

    @property
    def steady_conductance(self) -> float:
        """``L_yx + (a1 + a2) / (1 - b1 - b2)``, equal to ``A U`` for a valid fit."""
        return self.L_yx + self.history_gain

    @property
    def history_gain(self) -> float:
        return (self.a1 + self.a2) / (1.0 - self.b1 - self.b2)

    def poles(self) -> np.ndarray:
        return np.roots([1.0, -self.b1, -self.b2])

    def pole_moduli(self) -> np.ndarray:
        return np.abs(self.poles())

    def transfer(self, omega):
        """``G(z) = L_yx + (a1/z + a2/z^2) / (1 - b1/z - b2/z^2)`` at ``z = exp(i omega dt)``."""
        zi = np.exp(-1j * np.asarray(omega, dtype=float) * self.dt)
        den = 1.0 - self.b1 * zi - self.b2 * zi**2
        return self.L_yx + (self.a1 * zi + self.a2 * zi**2) / den


def _numerators(b1, b2, AU, Y24):
    """Solve ``L, a1, a2`` so that G(1) = AU and G(z24) = Y24 for given b1, b2.

    For fixed poles the cross-multiplied constraints
    ``L den(z) + a1/z + a2/z^2 = Y den(z)`` are linear. Vectorized over
    arrays of ``b1``/``b2``.
    """
    b1, b2 = np.asarray(b1, dtype=float), np.asarray(b2, dtype=float)
    zi = np.exp(-1j * OMEGA_24 * DT)
    zi2 = zi * zi
    den0 = 1.0 - b1 - b2
    den = 1.0 - b1 * zi - b2 * zi2
    t = Y24 * den
    A = np.empty(b1.shape + (3, 3))
    A[..., 0, 0] = den0
    A[..., 0, 1] = 1.0
    A[..., 0, 2] = 1.0
    A[..., 1, 0] = den.real
    A[..., 1, 1] = zi.real
    A[..., 1, 2] = zi2.real
    A[..., 2, 0] = den.imag
    A[..., 2, 1] = zi.imag
    A[..., 2, 2] = zi2.imag
    rhs = np.stack([AU * den0, t.real, t.imag], axis=-1)
    return np.linalg.solve(A, rhs[..., None])[..., 0]


def _band_error(p, AU, Y24, omegas, targets):
    p1, p2 = np.asarray(p[0], dtype=float), np.asarray(p[1], dtype=float)
    b1, b2 = p1 + p2, -p1 * p2
    num = _numerators(b1, b2, AU, Y24)
    zi = np.exp(-1j * omegas * DT)
    G = num[..., 0, None] + (num[..., 1, None] * zi + num[..., 2, None] * zi**2) / (
        1.0 - b1[..., None] * zi - b2[..., None] * zi**2
    )
    return np.sum(np.abs(G / targets - 1.0) ** 2, axis=-1)


def fit_response_factors(part: EnvelopePart, h_e: float) -> ResponseFactors:
    """Fit hourly response factors to the exact cross admittance of ``part``.

    The steady gain ``A U`` and the complex 24 h admittance are reproduced
    exactly. The two real poles (in ``[0, 0.99]``) are picked to minimise the
    relative interpolation error over ``FIT_BAND_HOURS``; for every pole pair
    the numerator follows from a 3x3 linear solve.
    """
    AU = part.area * part.u_value(h_e)
    if isinstance(part.construction, Glazing):
        return ResponseFactors(L_yx=AU)

    Y24 = admittances(part, OMEGA_24, h_e).Y_xy
    if not np.isfinite(Y24) or abs(Y24) == 0.0:
        raise DegenerateSpectrumError(part.id)
    # massless or very fast walls: frequency-independent response
    if abs(Y24 / AU - 1.0) < 1e-12:
        return ResponseFactors(L_yx=AU)

    omegas = 2 * np.pi / (np.array(FIT_BAND_HOURS) * 3600.0)
    targets = np.array([admittances(part, w, h_e).Y_xy for w in omegas])

    grid = np.linspace(0.0, MAX_POLE, 100)
    P1, P2 = np.meshgrid(grid, grid, indexing="ij")
    mask = P1 >= P2
    err = np.where(mask, _band_error((P1, P2), AU, Y24, omegas, targets), np.inf)
    i, j = np.unravel_index(np.argmin(err), err.shape)
    res = optimize.minimize(
        lambda q: float(_band_error(q, AU, Y24, omegas, targets)),
        x0=[grid[i], grid[j]],
        bounds=[(0.0, MAX_POLE), (0.0, MAX_POLE)],
        method="L-BFGS-B",
    )
    p1, p2 = (res.x if res.fun <= err[i, j] else (grid[i], grid[j]))
    b1, b2 = float(p1 + p2), float(-p1 * p2)
    num = _numerators(np.array(b1), np.array(b2), AU, Y24)
    if not np.all(np.isfinite(num)):
        raise DegenerateSpectrumError(part.id)
    rf = ResponseFactors(float(num[0]), float(num[1]), float(num[2]), b1, b2)
    check_stable(rf)
    return rf


def check_stable(rf: ResponseFactors) -> ResponseFactors:
    moduli = rf.pole_moduli()
    if np.any(moduli >= 1.0):
        raise UnstablePolesError(moduli)
    return rf


def steady_gain_residual(rf: ResponseFactors, AU: float) -> float:
    """Relative mismatch of ``A U = L_yx + (a1 + a2) / (1 - b1 - b2)``."""
    return abs(AU - rf.steady_conductance) / AU


# -- cross-flow recursion -------------------------------------------------------

@dataclass(frozen=True)
class CrossFlowState:
    dT1: float = 0.0  # dT(tn-1)
    dT2: float = 0.0  # dT(tn-2)
    dP1: float = 0.0  # dPhi(tn-1)
    dP2: float = 0.0  # dPhi(tn-2)

    @classmethod
    def steady(cls, rf: ResponseFactors, dT: float) -> "CrossFlowState":
        """History consistent with a temperature difference held forever."""
        dP = rf.history_gain * dT
        return cls(dT, dT, dP, dP)

    def next_history_flow(self, rf: ResponseFactors) -> float:
        """``dPhi`` of the coming step; depends on history only."""
        return rf.a1 * self.dT1 + rf.a2 * self.dT2 + rf.b1 * self.dP1 + rf.b2 * self.dP2


def cross_flow_step(rf: ResponseFactors, state: CrossFlowState, dT: float) -> tuple[float, CrossFlowState]:
    """Advance one hour: return ``Phi_yx(tn)`` and the shifted history."""
    dP = state.next_history_flow(rf)
    phi = rf.L_yx * dT + dP
    return phi, CrossFlowState(dT, state.dT1, dP, state.dP1)


# -- interior storage branches ----------------------------------------------------

@dataclass(frozen=True)
class BranchNetwork:
    """Parallel conductance-capacitance branches hanging off the x-node."""

    branches: tuple[tuple[float, float], ...] = ((0.0, 0.0), (0.0, 0.0))  # (L_x W/K, C_x J/K)

    def admittance(self, omega):
        omega = np.asarray(omega, dtype=float)
        total = np.zeros_like(omega, dtype=complex)
        for L, C in self.branches:
            if L > 0 and C > 0:
                total = total + branch_admittance(L, C, omega)
        return total

    @property
    def active(self) -> tuple[tuple[float, float], ...]:
        return tuple((L, C) for L, C in self.branches if L > 0 and C > 0)


def branch_admittance(L, C, omega):
    iwC = 1j * omega * C
    return iwC * L / (L + iwC)


def _single_branch(Y: complex, omega: float) -> tuple[float, float]:
    inv = 1.0 / Y
    if inv.real <= 0 or inv.imag >= 0:
        raise FitError(f"admittance {Y} not representable by one RC branch")
    return 1.0 / inv.real, -1.0 / (omega * inv.imag)


def _rational_branches(Y24: complex, Y1: complex, omega24: float, omega1: float):
    """Direct two-branch solution, or None if no positive real one exists.

    With ``s = i omega`` the summed admittance is ``(a s + b s^2) / (1 + p s + q s^2)``
    where ``p``, ``q`` are the sum and product of the branch time constants
    ``C/L``; cross-multiplying at the two frequencies is linear in ``(p, q, a, b)``.
    """
    rows, rhs = [], []
    for Y, w in ((Y24, omega24), (Y1, omega1)):
        s = 1j * w
        r = np.array([Y * s, Y * s * s, -s, -s * s])
        rows += [r.real, r.imag]
        rhs += [-Y.real, -Y.imag]
    try:
        p, q, a, b = np.linalg.solve(np.array(rows), np.array(rhs))
    except np.linalg.LinAlgError:
        return None
    disc = p * p - 4 * q
    if not (q > 0 and p > 0 and disc >= 0):
        return None
    t1 = (p + np.sqrt(disc)) / 2
    t2 = (p - np.sqrt(disc)) / 2
    if t1 == t2:
        return None
    L1, L2 = np.linalg.solve([[t1, t2], [1.0, 1.0]], [a, b / q])
    if not (L1 > 0 and L2 > 0):
        return None
    return np.log([L1, L1 * t1, L2, L2 * t2])


def fit_branch_network(
    Y24: complex,
    Y1: complex,
    omega24: float = OMEGA_24,
    omega1: float = OMEGA_1,
    max_iter: int = 100,
    tol: float = 1e-12,
) -> BranchNetwork:
    """Two RC branches whose summed admittance equals ``Y24`` and ``Y1``.

    Damped Newton on ``log(L1, C1, L2, C2)``, started from the direct
    rational solution when it exists. Otherwise (and as fallback) branch 1
    starts as the exact one-branch fit of the 24 h target, branch 2 of the 1 h
    target.
    """
    Y24, Y1 = complex(Y24), complex(Y1)
    if Y24 == 0 and Y1 == 0:
        return BranchNetwork()
    for Y, label in ((Y24, "24 h"), (Y1, "1 h")):
        phase = np.angle(Y)
        if Y == 0 or phase < -1e-12 or phase > np.pi / 2 + 1e-12:
            raise FitError(
                f"{label} target phase {phase:.4f} rad outside [0, pi/2]; "
                "an admittance phase shift can never exceed pi/2"
            )

    omegas = np.array([omega24, omega1])
    target = np.array([Y24, Y1])
    scale = np.abs(target)

    def residual(q):
        L1, C1, L2, C2 = np.exp(q)
        Y = branch_admittance(L1, C1, omegas) + branch_admittance(L2, C2, omegas)
        r = (Y - target) / scale
        return np.concatenate([r.real, r.imag])

    def jacobian(q):
        L1, C1, L2, C2 = np.exp(q)
        cols = []
        for L, C in ((L1, C1), (L2, C2)):
            iwC = 1j * omegas * C
            dL = iwC**2 / (L + iwC) ** 2 * L
            dC = 1j * omegas * L**2 / (L + iwC) ** 2 * C
            cols += [dL / scale, dC / scale]
        J = np.array(cols).T
        return np.vstack([J.real, J.imag])

    def newton(q):
        r = residual(q)
        norm = np.linalg.norm(r)
        for _ in range(max_iter):
            if norm < tol:
                break
            J = jacobian(q)
            if not np.all(np.isfinite(J)):
                break
            step = np.linalg.lstsq(J, -r, rcond=None)[0]
            step *= min(1.0, MAX_LOG_STEP / max(np.max(np.abs(step)), 1e-300))
            t = 1.0
            while t > 1e-10:
                q_new = q + t * step
                r_new = residual(q_new)
                n_new = np.linalg.norm(r_new)
                if np.all(np.isfinite(r_new)) and n_new < norm:
                    break
                t *= 0.5
            else:
                break
            q, r, norm = q_new, r_new, n_new
        return q, norm

    best = None
    direct = _rational_branches(Y24, Y1, omega24, omega1)
    if direct is not None:
        with np.errstate(over="ignore", invalid="ignore"):
            best = newton(direct)
    if best is None or best[1] >= tol:
        q0 = np.log(np.array(_single_branch(Y24, omega24) + _single_branch(Y1, omega1)))
        # restarts rescale the second branch, e.g. when both one-branch fits
        # coincide and the Jacobian is singular by symmetry
        shifts = [(a, b) for a in (0.0, -1.0, -2.0, -3.0, 1.0) for b in (0.0, 1.0, -1.0, 2.0, -2.0, 3.0)]
        for dL, dC in shifts:
            with np.errstate(over="ignore", invalid="ignore"):
                q, norm = newton(q0 + np.array([0.0, 0.0, dL, dC]))
            if best is None or norm < best[1]:
                best = (q, norm)
            if norm < tol:
                break
    q, norm = best
    if not norm < tol * 1e3:
        raise FitError(f"branch network fit did not converge, residual {norm:.3e}")
    L1, C1, L2, C2 = (float(v) for v in np.exp(q))
    if C1 / L1 < C2 / L2:  # slow branch first
        (L1, C1), (L2, C2) = (L2, C2), (L1, C1)
    return BranchNetwork(((L1, C1), (L2, C2)))


def storage_admittance(part: EnvelopePart, omega: float, h_e: float) -> complex:
    """Interior admittance of ``part`` not carried by its cross flow.

    External opaque parts contribute their surplus ``Y_x``. An adiabatic part
    has no cross flow, so its whole interior admittance ``A M21 / M11`` (exterior
    face insulated) is storage.
    """
    if isinstance(part.construction, Glazing):
        return 0j
    if part.is_adiabatic:
        M = wall_matrix(part.construction, omega)
        return complex(part.area * M[1, 0] / M[0, 0])
    return admittances(part, omega, h_e).Y_x


def zone_storage_admittance(parts, h_e: float, omega: float) -> complex:
    """Summed interior storage admittance of all envelope parts of a zone."""
    return sum((storage_admittance(p, omega, h_e) for p in parts), 0j)
