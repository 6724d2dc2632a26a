"""One-zone thermal network: air node, massless x-node, storage branches.

Per hour the x-node balance is solved algebraically and the remaining linear
system in ``(T_a, T_c1, T_c2)`` is advanced exactly with a precomputed matrix
exponential. The cross-flow conductances ``L_yx`` are part of that system; the
response-factor history ``dPhi`` enters as a source held over the hour, either
constant or ramped linearly from the previous hour's value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .model import HeatGain, ZoneConfig, derived_zone_quantities
from .walls import (
    OMEGA_1,
    OMEGA_24,
    BranchNetwork,
    CrossFlowState,
    ResponseFactors,
    cross_flow_step,
    fit_branch_network,
    fit_response_factors,
    zone_storage_admittance,
)

DT = 3600.0


class ZoneError(RuntimeError):
    pass


def coupling_coefficient(A_t: float, h_cv: float, h_r: float) -> float:
    """``L_xa = A_t h_cv (1 + h_cv / h_r)`` in W/K."""
    return A_t * h_cv * (1.0 + h_cv / h_r)


@dataclass(frozen=True)
class ZoneNetwork:
    L_xa: float
    L_v: float
    C_a: float
    branches: BranchNetwork
    parts: tuple  # (EnvelopePart, ResponseFactors) pairs

    @property
    def cross_conductances(self) -> np.ndarray:
        """``L_yx`` per part; zero for adiabatic parts."""
        return np.array([0.0 if p.is_adiabatic else rf.L_yx for p, rf in self.parts])

    @property
    def x_conductance(self) -> float:
        return self.L_xa + self.cross_conductances.sum() + sum(L for L, _ in self.branches.active)


def build_network(cfg: ZoneConfig) -> ZoneNetwork:
    """Fit all surrogates and assemble the network for ``cfg``."""
    sc = cfg.surface_coeffs
    L_v, C_a = derived_zone_quantities(cfg)
    parts = tuple((p, fit_response_factors(p, sc.h_e)) for p in cfg.envelope)
    Y24 = zone_storage_admittance(cfg.envelope, sc.h_e, OMEGA_24)
    Y1 = zone_storage_admittance(cfg.envelope, sc.h_e, OMEGA_1)
    branches = fit_branch_network(Y24, Y1)
    return ZoneNetwork(
        L_xa=coupling_coefficient(cfg.total_surface_area, sc.h_cv, sc.h_r),
        L_v=L_v,
        C_a=C_a,
        branches=branches,
        parts=parts,
    )


def solve_x_node(
    net: ZoneNetwork,
    T_a: float,
    T_c: Sequence[float],
    T_y: Sequence[float],
    history_flows: Sequence[float],
    phi_r: float = 0.0,
) -> float:
    """Temperature of the massless x-node from its instantaneous heat balance.

    ``T_c`` holds one capacitor temperature per *active* branch.
    """
    L = net.cross_conductances
    active = net.branches.active
    G = net.L_xa + L.sum() + sum(Lb for Lb, _ in active)
    if G <= 0:
        raise ZoneError("isolated x-node")
    S = net.L_xa * T_a + float(L @ np.asarray(T_y, dtype=float))
    S += sum(hf for (p, _), hf in zip(net.parts, history_flows) if not p.is_adiabatic)
    S += sum(Lb * Tc for (Lb, _), Tc in zip(active, T_c)) + phi_r
    return S / G


@dataclass
class ZoneState:
    T_a: float
    T_c: np.ndarray  # one entry per active branch
    history: list  # CrossFlowState per part
    t: int = 0  # hours since start

    def copy(self) -> "ZoneState":
        return ZoneState(self.T_a, self.T_c.copy(), list(self.history), self.t)


@dataclass
class HourInputs:
    T_b: float
    T_y: np.ndarray  # per part; ignored for adiabatic parts
    phi_cv: float = 0.0
    phi_r: float = 0.0


@dataclass
class StepResult:
    T_a: float
    T_x: float
    T_c: np.ndarray
    phi_yx: np.ndarray
    phi_vent: float
    P_heat: float = 0.0
    energy_in: float = 0.0  # J delivered to the continuous nodes during the hour
    stored: float = 0.0  # J change of C_a T_a + sum C_i T_ci


class ZoneIntegrator:
    """Exact hourly stepping of a fixed network.

    The state vector is ``[T_a, T_c...]``; the input vector is
    ``[T_b, S_x, phi_cv]`` where ``S_x`` is everything injected at the x-node
    besides the node couplings (``sum L_yx T_y + sum dPhi + phi_r``).
    """

    def __init__(self, net: ZoneNetwork, history_hold: str = "linear", dt: float = DT):
        if history_hold not in ("constant", "linear"):
            raise ValueError("history_hold must be 'constant' or 'linear'")
        self.net = net
        self.hold = history_hold
        self.dt = dt
        active = net.branches.active
        G = net.x_conductance
        if G <= 0:
            raise ZoneError("isolated x-node")
        n = 1 + len(active)
        # T_x = wx @ x + S_x / G
        wx = np.zeros(n)
        wx[0] = net.L_xa / G
        for i, (Lb, _) in enumerate(active):
            wx[1 + i] = Lb / G
        A = np.zeros((n, n))
        B = np.zeros((n, 3))
        A[0, 0] = -(net.L_v + net.L_xa) / net.C_a
        A[0] += net.L_xa * wx / net.C_a
        B[0] = [net.L_v / net.C_a, net.L_xa / (G * net.C_a), 1.0 / net.C_a]
        for i, (Lb, Cb) in enumerate(active):
            A[1 + i, 1 + i] -= Lb / Cb
            A[1 + i] += Lb * wx / Cb
            B[1 + i, 1] = Lb / (G * Cb)
        self.A, self.B, self.wx, self.G = A, B, wx, G
        self.n = n
        self.capacities = np.array([net.C_a] + [Cb for _, Cb in active])

        # augmented exponential: states x, inputs u, input ramp r, integral of x
        m = 3
        N = n + m + m + n
        M = np.zeros((N, N))
        M[:n, :n] = A
        M[:n, n:n + m] = B
        M[n:n + m, n + m:n + 2 * m] = np.eye(m)
        M[n + 2 * m:, :n] = np.eye(n)
        E = expm(M * dt)
        self.Phi = E[:n, :n]
        self.Gam0 = E[:n, n:n + m]
        self.Gam1 = E[:n, n + m:n + 2 * m]  # multiplies the ramp rate (u1 - u0) / dt
        self.Int_x = E[n + 2 * m:, :n]
        self.Int_u0 = E[n + 2 * m:, n:n + m]
        self.Int_r = E[n + 2 * m:, n + m:n + 2 * m]

    def _advance(self, x0, u0, u1):
        r = (u1 - u0) / self.dt
        x1 = self.Phi @ x0 + self.Gam0 @ u0 + self.Gam1 @ r
        ix = self.Int_x @ x0 + self.Int_u0 @ u0 + self.Int_r @ r
        return x1, ix

    def initial_state(self, T0: float, T_y0: Sequence[float]) -> ZoneState:
        """All nodes at ``T0``; histories at the steady value for ``T_y0 - T0``."""
        history = []
        for (part, rf), Ty in zip(self.net.parts, T_y0):
            dT = 0.0 if part.is_adiabatic else float(Ty) - T0
            history.append(CrossFlowState.steady(rf, dT))
        return ZoneState(T0, np.full(self.n - 1, T0), history, 0)

    def step(self, state: ZoneState, inp: HourInputs, setpoints=(None, None)) -> tuple[ZoneState, StepResult]:
        net = self.net
        L = net.cross_conductances
        T_y = np.asarray(inp.T_y, dtype=float)
        ext = L > 0
        new_dP = np.array([h.next_history_flow(rf) for h, (_, rf) in zip(state.history, net.parts)], dtype=float)
        old_dP = np.array([h.dP1 for h in state.history], dtype=float)
        mask = np.array([not p.is_adiabatic for p, _ in net.parts], dtype=bool)
        base = float(L[ext] @ T_y[ext]) + inp.phi_r
        S_end = base + float(new_dP[mask].sum())
        S_start = base + float(old_dP[mask].sum()) if self.hold == "linear" else S_end
        x0 = np.concatenate([[state.T_a], state.T_c])
        u0 = np.array([inp.T_b, S_start, inp.phi_cv])
        u1 = np.array([inp.T_b, S_end, inp.phi_cv])
        x1, ix = self._advance(x0, u0, u1)

        P = 0.0
        heat, cool = setpoints
        if heat is not None or cool is not None:
            # unit convective power held over the hour
            g = self.Gam0[0, 2]
            if heat is not None and x1[0] < heat:
                P = (heat - x1[0]) / g
            elif cool is not None and x1[0] > cool:
                P = (cool - x1[0]) / g
            if P != 0.0:
                u0[2] += P
                u1[2] += P
                x1, ix = self._advance(x0, u0, u1)

        T_x = float(self.wx @ x1 + S_end / self.G)
        phis = np.zeros(len(net.parts))
        history = list(state.history)
        for k, (part, rf) in enumerate(net.parts):
            if part.is_adiabatic:
                continue
            phis[k], history[k] = cross_flow_step(rf, state.history[k], T_y[k] - T_x)

        # energy delivered to the continuous nodes over the hour
        int_Ta = ix[0]
        int_Tx = float(self.wx @ ix) + (S_start + S_end) * self.dt / (2 * self.G)
        int_S = (S_start + S_end) * self.dt / 2
        int_Tc = ix[1:]
        e_vent = net.L_v * (inp.T_b * self.dt - int_Ta)
        e_cv = u0[2] * self.dt
        # flow through the x-node onto air and capacitors equals S_x - sum L_yx T_x
        e_x = int_S - (L[ext].sum()) * int_Tx
        energy_in = e_vent + e_cv + e_x
        stored = float(self.capacities @ (x1 - x0))

        new_state = ZoneState(float(x1[0]), x1[1:].copy(), history, state.t + 1)
        result = StepResult(
            T_a=float(x1[0]),
            T_x=T_x,
            T_c=x1[1:].copy(),
            phi_yx=phis,
            phi_vent=net.L_v * (inp.T_b - float(x1[0])),
            P_heat=P,
            energy_in=energy_in,
            stored=stored,
        )
        return new_state, result


def zone_step(net: ZoneNetwork, state: ZoneState, inp: HourInputs, history_hold: str = "linear"):
    """One-hour step; builds a throwaway integrator. Use :class:`ZoneIntegrator` in loops."""
    return ZoneIntegrator(net, history_hold).step(state, inp)


@dataclass
class ZoneInputs:
    """Hourly driving data: ``T_b`` (N,), ``T_y`` (N, parts), gains."""

    hours: np.ndarray
    T_b: np.ndarray
    T_y: np.ndarray
    gains: Sequence[HeatGain] = field(default_factory=tuple)

    def __len__(self):
        return len(self.hours)

    def check(self, n_parts: int):
        hours = np.asarray(self.hours)
        if len(hours) == 0:
            raise ZoneError("no input hours")
        expected = np.arange(hours[0], hours[0] + len(hours))
        if not np.array_equal(hours, expected):
            present = set(int(h) for h in hours)
            missing = [h for h in range(int(hours[0]), int(hours.max()) + 1) if h not in present]
            raise ZoneError(f"input series has gaps; missing hours {missing[:20]}")
        if self.T_y.shape != (len(hours), n_parts):
            raise ZoneError(f"T_y must have shape {(len(hours), n_parts)}, got {self.T_y.shape}")
        if len(self.T_b) != len(hours):
            raise ZoneError("T_b length mismatch")
        for g in self.gains:
            if len(g.series) != len(hours):
                raise ZoneError("gain series length mismatch")

    def hour(self, i: int) -> HourInputs:
        cv = sum(g.convection_factor * g.series[i] for g in self.gains)
        rad = sum((1.0 - g.convection_factor) * g.series[i] for g in self.gains)
        return HourInputs(float(self.T_b[i]), self.T_y[i], cv, rad)


@dataclass
class ZoneSeries:
    hour: np.ndarray
    T_a: np.ndarray
    T_x: np.ndarray
    T_c1: np.ndarray
    T_c2: np.ndarray
    phi_vent: np.ndarray
    phi_trans_total: np.ndarray
    phi_yx: np.ndarray  # (N, parts)
    P_heat: np.ndarray | None = None
    energy_in: np.ndarray | None = None
    stored: np.ndarray | None = None

    def discard(self, hours: int) -> "ZoneSeries":
        def cut(a):
            return None if a is None else a[hours:]
        return ZoneSeries(*(cut(getattr(self, f)) for f in self.__dataclass_fields__))


def simulate_zone(
    net: ZoneNetwork,
    T0: float,
    inputs: ZoneInputs,
    warmup: int = 0,
    history_hold: str = "linear",
    setpoints=(None, None),
) -> ZoneSeries:
    """Run the zone over every hour of ``inputs``; the first ``warmup`` hours are dropped."""
    inputs.check(len(net.parts))
    integ = ZoneIntegrator(net, history_hold)
    state = integ.initial_state(T0, inputs.T_y[0])
    N = len(inputs)
    rows = []
    for i in range(N):
        state, res = integ.step(state, inputs.hour(i), setpoints)
        rows.append(res)
    hours = np.asarray(inputs.hours) + 1

    def col(fn):
        return np.array([fn(r) for r in rows])

    def cap(i):
        return col(lambda r: r.T_c[i] if len(r.T_c) > i else r.T_x)

    series = ZoneSeries(
        hour=hours,
        T_a=col(lambda r: r.T_a),
        T_x=col(lambda r: r.T_x),
        T_c1=cap(0),
        T_c2=cap(1),
        phi_vent=col(lambda r: r.phi_vent),
        phi_trans_total=col(lambda r: r.phi_yx.sum()),
        phi_yx=np.array([r.phi_yx for r in rows]).reshape(N, len(net.parts)),
        P_heat=col(lambda r: r.P_heat) if any(s is not None for s in setpoints) else None,
        energy_in=col(lambda r: r.energy_in),
        stored=col(lambda r: r.stored),
    )
    return series.discard(warmup) if warmup else series
