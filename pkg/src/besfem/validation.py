"""Property checks behind the ``validate`` subcommand, plus the wall corpora."""
from __future__ import annotations

import csv
import itertools
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import fem, walls
from .model import Config, EnvelopePart, Glazing, Layer, Material, WallConstruction, default_config
from .weather import synth_weather
from .zone import ZoneInputs, build_network, simulate_zone

H_E = 25.0
SWEEP_PERIODS_H = (1, 2, 3, 4, 6, 8, 12, 16, 24)

# conductivity -> representative material
_CORPUS_MATERIALS = {
    0.04: Material("mineral_wool", 0.04, 30.0, 1030.0),
    0.2: Material("aerated_concrete", 0.2, 600.0, 1000.0),
    1.0: Material("brick", 1.0, 1800.0, 900.0),
    2.5: Material("dense_concrete", 2.5, 2500.0, 1000.0),
}
BRICK = Material("brick", 0.9, 1800.0, 900.0)
CONCRETE = Material("concrete", 2.0, 2400.0, 840.0)
WOOL = _CORPUS_MATERIALS[0.04]
AERATED = _CORPUS_MATERIALS[0.2]


def _part(layers, pid="wall", area=1.0) -> EnvelopePart:
    return EnvelopePart(pid, area, WallConstruction(tuple(Layer(m, d) for m, d in layers)))


def stability_corpus() -> list[EnvelopePart]:
    """1-3 layer walls spanning 0.05-0.4 m total thickness and k 0.04-2.5 W/mK."""
    mats = list(_CORPUS_MATERIALS.values())
    out = []
    for d in (0.05, 0.1, 0.2, 0.3, 0.4):
        for m in mats:
            out.append(_part([(m, d)], f"{m.name}_{d}"))
    for m1, m2 in itertools.permutations(mats, 2):
        for d in (0.1, 0.2, 0.4):
            out.append(_part([(m1, d / 2), (m2, d / 2)], f"{m1.name}+{m2.name}_{d}"))
    for m1, m2, m3 in ((mats[3], mats[0], mats[2]), (mats[2], mats[0], mats[2]),
                       (mats[1], mats[0], mats[3]), (mats[3], mats[1], mats[3])):
        for d in (0.15, 0.3, 0.4):
            out.append(_part([(m1, d / 3), (m2, d / 3), (m3, d / 3)],
                             f"{m1.name}+{m2.name}+{m3.name}_{d}"))
    return out


def default_corpus() -> list[EnvelopePart]:
    """Typical building walls, starting with the test-box face."""
    return [
        _part([(CONCRETE, 0.12)], "box_concrete_0.12"),
        _part([(CONCRETE, 0.2)], "concrete_0.2"),
        _part([(BRICK, 0.1)], "brick_0.1"),
        _part([(BRICK, 0.2)], "brick_0.2"),
        _part([(AERATED, 0.1)], "aerated_0.1"),
        _part([(CONCRETE, 0.1), (WOOL, 0.1)], "concrete_int_insulated_ext"),
        _part([(WOOL, 0.1), (CONCRETE, 0.1)], "insulated_int_concrete_ext"),
    ]


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _four_layer() -> EnvelopePart:
    return _part([(CONCRETE, 0.1), (WOOL, 0.08), (BRICK, 0.1), (AERATED, 0.05)], "four_layer")


def _det_check():
    # relative to the size of the cancelling products, which grow like exp(2 gamma d)
    worst = 0.0
    for part in stability_corpus() + [_four_layer()]:
        for p in SWEEP_PERIODS_H:
            M = walls.wall_matrix(part.construction, 2 * np.pi / (p * 3600.0))
            scale = max(abs(M[0, 0] * M[1, 1]), abs(M[0, 1] * M[1, 0]), 1.0)
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            worst = max(worst, abs(det - 1.0) / scale)
    return worst <= 1e-10, f"max |det - 1| / |M11 M22| = {worst:.2e}"


def _composition_check():
    lay = Layer(CONCRETE, 0.06)
    w = 2 * np.pi / 86400.0
    M2 = walls.layer_matrix(lay, w) @ walls.layer_matrix(lay, w)
    M1 = walls.layer_matrix(Layer(CONCRETE, 0.12), w)
    err = np.max(np.abs(M2 - M1))
    return err <= 1e-12, f"max entry error {err:.2e}"


def _limit_check():
    # imaginary parts vanish like omega C, so at 1e-9 rad/s only real parts are held to 1e-6
    w = 1e-9
    worst_re, worst_im = 0.0, 0.0
    for part in default_corpus():
        a = walls.admittances(part, w, H_E)
        AU = part.area * part.u_value(H_E)
        C = part.area * sum(lay.material.rho_c * lay.thickness for lay in part.construction.layers)
        worst_re = max(worst_re, abs(a.Y_xy.real / AU - 1.0), abs(a.Y_x.real) / AU)
        worst_im = max(worst_im, abs(a.Y_xy.imag) / (w * C), abs(a.Y_x.imag) / (w * C))
    ok = worst_re <= 1e-6 and worst_im <= 1.0
    return ok, f"real parts {worst_re:.1e} relative, |Im| / (omega C) <= {worst_im:.2f}"


def _phase_check():
    lo, hi = np.inf, -np.inf
    for part in stability_corpus():
        if len(part.construction.layers) != 1:
            continue
        for a in walls.admittance_sweep(part, SWEEP_PERIODS_H, H_E):
            ph = np.angle(a.Y_x)
            lo, hi = min(lo, ph), max(hi, ph)
    return lo >= 0.0 and hi <= np.pi / 2, f"phase of Y_x in [{lo:.3f}, {hi:.3f}] rad"


def _fits(corpus, perturb_u_identity=False):
    out = []
    for part in corpus:
        rf = walls.fit_response_factors(part, H_E)
        if perturb_u_identity:
            rf = walls.ResponseFactors(rf.L_yx * 1.001 + 1e-6, rf.a1, rf.a2, rf.b1, rf.b2)
        out.append((part, rf))
    return out


def _u_identity_check(perturb_u_identity=False):
    worst = max(walls.steady_gain_residual(rf, p.area * p.u_value(H_E))
                for p, rf in _fits(stability_corpus(), perturb_u_identity))
    return worst <= 1e-10, f"max relative residual {worst:.2e}"


def _pole_check():
    worst = max(float(np.max(rf.pole_moduli())) for _, rf in _fits(stability_corpus()))
    return worst < 1.0, f"max pole modulus {worst:.4f}"


def _interp_24h_check():
    worst = 0.0
    for part, rf in _fits(default_corpus()):
        Y = walls.admittances(part, walls.OMEGA_24, H_E).Y_xy
        worst = max(worst, abs(rf.transfer(walls.OMEGA_24) / Y - 1.0))
    return worst <= 1e-8, f"max relative 24 h error {worst:.2e}"


def _interp_band_check():
    worst, where = 0.0, ""
    for part, rf in _fits(default_corpus()):
        for p in (3, 6, 12):
            w = 2 * np.pi / (p * 3600.0)
            e = abs(rf.transfer(w) / walls.admittances(part, w, H_E).Y_xy - 1.0)
            if e > worst:
                worst, where = e, f"{part.id} @ {p} h"
    return worst <= 0.05, f"max relative error {worst:.3f} ({where})"


def _branch_check():
    net = walls.BranchNetwork(((10.0, 1e6), (40.0, 5e4)))
    targets = net.admittance([walls.OMEGA_24, walls.OMEGA_1])
    fit = walls.fit_branch_network(*targets)
    rel = max(abs(a - b) / b for fb, nb in zip(fit.branches, net.branches) for a, b in zip(fb, nb))
    return rel <= 1e-6, f"round-trip rel error {rel:.2e}"


def _dc_block_check():
    # i omega C survives at 1e-9 rad/s; the conductive part must vanish
    net = walls.fit_branch_network(*zone_targets(default_config()))
    Y = complex(net.admittance(1e-9))
    C = sum(c for _, c in net.branches)
    ok = abs(Y.real) < 1e-6 and abs(Y) <= 1e-9 * C * (1 + 1e-9)
    return ok, f"Y(1e-9) = {Y.real:.2e} + {Y.imag:.2e}j W/K, omega sum(C) = {1e-9 * C:.2e}"


def zone_targets(cfg: Config) -> tuple[complex, complex]:
    h_e = cfg.zone.surface_coeffs.h_e
    return (walls.zone_storage_admittance(cfg.zone.envelope, h_e, walls.OMEGA_24),
            walls.zone_storage_admittance(cfg.zone.envelope, h_e, walls.OMEGA_1))


def _steady_zone_check():
    cfg = default_config()
    net = build_network(cfg.zone)
    N = 1000
    theta = 7.5
    inputs = ZoneInputs(np.arange(N), np.full(N, theta), np.full((N, len(net.parts)), theta))
    out = simulate_zone(net, 20.0, inputs)
    err = abs(out.T_a[-1] - theta)
    return err < 1e-6, f"|T_a - theta| after {N} h = {err:.2e} K"


def _glazing_check():
    part = EnvelopePart("window", 2.0, Glazing(1.4))
    rf = walls.fit_response_factors(part, H_E)
    phi, _ = walls.cross_flow_step(rf, walls.CrossFlowState(), 5.0)
    zero = rf.a1 == rf.a2 == rf.b1 == rf.b2 == 0.0
    return zero and phi == 5.0 * 2.0 * 1.4, f"Phi = {phi} W for dT = 5 K"


def _keq_check():
    k = fem.equivalent_air_conductivity(1.0, 0.34)
    return round(k, 4) == 2.9412, f"k_eq = {k:.6f}"


def _fem_patch_check():
    mesh = fem.uniform_mesh(4, 1.0)
    sys_ = fem.assemble(mesh, fem.MaterialField({0: 1.3}, {0: 1e6}), 0.0)
    X = mesh.node_coordinates()
    exact = 1.0 + 2.0 * X[:, 0] - 3.0 * X[:, 1] + 0.5 * X[:, 2]
    idx = np.arange(mesh.n + 1)
    I, J, K = np.meshgrid(idx, idx, idx, indexing="ij")
    boundary = ((I == 0) | (I == mesh.n) | (J == 0) | (J == mesh.n) | (K == 0) | (K == mesh.n)).ravel()
    T = fem.solve_dirichlet(sys_.K, boundary, np.where(boundary, exact, 0.0))
    err = np.max(np.abs(T - exact))
    return err <= 1e-10, f"max nodal error {err:.2e}"


def _fem_energy_check():
    cfg = default_config()
    mesh = fem.build_box_mesh(cfg.box, 10)
    sys_ = fem.assemble(mesh, fem.MaterialField.for_box(cfg.box), 25.0)
    stepper = fem.Stepper(sys_, 3600.0, 1.0, tol=1e-13)
    T0 = np.full(mesh.n_nodes, 5.0)
    Teq = np.array([10.0, 0.0, 3.0, 8.0, 12.0, -2.0])
    T1 = stepper.step(T0, Teq, Teq)
    dE = float(np.sum(sys_.M * (T1 - T0))) / 3600.0
    flux = float(np.sum(sys_.load(Teq) - sys_.H @ T1))
    rel = abs(dE - flux) / abs(flux)
    return rel <= 1e-8, f"relative energy imbalance {rel:.2e}"


def _mesh_count_check():
    mesh = fem.build_box_mesh(default_config().box, 10)
    core = int((mesh.material == fem.CORE).sum())
    shell = int((mesh.material == fem.SHELL).sum())
    return (core, shell) == (512, 488), f"core {core}, shell {shell}"


CHECKS: dict[str, Callable] = {
    "transfer matrix det = 1": _det_check,
    "layer composition": _composition_check,
    "admittance DC limits": _limit_check,
    "phase of Y_x within [0, pi/2]": _phase_check,
    "U-value identity (wall corpus)": None,  # filled in by run_checks
    "pole stability (wall corpus)": _pole_check,
    "24 h admittance exact": _interp_24h_check,
    "3/6/12 h interpolation within 5%": _interp_band_check,
    "branch network round trip": _branch_check,
    "branch network blocks DC": _dc_block_check,
    "zone steady state": _steady_zone_check,
    "glazing path": _glazing_check,
    "k_eq arithmetic": _keq_check,
    "FEM patch test": _fem_patch_check,
    "FEM discrete energy balance": _fem_energy_check,
    "box mesh cell counts": _mesh_count_check,
}


def run_checks(perturb_u_identity: bool = False) -> list[Check]:
    results = []
    for name, fn in CHECKS.items():
        if fn is None:
            fn = lambda: _u_identity_check(perturb_u_identity)  # noqa: E731
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(Check(name, bool(ok), f"{detail} [{time.perf_counter() - t0:.1f} s]"))
    return results


def dump_wall_reports(cfg: Config, out_dir: str | Path) -> list[Path]:
    """Per opaque envelope part: admittance sweep CSV and fitted coefficients JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    h_e = cfg.zone.surface_coeffs.h_e
    written = []
    for part in cfg.zone.envelope:
        if part.is_glazing:
            continue
        sweep = out_dir / f"{part.id}_admittance.csv"
        with open(sweep, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["period_h", "ReY_xy", "ImY_xy", "ReY_x", "ImY_x"])
            for p, a in zip(SWEEP_PERIODS_H, walls.admittance_sweep(part, SWEEP_PERIODS_H, h_e)):
                w.writerow([p] + [f"{v:.6g}" for v in (a.Y_xy.real, a.Y_xy.imag, a.Y_x.real, a.Y_x.imag)])
        rf = walls.fit_response_factors(part, h_e)
        coeffs = out_dir / f"{part.id}_response_factors.json"
        coeffs.write_text(json.dumps({
            "L_yx": rf.L_yx, "a1": rf.a1, "a2": rf.a2, "b1": rf.b1, "b2": rf.b2,
            "pole_moduli": [float(m) for m in sorted(rf.pole_moduli())],
            "AU": part.area * part.u_value(h_e),
        }, indent=2) + "\n")
        written += [sweep, coeffs]
    return written


def acceptance_weather(cfg: Config):
    s = cfg.simulation
    return synth_weather(s.days, s.T_mean, s.T_amp_daily, s.I_peak, s.start)
