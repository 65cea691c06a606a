"""Command line front end.

    sle solve    --config run.cfg --out results/
    sle spectrum --config pre.cfg --out results/
    sle smallp   --config run.cfg
    sle gd       --config run.cfg
    sle verify   --config run.cfg --suite identities --seed 7

Outputs are written to ``--out`` (default: the current directory) as
``<command>.csv`` / ``<command>.json``; floats use the shortest
round-trip representation and JSON keys are sorted, so identical
configurations give byte-identical files.

Exit status: 0 success (all checks passed), 1 a verification check
failed, 2 configuration error, 3 computation error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .background import Background, WindowFunction, abar, window_family
from .config import ConfigError, RunConfig, parse_config, with_overrides
from .exceptions import SLEError
from .modes import (commutator, delta_identity_residual, energy_density_identity, ermakov_residual,
                    gaussian_covariance, mode_from_function, working_grid)
from .numerics import Grid
from .sle_core import (_jk_arrays, default_fiducial, energy_functionals, jk_functionals, quadrature,
                       sle_from_fiducial, sle_state)

SUITES = ("invariance", "identities", "smallp", "wkb", "spectrum")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# reports and deterministic output
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    bound: float
    passed: bool


def _check(name: str, measured, bound: float, upper: bool = True) -> Check:
    m = float(measured)
    ok = math.isfinite(m) and (m < bound if upper else m > bound)
    return Check(name, m, float(bound), bool(ok))


def _within(name: str, measured, lo: float, hi: float) -> Check:
    m = float(measured)
    return Check(name, m, float(hi), bool(math.isfinite(m) and lo <= m <= hi))


@dataclass
class Report:
    """Named checks; the suite passes iff every check passes."""

    suite: str
    checks: list = field(default_factory=list)

    def add(self, check: Check) -> Check:
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed,
                "checks": [{"name": c.name, "measured": c.measured, "bound": c.bound,
                            "passed": c.passed} for c in self.checks]}

    def lines(self):
        for c in self.checks:
            yield f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.measured!r} (bound {c.bound!r})"
        yield f"{self.suite}: {'PASS' if self.passed else 'FAIL'}"


def _num(x) -> str:
    x = float(x)
    return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(x.real), _jsonable(x.imag)]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else _num(x)
    return x


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _num(v) for v in row])
    return buf.getvalue()


def _write(out: str, name: str, text: str) -> str:
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _rng(cfg: RunConfig) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(cfg.seed))


def random_bogoliubov(rng: np.random.Generator, count: int):
    """(a, b) = (cosh r e^{i phi}, sinh r e^{i psi}), r in [0, 2]."""
    r = rng.uniform(0.0, 2.0, count)
    phi = rng.uniform(0.0, 2.0 * math.pi, count)
    psi = rng.uniform(0.0, 2.0 * math.pi, count)
    return [(complex(np.cosh(ri) * np.exp(1j * a)), complex(np.sinh(ri) * np.exp(1j * b)))
            for ri, a, b in zip(r, phi, psi)]


def _setup(cfg: RunConfig):
    bg = cfg.build_background()
    f = cfg.build_window(bg)
    return bg, f


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(cfg: RunConfig):
    """SLE mode table on the working grid plus a JSON summary."""
    bg, f = _setup(cfg)
    p = cfg.solve_p * cfg.scale
    tau0 = cfg.tau0
    grid = working_grid(bg, f, cfg.grid_size, () if tau0 is None else (tau0,))
    routes = ("commutator", "fiducial") if cfg.solve_route == "both" else (cfg.solve_route,)
    res = {r: sle_state(bg, f, p, route=r, grid=grid, tau0=tau0, tol=cfg.tol) for r in routes}
    main = res[routes[0]]
    T = main.mode.value
    m2 = np.abs(T) ** 2
    rows = zip(grid.points, T.real, T.imag, m2, np.angle(T), main.J_of_tau)
    table = dump_csv(("tau", "re_T", "im_T", "abs_T_sq", "arg_T", "J"), rows)
    pair = energy_functionals(main.mode, f, bg)
    summary = {"command": "solve", "p": p, "route": cfg.solve_route, "energy": main.energy,
               "c1": pair.c1, "c2": pair.c2, "wronskian_residual": main.mode.wronskian_residual,
               "grid_size": len(grid), "background": bg.name}
    if len(routes) == 2:
        other = res[routes[1]].modulus_sq()
        summary["route_agreement"] = float(np.max(np.abs(m2 / other - 1.0)))
        summary["energy_agreement"] = abs(res[routes[1]].energy / main.energy - 1.0)
    return {"solve.csv": table, "solve.json": dump_json(summary)}, summary


def _preinflation_model(cfg: RunConfig):
    from .preinflation import PreInflationModel
    if cfg.background_kind != "preinflation":
        raise ConfigError("background.kind: this command needs background.kind = preinflation",
                          field="background.kind")
    return PreInflationModel(cfg.background_H)


def cmd_spectrum(cfg: RunConfig):
    """P(p) on the configured p/H grid."""
    from .preinflation import spectrum_scan
    model = _preinflation_model(cfg)
    f = cfg.build_window()
    tab = spectrum_scan(model, f, cfg.momenta(), cfg.spectrum_route)
    text = dump_csv(("p_over_H", "P", "P_normalized"), tab.rows())
    meta = {"command": "spectrum", "H": model.H, "route": cfg.spectrum_route,
            "count": int(tab.momenta.size), "window": tab.window,
            "kinetic_only": tab.window["kinetic_only"],
            "abar": abar(model.background, f)}
    return {"spectrum.csv": text, "spectrum.json": dump_json(meta)}, meta


def cmd_smallp(cfg: RunConfig):
    """Coefficient tables of the small-p expansions of |T|^2 and E."""
    from .smallp import series_fiducial, sle_series
    bg, f = _setup(cfg)
    N = cfg.smallp_order
    lo, hi = f.tau_support(bg)
    sol = series_fiducial(bg, max(N, 1), f=f)
    tau = np.linspace(lo, hi, cfg.smallp_samples)
    ss = sle_series(bg, f, max(N, 1), tau=tau, series=sol)
    n_mod = ss.modulus_coeffs.shape[0]
    header = ["tau"] + [f"t{n}" for n in range(n_mod)]
    rows = (np.concatenate(([t], ss.modulus_coeffs[:, i])) for i, t in enumerate(ss.tau))
    meta = {"command": "smallp", "order": N, "regime": ss.regime,
            "energy_coeffs": list(ss.energy_coeffs), "eps_sq": list(ss.eps_sq),
            "p_star": sol.p_star, "kernel_bound": sol.kernel_bound,
            "window_mass": ss.window_mass,
            "convention": ("|T|^2 = p^-1 sum t_n p^2n, E = p sum e_n p^2n" if ss.regime == "massless"
                           else "|T|^2 = sum t_n p^2n, E = sum e_n p^2n")}
    return {"smallp.csv": dump_csv(header, rows), "smallp.json": dump_json(meta)}, meta


def cmd_gd(cfg: RunConfig):
    """Generalized heat-kernel coefficients G_1..G_N on the window support."""
    from .wkb import gd_coeffs
    bg, f = _setup(cfg)
    hk = gd_coeffs(bg, cfg.gd_order)
    lo, hi = f.tau_support(bg)
    tau = np.linspace(lo, hi, cfg.gd_samples)
    G = hk.values(tau)
    header = ["tau"] + [f"G{n}" for n in range(1, cfg.gd_order + 1)]
    rows = (np.concatenate(([t], G[1:, i])) for i, t in enumerate(tau))
    meta = {"command": "gd", "order": cfg.gd_order, "background": bg.name}
    return {"gd.csv": dump_csv(header, rows)}, meta


# ---------------------------------------------------------------------------
# verification suites
# ---------------------------------------------------------------------------

def _momenta(cfg: RunConfig):
    return [q * cfg.scale for q in (0.1, 1.0, 10.0)]


def suite_invariance(cfg: RunConfig) -> Report:
    bg, f = _setup(cfg)
    rep = Report("invariance")
    grid = working_grid(bg, f, cfg.grid_size)
    pairs = random_bogoliubov(_rng(cfg), 20)
    for p in _momenta(cfg):
        fid = default_fiducial(bg, f, p, grid, cfg.tol)
        ref = sle_from_fiducial(fid, f, bg)
        mod = np.abs(ref.mode.value)
        dev_T, dev_E = 0.0, 0.0
        for a, b in pairs:
            r = sle_from_fiducial(fid.rotated(a, b), f, bg)
            dev_T = max(dev_T, float(np.max(np.abs(np.abs(r.mode.value) / mod - 1.0))))
            dev_E = max(dev_E, abs(r.energy / ref.energy - 1.0))
        rep.add(_check(f"p={p!r}: |T| deviation under rotations", dev_T, 1e-6))
        rep.add(_check(f"p={p!r}: energy deviation under rotations", dev_E, 1e-8))
        pair = energy_functionals(ref.mode, f, bg)
        rep.add(_check(f"p={p!r}: |D|/E at the minimizer", abs(pair.c2) / pair.c1, 1e-7))
        com = sle_state(bg, f, p, route="commutator", grid=grid, tol=cfg.tol)
        rep.add(_check(f"p={p!r}: fiducial vs commutator modulus",
                       np.max(np.abs(com.modulus_sq() / ref.modulus_sq() - 1.0)), 1e-6))
    return rep


def suite_identities(cfg: RunConfig) -> Report:
    bg, f = _setup(cfg)
    rep = Report("identities")
    rng = _rng(cfg)
    p = cfg.solve_p * cfg.scale
    grid = working_grid(bg, f, cfg.grid_size)
    fid = default_fiducial(bg, f, p, grid, cfg.tol)
    if cfg.verify_break_wronskian:
        # negative control: a solution normalized to -1.0201 i instead of -i
        good = fid
        fid = mode_from_function(p, grid, lambda t: tuple(1.01 * x for x in good(t)), bg)
    rep.add(_check("Wronskian normalization", fid.wronskian_residual, 1e-9))
    pair = energy_functionals(fid, f, bg, check=False)

    lo, hi = f.tau_support(bg)
    tgrid = Grid.uniform(min(lo, grid.lo), max(hi, grid.hi), 64)
    tau_r = 0.5 * (lo + hi)
    table = commutator(bg, p, tgrid, tau_r, cfg.tol)
    jk = jk_functionals(table, f, bg)
    rep.add(_check("4KJ - Jdot^2 = 4(c1^2 - |c2|^2)",
                   abs(jk.discriminant / (4.0 * pair.invariant) - 1.0), 1e-8))

    nodes, weights = quadrature(bg, f, p)
    tau = rng.uniform(grid.lo, grid.hi, 50)
    J_tau = _jk_arrays(table, nodes, weights, tau)[0]
    D = table.delta(tau, tau_r)
    D0 = table.d_taup(tau, tau_r)
    lhs = jk.K * D ** 2 + jk.J * D0 ** 2 - D * D0 * jk.Jdot
    rep.add(_check("J(tau) from J, K, Jdot at tau0",
                   np.max(np.abs(lhs - J_tau)) / np.max(np.abs(J_tau)), 1e-7))

    t1, t2, t3 = (rng.uniform(grid.lo, grid.hi, 100) for _ in range(3))
    res = delta_identity_residual(table, t1, t2, t3)
    scale = max(1.0, float(np.max(np.abs(table.delta(t1, t2)))))
    rep.add(_check("commutator product identity (100 triples)", np.max(res) / scale, 1e-7))

    sle = sle_from_fiducial(fid, f, bg) if not cfg.verify_break_wronskian else None
    if sle is not None:
        rep.add(_check("Ermakov-Pinney residual", np.max(ermakov_residual(sle.mode, bg)), 1e-6))
        first, second = gaussian_covariance(sle.mode, grid.points)
        rep.add(_check("covariance forms agree",
                       np.max(np.abs(first - second) / np.abs(second)), 1e-6))
        lhs_e, rhs_e = energy_density_identity(sle.mode, f, bg)
        rep.add(_check("averaged energy identity", abs(lhs_e / rhs_e - 1.0), 1e-6))
    return rep


def suite_smallp(cfg: RunConfig) -> Report:
    from .smallp import partial_sum_residual, series_fiducial
    bg, f = _setup(cfg)
    rep = Report("smallp")
    sol = series_fiducial(bg, 3, f=f)
    rep.add(_check("contraction radius p_star", sol.p_star, 0.0, upper=False))
    ps = np.geomspace(sol.p_star / 20.0, sol.p_star / 2.0, 5)
    for N in (1, 2, 3):
        r = np.array([partial_sum_residual(sol, q, N) for q in ps])
        slope = float(np.polyfit(np.log(ps), np.log(r), 1)[0])
        rep.add(_within(f"order-{N} residual slope (target {2 * N + 2})", slope,
                        2 * N + 2 - 0.3, 2 * N + 2 + 0.3))
    return rep


def _smooth_samples(bg: Background, f: WindowFunction, n: int = 9):
    """Points inside the widest smooth piece of the window support."""
    lo, hi = f.tau_support(bg)
    cuts = [lo] + [b for b in bg.breakpoints if lo < b < hi] + [hi]
    k = int(np.argmax(np.diff(cuts)))
    a, b = cuts[k], cuts[k + 1]
    m = 0.05 * (b - a)
    return np.linspace(a + m, b - m, n)


def suite_wkb(cfg: RunConfig) -> Report:
    from .wkb import gd_coeffs, wkb_s_coeffs
    bg, f = _setup(cfg)
    rep = Report("wkb")
    tt = _smooth_samples(bg, f)
    hk = gd_coeffs(bg, 2)
    G = hk.values(tt)
    scale = float(np.max(G[1] ** 2 + np.abs(G[2]))) + 1e-300
    scale1 = float(np.max(np.abs(G[1]))) + 1e-300
    rep.add(_check("G1 recursion vs closed form",
                   np.max(np.abs(hk.closed_form(1, tt) - G[1])) / scale1, 1e-7))
    rep.add(_check("G2 recursion vs closed form",
                   np.max(np.abs(hk.closed_form(2, tt) - G[2])) / scale, 1e-7))
    rep.add(_check("G2 recursion vs conformal-time form",
                   np.max(np.abs(hk.conformal_g2(tt) - G[2])) / scale, 1e-7))
    rep.add(_check("Gelfand-Dickey recursion residual", np.max(hk.recursion_residual(tt)), 1e-9))
    if bg.max_derivative >= 6:
        wc = wkb_s_coeffs(bg, 4, (tt[0], tt[-1]))
        rep.add(_check("WKB Wronskian conditions", max(wc.wronskian_conditions()), 1e-10))
        rep.add(_check("V2 = G1", np.max(np.abs(wc.V(2, tt, tt) - G[1])) / scale1, 1e-8))
    return rep


def suite_spectrum(cfg: RunConfig) -> Report:
    from .preinflation import matching_coeffs, matching_residual, power_spectrum
    model = _preinflation_model(cfg)
    f = cfg.build_window()
    model.check_window(f)
    H = model.H
    rep = Report("spectrum")
    ps = cfg.momenta() * H
    bog = [abs(abs(a) ** 2 - abs(b) ** 2 - 1.0) for a, b in map(lambda q: matching_coeffs(model, q), ps)]
    rep.add(_check("|alpha|^2 - |beta|^2 = 1 over the p grid", max(bog), 1e-9))
    rep.add(_check("matching residual", max(max(matching_residual(model, q)) for q in ps), 1e-9))
    _, b = matching_coeffs(model, 100.0 * H)
    rep.add(_check("|beta|^2 16 p^4 / (9 H^4) at p = 100 H",
                   abs(abs(b) ** 2 * 16.0 * 100.0 ** 4 / 9.0 - 1.0), 0.05))
    norm = (2.0 * math.pi) ** 2
    ab = abar(model.background, f)
    lo_p = np.array([1e-3, 1e-2]) * H
    P_lo = np.array([power_spectrum(model, f, q) for q in lo_p])
    rep.add(_within("P (2 pi)^2 / (p^2 abar) at p = 0.01 H", P_lo[1] * norm / (lo_p[1] ** 2 * ab),
                    0.98, 1.02))
    slope = float(np.log(P_lo[1] / P_lo[0]) / np.log(lo_p[1] / lo_p[0]))
    rep.add(_within("IR log-log slope on [1e-3, 1e-2] H", slope, 1.95, 2.05))
    hi_p = np.geomspace(50.0, 200.0, 16) * H
    plateau = np.mean([power_spectrum(model, f, q) * norm / H ** 2 for q in hi_p])
    rep.add(_within("averaged P (2 pi)^2 / H^2 on [50, 200] H", plateau, 0.98, 1.02))
    return rep


SUITE_RUNNERS = {"invariance": suite_invariance, "identities": suite_identities,
                 "smallp": suite_smallp, "wkb": suite_wkb, "spectrum": suite_spectrum}


def cmd_verify(cfg: RunConfig, suite: str) -> Report:
    if suite not in SUITE_RUNNERS:
        raise ConfigError(f"--suite must be one of {', '.join(SUITES)}", field="suite")
    return SUITE_RUNNERS[suite](cfg)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sle", description="States of Low Energy on FL backgrounds.")
    ap.add_argument("command", choices=("solve", "spectrum", "smallp", "gd", "verify"))
    ap.add_argument("--config", help="configuration file (key = value lines)")
    ap.add_argument("--out", default=".", help="output directory (default: .)")
    ap.add_argument("--suite", choices=SUITES, help="verification suite (verify only)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    return ap


def load_config(path: Optional[str], seed: Optional[int] = None) -> RunConfig:
    text = ""
    if path:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    cfg = parse_config(text)
    if seed is not None:
        cfg = with_overrides(cfg, seed=seed)
    return cfg


def run(command: str, cfg: RunConfig, out: str, suite: Optional[str] = None, stream=None) -> int:
    stream = stream or sys.stdout
    if command == "verify":
        if suite is None:
            raise ConfigError("verify needs --suite", field="suite")
        rep = cmd_verify(cfg, suite)
        _write(out, f"verify_{suite}.json", dump_json(rep.as_dict()))
        for line in rep.lines():
            print(line, file=stream)
        return EXIT_OK if rep.passed else EXIT_FAIL
    runner = {"solve": cmd_solve, "spectrum": cmd_spectrum, "smallp": cmd_smallp, "gd": cmd_gd}[command]
    files, _ = runner(cfg)
    for name in sorted(files):
        print(_write(out, name, files[name]), file=stream)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(args.command, cfg, args.out, args.suite)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SLEError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
