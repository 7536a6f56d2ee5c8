"""Config-driven runs.

Usage::

    fraclap SOLVE --config run.ini --out results/

The config is an INI file; see ``demos/configs`` for complete examples.
Every artifact written to the output directory is listed with its SHA-256
in ``manifest.json``; wall-clock times appear only there, so all CSV files
are byte-identical across repeated runs.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import barriers, diagnostics, spherical
from .continuation import BetaLadder, ContinuationError, continue_beta, trace_overlaps
from .core import Field, ProblemParams, ReactionFamily, ReactionSpec
from .fieldio import FieldFormatError, load_field, save_field, sha256_file, write_csv
from .solver import BoundaryData, SolverConfig, SolverError, SweepOrder, build_grid, solve_system

log = logging.getLogger("fraclap")

SCENARIOS = ("SOLVE", "SWEEP_BETA", "DIAGNOSE", "EXPONENTS", "BARRIER_CHECK")
PRESETS = ("CONSTANT", "MIRROR_CROSSING", "CUSTOM_SAMPLES")
DIAGNOSTICS = ("holder", "overlap", "reflection", "system_residual", "free_boundary",
               "exponent", "acf", "almgren", "morrey")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

SWEEP_HEADER = ("step", "beta", "iterations", "residual", "overlap_12", "beta_overlap_12",
                "trace_product_12", "reflection_residual")
RADIAL_HEADER = ("center_x", "r", "value")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str
    params: ProblemParams
    grid: dict
    boundary: dict
    solver: SolverConfig
    ladder: BetaLadder
    diagnostics: List[str]
    diag_options: dict
    exponents: dict
    barrier: dict
    output: Optional[str] = None
    input_field: Optional[str] = None
    base_dir: Path = field(default_factory=Path)


# ----------------------------------------------------------------------------
# config parsing


def _get(cp, section, key, cast, default=None, check=None, what=""):
    if not cp.has_option(section, key):
        if default is None:
            raise ConfigError(f"[{section}] {key}: missing")
        return default
    raw = cp.get(section, key)
    try:
        val = cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc
    if check is not None and not check(val):
        raise ConfigError(f"[{section}] {key}: value {raw!r} out of range {what}".rstrip())
    return val


def _floats(raw: str) -> List[float]:
    return [float(t) for t in raw.replace(",", " ").split()]


def _reaction(raw: str) -> ReactionSpec:
    """``ZERO``, ``CONSTANT(lam)``, ``LOGISTIC(lam, kappa)`` with optional
    ``; cutoff=theta``."""
    text = raw.strip()
    cutoff = 0.0
    if ";" in text:
        text, extra = text.split(";", 1)
        key, _, val = extra.partition("=")
        if key.strip() != "cutoff":
            raise ValueError(raw)
        cutoff = float(val)
        text = text.strip()
    name, _, args = text.partition("(")
    name = name.strip().upper()
    vals = _floats(args.rstrip(")")) if args else []
    if name == "ZERO" and not vals:
        return ReactionSpec(ReactionFamily.ZERO, cutoff_theta=cutoff)
    if name == "CONSTANT" and len(vals) == 1:
        return ReactionSpec.constant(vals[0], cutoff)
    if name == "LOGISTIC" and len(vals) == 2:
        return ReactionSpec.logistic(vals[0], vals[1], cutoff)
    raise ValueError(raw)


def parse_config(path) -> RunConfig:
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    scenario = cp.get("run", "scenario", fallback="").strip().upper()
    if scenario and scenario not in SCENARIOS:
        raise ConfigError(f"[run] scenario: {scenario!r} is not one of {', '.join(SCENARIOS)}")
    sec = "problem"
    k = _get(cp, sec, "k", int, 1, lambda v: v >= 1, "(k >= 1)")
    s = _get(cp, sec, "s", float, 0.5, lambda v: 0 < v < 1, "(0 < s < 1)")
    p = _get(cp, sec, "p", float, 1.0, lambda v: v > 0, "(p > 0)")
    q = _get(cp, sec, "q", float, p, lambda v: v > 0, "(q > 0)")
    beta = _get(cp, sec, "beta", float, 0.0, lambda v: v >= 0, "(beta >= 0)")
    absorption = _get(cp, sec, "absorption", float, 0.0, lambda v: v >= 0, "(M >= 0)")
    inter = None
    if cp.has_option(sec, "interaction"):
        rows = [r for r in cp.get(sec, "interaction").split(";") if r.strip()]
        try:
            inter = np.array([_floats(r) for r in rows])
        except ValueError as exc:
            raise ConfigError(f"[{sec}] interaction: cannot parse") from exc
    reactions = ()
    if cp.has_option(sec, "reaction"):
        items = [t for t in cp.get(sec, "reaction").split("|") if t.strip()]
        try:
            reactions = tuple(_reaction(t) for t in items)
        except ValueError as exc:
            raise ConfigError(f"[{sec}] reaction: cannot parse {exc}") from exc
        if len(reactions) == 1 and k > 1:
            reactions = reactions * k
    try:
        params = ProblemParams(s=s, k=k, p=p, q=q, beta=beta, interaction=inter,
                               reactions=reactions, absorption=absorption)
    except ValueError as exc:
        raise ConfigError(f"[{sec}] {exc}") from exc

    sec = "grid"
    grid = dict(
        x_lo=_get(cp, sec, "x_lo", float, -1.0),
        x_hi=_get(cp, sec, "x_hi", float, 1.0),
        H=_get(cp, sec, "H", float, 1.0, lambda v: v > 0, "(H > 0)"),
        nx=_get(cp, sec, "nx", int, 129, lambda v: v >= 3, "(nx >= 3)"),
        ny=_get(cp, sec, "ny", int, 65, lambda v: v >= 3, "(ny >= 3)"),
        grading_exponent=_get(cp, sec, "grading_exponent", float, 0.0,
                              lambda v: v == 0 or v >= 1, "(>= 1, or 0 for default)"),
    )
    if grid["x_lo"] >= grid["x_hi"]:
        raise ConfigError("[grid] x_lo: must be below x_hi")

    sec = "boundary"
    boundary = dict(
        preset=_get(cp, sec, "preset", lambda v: v.strip().upper(), "CONSTANT",
                    lambda v: v in PRESETS, f"(one of {', '.join(PRESETS)})"),
        value=_get(cp, sec, "value", float, 1.0, lambda v: v >= 0, "(>= 0)"),
        samples=cp.get(sec, "samples", fallback=None),
    )
    if boundary["preset"] == "MIRROR_CROSSING" and k != 2:
        raise ConfigError("[boundary] preset: MIRROR_CROSSING needs k = 2")
    if boundary["preset"] == "CUSTOM_SAMPLES" and not boundary["samples"]:
        raise ConfigError("[boundary] samples: required for CUSTOM_SAMPLES")

    sec = "solver"
    try:
        solver = SolverConfig(
            tolerance=_get(cp, sec, "tolerance", float, 1e-8, lambda v: v > 0, "(> 0)"),
            max_sweeps=_get(cp, sec, "max_sweeps", int, 100_000, lambda v: v >= 1, "(>= 1)"),
            damping=_get(cp, sec, "damping", float, 1.0, lambda v: 0 < v <= 1, "(0, 1]"),
            sweep_order=_get(cp, sec, "sweep_order", lambda v: SweepOrder[v.strip().upper()],
                             SweepOrder.RED_BLACK),
        )
    except KeyError as exc:
        raise ConfigError(f"[{sec}] sweep_order: unknown {exc}") from exc

    sec = "ladder"
    ladder = BetaLadder(
        beta_0=_get(cp, sec, "beta_0", float, 1.0, lambda v: v > 0, "(> 0)"),
        ratio=_get(cp, sec, "ratio", float, 10.0, lambda v: v > 1, "(> 1)"),
        steps=_get(cp, sec, "steps", int, 7, lambda v: v >= 1, "(>= 1)"),
    )

    sec = "diagnostics"
    sel = cp.get(sec, "select", fallback="overlap,free_boundary")
    selected = [t.strip().lower() for t in sel.split(",") if t.strip()]
    for t in selected:
        if t not in DIAGNOSTICS:
            raise ConfigError(f"[{sec}] select: unknown diagnostic {t!r}")
    diag_options = dict(
        center=_get(cp, sec, "center", float, 0.0),
        radii=_get(cp, sec, "radii", _floats, [0.1, 0.2, 0.3, 0.4]),
        alpha=_get(cp, sec, "alpha", float, 0.5, lambda v: 0 < v <= 1, "(0, 1]"),
        eps=_get(cp, sec, "eps", float, 0.1, lambda v: 0 < v < 0.5, "(0, 1/2)"),
        mu=_get(cp, sec, "mu", float, 1.0, lambda v: v > 0, "(> 0)"),
        threshold=_get(cp, sec, "threshold", float, 0.0, lambda v: v >= 0, "(>= 0)"),
    )

    sec = "exponents"
    exponents = dict(
        s_values=_get(cp, sec, "s_values", _floats, [0.25, 0.5, 0.75],
                      lambda v: all(0 < t < 1 for t in v), "(each in (0, 1))"),
        resolution=_get(cp, sec, "resolution", int, 512, lambda v: v >= 64, "(>= 64)"),
    )

    sec = "barrier"
    barrier = dict(
        M_values=_get(cp, sec, "M_values", _floats, list(barriers.DECAY_GRID["M"]),
                      lambda v: all(t > 0 for t in v), "(> 0)"),
        p_values=_get(cp, sec, "p_values", _floats, list(barriers.DECAY_GRID["p"]),
                      lambda v: all(t > 0 for t in v), "(> 0)"),
        s_values=_get(cp, sec, "s_values", _floats, list(barriers.DECAY_GRID["s"]),
                      lambda v: all(0 < t < 1 for t in v), "(each in (0, 1))"),
        delta=_get(cp, sec, "delta", float, 0.0, lambda v: v >= 0, "(>= 0)"),
        nx=_get(cp, sec, "nx", int, 65, lambda v: v >= 3, "(>= 3)"),
        ny=_get(cp, sec, "ny", int, 33, lambda v: v >= 3, "(>= 3)"),
    )

    return RunConfig(scenario, params, grid, boundary, solver, ladder, selected, diag_options,
                     exponents, barrier,
                     output=cp.get("output", "directory", fallback=None),
                     input_field=cp.get("input", "field", fallback=None),
                     base_dir=path.parent)


# ----------------------------------------------------------------------------
# scenario runners


def _build(cfg: RunConfig):
    g = cfg.grid
    prm = cfg.params
    grid = build_grid(g["x_lo"], g["x_hi"], g["H"], g["nx"], g["ny"], prm.a,
                      g["grading_exponent"] or None)
    b = cfg.boundary
    if b["preset"] == "CONSTANT":
        bd = BoundaryData.constant(grid, prm.k, b["value"])
    elif b["preset"] == "MIRROR_CROSSING":
        bd = BoundaryData.mirror_crossing(grid)
    else:
        path = cfg.base_dir / b["samples"]
        try:
            raw = np.loadtxt(path)
        except OSError:
            raise
        except ValueError as exc:
            raise ConfigError(f"[boundary] samples: cannot parse {path}") from exc
        if raw.size != prm.k * grid.ny * grid.nx:
            raise ConfigError(f"[boundary] samples: expected {prm.k}x{grid.ny}x{grid.nx} values")
        try:
            bd = BoundaryData(raw.reshape((prm.k,) + grid.shape), f"CUSTOM_SAMPLES({b['samples']})")
        except ValueError as exc:
            raise ConfigError(f"[boundary] samples: {exc}") from exc
    return grid, bd


class _Artifacts:
    def __init__(self, out: Path):
        self.out = out
        self.files: Dict[str, str] = {}

    def csv(self, name, header, rows):
        p = write_csv(self.out / name, header, rows)
        self.files[name] = sha256_file(p)

    def field(self, name, fld: Field):
        p = save_field(fld, self.out / name)
        self.files[name] = sha256_file(p)


def _diagnose(fld: Field, cfg: RunConfig, art: _Artifacts):
    opt = cfg.diag_options
    rows = []
    prm, g = fld.params, fld.grid
    c = opt["center"]
    radii = np.asarray(opt["radii"], float)
    thr = opt["threshold"] or diagnostics.default_threshold(cfg.solver.tolerance)
    for name in cfg.diagnostics:
        if name == "holder":
            sub = (g.x_nodes[0] + 0.25 * (g.x_nodes[-1] - g.x_nodes[0]),
                   g.x_nodes[-1] - 0.25 * (g.x_nodes[-1] - g.x_nodes[0]), 0.0, 0.5 * g.H)
            for i in range(prm.k):
                rows.append(("holder", i, diagnostics.holder_quotient(fld, i, opt["alpha"], sub)))
        elif name == "overlap":
            O, P = trace_overlaps(fld)
            for i in range(prm.k):
                for j in range(prm.k):
                    if i < j:
                        rows.append((f"overlap_{i + 1}{j + 1}", -1, float(O[i, j])))
                        rows.append((f"trace_product_{i + 1}{j + 1}", -1, float(P[i, j])))
        elif name == "reflection" and prm.k == 2:
            rows.append(("reflection_residual", -1, diagnostics.reflection_residual(fld)))
        elif name == "system_residual":
            R = diagnostics.segregation_system_residual(fld)
            for i in range(prm.k):
                for col, lab in enumerate(("upper", "hat_lower", "complementarity")):
                    rows.append((f"system_{lab}", i, float(R[i, col])))
        elif name == "free_boundary":
            fb = diagnostics.free_boundary(fld, thr)
            rows.append(("free_boundary_count", -1, int(fb.size)))
            for cl in diagnostics.clusters(fb):
                rows.append(("free_boundary_cluster_x", -1, float(g.x_nodes[cl].mean())))
        elif name == "exponent" and prm.k >= 2:
            j = diagnostics.interface_point(fld)
            rows.append(("interface_x", -1, float(g.x_nodes[j])))
            rows.append(("local_exponent", -1,
                         diagnostics.fit_local_exponent(fld.trace(), j, None, g.x_nodes)))
        elif name == "acf" and prm.k >= 2:
            hf = diagnostics.hat_field(fld)
            prof = diagnostics.acf_quotient(hf.positive(0), hf.negative(0), g, c, opt["mu"], radii)
            art.csv("radial_acf.csv", RADIAL_HEADER, [(c, r, v) for r, v in zip(prof.radii, prof.values)])
        elif name == "almgren":
            A = diagnostics.almgren_EH(fld, 0, c, radii)
            art.csv("radial_E.csv", RADIAL_HEADER, [(c, r, v) for r, v in zip(radii, A.E.values)])
            art.csv("radial_H.csv", RADIAL_HEADER, [(c, r, v) for r, v in zip(radii, A.H.values)])
            art.csv("radial_H_defect.csv", RADIAL_HEADER, [(c, r, v) for r, v in zip(radii, A.defect)])
        elif name == "morrey":
            prof = diagnostics.morrey_quotient(fld, c, radii, opt["eps"])
            art.csv("radial_morrey.csv", RADIAL_HEADER, [(c, r, v) for r, v in zip(radii, prof.values)])
    art.csv("diagnostics.csv", ("quantity", "component", "value"), rows)


def _run_solve(cfg: RunConfig, art: _Artifacts):
    grid, bd = _build(cfg)
    fld, rep = solve_system(cfg.params, grid, bd, cfg=cfg.solver)
    art.csv("solve.csv", ("iterations", "residual", "converged"),
            [(rep.iterations, float(rep.final_residual), int(rep.converged))])
    art.field("field.txt", fld)
    if not rep.converged:
        raise SolverError(f"step 0: not converged, defect {rep.final_residual:.3e}")
    return {"solve": rep.wall_time}


def _run_sweep(cfg: RunConfig, art: _Artifacts):
    grid, bd = _build(cfg)
    t0 = time.perf_counter()
    fld, rec = continue_beta(cfg.params, grid, bd, cfg.ladder, cfg.solver)
    rows = []
    for n in range(rec.steps):
        O = rec.overlap[n]
        P = rec.trace_product[n]
        o12 = float(O[0, 1]) if cfg.params.k > 1 else 0.0
        rows.append((n, rec.betas[n], rec.reports[n].iterations, float(rec.reports[n].final_residual),
                     o12, rec.betas[n] * o12, float(P[0, 1]) if cfg.params.k > 1 else 0.0,
                     float(rec.reflection[n])))
    art.csv("sweep.csv", SWEEP_HEADER, rows)
    art.field("field.txt", fld)
    _diagnose(fld, cfg, art)
    return {"sweep": time.perf_counter() - t0}


def _run_diagnose(cfg: RunConfig, art: _Artifacts):
    if cfg.input_field:
        fld = load_field(cfg.base_dir / cfg.input_field)
    else:
        grid, bd = _build(cfg)
        fld, rep = solve_system(cfg.params, grid, bd, cfg=cfg.solver)
        if not rep.converged:
            raise SolverError(f"step 0: not converged, defect {rep.final_residual:.3e}")
    t0 = time.perf_counter()
    _diagnose(fld, cfg, art)
    return {"diagnose": time.perf_counter() - t0}


def _run_exponents(cfg: RunConfig, art: _Artifacts):
    t0 = time.perf_counter()
    rows = spherical.exponent_table(cfg.exponents["s_values"], cfg.exponents["resolution"])
    art.csv("exponents.csv", ("s", "nu", "mu", "theta_star"), rows)
    return {"exponents": time.perf_counter() - t0}


def _run_barrier(cfg: RunConfig, art: _Artifacts):
    b = cfg.barrier
    t0 = time.perf_counter()
    rows = barriers.decay_grid(b["delta"], b["nx"], b["ny"],
                               dict(M=b["M_values"], p=b["p_values"], s=b["s_values"]))
    art.csv("decay.csv", ("M", "p", "s", "lhs", "rhs", "margin", "passed"),
            [r[:6] + (int(r[6]),) for r in rows])
    return {"barrier_check": time.perf_counter() - t0}


RUNNERS = {
    "SOLVE": _run_solve,
    "SWEEP_BETA": _run_sweep,
    "DIAGNOSE": _run_diagnose,
    "EXPONENTS": _run_exponents,
    "BARRIER_CHECK": _run_barrier,
}


def run(config_path, out: Optional[str] = None, scenario: Optional[str] = None) -> int:
    """Execute a config; returns the process exit status."""
    try:
        cfg = parse_config(config_path)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    if scenario is not None:
        if cfg.scenario and scenario.upper() != cfg.scenario:
            log.error("config error: [run] scenario %s conflicts with subcommand %s",
                      cfg.scenario, scenario)
            return EXIT_CONFIG
        cfg.scenario = scenario.upper()
    if not cfg.scenario:
        log.error("config error: [run] scenario: missing")
        return EXIT_CONFIG
    out_dir = Path(out or cfg.output or "fraclap_out")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    art = _Artifacts(out_dir)
    t0 = time.perf_counter()
    status = EXIT_OK
    timings = {}
    try:
        timings = RUNNERS[cfg.scenario](cfg, art)
    except ContinuationError as exc:
        log.error("solver failure at ladder step %d: %s", exc.step, exc)
        status = EXIT_SOLVER
    except SolverError as exc:
        log.error("solver failure: %s", exc)
        status = EXIT_SOLVER
    except ConfigError as exc:
        log.error("config error: %s", exc)
        status = EXIT_CONFIG
    except (OSError, FieldFormatError) as exc:
        log.error("I/O error: %s", exc)
        status = EXIT_IO
    manifest = {
        "scenario": cfg.scenario,
        "config": str(config_path),
        "config_sha256": sha256_file(config_path),
        "status": status,
        "artifacts": dict(sorted(art.files.items())),
        "wall_time": {"total": time.perf_counter() - t0, **timings},
    }
    try:
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="fraclap", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run a {name} config")
        sp.add_argument("--config", required=True, help="INI config file")
        sp.add_argument("--out", help="output directory (overrides [output] directory)")
        sp.add_argument("--threads", type=int, default=0,
                        help="worker threads, 0 = auto (runs are single-threaded)")
        sp.add_argument("--seed", type=int, default=None,
                        help="reserved; every algorithm is deterministic")
        sp.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 0:
        log.error("config error: --threads must be >= 0")
        return EXIT_CONFIG
    return run(args.config, args.out, args.scenario)


if __name__ == "__main__":
    sys.exit(main())
