"""Command-line entry points.

Every command writes plain text (CSV with ``;`` separators or JSON) to stdout
or to ``--out``.  Numbers in CSV output carry 17 significant digits so that
repeated invocations are byte-identical.  Exit codes: 0 success, 2 config or
argument error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import driver, fem1d
from .allocate import allocate, derive_rates, exponents
from .config import ConfigError, RunConfig, load_config
from .gausscube import (
    bound_constants,
    c_diamond,
    constant_C1,
    constant_M,
    constant_M_bound,
    make_cubature,
    integrate,
)
from .gf2lattice import cbc_bound, cbc_construct, quality_E, rule_from_text, rule_to_text
from .mdm import build_active_set, superposition_stats

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _g(x: float) -> str:
    return f"{x:.17g}"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _finite(obj):
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return str(float(obj))
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _json(obj) -> str:
    """Strict JSON; non-finite floats become the strings ``inf``/``nan``."""
    return json.dumps(_finite(obj), indent=2, sort_keys=True) + "\n"


def fitted_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``; nan with fewer than two usable points."""
    pts = [(math.log(a), math.log(b)) for a, b in zip(x, y) if a > 0 and b > 0]
    if len(pts) < 2:
        return float("nan")
    lx, ly = map(np.array, zip(*pts))
    return float(np.polyfit(lx, ly, 1)[0])


def lambda_grid(alpha: int, count: int = 8) -> np.ndarray:
    return np.linspace(1.0, alpha - 0.01, count)


# ---------------------------------------------------------------- commands


def cmd_cbc(args) -> int:
    rule = cbc_construct(args.m, args.s, args.alpha, method=args.method)
    text = rule_to_text(rule)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    E = quality_E(rule.lattice, rule.alpha)
    lines = ["lambda;E_d;bound;ok"]
    for lam in lambda_grid(rule.alpha):
        b = cbc_bound(rule.m, rule.lattice.d, rule.alpha, float(lam))
        lines.append(f"{_g(lam)};{_g(E)};{_g(b)};{int(E <= b)}")
    report = "\n".join(lines) + "\n"
    if args.out:
        sys.stdout.write(report)
    else:
        sys.stdout.write(text + report)
    return EXIT_OK


def _load_rule(args):
    if args.rule:
        return rule_from_text(Path(args.rule).read_text(encoding="utf-8"))
    if args.m is None or args.s is None:
        raise ValueError("give --rule or both --m and --s")
    return cbc_construct(args.m, args.s, args.alpha)


def cmd_points(args) -> int:
    rule = _load_rule(args)
    s = rule.s
    if args.lam is None:
        cols = [f"y{j + 1}" for j in range(s)]
        rows = rule.points()
    else:
        from .gausscube import GaussCubature, truncation_T

        c = GaussCubature(rule, args.lam, truncation_T(rule.n, args.lam))
        z = c.nodes()
        cols = [f"z{j + 1}" for j in range(s)] + ["weight"]
        rows = np.column_stack([z, c.weights(z)])
    lines = [";".join(cols)] + [";".join(_g(v) for v in row) for row in rows]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_kernel_constants(args) -> int:
    alphas = range(1, args.max_alpha + 1)
    M = {a: constant_M(a) for a in alphas}
    report = {
        "M": {str(a): M[a] for a in alphas},
        "M_bound": {str(a): constant_M_bound(a) for a in alphas},
        "M_argmax": max(M, key=M.get),
        "M_all_below_2.767": all(v < 2.767 for v in M.values()),
        "C1_I0_half": {str(a): constant_C1(a, 0.5) for a in alphas},
        "C1_I0_quarter": {str(a): constant_C1(a, 0.25) for a in alphas},
        "C_diamond": {str(a): dict(zip(("value", "bound"), c_diamond(a))) for a in alphas},
    }
    if args.alpha is not None:
        bc = bound_constants(args.alpha, args.lam, args.s)
        report["bound_constants"] = {
            "alpha": args.alpha, "lambda": args.lam, "s": args.s, **bc.__dict__,
        }
    _emit(_json(report), args.out)
    return EXIT_OK


def cubature_errors(s: int, alpha: int, lam: float, m_values: Sequence[int], c: float = 0.5):
    """Rows ``(n, T, Q, exact, err)`` for the integrand ``prod_j (exp(c y_j) - 1)``."""
    exact = math.expm1(c * c / 2.0) ** s
    rows = []
    for m in m_values:
        cub = make_cubature(m, s, alpha, lam)
        q = integrate(cub, lambda z: np.prod(np.expm1(c * z), axis=1))
        rows.append((cub.n, cub.T, q, exact, abs(q - exact)))
    return rows


def cmd_cubature_test(args) -> int:
    rows = cubature_errors(args.s, args.alpha, args.lam, range(args.m_min, args.m_max + 1))
    lines = ["n;T;result;exact;abs_err"]
    lines += [";".join([str(r[0])] + [_g(v) for v in r[1:]]) for r in rows]
    lines.append(f"slope;;;;{_g(-fitted_slope([r[0] for r in rows], [r[4] for r in rows]))}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def fem_errors(r: int, levels: Sequence[int]):
    """Rows ``(h, L2 error, functional error)`` for ``u = sin(pi x)`` with ``a = 1``."""
    prob = fem1d.FemProblem(
        lambda x: np.ones_like(x),
        lambda x: math.pi**2 * np.sin(math.pi * x),
        lambda x: np.ones_like(x),
    )
    rows = []
    for k in levels:
        mesh = fem1d.Mesh(1 << k, r)
        sol = fem1d.assemble_solve(prob, mesh)
        l2 = fem1d.l2_error(sol, mesh, lambda x: np.sin(math.pi * x))
        gerr = abs(fem1d.apply_G(prob, sol, mesh) - 2.0 / math.pi)
        rows.append((mesh.h, l2, gerr))
    return rows


def cmd_fem_test(args) -> int:
    rows = fem_errors(args.r, range(args.level_min, args.level_max + 1))
    inv_h = [1.0 / r[0] for r in rows]
    lines = ["h;L2_error;G_error"] + [";".join(_g(v) for v in r) for r in rows]
    lines.append(f"slope;{_g(-fitted_slope(inv_h, [r[1] for r in rows]))};"
                 f"{_g(-fitted_slope(inv_h, [r[2] for r in rows]))}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _resolve_c(cfg: RunConfig, problem) -> float:
    if cfg.rates.c == "calibrate":
        return driver.calibrate_c(problem).c
    return float(cfg.rates.c)


def _epsilons(cfg: RunConfig, args) -> list[float]:
    if getattr(args, "epsilon", None) is not None:
        return [args.epsilon]
    return list(cfg.experiment.epsilons)


def cmd_active_set(args) -> int:
    cfg = load_config(args.config)
    problem = cfg.problem()
    rates = derive_rates(problem.pstar, problem.tau, problem.dprime)
    w = problem.weights(constant_M(rates.alpha))
    aset = build_active_set(w, _epsilons(cfg, args)[0], problem.pstar)
    _emit(aset.to_csv(), args.out)
    return EXIT_OK


def cmd_allocate(args) -> int:
    cfg = load_config(args.config)
    problem = cfg.problem()
    rates = derive_rates(problem.pstar, problem.tau, problem.dprime)
    w = problem.weights(constant_M(rates.alpha))
    eps = _epsilons(cfg, args)[0]
    aset = build_active_set(w, eps, problem.pstar)
    alloc = allocate(rates, aset, eps, cfg.rates.constants_mode, _resolve_c(cfg, problem))
    _emit(alloc.to_csv(), args.out)
    return EXIT_OK


def _summary(run: driver.MdfemRun, timing: bool) -> dict:
    out = run.summary()
    if not timing:
        out["wall_ms"] = 0.0
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    problem = cfg.problem()
    c = _resolve_c(cfg, problem)
    res = driver.run(problem, _epsilons(cfg, args)[0], cfg.rates.constants_mode, c, strict=args.strict)
    summary = {"c": c, **_summary(res, not args.no_timing)}
    if args.out:
        Path(args.out).write_text(res.to_csv(), encoding="utf-8")
        sys.stdout.write(_json(summary))
    else:
        sys.stdout.write(_json(summary) + res.to_csv())
    return EXIT_OK


def convergence_table(cfg: RunConfig, epsilons: Sequence[float], timing: bool = True) -> tuple[str, dict]:
    """CSV rows for an epsilon sweep plus a summary row of fitted slopes."""
    problem = cfg.problem()
    ex = cfg.experiment
    ref = driver.reference(problem, ex.s_ref, ex.n_ref, ex.h_ref, ex.ref_method,
                           orders=ex.gh_orders if ex.ref_method == "gauss-hermite" else None)
    c = _resolve_c(cfg, problem)
    lines = ["epsilon;result;ref;abs_err;model_cost;n_sets;max_card;wall_ms"]
    eps_l, err_l, cost_l = [], [], []
    for eps in epsilons:
        res = driver.run(problem, eps, cfg.rates.constants_mode, c)
        err = abs(res.result - ref)
        wall = res.wall_ms if timing else 0.0
        st = superposition_stats(res.aset)
        lines.append(";".join([_g(eps), _g(res.result), _g(ref), _g(err), _g(res.model_cost),
                               str(st.count), str(st.max_cardinality), _g(wall)]))
        eps_l.append(eps)
        err_l.append(err)
        cost_l.append(res.model_cost)
    inv = [1.0 / e for e in eps_l]
    slopes = {"err_slope": fitted_slope(inv, err_l), "cost_slope": fitted_slope(inv, cost_l)}
    lines.append(f"slope;;;{_g(slopes['err_slope'])};{_g(slopes['cost_slope'])};;;")
    return "\n".join(lines) + "\n", {"c": c, "reference": ref, **slopes}


def cmd_convergence(args) -> int:
    cfg = load_config(args.config)
    text, _ = convergence_table(cfg, _epsilons(cfg, args), timing=not args.no_timing)
    _emit(text, args.out)
    return EXIT_OK


def cmd_exponents(args) -> int:
    ex = exponents(args.pstar, args.tau, args.dprime)
    lines = ["a_MDFEM;a_QMCFEM;higher_order;qmcfem_low_branch",
             f"{_g(ex.a_MDFEM)};{_g(ex.a_QMCFEM)};{int(ex.higher_order)};{int(ex.qmcfem_low_branch)}"]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_default_config(args) -> int:
    _emit(RunConfig().to_ini(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mdfem", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, allow_abbrev=False)
        sp.set_defaults(func=func)
        sp.add_argument("--out", help="output file (default stdout)")
        return sp

    sp = add("cbc", cmd_cbc, "construct an interlaced polynomial lattice rule")
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--s", type=int, required=True)
    sp.add_argument("--alpha", type=int, default=2)
    sp.add_argument("--method", choices=("fast", "direct"), default="fast")

    sp = add("points", cmd_points, "dump a point set, optionally mapped to [-T, T]^s")
    sp.add_argument("--rule", help="rule file written by 'cbc'")
    sp.add_argument("--m", type=int)
    sp.add_argument("--s", type=int)
    sp.add_argument("--alpha", type=int, default=2)
    sp.add_argument("--lambda", dest="lam", type=float)

    sp = add("kernel-constants", cmd_kernel_constants, "JSON report of kernel and bound constants")
    sp.add_argument("--max-alpha", type=int, default=6)
    sp.add_argument("--alpha", type=int)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--s", type=int, default=1)

    sp = add("cubature-test", cmd_cubature_test, "error of the Gaussian cubature on prod(exp(y/2)-1)")
    sp.add_argument("--s", type=int, default=1)
    sp.add_argument("--alpha", type=int, default=2)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--m-min", type=int, default=6)
    sp.add_argument("--m-max", type=int, default=14)

    sp = add("fem-test", cmd_fem_test, "finite element errors for a manufactured solution")
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--level-min", type=int, default=3)
    sp.add_argument("--level-max", type=int, default=9)

    for name, func, help_ in (
        ("active-set", cmd_active_set, "dump the active set for one epsilon"),
        ("allocate", cmd_allocate, "dump the allocation for one epsilon"),
        ("run", cmd_run, "run MDFEM for one epsilon"),
        ("convergence", cmd_convergence, "epsilon sweep against a reference value"),
    ):
        sp = add(name, func, help_)
        sp.add_argument("--config", required=True)
        sp.add_argument("--epsilon", type=float, help="override the first epsilon of the config")
        if name in ("run", "convergence"):
            sp.add_argument("--no-timing", action="store_true", help="write wall_ms as 0")
        if name == "run":
            sp.add_argument("--strict", action="store_true", help="require certified admissibility")

    sp = add("exponents", cmd_exponents, "cost exponents of MDFEM and QMCFEM")
    sp.add_argument("--pstar", type=float, required=True)
    sp.add_argument("--tau", type=float, default=2.0)
    sp.add_argument("--dprime", type=float, default=1.0)

    add("default-config", cmd_default_config, "print the default configuration")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
