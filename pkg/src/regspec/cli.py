"""Command-line interface: ``regspec <command> [options]``.

Exit codes: 0 success (all checks pass), 1 a check failed, 2 usage or
invalid parameters, 3 budget exceeded or a numerical routine failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import BudgetExceededError, ConvergenceError, InvalidParametersError, MeasureDegenerateError
from .graphs import acyclic_radii, adjacency_matrix, cycle_census, load_graph, sample_regular_graph, save_graph

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def _interval(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"interval must look like a,b (got {text!r})")
    if not a < b:
        raise argparse.ArgumentTypeError(f"empty interval ({a}, {b}]")
    return a, b


def _complex(text: str) -> complex:
    try:
        re, im = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"z must look like re,im (got {text!r})")
    return complex(re, im)


def _statements(text: str) -> tuple:
    vals = tuple(sorted({int(v) for v in text.split(",")}))
    if not set(vals) <= {1, 2, 3}:
        raise argparse.ArgumentTypeError("statements are a subset of 1,2,3")
    return vals


def _common(p: argparse.ArgumentParser, n=None, d=None) -> None:
    p.add_argument("--n", type=int, default=n, help="number of vertices")
    p.add_argument("--d", type=int, default=d, help="degree")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="write a JSON result here")
    p.add_argument("--csv", type=Path, help="write delimited output here")
    p.add_argument("--svg", type=Path, help="write a figure here (needs matplotlib)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regspec", description="Local spectral statistics of random regular graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a uniform random d-regular graph")
    _common(p, 1000, 3)
    p.add_argument("--max-restarts", type=int)

    p = sub.add_parser("spectrum", help="eigenvalues of A or A + V")
    _common(p, 1000, 3)
    p.add_argument("--graph", type=Path, help="load a graph saved by 'gen' instead of sampling")
    p.add_argument("--rho0", type=float, default=0.0, help="uniform potential on (-rho0, rho0); 0 for none")

    p = sub.add_parser("cycles", help="short-cycle census and tree-like fractions")
    _common(p, 1000, 3)
    p.add_argument("--graph", type=Path)
    p.add_argument("--kmax", type=int, default=6)

    p = sub.add_parser("quadrature-demo", help="Gauss rules and the Christoffel bound for a reference measure")
    p.add_argument("--measure", default="km", choices=["km", "rkm", "sc"])
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--M", type=int, default=8, help="rule uses the zeros of P_{M+1} + s P_M")
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--out", type=Path)
    p.add_argument("--csv", type=Path)
    p.add_argument("--svg", type=Path)

    p = sub.add_parser("green", help="tree Green function: closed form against the recursion")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--z", type=_complex, action="append", help="re,im (repeatable; default 0,1)")
    p.add_argument("--depth", type=int, default=20)
    p.add_argument("--rho0", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.add_argument("--csv", type=Path)

    p = sub.add_parser("density", help="smoothed density of states of the Anderson model on the tree")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--rho0", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--depth", type=int, default=14)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)
    p.add_argument("--csv", type=Path)
    p.add_argument("--svg", type=Path)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("experiment", choices=["adj", "grow", "esd", "green", "deloc", "cycles"])
    _common(p)
    p.add_argument("--trials", type=int, help="number of sampled graphs")
    p.add_argument("--potentials", type=int, help="potentials per graph")
    p.add_argument("--vertices", type=int, help="random vertices per potential (deloc)")
    p.add_argument("--eta", type=float)
    p.add_argument("--rho0", type=float)
    p.add_argument("--interval", type=_interval, action="append", help="a,b (repeatable)")
    p.add_argument("--C", type=float, help="constant in the bound (default: threshold x 1.01)")
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--kmax", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--d-grow", type=int)
    p.add_argument("--calibration-n", type=int)
    p.add_argument("--statements", type=_statements)
    p.add_argument("--pass-fraction", type=float)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--tree-extra-depth", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-restarts", type=int)
    return parser


def _graph(args):
    if getattr(args, "graph", None):
        return load_graph(args.graph)
    return sample_regular_graph(args.n, args.d, args.seed, max_restarts=getattr(args, "max_restarts", None))


def _write_json(path, obj) -> None:
    if path:
        path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def cmd_gen(args) -> int:
    g = _graph(args)
    print(f"n={g.n} d={g.d} seed={args.seed} attempts={g.attempts} edges={len(g.edges())}")
    if args.out:
        save_graph(g, args.out)
    if args.csv:
        args.csv.write_text("u,v\n" + "".join(f"{u},{v}\n" for u, v in g.edges()))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from .anderson import PotentialSpec, hamiltonian, sample_potential
    from .measures import kesten_mckay
    from .spectral import eig_sym, format_eigenvalues_csv

    g = _graph(args)
    if args.rho0 > 0:
        V = sample_potential(PotentialSpec.uniform(args.rho0), g.n, args.seed)
        dec = eig_sym(hamiltonian(g, V))
    else:
        dec = eig_sym(adjacency_matrix(g))
    lam = dec.eigenvalues
    w0 = 2 * math.sqrt(g.d - 1)
    print(f"n={g.n} d={g.d} rho0={args.rho0} min={lam[0]:.6f} max={lam[-1]:.6f} second={lam[-2]:.6f} "
          f"2sqrt(d-1)={w0:.6f}")
    if args.csv:
        args.csv.write_text(format_eigenvalues_csv(lam))
    _write_json(args.out, {"n": g.n, "d": g.d, "seed": args.seed, "rho0": args.rho0, "eigenvalues": lam.tolist()})
    if args.svg:
        from .plotting import render_values

        overlay = None
        if args.rho0 == 0:
            m = kesten_mckay(g.d)
            grid = m.grid(401)
            overlay = (grid, m.density(grid))
        render_values(lam, args.svg, density=overlay)
    return EXIT_OK


def cmd_cycles(args) -> int:
    g = _graph(args)
    census = cycle_census(g, args.kmax)
    radii = acyclic_radii(g, cap=args.kmax + 1)
    rows = []
    print("k,cycles,tree_like_fraction")
    for k in range(1, args.kmax + 1):
        frac = float(np.count_nonzero(radii >= k)) / g.n
        c = census[k] if k >= 3 else 0
        rows.append({"k": k, "cycles": c, "tree_like_fraction": frac})
        print(f"{k},{c},{frac:.6f}")
    if args.csv:
        args.csv.write_text("k,cycles,tree_like_fraction\n" + "".join(f"{r['k']},{r['cycles']},{r['tree_like_fraction']!r}\n" for r in rows))
    _write_json(args.out, {"n": g.n, "d": g.d, "seed": args.seed, "rows": rows})
    return EXIT_OK


def cmd_quadrature(args) -> int:
    from .measures import measure_from_name
    from .orthopoly import cms_bound, gauss_rule, recurrence_coefficients
    from .spectral import kolmogorov_distance

    m = measure_from_name(args.measure, args.d)
    rc = recurrence_coefficients(m, args.M + 1)
    rule = gauss_rule(rc, args.M, args.s)
    dist = kolmogorov_distance(rule.as_measure(), m.cdf)
    bound = cms_bound(m, args.M)
    print(f"measure={m.name} M={args.M} s={args.s} nodes={rule.nodes.size} weight_sum={rule.weights.sum():.15f}")
    print(f"kolmogorov_distance={dist:.6g} christoffel_bound={bound:.6g}")
    print("node,weight")
    for t, w in zip(rule.nodes, rule.weights):
        print(f"{t:.17g},{w:.17g}")
    if args.csv:
        args.csv.write_text("node,weight\n" + "".join(f"{t:.17g},{w:.17g}\n" for t, w in zip(rule.nodes, rule.weights)))
    _write_json(args.out, {"measure": m.name, "M": args.M, "s": args.s, "nodes": rule.nodes.tolist(),
                           "weights": rule.weights.tolist(), "kolmogorov_distance": dist, "bound": bound})
    if args.svg:
        from .plotting import render_values

        grid = m.grid(401)
        render_values(rule.nodes, args.svg, density=(grid, m.density(grid)))
    return EXIT_FAIL if dist > bound else EXIT_OK


def cmd_green(args) -> int:
    from .anderson import PotentialSpec, tree_green
    from .graphs import build_truncated_tree, derive_seed
    from .measures import gamma_tree, stieltjes_numeric, kesten_mckay

    zs = args.z or [1j]
    tree = build_truncated_tree(args.d, args.depth)
    V = None
    if args.rho0 > 0:
        V = PotentialSpec.uniform(args.rho0).draw(np.random.default_rng(derive_seed(args.seed, 0)), tree.num_vertices)
    rows = []
    print("re,im,closed_form_re,closed_form_im,recursion_re,recursion_im,quadrature_re,quadrature_im")
    for z in zs:
        if z.imag <= 0:
            raise InvalidParametersError("need Im z > 0")
        closed = complex(gamma_tree(z, args.d))
        rec = complex(tree_green(tree, V, z))
        quad = stieltjes_numeric(kesten_mckay(args.d), z)
        rows.append([z.real, z.imag, closed.real, closed.imag, rec.real, rec.imag, quad.real, quad.imag])
        print(",".join(f"{v:.12g}" for v in rows[-1]))
    if args.csv:
        args.csv.write_text("re,im,closed_form_re,closed_form_im,recursion_re,recursion_im,quadrature_re,quadrature_im\n"
                            + "".join(",".join(f"{v:.17g}" for v in r) + "\n" for r in rows))
    _write_json(args.out, {"d": args.d, "depth": args.depth, "rho0": args.rho0, "rows": rows})
    return EXIT_OK


def cmd_density(args) -> int:
    from .anderson import PotentialSpec, dos_mc

    spec = PotentialSpec.uniform(args.rho0) if args.rho0 > 0 else None
    w = 2 * math.sqrt(args.d - 1) + args.rho0
    lam = np.linspace(-w, w, args.points)
    est = dos_mc(args.d, spec, lam, args.eta, args.depth, args.trials, args.seed)
    print("lambda,density,stderr")
    lines = [f"{l:.17g},{v:.17g},{s:.17g}" for l, v, s in zip(est.lam, est.density, est.stderr)]
    print("\n".join(lines))
    if args.csv:
        args.csv.write_text("lambda,density,stderr\n" + "\n".join(lines) + "\n")
    _write_json(args.out, {"d": args.d, "rho0": args.rho0, "eta": args.eta, "depth": args.depth, "trials": est.trials,
                           "lambda": est.lam.tolist(), "density": est.density.tolist(), "stderr": est.stderr.tolist()})
    if args.svg:
        from .plotting import _pyplot

        plt = _pyplot()
        fig, ax = plt.subplots(figsize=(4, 2.8))
        ax.errorbar(est.lam, est.density, yerr=est.stderr, fmt=".-", ms=3)
        ax.set_xlabel(r"$\lambda$")
        fig.tight_layout()
        fig.savefig(args.svg, metadata={"Date": None} if str(args.svg).endswith(".svg") else None)
        plt.close(fig)
    return EXIT_OK


_VERIFY_FIELDS = ("n", "d", "seed", "trials", "potentials", "vertices", "eta", "rho0", "C", "eps", "delta", "kmax", "radius",
                  "d_grow", "calibration_n", "statements", "pass_fraction", "grid_points", "tree_extra_depth", "threads",
                  "max_restarts")


def cmd_verify(args) -> int:
    from .experiments import default_config, run_experiment

    overrides = {k: getattr(args, k) for k in _VERIFY_FIELDS}
    if args.interval:
        overrides["intervals"] = args.interval
    cfg = default_config(args.experiment, **overrides)
    report = run_experiment(cfg)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.statistic:.6g} {c.relation} {c.bound:.6g}")
    print(f"{'PASS' if report.passed else 'FAIL'} {args.experiment} ({report.wall_clock_seconds:.1f} s)")
    if args.out:
        args.out.write_text(report.to_json())
    if args.csv:
        args.csv.write_text(report.metrics_csv())
    if args.svg:
        from .plotting import render_report

        render_report(report, args.svg)
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {
    "gen": cmd_gen,
    "spectrum": cmd_spectrum,
    "cycles": cmd_cycles,
    "quadrature-demo": cmd_quadrature,
    "green": cmd_green,
    "density": cmd_density,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (BudgetExceededError, ConvergenceError, MeasureDegenerateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidParametersError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
