"""Command-line runner for the verification suites.

Exit status: 0 all checks pass, 1 a check failed, 2 bad configuration or
arguments, 3 an enumeration budget was exceeded.
"""
import argparse
import contextlib
import dataclasses
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import diagrams as dg
from . import expansion as ex
from . import greens as gr
from . import switching as sw
from .lattice import (BudgetExceeded, CATALOG, get_budget, list_catalog, random_mixed_couplings,
                      resolve_graph)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

DEFAULT_P = [0.2, 0.5, 1.0]


class ConfigError(ValueError):
    pass


def _graphs(refs):
    out = []
    for ref in refs or list(CATALOG):
        try:
            out.append(resolve_graph(ref))
        except (KeyError, ValueError, OSError) as exc:
            raise ConfigError(f"graph reference {ref!r}: {exc}") from exc
    return out


def _f(x):
    """JSON-safe float: non-finite values become strings."""
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


# suites: each takes a parameter dict and returns (report dict, passed)

def suite_verify_lace(params):
    tol = params.get("tolerance", 1e-9)
    orders = params.get("orders", [0, 1, 2])
    n_random = params.get("random_couplings", 0)
    rng = np.random.default_rng(params.get("seed", 0))
    checks = []
    params["_graphs"] = _graphs(params.get("graphs"))
    for g in params["_graphs"]:
        variants = [("ferro", g)]
        if n_random:
            variants += [(f"mixed-{i}", random_mixed_couplings(g, rng)) for i in range(n_random)]
        for label, gv in variants:
            for p in params.get("p", DEFAULT_P):
                for j in orders:
                    rep = ex.verify_lace_identity(gv, p, j, tol)
                    checks.append({"graph": g.name, "couplings": label, "p": p, "j": j,
                                   "residual_max": rep.residual_max, "scale": rep.scale,
                                   "margins": rep.margins, "pass": rep.passed})
    ok = all(c["pass"] for c in checks)
    worst = max((c["residual_max"] / c["scale"] for c in checks), default=0.0)
    return {"checks": checks, "relative_residual_max": worst}, ok


def suite_verify_through(params):
    tol = params.get("tolerance", 1e-9)
    mono_tol = params.get("monotonicity_tolerance", 1e-12)
    max_A = params.get("max_A", 2)
    checks = []
    params["_graphs"] = _graphs(params.get("graphs", ["triangle", "square"]))
    for g in params["_graphs"]:
        for p in params.get("p", DEFAULT_P):
            eng = ex.engine(g, p)
            res, mono = 0.0, math.inf
            count = 0
            for A in range(2 ** g.n_sites):
                if bin(A).count("1") > max_A:
                    continue
                GA = eng.restricted_G(g.full_mask & ~A)
                for v in range(g.n_sites):
                    for x in range(g.n_sites):
                        res = max(res, abs(ex.verify_through_identity(g, p, A, v, x)))
                        mono = min(mono, float(eng.G[v, x] - GA[v, x]))
                        count += 1
            ok = res <= tol and (not g.ferromagnetic or mono >= -mono_tol)
            checks.append({"graph": g.name, "p": p, "cases": count, "residual_max": res,
                           "monotonicity_margin": _f(mono), "pass": ok})
    return {"checks": checks}, all(c["pass"] for c in checks)


def suite_verify_bounds(params):
    tol = params.get("tolerance", 1e-9)
    ferro_tol = params.get("ferro_tolerance", 1e-12)
    orders = params.get("orders", [0, 1, 2])
    diag_orders = params.get("diagram_orders", [0, 1])
    aux = params.get("aux", False)
    checks = []
    params["_graphs"] = _graphs(params.get("graphs"))
    for g in params["_graphs"]:
        for p in params.get("p", [0.2, 0.5]):
            entry = {"graph": g.name, "p": p}
            ferro = {str(j): ex.ferromagnetic_bounds(g, p, j) for j in orders}
            entry["ferromagnetic"] = ferro
            ok = all(v >= -ferro_tol for m in ferro.values() for v in m.values())
            try:
                kit = dg.DiagramKit(g, p)
                entry["psi"] = "finite"
                entry["series_converged"] = bool(kit.converged)
            except dg.PsiDivergent:
                kit = None
                entry["psi"] = "divergent"
            diag = {}
            for j in diag_orders:
                m = float(np.min(dg.verify_diagrammatic_bounds(g, p, j)))
                diag[str(j)] = _f(m)
                ok = ok and m >= -tol
            entry["diagram_margins"] = diag
            if aux:
                worst = dg.aux_bound_sweep(g, p, params.get("aux_max_A"))
                entry["aux_margins"] = {k: _f(v) for k, v in sorted(worst.items())}
                ok = ok and all(v >= -tol for v in worst.values())
            entry["pass"] = bool(ok)
            checks.append(entry)
    return {"checks": checks}, all(c["pass"] for c in checks)


def suite_verify_switching(params):
    rng = np.random.default_rng(params.get("seed", 0))
    n = params.get("instances", 50)
    ks = params.get("k", [1, 2])
    reading = params.get("reading", "joint")
    max_total = params.get("max_total", 10)
    mc = sw.path_instance()
    path = sw.count_switching_sides(mc, 0, 0, len(mc.N))
    closed = (sw.closed_parity_count(mc, (1 << 0) | (1 << len(mc.N))), sw.closed_parity_count(mc, 0))
    report = {"path_instance": {"N": list(mc.N), "brute_force": list(path), "closed": list(closed)}}
    ok = path[0] == path[1] == closed[0] == closed[1]
    mism = []
    for i in range(n):
        m, A, v, x = sw.random_switching_instance(rng, max_total=max_total)
        lhs, rhs = sw.count_switching_sides(m, A, v, x)
        if lhs != rhs:
            mism.append({"bonds": [list(b) for b in m.graph.bonds], "N": list(m.N), "A": A,
                         "v": v, "x": x, "counts": [lhs, rhs]})
    report["switching"] = {"instances": n, "mismatches": mism}
    ok = ok and not mism
    report["ghs_bk"] = {}
    for k in ks:
        count = params.get("ghs_instances", {}).get(str(k), n)
        bad = []
        nontrivial = 0
        for _ in range(count):
            m, V, pairs = sw.random_ghs_bk_instance(rng, k, max_total=max_total)
            lhs, rhs = sw.verify_ghs_bk(m, V, pairs, reading=reading)
            nontrivial += lhs > 0 or rhs > 0
            if lhs != rhs:
                bad.append({"bonds": [list(b) for b in m.graph.bonds], "N": list(m.N), "V": V,
                            "pairs": [list(q) for q in pairs], "counts": [lhs, rhs]})
        report["ghs_bk"][str(k)] = {"instances": count, "nontrivial": nontrivial,
                                    "reading": reading, "mismatches": bad}
        ok = ok and not bad
    return report, bool(ok)


def suite_greens(params):
    d, M, r = params.get("d", 5), params.get("side", 33), params.get("r", 1.0)
    kind, L = params.get("kind", "nn"), params.get("L", 1)
    rows = gr.green_profile(d, M, r, kind, L)
    report = {"d": d, "side": M, "r": r,
              "rows": [{"x": k, "S": _f(s), "predicted": _f(pr), "ratio": _f(q)} for k, s, pr, q in rows]}
    ok = True
    if r == 1 and d > 2 and "window" in params:
        dev = gr.check_green_asymptotics(d, M, 1.0, tuple(params["window"]), kind, L)
        report["window"] = params["window"]
        report["deviation"] = dev
        ok = dev <= params.get("tolerance", 0.15)
    elif r < 1:
        D = gr.torus_step(d, M, kind, L)
        S = gr.green_function(D, r)
        report["fixed_point_residual"] = gr.fixed_point_residual(S, D, r)
        report["sum_error"] = abs(float(S.sum()) - 1.0 / (1.0 - r))
        ok = report["fixed_point_residual"] <= 1e-11
    return report, bool(ok)


def suite_check_conv(params):
    d = params["d"]
    growth_max = params.get("growth_max", 1.05)
    if "q" in params:
        sizes = params.get("sizes", [16, 32])
        sups, growth = gr.star_growth(d, params["q"], sizes, params.get("seed", 0))
        kind = "star"
    else:
        sizes = params.get("sizes", [64, 128] if d == 1 else [32, 64])
        sups, growth = gr.conv_growth(d, params["a"], params["b"], sizes)
        kind = "conv"
    report = {"kind": kind, "d": d, "sup_ratio": {str(k): v for k, v in sups.items()},
              "growth": growth}
    return report, bool(growth <= growth_max)


SUITES = {
    "verify-lace": suite_verify_lace,
    "verify-through": suite_verify_through,
    "verify-bounds": suite_verify_bounds,
    "verify-switching": suite_verify_switching,
    "greens": suite_greens,
    "check-conv": suite_check_conv,
}


@contextlib.contextmanager
def _budget_env(budgets):
    old = os.environ.get("LACELAB_BUDGET")
    if budgets:
        os.environ["LACELAB_BUDGET"] = json.dumps(budgets)
    try:
        yield
    finally:
        if budgets:
            if old is None:
                os.environ.pop("LACELAB_BUDGET", None)
            else:
                os.environ["LACELAB_BUDGET"] = old


def _budget_usage(params):
    """Configured caps plus the sweep sizes of the graphs a suite touched."""
    usage = {"caps": dataclasses.asdict(get_budget())}
    if params.get("_graphs"):
        usage["graphs"] = {g.name: {"single_states": 3 ** g.n_bonds, "pair_states": 9 ** g.n_bonds}
                           for g in params["_graphs"]}
    return usage


def _run_suite(spec):
    """Worker entry: returns (report, passed, seconds, error kind, message)."""
    name = spec["name"]
    params = {k: v for k, v in spec.items() if k not in ("name", "budgets")}
    t0 = time.perf_counter()
    try:
        with _budget_env(spec.get("budgets")):
            report, ok = SUITES[name](params)
            report["budget"] = _budget_usage(params)
        return report, ok, time.perf_counter() - t0, None, ""
    except BudgetExceeded as exc:
        return None, False, time.perf_counter() - t0, "budget", str(exc)
    except ConfigError as exc:
        return None, False, time.perf_counter() - t0, "config", str(exc)
    except (KeyError, TypeError, ValueError) as exc:
        return None, False, time.perf_counter() - t0, "config", f"{name}: {exc!r}"


def validate_config(cfg):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    suites = cfg.get("suites")
    if not isinstance(suites, list):
        raise ConfigError("config needs a 'suites' list")
    for i, s in enumerate(suites):
        if not isinstance(s, dict) or s.get("name") not in SUITES:
            raise ConfigError(f"suite {i}: unknown or missing name {s.get('name') if isinstance(s, dict) else s!r}")
        for ref in s.get("graphs", []) or []:
            _graphs([ref])
        for key, val in s.items():
            if "tolerance" in key and not (isinstance(val, (int, float)) and val > 0):
                raise ConfigError(f"suite {i}: {key} must be positive")
    out = cfg.get("output", {})
    if out.get("format", "json") not in ("json", "csv"):
        raise ConfigError("output.format must be json or csv")
    workers = cfg.get("parallelism", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("parallelism must be a positive integer")
    return cfg


def dumps(report):
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _csv_rows(report):
    rows = report.get("checks") or report.get("rows") or []
    flat = []
    for r in rows:
        row = {}
        for k, v in r.items():
            if isinstance(v, dict):
                for k2, v2 in v.items():
                    row[f"{k}.{k2}"] = json.dumps(v2, sort_keys=True) if isinstance(v2, dict) else v2
            else:
                row[k] = v
        flat.append(row)
    return flat


def write_report(path, report, fmt):
    if fmt == "csv":
        rows = _csv_rows(report)
        cols = sorted({k for r in rows for k in r})
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        text = buf.getvalue()
    else:
        text = dumps(report)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run(cfg, out_dir=None):
    """Execute a config; returns the exit status.

    One report per suite goes to <dir>/<index>-<name>.<fmt>; wall-clock
    timings go to a separate timings.json so the reports themselves are
    reproducible byte for byte.
    """
    validate_config(cfg)
    out = cfg.get("output", {})
    fmt = out.get("format", "json")
    out_dir = out_dir or out.get("path", "reports")
    os.makedirs(out_dir, exist_ok=True)
    suites = cfg["suites"]
    workers = cfg.get("parallelism", 1)
    if workers > 1 and len(suites) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_suite, suites))
    else:
        results = [_run_suite(s) for s in suites]
    status = EXIT_OK
    timings = []
    summary = []
    for i, (spec, (report, ok, secs, err, msg)) in enumerate(zip(suites, results)):
        name = spec["name"]
        timings.append({"suite": name, "index": i, "seconds": secs})
        if err:
            print(f"{name}: {msg}", file=sys.stderr)
            code = EXIT_BUDGET if err == "budget" else EXIT_CONFIG
            status = max(status, code)
            summary.append({"suite": name, "index": i, "status": err})
            continue
        body = {"suite": name, "config": spec, "pass": ok, "report": report}
        write_report(os.path.join(out_dir, f"{i:02d}-{name}.{fmt}"), body if fmt == "json" else report, fmt)
        summary.append({"suite": name, "index": i, "status": "pass" if ok else "fail"})
        if not ok:
            status = max(status, EXIT_FAIL)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        fh.write(dumps({"suites": summary}))
    with open(os.path.join(out_dir, "timings.json"), "w", encoding="utf-8") as fh:
        fh.write(dumps({"timings": timings}))
    return status


def _emit(report, ok, out):
    text = dumps({"pass": ok, "report": report})
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


def _direct(suite, params, out):
    report, ok, _, err, msg = _run_suite(dict(params, name=suite))
    if err:
        print(msg, file=sys.stderr)
        return EXIT_BUDGET if err == "budget" else EXIT_CONFIG
    return _emit(report, ok, out)


def build_parser():
    ap = argparse.ArgumentParser(prog="lacelab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(sp, p_default):
        sp.add_argument("--graph", action="append", dest="graphs", help="catalog name or JSON file (repeatable)")
        sp.add_argument("--p", type=float, action="append", help=f"inverse temperature (repeatable, default {p_default})")
        sp.add_argument("--tolerance", type=float, default=1e-9)
        sp.add_argument("--out", help="write the JSON report here instead of stdout")

    sp = sub.add_parser("verify-lace", help="lace identity residuals")
    common(sp, DEFAULT_P)
    sp.add_argument("--orders", type=int, nargs="+", default=[0, 1, 2])
    sp.add_argument("--random-couplings", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("verify-through", help="through-A identity and monotonicity")
    common(sp, DEFAULT_P)
    sp.add_argument("--max-A", type=int, default=2)

    sp = sub.add_parser("verify-bounds", help="ferromagnetic and diagrammatic bounds")
    common(sp, [0.2, 0.5])
    sp.add_argument("--orders", type=int, nargs="+", default=[0, 1, 2])
    sp.add_argument("--diagram-orders", type=int, nargs="+", default=[0, 1])
    sp.add_argument("--aux", action="store_true", help="also sweep the auxiliary inequalities")

    sp = sub.add_parser("verify-switching", help="switching lemma and GHS-BK counts")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--instances", type=int, default=50)
    sp.add_argument("--k", type=int, nargs="+", default=[1, 2])
    sp.add_argument("--reading", choices=sw.READINGS, default="joint")
    sp.add_argument("--out")

    sp = sub.add_parser("greens", help="random-walk Green's function along an axis (CSV)")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--side", type=int, required=True)
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--kind", choices=["nn", "spread-out"], default="nn")
    sp.add_argument("--L", type=int, default=1)
    sp.add_argument("--out")

    sp = sub.add_parser("check-conv", help="convolution / star bound stability")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--a", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--q", type=float, help="run the star check with exponent q instead")
    sp.add_argument("--sizes", type=int, nargs="+")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")

    sp = sub.add_parser("catalog", help="list built-in graphs")
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("run", help="run suites from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


def _dispatch(args):
    cmd = args.cmd
    if cmd == "catalog":
        entries = list_catalog()
        if args.json:
            sys.stdout.write(dumps(entries))
        else:
            print(f"{'name':<12} {'sites':>5} {'bonds':>5} {'single 3^B':>11} {'pair 9^B':>10}")
            for e in entries:
                print(f"{e['name']:<12} {e['sites']:>5} {e['bonds']:>5} {e['single_states']:>11} {e['pair_states']:>10}")
        return EXIT_OK
    if cmd == "run":
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from exc
        return run(cfg, args.out_dir)
    if cmd == "greens":
        try:
            rows = gr.green_profile(args.d, args.side, args.r, args.kind, args.L)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        fh = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "S_r(x)", "predicted", "ratio"])
        for k, s, pr, q in rows:
            w.writerow([k, repr(s), repr(pr), repr(q)])
        if args.out:
            fh.close()
        return EXIT_OK
    if cmd == "check-conv":
        params = {"d": args.d, "seed": args.seed}
        if args.q is not None:
            params["q"] = args.q
        elif args.a is None or args.b is None:
            raise ConfigError("check-conv needs --a and --b, or --q")
        else:
            params.update(a=args.a, b=args.b)
        if args.sizes:
            params["sizes"] = args.sizes
        return _direct("check-conv", params, args.out)
    if cmd == "verify-switching":
        params = {"seed": args.seed, "instances": args.instances, "k": args.k, "reading": args.reading}
        return _direct("verify-switching", params, args.out)
    params = {"tolerance": args.tolerance}
    if args.graphs:
        params["graphs"] = args.graphs
    if args.p:
        params["p"] = args.p
    if cmd == "verify-lace":
        params.update(orders=args.orders, random_couplings=args.random_couplings, seed=args.seed)
    elif cmd == "verify-through":
        params["max_A"] = args.max_A
    elif cmd == "verify-bounds":
        params.update(orders=args.orders, diagram_orders=args.diagram_orders, aux=args.aux)
    return _direct(cmd, params, args.out)


if __name__ == "__main__":
    sys.exit(main())
