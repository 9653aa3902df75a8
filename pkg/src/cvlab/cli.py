"""``cvlab`` command-line interface.

Every command prints a CSV table (header row, ``'.17g'`` numbers) followed by
summary lines starting with ``#``. Exit status is 0 on success, 2 for
degenerate or invalid input and 1 when an internal consistency check or a
scenario expectation fails.
"""

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CvlabError
from .measurement import (
    disturbance_diagnostics,
    meter_post_state,
    meter_probabilities,
    naimark_dilate,
    povm,
)
from .scenario import load_scenario, parse_grid, parse_matrix, resolve_state, resolve_vector
from .weak import (
    LimitMismatchError,
    counterexample_sec9,
    counterexample_sec12,
    traditional_weak_value,
    weak_limit,
    weak_value_generalized,
)

COMMANDS = ("solve", "limit", "counterexample", "dilate", "diagnose", "check")


@dataclass
class Result:
    header: list
    rows: list
    summary: list = field(default_factory=list)
    quantities: dict = field(default_factory=dict)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _threads():
    try:
        return max(1, int(os.environ.get("CVLAB_THREADS", "1")))
    except ValueError:
        return 1


def _map(func, items):
    """Ordered map, threaded up to ``CVLAB_THREADS`` workers."""
    items = list(items)
    n = min(_threads(), len(items))
    if n <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))


def _state(sc, spec):
    if spec is not None:
        return resolve_state(spec, sc.dim, "--rho")
    if sc.state is None:
        raise CvlabError("no state: give --rho or set 'state' in the scenario")
    return sc.state


def _post(sc, spec):
    if spec is not None:
        return resolve_vector(spec, sc.dim, "--f")
    if sc.postselect is None:
        raise CvlabError("no postselection: give --f or set 'postselect' in the scenario")
    return sc.postselect


def _grid(sc, args):
    if getattr(args, "g", None) is not None:
        return [float(args.g)]
    if getattr(args, "grid", None):
        return parse_grid(args.grid)
    return sc.grid


def run_solve(sc, args):
    cvf = sc.cv_family(args.family)
    grid = _grid(sc, args)
    sols = _map(cvf.at, grid)
    n = cvf.family.n_outcomes
    rows = [[g, *s.alphas, s.residual, s.solvable] for g, s in zip(grid, sols)]
    q = {}
    if len(grid) == 1:
        q = {f"alpha_{j + 1}": sols[0].alphas[j] for j in range(n)}
        q.update(residual=sols[0].residual, solvable=float(sols[0].solvable))
    summary = [f"family = {cvf.family.label}, mode = {cvf.mode}, points = {len(grid)}",
               f"unsolvable points = {sum(not s.solvable for s in sols)}"]
    return Result(cvf.csv_header(), rows, summary, q)


def _limit_kwargs(sc, args):
    grid = sc.grid if not getattr(args, "grid", None) else parse_grid(args.grid)
    tol = args.tol if getattr(args, "tol", None) is not None else sc.tol("limit", 1e-9)
    return {"g0": max(grid), "tol": tol}


def run_limit(sc, args):
    cvf = sc.cv_family(args.family)
    rho, f = _state(sc, args.rho), _post(sc, args.f)
    kw = _limit_kwargs(sc, args)
    est = weak_limit(cvf.family, cvf, rho, f, g0=kw["g0"], tol=kw["tol"])
    eq7 = weak_value_generalized(sc.observable, rho, f)
    expected_den = float(np.trace(np.outer(f, f.conj()) @ rho).real)
    summary = [
        f"limit = {_fmt(est.value)}, error = {est.error_estimate:.3e}, converged = {_fmt(est.converged)}",
        f"denominator_limit = {_fmt(est.denominator.value)}, tr[P_f rho] = {_fmt(expected_den)}",
        f"eq7 = {_fmt(eq7)}",
    ]
    q = {"limit": est.value, "eq7": eq7, "denominator_limit": est.denominator.value}
    w = np.linalg.eigvalsh(rho)
    if abs(w[-1] - 1.0) < 1e-12:
        psi = np.linalg.eigh(rho)[1][:, -1]
        trad = traditional_weak_value(sc.observable, psi, f)
        summary.append(f"traditional = {_fmt(trad)}")
        q["traditional"] = trad
    return Result(est.csv_header(), list(est.csv_rows()), summary, q)


def run_counterexample(sc, args):
    kind = sc.counterexample.get("kind")
    rho, f = _state(sc, args.rho), _post(sc, args.f)
    kw = _limit_kwargs(sc, args)
    check_tol = sc.tol("check", 1e-5)
    if kind == "sec12":
        est, eq7, gap = counterexample_sec12(rho, f, g0=kw["g0"], tol=kw["tol"], check_tol=check_tol)
        numeric = est.value - eq7
        summary = [
            f"limit = {_fmt(est.value)}, error = {est.error_estimate:.3e}, converged = {_fmt(est.converged)}",
            f"eq7 = {_fmt(eq7)}",
            f"gap = {gap:.6f} (closed) / {numeric:.9f} (numeric)",
        ]
        q = {"limit": est.value, "eq7": eq7, "gap_closed": gap, "gap_numeric": numeric}
        return Result(est.csv_header(), list(est.csv_rows()), summary, q)
    if kind == "sec9":
        h = parse_matrix(sc.counterexample.get("twist", [[0, 1], [1, 0]]), sc.dim, "counterexample.twist")
        est, closed = counterexample_sec9(h, rho, f, g0=kw["g0"], tol=kw["tol"], check_tol=check_tol)
        summary = [
            f"converged = {_fmt(est.converged)}, error = {est.error_estimate:.3e}",
            f"gap = {closed:.6f} (closed) / {est.value:.9f} (numeric)",
        ]
        rows = [[g, v, e] for (g, v), e in zip(est.samples, est.extrapolants)]
        q = {"delta": est.value, "delta_closed": closed, "gap_closed": closed, "gap_numeric": est.value}
        return Result(["g", "delta", "extrapolant"], rows, summary, q)
    raise CvlabError(f"{sc.path}: [counterexample] kind must be 'sec9' or 'sec12', got {kind!r}")


def run_dilate(sc, args):
    fam = sc.family(args.family)
    g = float(args.g) if args.g is not None else max(sc.grid)
    rho = _state(sc, args.rho)
    nested = fam.at(g)
    dil = naimark_dilate(nested)
    meter = meter_probabilities(dil, rho)
    effects = povm(fam, g)
    rows, q = [], {}
    for j, ops in enumerate(nested):
        direct = np.trace(effects[j] @ rho).real
        post_direct = sum(m @ rho @ m.conj().T for m in ops)
        defect = np.linalg.norm(meter_post_state(dil, rho, j) - post_direct)
        rows.append([j + 1, direct, meter[j], defect])
        q[f"meter_probability_{j + 1}"] = meter[j]
        q[f"povm_probability_{j + 1}"] = direct
    iso = np.linalg.norm(dil.isometry.conj().T @ dil.isometry - np.eye(fam.dim))
    q["isometry_defect"] = iso
    summary = [f"g = {_fmt(g)}, meter_dim = {dil.meter_dim}", f"isometry_defect = {iso:.3e}"]
    return Result(["outcome", "povm_probability", "meter_probability", "post_state_defect"], rows, summary, q)


def run_diagnose(sc, args):
    fam = sc.family(args.family)
    rho = _state(sc, args.rho)
    grid = _grid(sc, args)
    rep = disturbance_diagnostics(fam, rho, grid)
    summary = [f"slope[{name}] = {_fmt(s)}" for name, s in rep.slopes.items()]
    summary.append(f"certified_weak = {_fmt(rep.certified_weak)}")
    summary.extend(rep.notes)
    q = {f"slope:{name}": s for name, s in rep.slopes.items()}
    q.update({f"max:{name}": float(np.nanmax(v)) for name, v in rep.metrics.items() if not np.all(np.isnan(v))})
    q["certified_weak"] = float(rep.certified_weak)
    return Result(["g", "metric", "value"], rep.rows(), summary, q)


RUNNERS = {
    "solve": run_solve,
    "limit": run_limit,
    "counterexample": run_counterexample,
    "dilate": run_dilate,
    "diagnose": run_diagnose,
}


def _expectation_args(exp):
    # expectations run on the scenario's own settings, never on command-line overrides
    return argparse.Namespace(**{k: exp.get(k) for k in ("g", "rho", "f", "family", "grid", "tol")})


def check_expectations(sc, command=None, cache=None):
    """Evaluate the scenario's ``[[expect]]`` entries; returns ``(lines, all_passed)``."""
    lines, ok = [], True
    cache = {} if cache is None else cache
    for exp in sc.expectations:
        if command is not None and exp["command"] != command:
            continue
        ns = _expectation_args(exp)
        key = (exp["command"], *(repr(getattr(ns, k, None)) for k in ("g", "rho", "f", "family", "grid", "tol")))
        if key not in cache:
            cache[key] = RUNNERS[exp["command"]](sc, ns)
        got = cache[key].quantities.get(exp["quantity"])
        tol = float(exp.get("tol", 1e-9))
        want = float(exp["value"])
        passed = got is not None and abs(got - want) <= tol
        ok &= passed
        shown = "missing" if got is None else _fmt(got)
        lines.append(f"expect {exp['command']}:{exp['quantity']} = {shown} "
                     f"(want {_fmt(want)} +- {tol:g}): {'PASS' if passed else 'FAIL'}")
    return lines, ok


def write_result(res, stream):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(res.header)
    for row in res.rows:
        writer.writerow([_fmt(x) for x in row])
    for line in res.summary:
        buf.write(f"# {line}\n")
    stream.write(buf.getvalue())


def build_parser():
    p = argparse.ArgumentParser(prog="cvlab", description="Contextual values, conditioned averages and weak limits.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("scenario", help="scenario TOML file or bundled name (pryde, sec9, sec12)")
        sp.add_argument("--g", type=float, help="single g value")
        sp.add_argument("--rho", help="state: plus, plus_i, minus, e1.., mixed, 'a,b' vector or 'a,b;c,d' matrix")
        sp.add_argument("--f", help="postselection vector: name or 'a,b' (normalized)")
        sp.add_argument("--tol", type=float, help="extrapolation tolerance")
        sp.add_argument("--out", help="write CSV here instead of standard output")
        sp.add_argument("--grid", help="g grid as g0:ratio:n")
        sp.add_argument("--family", help="family name (default: the scenario's 'family')")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
        if args.command == "check":
            lines, ok = check_expectations(sc)
            res = Result(["scenario", "expectations", "passed"], [[sc.name, len(lines), ok]], lines)
        else:
            res = RUNNERS[args.command](sc, args)
            lines, ok = check_expectations(sc, args.command)
            res.summary.extend(lines)
    except (LimitMismatchError, AssertionError) as exc:
        print(f"cvlab: internal check failed: {exc}", file=sys.stderr)
        return 1
    except CvlabError as exc:
        print(f"cvlab: {exc}", file=sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_result(res, fh)
    else:
        write_result(res, sys.stdout)
    if not ok:
        print("cvlab: expectation failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
