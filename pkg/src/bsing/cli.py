"""Scenario runner: ``bsing run --scenario s.json [--set k=v]... [--out DIR]``.

A scenario is one JSON object::

    {"command": "verify-bound",
     "surface": {...} | {"model": "sphere_equator", "order": 1},
     "hamiltonian": {...},          # optional for most commands
     "options": {...}, "seed": 0}

Exit codes: 0 success, 2 invalid input, 3 a verification failed.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import BSurface, DomainError, ValidationError, build_graph
from .graph import (GraphError, arnold_bound_surface, check_good_orientation, edge_two_color,
                    good_orientation, is_acyclic, odd_closed_walk, two_color)
from .hamiltonian import AdmissibleHamiltonian, admissibility_report
from .trigpoly import TrigPoly

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 2, 3
COMMANDS = ("analyze-graph", "check-admissible", "find-orbits", "desingularize", "verify-bound",
            "construct-optimal", "floer-residual", "singularize")


class VerificationFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# scenario handling
# ---------------------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(scenario: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` assignments; values are read as JSON when possible."""
    out = copy.deepcopy(scenario)
    for item in overrides or ():
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ValidationError(f"override {item!r} has an empty key")
        node = out
        for p in parts[:-1]:
            if isinstance(node, list):
                node = node[int(p)]
                continue
            nxt = node.get(p)
            if not isinstance(nxt, (dict, list)):
                nxt = node[p] = {}
            node = nxt
        if isinstance(node, list):
            node[int(parts[-1])] = _parse_value(val)
        else:
            node[parts[-1]] = _parse_value(val)
    return out


def inputs_digest(scenario: dict) -> str:
    blob = json.dumps(scenario, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _model_surface(desc: dict):
    """Surfaces (and optionally Hamiltonians and chart systems) from named models."""
    from . import models

    name = desc["model"]
    order = int(desc.get("order", 1))
    eps = float(desc.get("eps", 0.1))
    k = desc.get("k", 0.5)
    k = TrigPoly.from_json(k, period=1.0)
    if name in ("b_torus", "b2_torus"):
        fn = models.b_torus if name == "b_torus" else models.b2_torus
        variant = desc.get("variant", "sin" if name == "b_torus" else "cot")
        tm = fn(k, eps, variant)
        return tm.surface, tm.hamiltonian, [tm.system]
    if name == "sphere_equator":
        return models.sphere_equator(order, eps), None, []
    if name == "two_annuli_torus":
        return models.two_annuli_torus(order, eps), None, []
    if name == "torus_one_circle":
        return models.torus_one_circle(order, eps), None, []
    suite = models.arnold_suite(order)
    if name in suite:
        return suite[name], None, []
    raise ValidationError(f"unknown surface model {name!r}")


def load_inputs(sc: dict):
    if "surface" not in sc:
        raise ValidationError("scenario needs a 'surface'")
    desc = sc["surface"]
    if not isinstance(desc, dict):
        raise ValidationError("'surface' must be an object")
    systems = []
    H = None
    if "model" in desc:
        s, H, systems = _model_surface(desc)
    else:
        s = BSurface.from_json(desc)
    if sc.get("hamiltonian") is not None:
        H = AdmissibleHamiltonian.from_json(sc["hamiltonian"], s)
    return s, H, systems


def _need_h(H):
    if H is None:
        raise ValidationError("this command needs a 'hamiltonian'")
    return H


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_analyze_graph(sc, s, H, systems, opts, files):
    g = build_graph(s)
    col = two_color(g)
    res = {"graph": g.to_json(), "two_colorable": col is not None,
           "vertex_coloring": col.to_json() if col else None,
           "odd_closed_walk": None if col else odd_closed_walk(g),
           "acyclic": is_acyclic(g), "arnold_bound": arnold_bound_surface(g)}
    o = good_orientation(g)
    res["good_orientation"] = {e: list(p) for e, p in sorted(o.pairs.items())}
    res["good_orientation_violations"] = check_good_orientation(g, o)
    ec = edge_two_color(g)
    res["edge_coloring"] = ec.to_json() if ec else None
    files["graph.dot"] = g.to_dot(o)
    return res


def cmd_check_admissible(sc, s, H, systems, opts, files):
    rep = admissibility_report(_need_h(H), s)
    res = rep.to_json()
    if not rep.overall:
        raise VerificationFailed(res)
    return res


def cmd_find_orbits(sc, s, H, systems, opts, files):
    from .dynamics import find_periodic_orbits, orbits_to_csv

    grid = int(opts.get("grid_density", 32))
    tol = float(opts.get("tol", 1e-10))
    extra = systems if opts.get("include_interior", False) else []
    res = find_periodic_orbits(_need_h(H), s, grid, tol, extra_systems=extra)
    files["orbits.csv"] = orbits_to_csv(res.orbits)
    out = res.to_json()
    if "expect_count" in opts and res.count != int(opts["expect_count"]):
        raise VerificationFailed(out)
    return out


def cmd_desingularize(sc, s, H, systems, opts, files):
    from .desing import (continuity_defect, desingularize_hamiltonian_acyclic,
                         desingularize_hamiltonian_unimodular)

    H = _need_h(H)
    eps = float(opts.get("eps", min(c.epsilon for c in s.circles) / 2))
    method = opts.get("method", "auto")
    path = opts.get("path")
    g = build_graph(s)
    if method == "auto":
        method = "acyclic" if is_acyclic(g) else "unimodular"
    if method == "unimodular":
        D = desingularize_hamiltonian_unimodular(H, s, two_color(g), eps, path)
    elif method == "acyclic":
        D = desingularize_hamiltonian_acyclic(H, s, eps, opts.get("root"), path)
    else:
        raise ValidationError(f"unknown desingularization method {method!r}")
    defect = continuity_defect(D, H, s)
    for cid, fn in sorted(D.fns.items()):
        z = np.linspace(-2 * eps, 2 * eps, int(opts.get("samples", 201)))
        rows = [("z", "fn", "dfn")] + [(f"{a:.12g}", f"{b:.12g}", f"{c:.12g}") for a, b, c in
                                       zip(z, fn(z), fn.derivative(z))]
        files[f"grids/desing_{cid}.csv"] = _csv(rows)
    res = {"method": method, "desingularized": D.to_json(), "continuity_defect": defect}
    if max(defect.values()) > float(opts.get("tol", 1e-9)):
        raise VerificationFailed(res)
    return res


def _all_explicit(s: BSurface) -> bool:
    return all(c.genus <= 1 for c in s.components)


def cmd_verify_bound(sc, s, H, systems, opts, files):
    from .morse import optimal_b_function

    g = build_graph(s)
    bound = arnold_bound_surface(g)
    oc = optimal_b_function(s)
    res = {"bound": bound, "expected": oc.expected_count, "construction": oc.to_json()}
    found = oc.expected_count
    if opts.get("numeric", True) and _all_explicit(s):
        num = oc.numeric_count(int(opts.get("grid_density", 24)))
        res["numeric"] = num
        found = num["total"]
        ok = num["all_nondegenerate"] and num["indices_consistent"]
    else:
        ok = True
    res["found"] = found
    if found < bound or not ok or found != oc.expected_count:
        raise VerificationFailed(res)
    return res


def cmd_construct_optimal(sc, s, H, systems, opts, files):
    from .morse import euler_identity_check, optimal_b_function

    oc = optimal_b_function(s)
    res = oc.to_json()
    res["euler_identity"] = {v: euler_identity_check(inv, inv.genus)
                             for v, inv in sorted(oc.inventories.items())}
    return res


def cmd_floer_residual(sc, s, H, systems, opts, files):
    from .morse import (convergence_order, discrete_floer_residual, exact_floer_family,
                        minimum_principle_check)

    cid = opts.get("circle", s.circles[0].id if s.circles else None)
    if cid is None:
        raise ValidationError("surface has no critical circle")
    circ = s.circle(cid)
    h = float(opts.get("h", 1e-2))
    fam = dict(k0=float(opts.get("k0", 0.5)), kappa=float(opts.get("kappa", 0.5)),
               amp=float(opts.get("amp", 1e-5)))
    grid = exact_floer_family(circ, h, **fam)
    r, R = discrete_floer_residual(grid)
    hs = tuple(opts.get("refinement", (2e-2, 1e-2, 5e-3)))
    res_list, order = convergence_order(circ, hs, **fam)
    mp = minimum_principle_check(grid, float(opts.get("threshold", 1e-6)))
    rows = [("s", "t", "residual")]
    for i, si in enumerate(grid.s[1:-1]):
        for j, tj in enumerate(grid.t[1:-1]):
            rows.append((f"{si:.6g}", f"{tj:.6g}", f"{R[i, j]:.6e}"))
    files["grids/residual.csv"] = _csv(rows)
    res = {"circle": cid, "h": h, "residual": r, "refinement": {"h": list(hs), "residual": res_list},
           "observed_order": order, "minimum_principle": mp.to_json()}
    if r >= float(opts.get("threshold", 1e-6)) or order < 1.8:
        raise VerificationFailed(res)
    return res


def cmd_singularize(sc, s, H, systems, opts, files):
    from .desing import desingularize_singularized, singularize_surface, smooth_torus_field, \
        verify_field_agreement

    m = int(opts.get("order", 1))
    eps = float(opts.get("eps", 0.2))
    eps_d = float(opts.get("eps_d", eps / 4))
    model = singularize_surface(m, eps)
    field, _, _ = desingularize_singularized(model, eps_d)
    n = int(opts.get("grid", 64))
    x = np.linspace(0, 2 * np.pi, n, endpoint=False) + 1e-3
    y = np.linspace(0, 2 * np.pi, n, endpoint=False)
    P = np.stack(np.meshgrid(x, y, indexing="ij"), -1).reshape(-1, 2)
    outside = lambda Q: np.abs(np.sin(Q[:, 0])) >= eps
    dev = verify_field_agreement(field, smooth_torus_field, P, mask=outside)
    dev_punct = verify_field_agreement(model.singular_field, smooth_torus_field, P,
                                       mask=lambda Q: np.abs(np.sin(Q[:, 0])) > 1e-6)
    rows = [("x", "y", "Xx", "Xy")]
    Fv = field(0.0, P[::max(1, len(P) // 512)])
    for p, v in zip(P[::max(1, len(P) // 512)], Fv):
        rows.append(tuple(f"{q:.10g}" for q in (*p, *v)))
    files["grids/field.csv"] = _csv(rows)
    res = {"order": m, "eps": eps, "eps_d": eps_d, "surface": model.surface.to_json(),
           "s_eps": model.s_fn.to_json(), "round_trip_deviation": dev,
           "singular_vs_smooth_deviation": dev_punct}
    if dev >= float(opts.get("tol", 1e-8)) or dev_punct >= float(opts.get("tol", 1e-8)):
        raise VerificationFailed(res)
    return res


HANDLERS = {
    "analyze-graph": cmd_analyze_graph, "check-admissible": cmd_check_admissible,
    "find-orbits": cmd_find_orbits, "desingularize": cmd_desingularize,
    "verify-bound": cmd_verify_bound, "construct-optimal": cmd_construct_optimal,
    "floer-residual": cmd_floer_residual, "singularize": cmd_singularize,
}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_outputs(out: Path, report: dict, files: dict):
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dump_report(report), encoding="utf-8")
    for name, text in sorted(files.items()):
        p = out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")


def run(scenario: dict, out: Path | None = None) -> tuple[int, dict]:
    """Execute one scenario; returns (exit code, report)."""
    report = {"version": __version__, "inputs_digest": inputs_digest(scenario),
              "command": scenario.get("command") if isinstance(scenario, dict) else None}
    files: dict[str, str] = {}
    try:
        if not isinstance(scenario, dict):
            raise ValidationError("scenario must be a JSON object")
        cmd = scenario.get("command")
        if cmd not in HANDLERS:
            raise ValidationError(f"unknown command {cmd!r}; expected one of {list(COMMANDS)}")
        if "seed" in scenario:
            np.random.seed(int(scenario["seed"]))
        s, H, systems = load_inputs(scenario)
        opts = scenario.get("options", {}) or {}
        report["results"] = HANDLERS[cmd](scenario, s, H, systems, opts, files)
        report["status"] = "ok"
        code = EXIT_OK
    except VerificationFailed as exc:
        report["results"] = exc.args[0]
        report["status"] = "verification_failed"
        code = EXIT_VERIFY
    except (ValidationError, DomainError, GraphError, KeyError, ValueError, TypeError) as exc:
        report["status"] = "invalid_input"
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        code = EXIT_INVALID
    report["exit_code"] = code
    if out is not None:
        write_outputs(out, report, files)
    return code, report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bsing", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="action", required=True)
    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("--scenario", required=True, help="path to the scenario JSON")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-path override, value parsed as JSON when possible (repeatable)")
    r.add_argument("--out", default="out", help="output directory (default: ./out)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        with open(args.scenario, encoding="utf-8") as fh:
            scenario = json.load(fh)
        scenario = apply_overrides(scenario, args.overrides)
    except (OSError, json.JSONDecodeError, ValidationError, IndexError, ValueError) as exc:
        diag = {"status": "invalid_input", "exit_code": EXIT_INVALID,
                "error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(diag, sort_keys=True), file=sys.stderr)
        write_outputs(out, diag, {})
        return EXIT_INVALID
    code, report = run(scenario, out)
    summary = {"command": report.get("command"), "status": report["status"], "exit_code": code,
               "out": str(out)}
    if "error" in report:
        summary["error"] = report["error"]
    print(json.dumps(summary, sort_keys=True), file=sys.stderr if code else sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
