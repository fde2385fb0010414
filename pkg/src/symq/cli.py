"""Command-line toolkit: projections, Gaussian models, moment tables, localization."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .gaussian import (
    classify_localization,
    eigen3,
    find_peaks,
    moment_summary,
    t_matrix,
)
from .moments import (
    asymptotic_normalized_deviation,
    deviation_table,
    exact_moment,
)
from .projection import (
    NotPermutationSymmetric,
    project_analytic,
    project_bruteforce,
    project_symmetric,
    write_pointcloud_xyz,
    write_projection_csv,
)
from .states import (
    FAMILIES,
    StateSpec,
    UnsupportedFamily,
    build_state,
    has_analytic_projection,
    is_symmetric_spec,
)

VALIDATE_FAMILIES = (
    "dcs", "basis", "ghz", "shifted_ghz", "w",
    "biseparable_a", "graph_pairs", "uniform_mixed",
)


@dataclass
class RunConfig:
    """Resolved options of one CLI invocation; hashed into output sidecars."""

    command: str
    options: dict = field(default_factory=dict)

    def canonical(self) -> str:
        doc = {"command": self.command, "options": self.options,
               "version": __version__}
        return json.dumps(doc, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


class CliError(Exception):
    pass


def _parse_sweep(text: str) -> list[int]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError(f"sweep must be a:b:step or a comma list, got {text!r}")
        a, b, step = (int(p) for p in parts)
        if step <= 0 or b < a:
            raise CliError("sweep bounds must be increasing with positive step")
        values = list(range(a, b + 1, step))
    else:
        values = [int(p) for p in text.split(",") if p]
    if sorted(set(values)) != values:
        raise CliError("sweep values must be strictly increasing")
    return values


def _spec_from_args(args, n: int | None = None) -> StateSpec:
    n = n if n is not None else args.n
    if n is None:
        raise CliError("--n is required")
    params = {}
    for key in ("mu", "nu", "kappa", "kappa1", "kappa2"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if getattr(args, "a_param", None) is not None:
        params["a"] = args.a_param
    if getattr(args, "state_file", None) is not None:
        params["path"] = args.state_file
    try:
        return StateSpec(args.family, n, params)
    except (UnsupportedFamily, ValueError) as exc:
        raise CliError(str(exc)) from exc


def _write_sidecar(out_path: Path, config: RunConfig, extra: dict) -> None:
    doc = {
        "tool": "symq",
        "version": __version__,
        "config": json.loads(config.canonical()),
        "config_hash": config.digest(),
    }
    doc.update(extra)
    side = out_path.with_suffix(out_path.suffix + ".meta.json")
    side.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _write_projection(pq, out: Path, fmt: str, config: RunConfig) -> None:
    if fmt == "xyz":
        write_pointcloud_xyz(pq, out)
    elif fmt == "csv":
        write_projection_csv(pq, out)
    elif fmt == "json":
        rows = [
            {"m": int(m), "n": int(n), "k": int(k),
             "log_value": (lv if math.isfinite(lv) else None)}
            for (m, n, k), lv in zip(pq.triples, pq.log_values)
        ]
        out.write_text(json.dumps(
            {"n_qubits": pq.n_qubits, "source": pq.source,
             "state": pq.state_label, "points": rows}, sort_keys=True) + "\n")
    else:
        raise CliError(f"unknown format {fmt!r}")
    _write_sidecar(out, config, {
        "n": pq.n_qubits,
        "normalization": pq.normalization(),
        "source": pq.source,
        "state": pq.state_label,
    })


def _project_any(spec: StateSpec, method: str, nmax_brute: int):
    if method == "brute":
        return project_bruteforce(build_state(spec), max_qubits=nmax_brute,
                                  label=spec.label())
    if method in ("auto", "analytic"):
        if has_analytic_projection(spec):
            return project_analytic(spec)
        if is_symmetric_spec(spec):
            return project_symmetric(spec, dense_max=nmax_brute)
        if method == "analytic":
            raise CliError(f"no analytic projection for family {spec.family!r}")
        return project_bruteforce(build_state(spec), max_qubits=nmax_brute,
                                  label=spec.label())
    raise CliError(f"unknown method {method!r}")


def _cmd_project(args) -> int:
    spec = _spec_from_args(args)
    config = RunConfig("project", {
        "spec": spec.to_dict(), "format": args.format, "method": args.method,
        "nmax_brute": args.nmax_brute,
    })
    pq = _project_any(spec, args.method, args.nmax_brute)
    out = Path(args.out)
    _write_projection(pq, out, args.format, config)
    print(f"project: {spec.label()} -> {out} "
          f"({len(pq)} lattice points, normalization {pq.normalization():.12g})")
    return 0


def _cmd_gaussian(args) -> int:
    spec = _spec_from_args(args)
    config = RunConfig("gaussian", {"spec": spec.to_dict()})
    ms = moment_summary(spec)
    model = t_matrix(ms)
    vals, vecs = eigen3(model.dispersion)
    doc = {
        "n": spec.n,
        "family": spec.family,
        "mean_spin": ms.mean_spin.tolist(),
        "correlation": ms.correlation.tolist(),
        "center": model.center.tolist(),
        "dispersion": model.dispersion.tolist(),
        "trace_t": float(np.trace(model.dispersion)),
        "eigenvalues": vals.tolist(),
        "axes": vecs.T.tolist(),
    }
    out = Path(args.out)
    out.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    _write_sidecar(out, config, {"n": spec.n})
    print(f"gaussian: {spec.label()} eigenvalues {vals.tolist()}")
    return 0


def _moment_rows_csv(rows) -> str:
    header = ("family,n,direction,order,exact,approx,deviation,"
              "deviation_is_absolute,normalized_deviation\n")
    lines = [header]
    for r in rows:
        norm = "" if r.normalized_deviation is None else f"{r.normalized_deviation:.17g}"
        lines.append(
            f"{r.family},{r.n_qubits},{r.direction},{r.order},{r.exact:.17g},"
            f"{r.approx:.17g},{r.deviation:.17g},{int(r.deviation_is_absolute)},"
            f"{norm}\n")
    return "".join(lines)


def _paper_table_rows() -> list[dict]:
    """The canonical fourth-moment comparisons of the named families."""
    rows = []

    def add(family, params, direction, order, n, model="single", power=None):
        spec = StateSpec(family, n, dict(params))
        ex = exact_moment(spec, direction, order, central=False)
        from .moments import approx_moment_gaussian, gaussian_model_for

        ap = approx_moment_gaussian(gaussian_model_for(spec, model),
                                    direction, order, central=False)
        row = {
            "family": family, "params": params, "direction": str(direction),
            "order": order, "n": n, "model": model,
            "exact": ex, "approx": ap,
            "deviation": (ap - ex) / ex if ex else ap - ex,
        }
        if power is not None and ex:
            row["normalized_deviation"] = (ap - ex) / ex * n**power
            row["asymptotic_normalized_deviation"] = asymptotic_normalized_deviation(
                family, params, direction, order, power, model=model)
        rows.append(row)

    n0 = 100
    add("dcs", {"nu_frac": 0.25}, "z", 3, n0, power=2)
    add("dcs", {"nu_frac": 0.25}, "z", 4, n0, power=2)
    add("w", {}, "x", 4, n0)
    add("w", {}, "z", 4, n0, power=2)
    add("ghz", {}, "x", 4, n0)
    add("ghz", {}, "z", 4, n0)
    add("ghz", {}, "z", 4, n0, model="ghz_two", power=2)
    add("basis", {"kappa_frac": 0.25}, "z", 4, n0, power=2)
    add("basis", {"kappa_frac": 0.25}, (1.0, 1.0, 0.0), 4, n0, power=1)
    return rows


def _cmd_moments(args) -> int:
    out = Path(args.out)
    if args.paper_tables:
        config = RunConfig("moments", {"paper_tables": True})
        rows = _paper_table_rows()
        out.write_text(json.dumps(rows, sort_keys=True, indent=2) + "\n")
        _write_sidecar(out, config, {"rows": len(rows)})
        print(f"moments: wrote {len(rows)} comparison rows -> {out}")
        return 0
    spec = _spec_from_args(args)
    orders = [int(o) for o in args.orders.split(",")] if args.orders \
        else [args.order]
    config = RunConfig("moments", {
        "spec": spec.to_dict(), "axis": args.axis, "orders": orders,
        "model": args.model, "central": args.central,
    })
    rows = deviation_table(spec.family, spec.params, [args.axis], orders,
                           [spec.n], model=args.model, central=args.central,
                           with_cumulants=args.cumulants)
    if args.format == "csv":
        out.write_text(_moment_rows_csv(rows))
    else:
        out.write_text(json.dumps([r.to_dict() for r in rows],
                                  sort_keys=True, indent=2) + "\n")
    _write_sidecar(out, config, {"rows": len(rows)})
    for r in rows:
        print(f"moments: {r.family} N={r.n_qubits} {r.direction}^{r.order} "
              f"exact={r.exact:.12g} approx={r.approx:.12g}")
    return 0


def _cmd_localize(args) -> int:
    sweep = _parse_sweep(args.sweep)
    params = {}
    for key in ("mu", "nu", "kappa"):
        val = getattr(args, key, None)
        if val is not None:
            params[f"{key}_frac"] = _frac_of_string(val)
    if args.a_param is not None:
        params["a"] = args.a_param
    if args.nu_frac is not None:
        params["nu_frac"] = args.nu_frac
    if args.kappa_frac is not None:
        params["kappa_frac"] = args.kappa_frac
    config = RunConfig("localize", {
        "family": args.family, "sweep": sweep, "params": params,
        "epsilon": args.epsilon,
    })
    report = classify_localization(args.family, sweep, params,
                                   epsilon=args.epsilon)
    out = Path(args.out)
    out.write_text(report.to_json() + "\n")
    _write_sidecar(out, config, {"localized": report.localized})
    print(f"localize: {args.family} over N={sweep}: verdicts {report.verdicts}")
    return 0


def _frac_of_string(bits: str) -> float:
    return bits.count("1") / len(bits)


def _rel_error(a: np.ndarray, b: np.ndarray) -> float:
    vmax = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12 * vmax)
    return float(np.max(np.abs(a - b) / denom))


def _validate_spec(family: str, n: int) -> StateSpec:
    params = {}
    if family == "dcs":
        params = {"mu": "0" * n, "nu": "0" * n}
    elif family == "basis":
        params = {"kappa": "01" * (n // 2) + "0" * (n % 2)}
    elif family == "shifted_ghz":
        params = {"nu": "1" * (n // 2) + "0" * (n - n // 2)}
    elif family == "biseparable_a":
        params = {"a": -1.0}
    return StateSpec(family, n, params)


def _cmd_validate(args) -> int:
    families = VALIDATE_FAMILIES if args.families == "all" \
        else tuple(args.families.split(","))
    config = RunConfig("validate", {
        "families": list(families), "n": args.n, "tol": args.tol,
    })
    report = {"n": args.n, "tol": args.tol, "families": {}}
    worst = 0.0
    for family in families:
        spec = _validate_spec(family, args.n)
        fast = _project_any(spec, "analytic", args.nmax_brute)
        brute = project_bruteforce(build_state(spec), max_qubits=args.nmax_brute,
                                   label=spec.label())
        err = _rel_error(fast.values(), brute.values())
        report["families"][family] = err
        worst = max(worst, err)
    report["max_relative_error"] = worst
    report["pass"] = worst <= args.tol
    out = Path(args.out)
    out.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    _write_sidecar(out, config, {"max_relative_error": worst})
    print(f"validate: N={args.n} max relative error {worst:.3e} "
          f"({'PASS' if report['pass'] else 'FAIL'})")
    return 0 if report["pass"] else 1


_FIGURE_SPECS = (
    ("dcs_fiducial_n18", StateSpec("dcs", 18, {})),
    ("w_n18", StateSpec("w", 18, {})),
    ("ghz_n18", StateSpec("ghz", 18, {})),
    ("shifted_ghz_n8", StateSpec("shifted_ghz", 8, {"nu": "11110000"})),
)


def _cmd_figures(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, spec in _FIGURE_SPECS:
        config = RunConfig("figures", {"spec": spec.to_dict(), "name": name})
        pq = project_analytic(spec)
        out = out_dir / f"{name}.xyz"
        _write_projection(pq, out, "xyz", config)
        peaks = find_peaks(pq)[:3]
        print(f"figures: {name} -> {out} (top peaks "
              f"{[p.triple for p in peaks]})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symq",
        description="Projected Q-functions of N-qubit states and their "
                    "macroscopic Gaussian analysis")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_family_args(p, with_n=True):
        p.add_argument("--family", required=True, choices=FAMILIES)
        if with_n:
            p.add_argument("--n", type=int)
        p.add_argument("--mu")
        p.add_argument("--nu")
        p.add_argument("--kappa")
        p.add_argument("--kappa1")
        p.add_argument("--kappa2")
        p.add_argument("--a", dest="a_param", type=float)
        p.add_argument("--state-file")

    p = sub.add_parser("project", help="projected density point cloud")
    add_family_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("xyz", "csv", "json"), default="xyz")
    p.add_argument("--method", choices=("auto", "analytic", "brute"),
                   default="auto")
    p.add_argument("--nmax-brute", type=int, default=12)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("gaussian", help="dispersion matrix and eigen-structure")
    add_family_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gaussian)

    p = sub.add_parser("moments", help="exact vs Gaussian moment tables")
    add_family_args(p)
    p.add_argument("--axis", default="z")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--orders")
    p.add_argument("--model", choices=("single", "ghz_two"), default="single")
    p.add_argument("--central", action="store_true")
    p.add_argument("--cumulants", action="store_true")
    p.add_argument("--paper-tables", action="store_true")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("localize", help="N-sweep localization verdicts")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--sweep", required=True,
                   help="a:b:step or comma-separated increasing list")
    p.add_argument("--mu")
    p.add_argument("--nu")
    p.add_argument("--kappa")
    p.add_argument("--a", dest="a_param", type=float)
    p.add_argument("--nu-frac", type=float)
    p.add_argument("--kappa-frac", type=float)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("validate", help="closed-form vs brute-force diff report")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--families", default="all")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--nmax-brute", type=int, default=12)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("figures", help="point clouds of the reference geometries")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, UnsupportedFamily, NotPermutationSymmetric, ValueError,
            OSError) as exc:
        doc = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(doc, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
