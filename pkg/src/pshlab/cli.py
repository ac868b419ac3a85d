"""Command-line front end: ``pshlab <command> [options]``.

Exit codes
    0   success (``integrate``: time bound reached)
    1   runtime error (degenerate metric, failed classification, ...)
    2   ``integrate``: blow-up certified
    3   ``integrate``: step limit exhausted
    4   ``integrate``: threshold crossed without a certificate
    64  usage error (bad flags or values)
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from ._accel import backend
from .euler_arnold import (
    build_field,
    polynomial_first_integrals,
    search_idempotents,
    search_singular_rays,
    table_field,
)
from .flow import (
    IntegrationFailure,
    IntegratorConfig,
    Status,
    VerdictValidationError,
    completeness_verdict,
    integrate,
)
from .geometry import curvature, kundt_scan
from .metric import (
    ClassificationError,
    DegenerateFormError,
    InvalidParameterError,
    NormalFormLabel,
    SymmetricForm,
    classify,
    normal_form_matrix,
    parse_label,
    parse_metric,
)
from .reports import ExperimentReport, portrait_rows, write_portrait, write_trajectory

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BLOWUP = 2
EXIT_STEP_LIMIT = 3
EXIT_UNCERTIFIED = 4
EXIT_USAGE = 64

STATUS_EXIT = {
    Status.REACHED_TIME_BOUND: EXIT_OK,
    Status.BLOWUP_CERTIFIED: EXIT_BLOWUP,
    Status.STEP_LIMIT: EXIT_STEP_LIMIT,
    Status.THRESHOLD_CROSSED: EXIT_UNCERTIFIED,
}

# one representative per row of the completeness table
VERDICT_ROWS = ("Q1:1", "Q1:-1", "Q2:1", "Q2:-1", "Q3", "Q4", "Q5", "Q6")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# shared helpers

def _vector(text: str) -> np.ndarray:
    try:
        values = [float(t) for t in text.replace(" ", "").split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse vector {text!r}") from exc
    if len(values) != 3 or not all(math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError("expected three finite numbers x,y,z")
    return np.array(values)


def _levels(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse levels {text!r}") from exc


def _config(args) -> IntegratorConfig:
    defaults = IntegratorConfig()
    try:
        return IntegratorConfig(
            rtol=args.rtol if args.rtol is not None else defaults.rtol,
            atol=args.atol if args.atol is not None else defaults.atol,
            t_max=args.tmax if args.tmax is not None else defaults.t_max,
            threshold=args.threshold if args.threshold is not None else defaults.threshold,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _form_and_label(args, required: bool = True):
    """Resolve ``--label`` / ``--metric`` into (form, normal-form label, is_normal_form)."""
    if args.label and args.metric:
        raise UsageError("give either --label or --metric, not both")
    if args.label:
        try:
            label = parse_label(args.label)
        except InvalidParameterError as exc:
            raise UsageError(str(exc)) from exc
        return normal_form_matrix(label), label, True
    if args.metric:
        try:
            m = parse_metric(args.metric)
        except ValueError as exc:
            if isinstance(exc, DegenerateFormError):
                raise
            raise UsageError(str(exc)) from exc
        return m, classify(m), False
    if required:
        raise UsageError("one of --label or --metric is required")
    return None, None, False


def _field(m: SymmetricForm, label: NormalFormLabel, is_normal: bool):
    return table_field(label) if is_normal else build_field(m)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stem(label: NormalFormLabel) -> str:
    if label.parameter is None:
        return label.tag
    return f"{label.tag}_{label.parameter:g}".replace(".", "p").replace("-", "m")


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _pmap(func: Callable, items: Sequence, parallel: bool) -> list:
    """Map preserving input order; a process pool when ``parallel``."""
    if not parallel or len(items) < 2:
        return [func(i) for i in items]
    with ProcessPoolExecutor() as pool:
        return list(pool.map(func, items))


def _vec(v) -> list[float]:
    return [float(c) + 0.0 for c in v]


# ---------------------------------------------------------------------------
# commands

def cmd_classify(args) -> int:
    if args.label:
        raise UsageError("classify takes --metric")
    m, label, _ = _form_and_label(args)
    phi = label.automorphism
    payload = {
        "label": str(label),
        "key": label.key,
        "tag": label.tag,
        "parameter": label.parameter,
        "automorphism": {"a": phi.a, "b": phi.b, "c": phi.c, "d": phi.d,
                         "matrix": phi.matrix.tolist()},
        "scale": label.scale,
        "residual": label.residual,
    }
    text = (f"{label}\n"
            f"  witness automorphism a={phi.a:.12g} b={phi.b:.12g} c={phi.c:.12g} d={phi.d:.12g}\n"
            f"  scale {label.scale:.12g}  residual {label.residual:.3e}\n")
    _emit(args, payload, text)
    return EXIT_OK


def cmd_integrate(args) -> int:
    m, label, is_normal = _form_and_label(args)
    if args.v0 is None:
        raise UsageError("--v0 is required")
    cfg = _config(args)
    F = _field(m, label, is_normal)
    try:
        traj = integrate(F, args.v0, cfg)
    except IntegrationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    stem = args.name or f"trajectory_{_stem(label)}"
    extra = {"label": str(label), "metric": m.matrix.tolist(), "backend": backend()}
    csv_path, json_path = write_trajectory(traj, _out_dir(args), stem, extra)
    summary = traj.summary()
    summary.update(extra, csv=str(csv_path), sidecar=str(json_path))
    lines = [f"{label}: {traj.status.value} at t={traj.t[-1]:.12g} ({traj.t.size} samples)",
             f"  max |v| = {traj.max_norm:.6g}"]
    for name, drift in traj.drifts.items():
        lines.append(f"  drift[{name}] = {'n/a' if drift is None else f'{drift:.3e}'}")
    if traj.escape_interval is not None:
        lo, hi = traj.escape_interval
        lines.append(f"  escape time in [{lo:.12g}, {hi:.12g}], estimate {traj.escape_estimate:.12g}")
    if traj.certificate is not None:
        lines.append(f"  certificate: {traj.certificate.mechanism}")
    lines.append(f"  wrote {csv_path} and {json_path}")
    _emit(args, summary, "\n".join(lines))
    return STATUS_EXIT[traj.status]


def _verdict_record(key: str) -> dict:
    label = parse_label(key)
    v = completeness_verdict(label)
    return {"key": key, "label": str(label), "verdict": v.verdict, "mechanism": v.mechanism,
            "witness": v.witness.summary(), "diagnostics": _jsonable(v.diagnostics),
            "notes": list(v.notes), "metric": normal_form_matrix(label).matrix.tolist()}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def cmd_verdicts(args) -> int:
    report = ExperimentReport("verdicts")
    notes: list[str] = []
    for rec in _pmap(_verdict_record, VERDICT_ROWS, args.parallel):
        notes += [f"{rec['label']}: {n}" for n in rec.pop("notes")]
        rec["diagnostics"]["max_norm"] = rec["witness"]["max_norm"]
        rec["diagnostics"]["t_final"] = rec["witness"]["t_final"]
        report.records.append(rec)
    report.notes = notes
    path = _out_dir(args) / "verdicts.json"
    path.write_text(report.to_json())
    _emit(args, report.to_dict(), report.table(("t_final", "max_norm")))
    return EXIT_OK


@dataclass(frozen=True)
class SequenceSpec:
    """Family A: ``A_{n,-n^4}`` towards Q3. Family B: ``B_{n,n^4}`` towards Q4."""

    family: str
    n_min: int = 1
    n_max: int = 10

    def __post_init__(self):
        if self.family not in ("A", "B"):
            raise ValueError("family must be A or B")
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ValueError("need 1 <= n_min <= n_max")

    def parameter(self, n: int) -> float:
        return -float(n) ** 4 if self.family == "A" else float(n) ** 4

    def matrix(self, n: int) -> np.ndarray:
        return sequence_matrix(self.family, n, self.parameter(n))

    @property
    def limit(self) -> NormalFormLabel:
        return NormalFormLabel("Q3" if self.family == "A" else "Q4")


def sequence_matrix(family: str, n: int, p: float) -> np.ndarray:
    n2 = float(n) ** 2
    if family == "A":
        return np.array([[1.0, 0, 0], [0, 1 / n2, 1], [0, 1, p / n2 + n2]])
    return np.array([[1.0, 0, 0], [0, -1 / n2, -1], [0, -1, p / n2 - n2]])


def _closedness_item(item) -> dict:
    family, n = item
    spec = SequenceSpec(family, n, n)
    M = spec.matrix(n)
    m = SymmetricForm(M)
    label = classify(m)
    v = completeness_verdict(label)
    limit = normal_form_matrix(spec.limit).matrix
    return {
        "key": f"{family}:{n}",
        "metric": M.tolist(),
        "label": str(label),
        "verdict": v.verdict,
        "mechanism": v.mechanism,
        "witness": v.witness.summary(),
        "diagnostics": {"n": n, "family": family, "parameter": label.parameter,
                        "expected_parameter": spec.parameter(n),
                        "sup_distance_to_limit": float(np.max(np.abs(M - limit))),
                        "expected_distance": 1.0 / n**2},
    }


CLOSEDNESS_NOTES = (
    "family A: A_{n,r} with r = -n^4 lies in the Q1(r) orbit; the (3,3) entry vanishes and A -> Q3",
    "family B: B_{n,s} with s = n^4 lies in the Q2(s) orbit; the (3,3) entry vanishes and B -> Q4",
    "family B uses s = n^4: with s = n^2 the (3,3) entry would be 1 - n^2, which diverges",
)


def closedness_report(families: Sequence[str], n_max: int, parallel: bool = False,
                      n_min: int = 1) -> ExperimentReport:
    items = [(f, n) for f in families for n in range(n_min, n_max + 1)]
    report = ExperimentReport("closedness")
    report.records.extend(_pmap(_closedness_item, items, parallel))
    for family in families:
        limit = SequenceSpec(family).limit
        v = completeness_verdict(limit)
        terms = [r for r in report.records if r["diagnostics"].get("family") == family]
        report.add(f"{family}:limit", str(limit), normal_form_matrix(limit), v.verdict, v.mechanism,
                   v.witness.summary(), {"family": family, "role": "limit"})
        terms_complete = {r["verdict"].startswith("Complete") for r in terms}
        if family == "A":
            ok = terms_complete == {False} and v.complete
            report.notes.append("A: incomplete terms converge to a complete limit, so the complete set "
                                f"is not open ({'confirmed' if ok else 'NOT confirmed'})")
        else:
            ok = terms_complete == {True} and not v.complete
            report.notes.append("B: complete terms converge to an incomplete limit, so the complete set "
                                f"is not closed ({'confirmed' if ok else 'NOT confirmed'})")
    report.notes.extend(CLOSEDNESS_NOTES)
    return report


def cmd_closedness(args) -> int:
    if args.n_max < 2:
        raise UsageError("--n-max must be at least 2")
    families = ("A", "B") if args.family == "both" else (args.family,)
    report = closedness_report(families, args.n_max, args.parallel)
    path = _out_dir(args) / "closedness.json"
    path.write_text(report.to_json())
    _emit(args, report.to_dict(),
          report.table(("parameter", "sup_distance_to_limit")) + f"wrote {path}\n")
    return EXIT_OK


def cmd_kundt(args) -> int:
    m, label, _ = _form_and_label(args)
    reports = kundt_scan(m)
    max_r = float(np.max(np.abs(curvature(m))))
    payload = {"label": str(label), "pairs": [r.to_dict() for r in reports], "max_abs_curvature": max_r,
               "flat": max_r < 1e-12}
    lines = [f"{label}: {len(reports)} Kundt pair(s)"]
    for r in reports:
        lines.append(f"  {r.subalgebra}  null generator {np.round(r.null_generator, 12).tolist()}"
                     f"  invariant plane: {r.invariant_plane}")
    lines.append(f"  max |R| = {max_r:.3e}" + ("  (flat)" if max_r < 1e-12 else ""))
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_portrait(args) -> int:
    m, label, is_normal = _form_and_label(args)
    F = _field(m, label, is_normal)
    cfg = IntegratorConfig(t_max=args.tmax if args.tmax is not None else 5.0,
                           threshold=args.threshold if args.threshold is not None else 1e4)
    rows = portrait_rows(F, extent=args.extent, grid=args.grid, levels=args.levels or (),
                         per_level=args.per_level, cfg=cfg)
    path = write_portrait(rows, _out_dir(args) / f"portrait_{_stem(label)}.csv")
    counts: dict[str, int] = {}
    for row in rows:
        counts[row[0]] = counts.get(row[0], 0) + 1
    _emit(args, {"label": str(label), "path": str(path), "rows": counts},
          f"{label}: wrote {path} " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_idempotents(args) -> int:
    m, label, is_normal = _form_and_label(args)
    res = search_idempotents(_field(m, label, is_normal))
    payload = {"label": str(label), "status": res.status, "idempotents": [_vec(v) for v in res.roots]}
    lines = [f"{label}: idempotents {res.status}"] + [f"  {_vec(v)}" for v in res.roots]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_singularities(args) -> int:
    m, label, is_normal = _form_and_label(args)
    F = _field(m, label, is_normal)
    res = search_singular_rays(F)
    rays = []
    for ray in res.roots:
        ev = sorted(ray.unit_eigenvalues, key=lambda z: (round(z.real, 12), round(z.imag, 12)))
        rays.append({"direction": _vec(ray.direction),
                     "unit_eigenvalues": [[float(z.real) + 0.0, float(z.imag) + 0.0] for z in ev]})
    payload = {"label": str(label), "status": res.status, "rays": rays}
    lines = [f"{label}: singular rays {res.status}"]
    for r in rays:
        evs = ", ".join(f"{re:.6g}{im:+.6g}i" for re, im in r["unit_eigenvalues"])
        lines.append(f"  {r['direction']}  eigenvalues at unit multiple: {evs}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_integrals(args) -> int:
    m, label, is_normal = _form_and_label(args)
    if not 1 <= args.degree <= 4:
        raise UsageError("--degree must be between 1 and 4")
    polys = polynomial_first_integrals(_field(m, label, is_normal), args.degree)
    payload = {"label": str(label), "degree": args.degree, "dimension": len(polys),
               "basis": [str(p) for p in polys]}
    lines = [f"{label}: polynomial first integrals of degree <= {args.degree}: dimension {len(polys)}"]
    lines += [f"  {p}" for p in polys]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print machine-readable JSON")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("--parallel", action="store_true", help="run independent items in a process pool")

    form = argparse.ArgumentParser(add_help=False)
    form.add_argument("--label", help="normal form: Q1:<r> | Q2:<s> | Q3 | Q4 | Q5 | Q6")
    form.add_argument("--metric", help="6 entries m1..m6 or 9 row-major entries")

    integ = argparse.ArgumentParser(add_help=False)
    integ.add_argument("--tmax", type=float)
    integ.add_argument("--rtol", type=float)
    integ.add_argument("--atol", type=float)
    integ.add_argument("--threshold", type=float)

    parser = _Parser(prog="pshlab", description="Left-invariant metrics on the pseudo-homothetic Lie group.",
                     epilog="Exit codes: 0 ok, 1 error, 2 blow-up certified, 3 step limit, "
                            "4 threshold crossed without certificate, 64 usage error.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", parents=[common, form], help="normal form of a metric")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("integrate", parents=[common, form, integ], help="integrate the geodesic field")
    p.add_argument("--v0", type=_vector, help="initial state x,y,z")
    p.add_argument("--name", help="output file stem")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("verdicts", parents=[common], help="completeness verdict table")
    p.set_defaults(func=cmd_verdicts)

    p = sub.add_parser("closedness", parents=[common], help="non-closedness sequence experiment")
    p.add_argument("--family", choices=("A", "B", "both"), default="both")
    p.add_argument("--n-max", type=int, default=10)
    p.set_defaults(func=cmd_closedness)

    p = sub.add_parser("kundt", parents=[common, form], help="Kundt pair scan and flatness")
    p.set_defaults(func=cmd_kundt)

    p = sub.add_parser("portrait", parents=[common, form, integ], help="phase-portrait plot data")
    p.add_argument("--extent", type=float, default=2.0)
    p.add_argument("--grid", type=int, default=5)
    p.add_argument("--levels", type=_levels, help="energy levels, comma separated")
    p.add_argument("--per-level", type=int, default=3)
    p.set_defaults(func=cmd_portrait)

    p = sub.add_parser("idempotents", parents=[common, form], help="idempotents of the geodesic field")
    p.set_defaults(func=cmd_idempotents)

    p = sub.add_parser("singularities", parents=[common, form], help="singular rays and linearizations")
    p.set_defaults(func=cmd_singularities)

    p = sub.add_parser("integrals", parents=[common, form], help="polynomial first integrals")
    p.add_argument("--degree", type=int, default=2)
    p.set_defaults(func=cmd_integrals)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pshlab {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateFormError, ClassificationError, InvalidParameterError, VerdictValidationError,
            ValueError) as exc:
        print(f"pshlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
