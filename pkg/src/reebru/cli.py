"""Command-line driver: run the pipelines, emit JSON/CSV/SVG.

Subcommands
-----------
``ellipsoid``       closed forms for a standard ellipsoid plus numerical
                    cross-checks (quadrature and Ruelle time-average).
``bound-scan``      systolic-ratio / Ruelle survey; CSV (and optional SVG
                    scatter with the ellipsoid arc) output.
``counterexample``  two-stage disk construction pushed through the open
                    book; normalized invariants and convexity verdict.
``diskmap``         disk-map invariants for a config file: sigma statistics,
                    Calabi, Ruelle, periodic-point table.
``body``            full hypersurface analysis of a configured star-shaped
                    body, including the inscribed-ellipsoid sandwich check.

Exit codes: 0 ok, 2 bad input, 3 io error, 4 infeasible construction,
5 numeric instability.

Result envelopes are deterministic: identical config and seed produce
byte-identical JSON (floats printed with 17 significant digits, keys
sorted).  Wall-clock timings live in a separate ``timing`` block that sits
outside the determinism contract.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__, diskmap, errors, openbook, special
from . import hypersurface as hs

# ---------------------------------------------------------------------------
# Exit codes
# ---------------------------------------------------------------------------

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4
EXIT_UNSTABLE = 5

_INFEASIBLE = (errors.PackingInfeasible, errors.InfeasibleProfile, errors.NotConvex)
_UNSTABLE = (
    errors.StepUnstable,
    errors.NewtonDiverged,
    errors.SamplingTooCoarse,
    errors.DegenerateGradient,
    errors.NonPositiveVolume,
)


class CliError(Exception):
    """Carries an exit code along with the message."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Deterministic serialization
# ---------------------------------------------------------------------------


def _round17(value: Any) -> Any:
    """Recursively rewrite floats as 17-significant-digit strings tagged for
    raw emission, so the JSON bytes do not depend on repr vagaries."""
    if isinstance(value, dict):
        return {k: _round17(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_round17(v) for v in value]
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    if isinstance(value, (float, np.floating)):
        return _RawFloat(float(value))
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_round17(v) for v in value.tolist()]
    raise TypeError(f"cannot serialize {type(value)!r}")


class _RawFloat:
    def __init__(self, x: float):
        self.x = x


class _Encoder(json.JSONEncoder):
    def default(self, o):  # pragma: no cover - only _RawFloat reaches here
        raise TypeError(o)

    def iterencode(self, o, _one_shot=False):
        for chunk in super().iterencode(_strip(o), _one_shot=_one_shot):
            yield chunk


def _strip(o):
    if isinstance(o, _RawFloat):
        return _format_float(o.x)
    if isinstance(o, dict):
        return {k: _strip(v) for k, v in o.items()}
    if isinstance(o, list):
        return [_strip(v) for v in o]
    return o


def _format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def envelope_json(envelope: Dict[str, Any], timing: Dict[str, float]) -> str:
    """Serialize the deterministic envelope plus a separate timing block."""
    payload = {"envelope": _strip(_round17(envelope))}
    payload["timing"] = {k: _format_float(float(v)) for k, v in sorted(timing.items())}
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc}") from exc


def _load_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(
            EXIT_BAD_INPUT,
            f"malformed JSON in {path}: {exc.msg} at line {exc.lineno} column {exc.colno}",
        ) from exc


def _provenance(seed: Optional[int] = None) -> Dict[str, Any]:
    out: Dict[str, Any] = {"package": "reebru", "version": __version__}
    if seed is not None:
        out["seed"] = int(seed)
    return out


# ---------------------------------------------------------------------------
# ellipsoid
# ---------------------------------------------------------------------------


def cmd_ellipsoid(args) -> int:
    if not (0.0 < args.a <= args.b):
        raise CliError(EXIT_BAD_INPUT, f"need 0 < a <= b, got a={args.a}, b={args.b}")
    t0 = time.perf_counter()
    closed = hs.ellipsoid_quantities(args.a, args.b)
    body = hs.Ellipsoid(args.a, args.b)
    quad = hs.surface_quadrature(body, *args.nodes)
    ints = hs.curvature_integrals(body, quad, diameter_samples=1024)
    est = hs.ruelle_invariant(
        body,
        quad=hs.surface_quadrature(body, *[max(4, n // 2) for n in args.nodes]),
        horizon=args.time_horizon,
    )

    def rel(x, y):
        return abs(x - y) / abs(y)

    results = {
        "closed": {k: v for k, v in closed.items()},
        "quadrature": {
            "area": ints["area"],
            "total_mean_curvature": ints["total_mean_curvature"],
            "contact_volume": ints["contact_volume"],
            "relative_error": {
                "area": rel(ints["area"], closed["area"]),
                "total_mean_curvature": rel(
                    ints["total_mean_curvature"], closed["total_mean_curvature"]
                ),
                "contact_volume": rel(ints["contact_volume"], closed["contact_volume"]),
            },
        },
        "ruelle": {
            "value": est.value,
            "relative_error": rel(est.value, closed["ruelle"]),
            "horizon": est.horizon,
            "half_horizon_gap": est.diagnostic,
        },
    }
    envelope = {
        "command": "ellipsoid",
        "inputs": {"a": args.a, "b": args.b, "nodes": list(args.nodes),
                   "time_horizon": est.horizon},
        "results": results,
        "provenance": _provenance(),
    }
    _emit(envelope_json(envelope, {"wall_s": time.perf_counter() - t0}), args.json)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bound-scan
# ---------------------------------------------------------------------------

_CSV_HEADER = ["label", "sys", "ru", "product"]


def _scan_rows_ellipsoid_closed(samples: int) -> List[Dict[str, Any]]:
    # closed-form rows at unit contact volume; the product identity
    # ru * sqrt(sys) = sys + 1 is exact here
    ratios = [1.0 + 3.0 * k for k in range(samples)]
    rows = []
    for r in ratios:
        a, b = 1.0 / math.sqrt(r), math.sqrt(r)
        q = hs.ellipsoid_quantities(a, b)
        sysr = q["systolic_ratio"]
        ru = q["ruelle"]
        rows.append(
            {
                "label": f"ellipsoid_closed_r{r:g}",
                "sys": sysr,
                "ru": ru,
                "product": ru * math.sqrt(sysr),
            }
        )
    return rows


def _scan_rows_survey(samples: int, seed: int) -> List[Dict[str, Any]]:
    survey = hs.bound_experiment(
        n_random=samples, seed=seed, ellipsoid_ratios=(), nodes=(8, 12, 12)
    )
    rows = []
    for row in survey.rows:
        rows.append(
            {
                "label": row.label,
                "sys": row.systolic_ratio,
                "ru": row.ruelle,
                "product": row.product,
            }
        )
    return rows


def _scan_csv(rows: List[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_HEADER)
    for row in rows:
        writer.writerow(
            [
                row["label"],
                _format_float(row["sys"]),
                _format_float(row["ru"]),
                _format_float(row["product"]),
            ]
        )
    return buf.getvalue()


def _scan_svg(rows: List[Dict[str, Any]]) -> str:
    """Scatter of (sys, ru) with the ellipsoid arc ru = sqrt(sys) + 1/sqrt(sys)."""
    width, height, margin = 640, 480, 56
    xs = [row["sys"] for row in rows]
    ys = [row["ru"] for row in rows]
    x_lo, x_hi = 0.0, max(1.05, max(xs) * 1.1)
    y_lo, y_hi = 0.0, max(3.2, max(ys) * 1.1)

    def px(x):
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def py(y):
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        'stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        'font-size="14">systolic ratio</text>',
        f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 16 {height / 2:.1f})">Ruelle</text>',
    ]
    # ellipsoid arc
    arc_pts = []
    for k in range(201):
        s = max(x_lo + 1e-4, 1e-4) + (x_hi - 1e-4) * k / 200.0
        if s <= 0:
            continue
        r = math.sqrt(s) + 1.0 / math.sqrt(s)
        if y_lo <= r <= y_hi:
            arc_pts.append(f"{px(s):.2f},{py(r):.2f}")
    parts.append(
        '<polyline fill="none" stroke="#777777" stroke-dasharray="5,4" points="'
        + " ".join(arc_pts)
        + '"/>'
    )
    for row in rows:
        parts.append(
            f'<circle cx="{px(row["sys"]):.2f}" cy="{py(row["ru"]):.2f}" r="4" '
            'fill="#1f5fbf" fill-opacity="0.8"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_bound_scan(args) -> int:
    if args.samples < 1:
        raise CliError(EXIT_BAD_INPUT, f"need samples >= 1, got {args.samples}")
    t0 = time.perf_counter()
    if args.ellipsoids_only:
        rows = _scan_rows_ellipsoid_closed(args.samples)
    else:
        rows = _scan_rows_survey(args.samples, args.seed)
    if any(not math.isfinite(row["product"]) for row in rows):
        raise CliError(EXIT_UNSTABLE, "non-finite product in scan rows")
    _emit(_scan_csv(rows), args.csv)
    if args.svg is not None:
        _emit(_scan_svg(rows), args.svg)
    envelope = {
        "command": "bound-scan",
        "inputs": {
            "samples": args.samples,
            "seed": args.seed,
            "ellipsoids_only": bool(args.ellipsoids_only),
        },
        "results": {"rows": rows},
        "provenance": _provenance(args.seed),
    }
    _emit(envelope_json(envelope, {"wall_s": time.perf_counter() - t0}), args.json)
    return EXIT_OK


# ---------------------------------------------------------------------------
# counterexample
# ---------------------------------------------------------------------------


def cmd_counterexample(args) -> int:
    if args.mode not in ("small", "large"):
        raise CliError(EXIT_BAD_INPUT, f"mode must be small|large, got {args.mode!r}")
    if args.kappa < 10.0:
        raise CliError(
            EXIT_BAD_INPUT,
            f"two-stage construction needs kappa >= 10, got {args.kappa}",
        )
    t0 = time.perf_counter()
    params, inv = openbook.counterexample(
        args.mode, args.kappa, period_bound=args.period_bound
    )
    envelope = {
        "command": "counterexample",
        "inputs": {
            "mode": args.mode,
            "kappa": args.kappa,
            "period_bound": args.period_bound,
        },
        "results": {
            "volume": inv.volume,
            "ruelle": inv.ruelle,
            "min_action": inv.min_action,
            "systolic_ratio": inv.systolic_ratio,
            "dynamically_convex": inv.dynamically_convex,
        },
        "parameters": {
            "n": params.n,
            "disk_count": len(params.disks),
            "delta": params.delta,
            "twist": params.twist,
            "max_diameter": params.max_diameter,
        },
        "provenance": _provenance(),
    }
    _emit(envelope_json(envelope, {"wall_s": time.perf_counter() - t0}), args.json)
    return EXIT_OK


# ---------------------------------------------------------------------------
# diskmap
# ---------------------------------------------------------------------------


def _params_from_config(cfg: Any, path: str) -> special.SpecialParams:
    if not isinstance(cfg, dict):
        raise CliError(EXIT_BAD_INPUT, f"{path}: top-level config must be an object")

    def need(key, typ, default=None, required=False):
        if key not in cfg:
            if required:
                raise CliError(EXIT_BAD_INPUT, f"{path}: missing field {key!r}")
            return default
        val = cfg[key]
        if not isinstance(val, typ):
            raise CliError(
                EXIT_BAD_INPUT,
                f"{path}: field {key!r} must be {typ.__name__}, got {type(val).__name__}",
            )
        return val

    n = need("n", int, required=True)
    delta = float(need("delta", (int, float), default=0.05))
    twist = float(need("R", (int, float), default=0.0))
    disks_cfg = cfg.get("disks")
    packing = cfg.get("packing")
    if disks_cfg is not None and packing is not None:
        raise CliError(
            EXIT_BAD_INPUT, f"{path}: give either 'disks' or 'packing', not both"
        )
    if disks_cfg is not None:
        if not isinstance(disks_cfg, list):
            raise CliError(EXIT_BAD_INPUT, f"{path}: 'disks' must be a list")
        disks = []
        for k, d in enumerate(disks_cfg):
            loc = f"{path}: disks[{k}]"
            if not isinstance(d, dict) or "center" not in d or "radius" not in d:
                raise CliError(
                    EXIT_BAD_INPUT, f"{loc} needs 'center' [x, y] and 'radius'"
                )
            center = d["center"]
            if not (isinstance(center, list) and len(center) == 2):
                raise CliError(EXIT_BAD_INPUT, f"{loc}: 'center' must be [x, y]")
            disks.append(
                special.Disk((float(center[0]), float(center[1])), float(d["radius"]))
            )
        disks = tuple(disks)
    elif packing is not None:
        if not isinstance(packing, dict) or "target_area" not in packing:
            raise CliError(
                EXIT_BAD_INPUT, f"{path}: 'packing' needs a 'target_area' field"
            )
        disks = special.pack_sector_rings(
            n, delta=delta, target_area=float(packing["target_area"])
        )
    else:
        disks = ()
    try:
        return special.SpecialParams(n=n, disks=disks, delta=delta, twist=twist)
    except (ValueError, errors.PreconditionViolated) as exc:
        raise CliError(EXIT_BAD_INPUT, f"{path}: {exc}") from exc


def cmd_diskmap(args) -> int:
    cfg = _load_json(args.config)
    params = _params_from_config(cfg, args.config)
    warnings: List[str] = []
    if params.twist <= -2.0:
        warnings.append(
            "periodic-point Lemma hypothesis R > -2 violated; "
            "action/rotation lower bounds do not apply"
        )
    t0 = time.perf_counter()
    ham = special.build_special_hamiltonian(params, check=False)
    setup = special.validate_setup(params)
    cal = diskmap.calabi(ham, n_r=args.grid, n_theta=args.grid)
    ru = diskmap.ruelle_diskmap(ham, k=args.iters, n_r=args.grid, n_theta=args.grid)
    report = special.find_periodic_points(ham, max_period=args.period_bound,
                                          grid=args.seed_grid)
    table = [
        {
            "period": pt.period,
            "action": pt.action,
            "rotation": pt.rotation,
            "degenerate": bool(pt.degenerate),
        }
        for pt in report.points
    ]
    envelope = {
        "command": "diskmap",
        "inputs": {
            "config": cfg,
            "iters": args.iters,
            "grid": args.grid,
            "period_bound": args.period_bound,
        },
        "results": {
            "sigma": {
                "calabi_predicted": special.predicted_calabi(params),
                "ruelle_predicted": special.predicted_ruelle(params),
                "max_diameter": params.max_diameter,
                "validation": setup,
            },
            "calabi": {"value": cal.value, "uncertainty": cal.uncertainty},
            "ruelle": {
                "value": ru.value,
                "uncertainty": ru.uncertainty,
                "k": ru.k,
            },
            "periodic_points": table,
            "non_isolated_families": len(report.non_isolated),
        },
        "warnings": warnings,
        "provenance": _provenance(),
    }
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(envelope_json(envelope, {"wall_s": time.perf_counter() - t0}), args.json)
    return EXIT_OK


# ---------------------------------------------------------------------------
# body
# ---------------------------------------------------------------------------


def _body_from_config(cfg: Any, path: str):
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise CliError(EXIT_BAD_INPUT, f"{path}: body config needs a 'kind' field")
    kind = cfg["kind"]
    try:
        if kind == "ellipsoid":
            return hs.Ellipsoid(float(cfg["a"]), float(cfg["b"]))
        if kind == "quadratic":
            form = np.asarray(cfg["form"], dtype=float)
            center = np.asarray(cfg.get("center", [0.0] * 4), dtype=float)
            return hs.QuadraticBody(form, center)
        if kind == "quartic":
            return hs.QuarticBody(
                np.asarray(cfg["form"], dtype=float),
                np.asarray(cfg["directions"], dtype=float),
                np.asarray(cfg["coefficients"], dtype=float),
                np.asarray(cfg.get("center", [0.0] * 4), dtype=float),
            )
        if kind == "random":
            rng = np.random.default_rng(int(cfg.get("seed", 0)))
            return hs.random_convex_body(rng)
    except KeyError as exc:
        raise CliError(EXIT_BAD_INPUT, f"{path}: missing field {exc}") from exc
    except (ValueError, errors.PreconditionViolated) as exc:
        raise CliError(EXIT_BAD_INPUT, f"{path}: {exc}") from exc
    raise CliError(EXIT_BAD_INPUT, f"{path}: unknown body kind {kind!r}")


def cmd_body(args) -> int:
    cfg = _load_json(args.config)
    body = _body_from_config(cfg, args.config)
    t0 = time.perf_counter()
    n = args.nodes
    quad = hs.surface_quadrature(body, max(2, n // 2) * 2, n, n)
    ints = hs.curvature_integrals(body, quad, diameter_samples=2048)
    est = hs.ruelle_invariant(body, quad=quad, horizon=args.time_horizon)
    search = hs.closed_orbit_search(body)
    sandwich = hs.sandwich_check(body)
    min_action = search.min_action
    sysr = (
        None
        if min_action is None
        else min_action**2 / ints["contact_volume"]
    )
    envelope = {
        "command": "body",
        "inputs": {
            "config": cfg,
            "time_horizon": est.horizon,
            "nodes": n,
        },
        "results": {
            "integrals": ints,
            "ruelle": {
                "value": est.value,
                "half_horizon_gap": est.diagnostic,
                "bracket_low": ints["s_ii_integral"] / (2.0 * math.pi),
                "bracket_high": 3.0 * ints["total_mean_curvature"] / (2.0 * math.pi),
            },
            "orbit_search": {
                "min_action": min_action,
                "actions": list(search.actions),
                "status": search.label,
                "inconclusive": search.inconclusive,
            },
            "systolic_ratio": sysr,
            "sandwich": {
                "a": sandwich.a,
                "b": sandwich.b,
                "all_within": sandwich.all_within,
                "rows": [
                    {
                        "quantity": row.quantity,
                        "measured": row.measured,
                        "predicted": row.predicted,
                        "ratio": row.ratio,
                    }
                    for row in sandwich.rows
                ],
            },
        },
        "provenance": _provenance(),
    }
    _emit(envelope_json(envelope, {"wall_s": time.perf_counter() - t0}), args.json)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reebru",
        description="Invariants of Reeb flows and Hamiltonian disk maps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ellipsoid", help="closed forms plus numerical cross-checks")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--nodes", type=int, nargs=3, default=(16, 16, 16),
                   metavar=("N_ETA", "N1", "N2"))
    p.add_argument("--time-horizon", type=float, default=None)
    p.add_argument("--json", type=str, default=None, help="write envelope here")
    p.set_defaults(func=cmd_ellipsoid)

    p = sub.add_parser("bound-scan", help="systolic/Ruelle survey to CSV/SVG")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", type=str, required=True)
    p.add_argument("--svg", type=str, default=None)
    p.add_argument("--json", type=str, default=None)
    p.add_argument("--ellipsoids-only", action="store_true")
    p.set_defaults(func=cmd_bound_scan)

    p = sub.add_parser("counterexample", help="two-stage construction, open book")
    p.add_argument("--mode", type=str, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--period-bound", type=int, default=None)
    p.add_argument("--json", type=str, default=None)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("diskmap", help="disk-map invariants from a config file")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--iters", type=int, default=16, help="Birkhoff iterate count")
    p.add_argument("--grid", type=int, default=32, help="quadrature nodes per axis")
    p.add_argument("--period-bound", type=int, default=3)
    p.add_argument("--seed-grid", type=int, default=21,
                   help="periodic-point search grid")
    p.add_argument("--json", type=str, default=None)
    p.set_defaults(func=cmd_diskmap)

    p = sub.add_parser("body", help="full hypersurface analysis")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--time-horizon", type=float, default=None)
    p.add_argument("--nodes", type=int, default=12)
    p.add_argument("--json", type=str, default=None)
    p.set_defaults(func=cmd_body)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad input, which matches our contract
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except _INFEASIBLE as exc:
        print(f"error: infeasible construction: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except _UNSTABLE as exc:
        print(f"error: numeric instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except errors.PreconditionViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
