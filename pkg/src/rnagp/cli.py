"""Command-line surface.

Subcommands: fit, predict, al, benchmark, design, validate.  Datasets,
emulators and run configurations are JSON; tabular results are CSV; chart
data is a self-contained SVG.  Every output file is written atomically.

Exit codes: 0 success, 1 usage, 2 validation or parse failure, 3 adapter
or runtime failure.  Failures also write one machine-readable JSON line
{"error": kind, "message": ...} to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .active_learning import STRATEGIES, AlOptions, AlTrace, CostModel, al_loop
from .adapters import (DEFAULT_TIMEOUT, AdapterError, BuiltinAdapter,
                       CachedSimulator, resolve_adapter)
from .benchmarks import PROBLEMS, get_problem, run_experiment
from .data import DatasetError, MultiFidelityDataset
from .design import nested_design, validate_nested
from .emulator import RnaEmulator
from .gp import FitError, FitOptions
from .kernels import ConditioningError, KernelKind
from .serialize import (RunConfig, SerializationError, atomic_write_text,
                        dataset_fingerprint, load_dataset, load_emulator,
                        load_run_config, save_dataset, save_emulator)

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_RUNTIME = 3

_KERNEL_NAMES = [k.value for k in KernelKind]


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through our exit-code scheme."""

    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", f"{self.prog}: {message}")


def _emit_error(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2))


# ---------------------------------------------------------------------------
# shared plumbing


def _config_from(args) -> RunConfig:
    config = load_run_config(args.config) if args.config else RunConfig()
    if getattr(args, "kernel", None):
        config = replace(config, kernel=KernelKind.parse(args.kernel))
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "strategy", None):
        config = replace(config, strategy=args.strategy)
    if getattr(args, "budget", None) is not None:
        if args.budget < 0:
            raise CliError(EXIT_USAGE, "usage", "--budget must be nonnegative")
        config = replace(config, budget=float(args.budget))
    return config


def _out_path(flag_value, config: RunConfig, key: str, flag: str,
              required: bool = True):
    path = flag_value or config.paths.get(key)
    if required and not path:
        raise CliError(EXIT_USAGE, "usage",
                       f"no output path: pass {flag} or set paths.{key}")
    return path


def _fit_options(config: RunConfig) -> FitOptions:
    return replace(config.fit, rng_seed=config.seed)


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _load_points(path, dim: int) -> np.ndarray:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SerializationError(f"cannot read points file {path}: {exc}") from exc
    if not isinstance(payload, list):
        raise SerializationError("points file must hold a JSON array of rows")
    if not payload:
        return np.empty((0, dim))
    pts = np.asarray(payload, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise SerializationError(
            f"points must be rows of {dim} coordinates, got shape {pts.shape}"
        )
    return pts


def _grid_points(n: int, bounds: np.ndarray) -> np.ndarray:
    d = bounds.shape[0]
    if d == 1:
        return np.linspace(bounds[0, 0], bounds[0, 1], n)[:, None]
    if d == 2:
        ax = [np.linspace(lo, hi, n) for lo, hi in bounds]
        g0, g1 = np.meshgrid(ax[0], ax[1], indexing="ij")
        return np.column_stack([g0.ravel(), g1.ravel()])
    raise CliError(EXIT_USAGE, "usage",
                   f"--grid supports 1 or 2 input dimensions, dataset has {d}")


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    config = _config_from(args)
    dataset = load_dataset(args.dataset)
    emulator = RnaEmulator.fit(dataset, config.kernel, _fit_options(config))
    out = _out_path(args.out, config, "emulator", "--out")
    save_emulator(emulator, out)

    report = {
        "dataset": str(args.dataset),
        "dataset_sha256": dataset_fingerprint(dataset),
        "kernel": config.kernel.value,
        "emulator": str(out),
        "levels": [
            {
                "level": lv,
                "n": model.n,
                "profiled_nll": model.nll,
                "alpha": model.alpha,
                "tau_sq": model.tau_sq,
                "lengthscales": model.scales.as_vector().tolist(),
            }
            for lv, model in enumerate(emulator.models, start=1)
        ],
    }
    report_path = args.report or config.paths.get("report")
    if report_path:
        atomic_write_text(report_path, json.dumps(report, indent=2) + "\n")
    _emit(report)
    return EXIT_OK


def cmd_predict(args) -> int:
    config = _config_from(args)
    dataset = load_dataset(args.dataset)
    emulator = load_emulator(args.emulator, dataset)
    if args.points is not None:
        pts = _load_points(args.points, dataset.dim)
    else:
        pts = _grid_points(args.grid, dataset.bounds)

    levels = emulator.levels
    decompose = 2 <= levels <= 3
    header = [f"x{j + 1}" for j in range(dataset.dim)] + ["mean", "var"]
    if decompose:
        header += [f"v{l + 1}" for l in range(levels)]

    rows: list[list] = []
    if pts.shape[0]:
        pm = emulator.predict(pts)
        mean, var = pm.mean, pm.variance
        if decompose and levels == 2:
            contrib = emulator.decompose_variance_two_batch(pts)
        elif decompose:
            rng = np.random.default_rng(config.seed)
            cols = [emulator.decompose_variance(
                        x, n_samples=args.decomposition_samples,
                        rng=rng).contributions
                    for x in pts]
            contrib = np.asarray(cols).T
        for i in range(pts.shape[0]):
            row = [_cell(float(v)) for v in pts[i]]
            row += [_cell(float(mean[i])), _cell(float(var[i]))]
            if decompose:
                row += [_cell(float(contrib[l, i])) for l in range(levels)]
            rows.append(row)

    out = _out_path(args.out, config, "predictions", "--out")
    _write_csv(out, header, rows)
    _emit({"predictions": str(out), "rows": len(rows),
           "decomposition": decompose})
    return EXIT_OK


def _trace_rows(trace: AlTrace, dim: int):
    header = (["step", "level"] + [f"x{j + 1}" for j in range(dim)]
              + ["criterion", "step_cost", "accrued_cost", "rmse", "crps"])
    rows = []
    for rec in trace.records:
        rows.append([rec.step, rec.level]
                    + [_cell(float(v)) for v in rec.location]
                    + [_cell(rec.criterion_value),
                       _cell(trace.costs.cumulative(rec.level)),
                       _cell(rec.accrued_cost),
                       _cell(rec.rmse), _cell(rec.crps)])
    return header, rows


def cmd_al(args) -> int:
    config = _config_from(args)
    dataset = load_dataset(args.dataset)

    if args.builtin:
        problem = get_problem(args.builtin)
        if problem.dim != dataset.dim or problem.levels != dataset.levels:
            raise DatasetError(
                f"{problem.name} is {problem.levels}-level in {problem.dim} "
                f"dimensions; dataset is {dataset.levels}-level in {dataset.dim}"
            )
        simulate = BuiltinAdapter(problem)
    else:
        simulate = resolve_adapter(args.adapter, timeout=args.timeout)

    trace_path = _out_path(args.out_trace, config, "trace", "--out-trace")
    dataset_out = _out_path(args.out_dataset, config, "dataset", "--out-dataset")
    cache_path = Path(trace_path).with_suffix(".cache.json")
    cached = CachedSimulator(simulate, cache_path)

    options = AlOptions(
        n_integration=config.n_integration,
        n_imputations=config.n_imputations,
        seed=config.seed,
        fit_options=_fit_options(config),
    )
    trace = al_loop(cached, dataset, config.strategy,
                    CostModel(dataset.costs), config.budget,
                    kind=config.kernel, options=options)

    # the partial trace and the grown dataset are worth keeping even when
    # the loop aborted; they are what post-mortems look at
    header, rows = _trace_rows(trace, dataset.dim)
    _write_csv(trace_path, header, rows)
    save_dataset(trace.dataset, dataset_out)

    _emit({
        "strategy": config.strategy,
        "budget": config.budget,
        "steps": len(trace.records),
        "accrued_cost": trace.accrued_cost,
        "simulator_calls": cached.calls,
        "trace": str(trace_path),
        "dataset": str(dataset_out),
        "error": trace.error,
    })
    if trace.error:
        _emit_error("adapter", trace.error)
        return EXIT_RUNTIME
    return EXIT_OK


def _quantiles(values) -> dict | None:
    vals = np.asarray([v for v in values if v is not None and np.isfinite(v)],
                      dtype=float)
    if vals.size == 0:
        return None
    qs = np.quantile(vals, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {"min": qs[0], "q25": qs[1], "median": qs[2],
            "q75": qs[3], "max": qs[4]}


def cmd_benchmark(args) -> int:
    if args.reps < 1:
        raise CliError(EXIT_USAGE, "usage", "--reps must be at least 1")
    config = _config_from(args)
    problem = get_problem(args.problem)
    sizes = (tuple(int(s) for s in args.sizes.split(",")) if args.sizes
             else problem.default_sizes)

    rows = run_experiment(
        problem, kind=config.kernel, sizes=sizes, reps=args.reps,
        seed=config.seed, mode=args.mode, strategy=config.strategy,
        budget=config.budget, n_test=args.n_test,
        fit_options=_fit_options(config),
        al_options=AlOptions(n_integration=config.n_integration,
                             n_imputations=config.n_imputations),
        baseline=args.baseline,
    )

    results_path = _out_path(args.out_results, config, "results", "--out-results")
    if args.mode == "emulation":
        header = ["rep", "design_seed", "rmse", "crps"]
        if args.baseline:
            header.append("rmse_single")
        header += ["seconds", "error"]
        table = []
        for row in rows:
            cells = [row["rep"], row["design_seed"],
                     _cell(row.get("rmse")), _cell(row.get("crps"))]
            if args.baseline:
                cells.append(_cell(row.get("rmse_single")))
            cells += [_cell(row["seconds"]), row.get("error", "")]
            table.append(cells)
        _write_csv(results_path, header, table)
    else:
        # long format, one row per loop step, step 0 being the seed design
        header = ["rep", "step", "level", "cost", "rmse", "crps"]
        table = []
        for row in rows:
            trace = row.get("trace")
            if trace is None:
                continue
            table.append([row["rep"], 0, "", _cell(0.0),
                          _cell(trace.initial_rmse), _cell(trace.initial_crps)])
            for rec in trace.records:
                table.append([row["rep"], rec.step, rec.level,
                              _cell(rec.accrued_cost),
                              _cell(rec.rmse), _cell(rec.crps)])
        _write_csv(results_path, header, table)

    failures = [row["error"] for row in rows if row.get("error")]
    summary = {
        "problem": problem.name,
        "kernel": config.kernel.value,
        "mode": args.mode,
        "reps": args.reps,
        "sizes": list(sizes),
        "seed": config.seed,
        "failures": len(failures),
        "rmse": _quantiles([row.get("rmse") for row in rows]),
        "crps": _quantiles([row.get("crps") for row in rows]),
    }
    if args.baseline:
        summary["rmse_single"] = _quantiles([row.get("rmse_single")
                                             for row in rows])
    if args.mode == "al":
        summary["strategy"] = config.strategy
        summary["budget"] = config.budget
        summary["final_rmse"] = _quantiles([row.get("final_rmse")
                                            for row in rows])
        summary["accrued_cost"] = _quantiles([row.get("accrued_cost")
                                              for row in rows])

    summary_path = _out_path(args.out_summary, config, "summary",
                             "--out-summary", required=False)
    if summary_path:
        atomic_write_text(summary_path, json.dumps(summary, indent=2) + "\n")

    svg_path = _out_path(args.svg, config, "svg", "--svg", required=False)
    if svg_path:
        if args.mode != "al":
            raise CliError(EXIT_USAGE, "usage",
                           "--svg plots metric against accrued cost, which "
                           "only an al run produces")
        series = []
        for row in rows:
            trace = row.get("trace")
            if trace is None:
                continue
            pts = [(0.0, trace.initial_rmse)]
            pts += [(rec.accrued_cost, rec.rmse) for rec in trace.records]
            pts = [(c, v) for c, v in pts if v is not None]
            if pts:
                series.append(pts)
        atomic_write_text(svg_path, _svg_metric_vs_cost(
            series, title=f"{problem.name}: {config.strategy}, budget "
                          f"{config.budget:g}",
            xlabel="accrued cost", ylabel="rmse"))

    _emit(summary)
    return EXIT_OK


def cmd_design(args) -> int:
    sizes = tuple(int(s) for s in args.sizes.split(","))
    if any(s < 1 for s in sizes):
        raise CliError(EXIT_USAGE, "usage", f"sizes must be positive, got {sizes}")
    nd = nested_design(sizes, args.dim, seed=args.seed,
                       maximin_candidates=args.candidates)
    designs = [x.tolist() for x in nd.designs]
    payload = {"dim": args.dim, "sizes": list(sizes), "seed": args.seed,
               "designs": designs}
    if args.bounds:
        bounds = _parse_bounds(args.bounds, args.dim)
        payload["bounds"] = bounds.tolist()
        payload["designs"] = [x.tolist() for x in nd.map_to_bounds(bounds)]
    atomic_write_text(args.out, json.dumps(payload, indent=2) + "\n")
    _emit({"design": str(args.out), "sizes": list(sizes), "dim": args.dim})
    return EXIT_OK


def _parse_bounds(text: str, dim: int) -> np.ndarray:
    try:
        pairs = [part.split(":") for part in text.split(",")]
        bounds = np.asarray([[float(a), float(b)] for a, b in pairs])
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_USAGE, "usage",
                       f"--bounds must look like lo:hi,lo:hi, got {text!r}") from exc
    if bounds.shape[0] != dim:
        raise CliError(EXIT_USAGE, "usage",
                       f"--bounds gives {bounds.shape[0]} pairs for {dim} dimensions")
    if np.any(bounds[:, 0] >= bounds[:, 1]):
        raise CliError(EXIT_USAGE, "usage", "--bounds pairs must satisfy lo < hi")
    return bounds


def cmd_validate(args) -> int:
    violations: list[str] = []
    try:
        dataset = load_dataset(args.dataset)
    except (SerializationError, DatasetError) as exc:
        # itemize nesting problems when the designs themselves are readable
        violations.append(str(exc))
        try:
            payload = json.loads(Path(args.dataset).read_text(encoding="utf-8"))
            designs = [np.asarray(x, dtype=float) for x in payload["designs"]]
            violations += [str(v) for v in validate_nested(designs)]
        except Exception:  # noqa: BLE001 - the parse error above stands
            pass
        _emit({"valid": False, "violations": violations})
        _emit_error("validation", violations[0])
        return EXIT_INVALID
    _emit({"valid": True, "violations": [],
           "dataset_sha256": dataset_fingerprint(dataset),
           "levels": dataset.levels, "dim": dataset.dim,
           "sizes": [x.shape[0] for x in dataset.designs]})
    return EXIT_OK


# ---------------------------------------------------------------------------
# SVG chart (metric against accrued cost, one line per repetition)


def _svg_metric_vs_cost(series: list[list[tuple[float, float]]],
                        title: str, xlabel: str, ylabel: str) -> str:
    width, height = 640, 400
    ml, mr, mt, mb = 64, 16, 30, 46

    xs = [c for run in series for c, _ in run]
    ys = [v for run in series for _, v in run]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * (width - ml - mr)

    def sy(y):
        return height - mb - (y - y0) / (y1 - y0) * (height - mt - mb)

    def poly(points):
        return " ".join(f"{sx(c):.2f},{sy(v):.2f}" for c, v in points)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>',
    ]

    # median and min-max band across runs on the union cost grid
    if series:
        grid = sorted({c for run in series for c, _ in run})
        interp = np.asarray([
            np.interp(grid, [c for c, _ in run], [v for _, v in run])
            for run in series
        ])
        lo = interp.min(axis=0)
        hi = interp.max(axis=0)
        med = np.median(interp, axis=0)
        band = (list(zip(grid, hi)) + list(zip(grid, lo))[::-1])
        parts.append(f'<polygon points="{poly(band)}" fill="#4878cf" '
                     'fill-opacity="0.18" stroke="none"/>')
        for run in series:
            parts.append(f'<polyline points="{poly(run)}" fill="none" '
                         'stroke="#4878cf" stroke-opacity="0.35" '
                         'stroke-width="1"/>')
        parts.append(f'<polyline points="{poly(list(zip(grid, med)))}" '
                     'fill="none" stroke="#1f3f8f" stroke-width="2.2"/>')

    ax_y, ax_x0, ax_x1 = height - mb, ml, width - mr
    parts.append(f'<line x1="{ax_x0}" y1="{ax_y}" x2="{ax_x1}" y2="{ax_y}" '
                 'stroke="black"/>')
    parts.append(f'<line x1="{ax_x0}" y1="{mt}" x2="{ax_x0}" y2="{ax_y}" '
                 'stroke="black"/>')
    for tick in np.linspace(x0, x1, 5):
        parts.append(f'<line x1="{sx(tick):.2f}" y1="{ax_y}" '
                     f'x2="{sx(tick):.2f}" y2="{ax_y + 5}" stroke="black"/>')
        parts.append(f'<text x="{sx(tick):.2f}" y="{ax_y + 19}" '
                     'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{tick:.4g}</text>')
    for tick in np.linspace(y0, y1, 5):
        parts.append(f'<line x1="{ax_x0 - 5}" y1="{sy(tick):.2f}" '
                     f'x2="{ax_x0}" y2="{sy(tick):.2f}" stroke="black"/>')
        parts.append(f'<text x="{ax_x0 - 8}" y="{sy(tick) + 4:.2f}" '
                     'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{tick:.4g}</text>')
    parts.append(f'<text x="{(ml + width - mr) / 2:.0f}" y="{height - 10}" '
                 'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{(mt + height - mb) / 2:.0f}" '
                 'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" transform="rotate(-90 16 '
                 f'{(mt + height - mb) / 2:.0f})">{ylabel}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> _Parser:
    parser = _Parser(prog="rnagp",
                     description="recursive multi-fidelity GP emulation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_config(p):
        p.add_argument("--config", help="run configuration JSON")
        p.add_argument("--kernel", choices=_KERNEL_NAMES,
                       help="override the configured kernel")
        p.add_argument("--seed", type=int, help="override the configured seed")

    p = sub.add_parser("fit", help="fit an emulator to a dataset")
    add_config(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="emulator JSON destination")
    p.add_argument("--report", help="also write the fit report here")
    p.set_defaults(run=cmd_fit)

    p = sub.add_parser("predict", help="posterior moments at points or on a grid")
    add_config(p)
    p.add_argument("--emulator", required=True)
    p.add_argument("--dataset", required=True,
                   help="the dataset the emulator was fitted on")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--points", help="JSON array of input rows")
    group.add_argument("--grid", type=int,
                       help="evaluate on an axis-aligned grid with this many "
                            "points per axis (1- and 2-d only)")
    p.add_argument("--out", help="predictions CSV destination")
    p.add_argument("--decomposition-samples", type=int, default=4000,
                   help="Monte Carlo draws per point for 3-level "
                        "variance decomposition")
    p.set_defaults(run=cmd_predict)

    p = sub.add_parser("al", help="run a budgeted acquisition loop")
    add_config(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--strategy", choices=list(STRATEGIES))
    p.add_argument("--budget", type=float)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--builtin", choices=sorted(PROBLEMS),
                       help="use a bundled synthetic simulator")
    group.add_argument("--adapter",
                       help="external simulator command (one JSON line on "
                            "stdin, one on stdout per evaluation)")
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT,
                   help="seconds before an adapter call is abandoned")
    p.add_argument("--out-trace", help="acquisition trace CSV destination")
    p.add_argument("--out-dataset", help="grown dataset destination")
    p.set_defaults(run=cmd_al)

    p = sub.add_parser("benchmark", help="repeated synthetic studies")
    add_config(p)
    p.add_argument("--problem", required=True, choices=sorted(PROBLEMS))
    p.add_argument("--mode", choices=["emulation", "al"], default="emulation")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--sizes", help="per-level design sizes, e.g. 20,10")
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--strategy", choices=list(STRATEGIES))
    p.add_argument("--budget", type=float)
    p.add_argument("--baseline", action="store_true",
                   help="also fit a high-fidelity-only GP per repetition")
    p.add_argument("--out-results", help="per-repetition CSV destination")
    p.add_argument("--out-summary", help="summary JSON destination")
    p.add_argument("--svg", help="metric-vs-cost chart destination (al mode)")
    p.set_defaults(run=cmd_benchmark)

    p = sub.add_parser("design", help="draw a nested space-filling design")
    p.add_argument("--sizes", required=True, help="e.g. 20,10 from low to high")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--candidates", type=int, default=20,
                   help="maximin candidates per level-1 draw")
    p.add_argument("--bounds", help="map the unit box to lo:hi,lo:hi,…")
    p.add_argument("--out", required=True)
    p.set_defaults(run=cmd_design)

    p = sub.add_parser("validate", help="check a dataset file")
    p.add_argument("--dataset", required=True)
    p.set_defaults(run=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.run(args)
    except CliError as exc:
        _emit_error(exc.kind, str(exc))
        return exc.code
    except (SerializationError, DatasetError) as exc:
        _emit_error("validation", str(exc))
        return EXIT_INVALID
    except (ValueError, NotImplementedError) as exc:
        _emit_error("validation", str(exc))
        return EXIT_INVALID
    except AdapterError as exc:
        _emit_error("adapter", str(exc))
        return EXIT_RUNTIME
    except (FitError, ConditioningError) as exc:
        _emit_error("runtime", str(exc))
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
