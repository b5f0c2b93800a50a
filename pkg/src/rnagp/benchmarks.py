"""Synthetic multi-fidelity test functions and the repetition harness.

Six families, each a hierarchy of two or three deterministic simulators
over a box; level 1 is always the cheapest and least accurate member.
Default sizes follow the usual published configurations for these
functions; three-level default costs extend the (1, 3) two-level pattern
geometrically.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .active_learning import AlOptions, AlTrace, CostModel, al_loop
from .data import MultiFidelityDataset
from .design import nested_design
from .emulator import RnaEmulator
from .gp import FitOptions, fit_level
from .kernels import KernelKind
from .metrics import crps, rmse

__all__ = [
    "PROBLEMS",
    "SyntheticProblem",
    "crps",
    "evaluate",
    "get_problem",
    "make_dataset",
    "rmse",
    "run_experiment",
]


@dataclass(frozen=True)
class SyntheticProblem:
    name: str
    dim: int
    levels: int
    bounds: np.ndarray
    evaluators: tuple[Callable[[np.ndarray], np.ndarray], ...]
    default_sizes: tuple[int, ...]
    default_costs: tuple[float, ...]

    def evaluate(self, level: int, x: np.ndarray) -> np.ndarray:
        """f_level at one point (d,) or a batch (m, d), bounds-checked."""
        if not 1 <= level <= self.levels:
            raise ValueError(f"level {level} outside 1..{self.levels}")
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if pts.shape[1] != self.dim:
            raise ValueError(f"{self.name} expects {self.dim} coordinates")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        slack = 1e-9 * np.maximum(hi - lo, 1.0)
        if np.any(pts < lo - slack) or np.any(pts > hi + slack):
            raise ValueError(f"input outside the {self.name} domain")
        vals = self.evaluators[level - 1](pts)
        return vals if np.ndim(x) > 1 else float(vals[0])

    def sample_inputs(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return lo + rng.uniform(size=(n, self.dim)) * (hi - lo)


def evaluate(problem: SyntheticProblem, level: int, x: np.ndarray):
    return problem.evaluate(level, x)


# ---------------------------------------------------------------------------
# the function families


def _perdikaris_f1(x):
    return np.sin(8.0 * np.pi * x[:, 0])


def _perdikaris_f2(x):
    return (x[:, 0] - np.sqrt(2.0)) * _perdikaris_f1(x) ** 2


def _park_f2(x):
    x1, x2, x3, x4 = x.T
    # (x1/2)(sqrt(1 + (x2 + x3^2) x4 / x1^2) - 1), written to stay finite
    # as x1 -> 0
    root = np.sqrt(x1 ** 2 + (x2 + x3 ** 2) * x4)
    return 0.5 * (root - x1) + (x1 + 3.0 * x4) * np.exp(1.0 + np.sin(x3))


def _park_f1(x):
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    return ((1.0 + np.sin(x1) / 10.0) * _park_f2(x)
            - 2.0 * x1 + x2 ** 2 + x3 ** 2 + 0.5)


def _branin_f3(x):
    x1, x2 = x[:, 0], x[:, 1]
    return ((-1.275 * x1 ** 2 / np.pi ** 2 + 5.0 * x1 / np.pi + x2 - 6.0) ** 2
            + (10.0 - 5.0 / (4.0 * np.pi)) * np.cos(x1) + 10.0)


def _branin_f2(x):
    inner = _branin_f3(x)
    if np.any(inner < 0):
        raise ValueError("square root of a negative mid-level value")
    x1, x2 = x[:, 0], x[:, 1]
    return (10.0 * np.sqrt(inner) + 2.0 * (x1 - 0.5)
            - 3.0 * (3.0 * x2 - 1.0) - 1.0)


def _branin_f1(x):
    return _branin_f2(1.2 * (x + 2.0)) - 3.0 * x[:, 1] + 1.0


def _borehole_terms(x):
    rw, r, tu, hu, tl, hl, length, kw = x.T
    log_ratio = np.log(r / rw)
    core = 2.0 * length * tu / (log_ratio * rw ** 2 * kw) + tu / tl
    return tu * (hu - hl) / log_ratio, core


def _borehole_f1(x):
    num, core = _borehole_terms(x)
    return 2.0 * np.pi * num / (1.0 + core)


def _borehole_f2(x):
    num, core = _borehole_terms(x)
    return 5.0 * num / (1.5 + core)


def _currin_f2(x):
    x1, x2 = x[:, 0], x[:, 1]
    with np.errstate(divide="ignore"):
        damp = 1.0 - np.exp(np.where(x2 > 0, -1.0 / (2.0 * np.maximum(x2, 1e-300)), -np.inf))
    return (damp * (2300.0 * x1 ** 3 + 1900.0 * x1 ** 2 + 2092.0 * x1 + 60.0)
            / (100.0 * x1 ** 3 + 500.0 * x1 ** 2 + 4.0 * x1 + 20.0))


def _currin_f1(x):
    x1, x2 = x[:, 0], x[:, 1]
    up = x2 + 0.05
    down = np.maximum(x2 - 0.05, 0.0)
    corners = (_currin_f2(np.column_stack([x1 + 0.05, up]))
               + _currin_f2(np.column_stack([x1 + 0.05, down]))
               + _currin_f2(np.column_stack([x1 - 0.05, up]))
               + _currin_f2(np.column_stack([x1 - 0.05, down])))
    return 0.25 * corners


def _franke_f1(x):
    x1, x2 = x[:, 0], x[:, 1]
    return (0.75 * np.exp(-((9 * x1 - 2) ** 2 + (9 * x2 - 2) ** 2) / 4.0)
            + 0.75 * np.exp(-(9 * x1 + 1) ** 2 / 49.0 - (9 * x2 + 1) / 10.0)
            + 0.5 * np.exp(-((9 * x1 - 7) ** 2 + (9 * x2 - 3) ** 2) / 4.0)
            - 0.2 * np.exp(-(9 * x1 - 4) ** 2 - (9 * x2 - 7) ** 2))


def _franke_f2(x):
    f1 = _franke_f1(x)
    return np.exp(-1.4 * f1) * np.cos(3.5 * np.pi * f1)


def _franke_f3(x):
    return np.sin(2.0 * np.pi * (_franke_f2(x) - 1.0))


def _unit_box(d):
    return np.column_stack([np.zeros(d), np.ones(d)])


PROBLEMS: dict[str, SyntheticProblem] = {
    "perdikaris": SyntheticProblem(
        name="perdikaris", dim=1, levels=2, bounds=_unit_box(1),
        evaluators=(_perdikaris_f1, _perdikaris_f2),
        default_sizes=(13, 8), default_costs=(1.0, 3.0)),
    "park": SyntheticProblem(
        name="park", dim=4, levels=2, bounds=_unit_box(4),
        evaluators=(_park_f1, _park_f2),
        default_sizes=(40, 20), default_costs=(1.0, 3.0)),
    "branin": SyntheticProblem(
        name="branin", dim=2, levels=3,
        bounds=np.array([[-5.0, 10.0], [0.0, 15.0]]),
        evaluators=(_branin_f1, _branin_f2, _branin_f3),
        default_sizes=(20, 15, 10), default_costs=(1.0, 3.0, 9.0)),
    "borehole": SyntheticProblem(
        name="borehole", dim=8, levels=2,
        bounds=np.array([
            [0.05, 0.15], [100.0, 50_000.0], [63_070.0, 115_600.0],
            [990.0, 1_110.0], [63.1, 116.0], [700.0, 820.0],
            [1_120.0, 1_680.0], [9_855.0, 12_045.0]]),
        evaluators=(_borehole_f1, _borehole_f2),
        default_sizes=(60, 30), default_costs=(1.0, 3.0)),
    "currin": SyntheticProblem(
        name="currin", dim=2, levels=2, bounds=_unit_box(2),
        evaluators=(_currin_f1, _currin_f2),
        default_sizes=(20, 10), default_costs=(1.0, 3.0)),
    "franke": SyntheticProblem(
        name="franke", dim=2, levels=3, bounds=_unit_box(2),
        evaluators=(_franke_f1, _franke_f2, _franke_f3),
        default_sizes=(20, 15, 10), default_costs=(1.0, 3.0, 9.0)),
}


def get_problem(name: str) -> SyntheticProblem:
    try:
        return PROBLEMS[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}"
        ) from None


# ---------------------------------------------------------------------------
# dataset assembly and the repetition harness


def make_dataset(problem: SyntheticProblem, sizes=None, seed: int = 0,
                 costs=None, maximin_candidates: int = 20) -> MultiFidelityDataset:
    """Nested design over the problem box, evaluated at every level."""
    sizes = tuple(sizes) if sizes is not None else problem.default_sizes
    costs = tuple(costs) if costs is not None else problem.default_costs
    if len(sizes) != problem.levels:
        raise ValueError(f"{problem.name} has {problem.levels} levels, "
                         f"got sizes {sizes}")
    nd = nested_design(sizes, problem.dim, seed=seed,
                       maximin_candidates=maximin_candidates)
    designs = nd.map_to_bounds(problem.bounds)
    outputs = tuple(problem.evaluators[lv](designs[lv])
                    for lv in range(problem.levels))
    return MultiFidelityDataset(bounds=problem.bounds, designs=designs,
                                outputs=outputs, costs=costs)


def _single_level_rmse(dataset: MultiFidelityDataset, kind, options,
                       test_x, test_y) -> float:
    """Plain GP on the top-level points alone, as a baseline."""
    top = dataset.levels
    model = fit_level(dataset.designs[top - 1], dataset.outputs[top - 1],
                      kind, options,
                      box=(dataset.bounds[:, 0], dataset.bounds[:, 1]))
    k = model.cross_correlation(test_x)
    mu = model.alpha + k @ model.kinv_resid
    return rmse(mu, test_y)


def run_experiment(problem, kind=KernelKind.SQEXP, sizes=None, reps: int = 20,
                   seed: int = 0, mode: str = "emulation", strategy: str = "alm",
                   budget: float = 0.0, costs=None, n_test: int = 1000,
                   fit_options: FitOptions | None = None,
                   al_options: AlOptions | None = None,
                   baseline: bool = False) -> list[dict]:
    """Repeated fit-and-score runs; one result row per repetition.

    Every repetition redraws the nested design from its own derived seed,
    evaluates the simulators, fits, and scores RMSE/CRPS on uniformly
    drawn test points (seeded independently of the designs). In "al" mode
    the budgeted loop runs afterwards and the trace is attached to the
    row. Failures are recorded in the row, not raised.
    """
    if isinstance(problem, str):
        problem = get_problem(problem)
    if reps < 1:
        raise ValueError("need at least one repetition")
    if mode not in ("emulation", "al"):
        raise ValueError(f"mode must be 'emulation' or 'al', got {mode!r}")
    kind = KernelKind.parse(kind)
    fit_options = fit_options or FitOptions()
    costs = tuple(costs) if costs is not None else problem.default_costs

    root = np.random.SeedSequence(seed)
    test_seed, design_root = root.spawn(2)
    test_rng = np.random.default_rng(test_seed)
    test_x = problem.sample_inputs(n_test, test_rng)
    test_y = problem.evaluators[problem.levels - 1](test_x)
    rep_seeds = design_root.spawn(reps)

    rows = []
    for rep in range(reps):
        design_seed = int(rep_seeds[rep].generate_state(1)[0] % 2**31)
        row: dict = {"rep": rep, "problem": problem.name, "kernel": kind.value,
                     "mode": mode, "design_seed": design_seed}
        started = time.perf_counter()
        try:
            dataset = make_dataset(problem, sizes=sizes, seed=design_seed,
                                   costs=costs)
            emulator = RnaEmulator.fit(dataset, kind=kind, options=fit_options)
            pm = emulator.predict(test_x)
            row["rmse"] = rmse(pm.mean, test_y)
            row["crps"] = crps(pm.mean, pm.variance, test_y)
            if baseline:
                row["rmse_single"] = _single_level_rmse(
                    dataset, kind, fit_options, test_x, test_y)
            if mode == "al":
                opts = al_options or AlOptions()
                opts = AlOptions(**{**opts.__dict__,
                                    "seed": design_seed,
                                    "test_inputs": test_x,
                                    "test_truth": test_y,
                                    "fit_options": fit_options})
                trace = al_loop(problem.evaluate, dataset, strategy,
                                CostModel(costs), budget, kind=kind,
                                options=opts)
                row["trace"] = trace
                row["final_rmse"] = (trace.records[-1].rmse
                                     if trace.records else row["rmse"])
                row["accrued_cost"] = trace.accrued_cost
                if trace.error:
                    row["error"] = trace.error
        except Exception as exc:  # noqa: BLE001 - batch isolation
            row["error"] = f"{type(exc).__name__}: {exc}"
        row["seconds"] = time.perf_counter() - started
        rows.append(row)
    return rows
