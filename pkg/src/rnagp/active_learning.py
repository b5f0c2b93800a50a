"""Cost-aware acquisition of new simulator runs.

Four strategies rank candidate (level, location) pairs:

* ald  -- per-level share of the top-level variance, per unit cost
* alm  -- the level's own predictive variance, per unit cost
* alc  -- expected reduction in integrated top-level variance after an
          imputed run at the candidate, per unit cost
* almc -- location chosen by top-level variance alone, level then chosen
          by the alc score at that location

Acquiring level l means running simulators 1..l at the chosen input
(nesting), so every criterion divides by the cumulative cost of the
levels it would trigger.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .data import MATCH_TOL, DatasetError, MultiFidelityDataset
from .emulator import ConditioningError, RnaEmulator
from .gp import FitOptions
from .kernels import KernelKind
from .metrics import crps, rmse

__all__ = [
    "STRATEGIES",
    "AcquisitionResult",
    "AlOptions",
    "AlRecord",
    "AlTrace",
    "CostModel",
    "alc_criterion",
    "ald_criterion",
    "alm_criterion",
    "almc_select",
    "al_loop",
    "optimize_acquisition",
    "select_acquisition",
]

STRATEGIES = ("ald", "alm", "alc", "almc")

_EXCLUDED = -np.inf
_PENALTY = 1e30


@dataclass(frozen=True)
class CostModel:
    """Per-level simulation costs, strictly increasing with fidelity."""

    per_level: tuple[float, ...]

    def __post_init__(self):
        per_level = tuple(float(c) for c in self.per_level)
        object.__setattr__(self, "per_level", per_level)
        if not per_level or any(c <= 0 for c in per_level):
            raise ValueError(f"costs must be positive, got {per_level}")
        if any(b <= a for a, b in zip(per_level, per_level[1:])):
            raise ValueError(f"costs must be strictly increasing, got {per_level}")

    @property
    def levels(self) -> int:
        return len(self.per_level)

    def cumulative(self, level: int) -> float:
        if not 1 <= level <= self.levels:
            raise ValueError(f"level {level} outside 1..{self.levels}")
        return float(sum(self.per_level[:level]))


@dataclass(frozen=True)
class AcquisitionResult:
    strategy: str
    level: int
    location: np.ndarray
    criterion_value: float
    cost_charged: float
    # level -> (argmax location, criterion value); for almc the location is
    # the shared stage-1 argmax and the values are stage-2 alc scores.
    per_level: dict[int, tuple[np.ndarray, float]]


@dataclass(frozen=True)
class AlRecord:
    step: int
    strategy: str
    level: int
    location: np.ndarray
    criterion_value: float
    simulated: dict[int, float]
    reused_levels: tuple[int, ...]
    accrued_cost: float
    rmse: float | None
    crps: float | None


@dataclass
class AlTrace:
    strategy: str
    budget: float
    costs: CostModel
    initial_rmse: float | None
    initial_crps: float | None
    records: list[AlRecord] = field(default_factory=list)
    error: str | None = None
    dataset: MultiFidelityDataset | None = None
    emulator: RnaEmulator | None = None

    @property
    def accrued_cost(self) -> float:
        return self.records[-1].accrued_cost if self.records else 0.0


@dataclass(frozen=True)
class AlOptions:
    """Loop and optimizer knobs shared by all strategies."""

    n_integration: int = 1000
    n_imputations: int = 100
    n_starts: int | None = None        # None -> 10 * dim
    grid_points: int = 201
    alc_grid_points: int = 51          # alc evaluations are much dearer
    polish_top: int = 3
    decomposition_samples: int = 10_000
    seed: int = 0
    max_steps: int | None = None
    test_inputs: np.ndarray | None = None
    test_truth: np.ndarray | None = None
    fit_options: FitOptions = field(default_factory=FitOptions)


# ---------------------------------------------------------------------------
# criteria


def _check_level(emulator: RnaEmulator, level: int) -> None:
    if not 1 <= level <= emulator.levels:
        raise ValueError(f"level {level} outside 1..{emulator.levels}")


def ald_criterion(emulator: RnaEmulator, x: np.ndarray, level: int,
                  costs: CostModel, n_samples: int = 10_000,
                  rng: np.random.Generator | None = None) -> float:
    """Level-l share of the top-level variance at x, per unit cost."""
    _check_level(emulator, level)
    if emulator.levels > 3:
        raise NotImplementedError(
            "variance decomposition (and hence ald) covers at most 3 levels"
        )
    x = np.asarray(x, dtype=float).ravel()
    dec = emulator.decompose_variance(x, n_samples=n_samples, rng=rng)
    value = float(dec.contributions[level - 1]) / costs.cumulative(level)
    return max(value, 0.0)


def alm_criterion(emulator: RnaEmulator, x: np.ndarray, level: int,
                  costs: CostModel) -> float:
    """Level-l predictive variance at x, per unit cost."""
    _check_level(emulator, level)
    x = np.asarray(x, dtype=float).ravel()
    var = float(emulator.predict(x[None, :]).variances[level - 1, 0])
    return max(var, 0.0) / costs.cumulative(level)


def _alc_value(emulator: RnaEmulator, x: np.ndarray, level: int,
               cum_cost: float, integration_points: np.ndarray,
               base_variance: np.ndarray, z: np.ndarray) -> float:
    dataset = emulator.dataset
    if dataset.find_point(level, x, tol=MATCH_TOL) is not None:
        return 0.0

    # levels below the acquisition where x is already observed keep their
    # stored output (no draw, no bordering); the value still feeds the
    # augmented input of the level above
    known: dict[int, float] = {}
    for s in range(1, level):
        idx = dataset.find_point(s, x, tol=MATCH_TOL)
        if idx is not None:
            known[s] = float(dataset.outputs[s - 1][idx])

    pm = emulator.predict(x[None, :], chunk=1)
    mu = pm.means[:level, 0]
    sd = np.sqrt(np.maximum(pm.variances[:level, 0], 0.0))
    chains = mu[None, :] + z[:, :level] * sd[None, :]
    for s, value in known.items():
        chains[:, s - 1] = value

    try:
        fan = emulator.imputed_top_variance(x, chains, integration_points,
                                            skip_levels=frozenset(known))
    except ConditioningError:
        # numerically duplicate bordering adds no information
        return 0.0
    mean_reduction = float(np.mean(base_variance[None, :] - fan))
    return max(mean_reduction, 0.0) / cum_cost


def alc_criterion(emulator: RnaEmulator, x: np.ndarray, level: int,
                  costs: CostModel, integration_points: np.ndarray,
                  n_imputations: int = 100, seed: int = 0,
                  base_variance: np.ndarray | None = None) -> float:
    """Mean drop in top-level variance over the integration sample, per cost.

    The drop is averaged over imputed futures: outputs at x for levels
    1..level are drawn from the current posterior, appended through
    bordered-inverse updates, and the fantasy emulator is re-evaluated at
    the integration points without refitting hyperparameters.
    """
    _check_level(emulator, level)
    x = np.asarray(x, dtype=float).ravel()
    integration_points = np.atleast_2d(np.asarray(integration_points, dtype=float))
    if integration_points.size == 0:
        raise ValueError("integration sample is empty")
    if base_variance is None:
        base_variance = emulator.predict(integration_points).variance
    z = np.random.default_rng(seed).standard_normal((n_imputations, emulator.levels))
    return _alc_value(emulator, x, level, costs.cumulative(level),
                      integration_points, base_variance, z)


# ---------------------------------------------------------------------------
# acquisition optimization


def _near_any(x: np.ndarray, points: np.ndarray | None, tol: float) -> bool:
    if points is None or len(points) == 0:
        return False
    return bool(np.max(np.abs(points - x), axis=1).min() <= tol)


def _coarse_grid(box: np.ndarray, grid_points: int) -> np.ndarray | None:
    d = len(box)
    if d == 1:
        return np.linspace(box[0, 0], box[0, 1], grid_points)[:, None]
    if d == 2:
        side = max(int(np.sqrt(grid_points)), 5)
        g1 = np.linspace(box[0, 0], box[0, 1], side)
        g2 = np.linspace(box[1, 0], box[1, 1], side)
        xx, yy = np.meshgrid(g1, g2, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])
    return None


def optimize_acquisition(criterion, box: np.ndarray, *,
                         n_starts: int | None = None, seed: int = 0,
                         design_points: np.ndarray | None = None,
                         exclude: np.ndarray | None = None,
                         exclude_tol: float = MATCH_TOL,
                         grid_points: int = 201, polish_top: int = 3,
                         batch=None) -> tuple[np.ndarray, float]:
    """Maximize a criterion over a box; returns (argmax, value).

    Starts are a seeded Latin hypercube plus jittered copies of the
    current design points, plus a coarse grid sweep in one or two
    dimensions; the best few starts get an L-BFGS-B polish.  Points
    within exclude_tol of an `exclude` row are disqualified.  `batch`
    optionally evaluates the criterion on an (m, d) array at once.
    """
    box = np.asarray(box, dtype=float)
    d = len(box)
    lo, hi = box[:, 0], box[:, 1]
    span = hi - lo
    if n_starts is None:
        n_starts = 10 * d
    rng = np.random.default_rng(seed)

    starts = [lo + qmc.LatinHypercube(d=d, seed=seed).random(n_starts) * span]
    if design_points is not None and len(design_points):
        picks = np.asarray(design_points, dtype=float)[:n_starts]
        jitter = rng.normal(scale=0.05, size=picks.shape) * span
        starts.append(np.clip(picks + jitter, lo, hi))
    grid = _coarse_grid(box, grid_points)
    if grid is not None:
        starts.append(grid)
    cand = np.vstack(starts)

    if batch is not None:
        values = np.asarray(batch(cand), dtype=float)
    else:
        values = np.array([criterion(c) for c in cand], dtype=float)
    values = np.where(np.isfinite(values), values, _EXCLUDED)
    if exclude is not None and len(exclude):
        bad = np.max(np.abs(cand[:, None, :] - exclude[None, :, :]), axis=2)
        values[np.min(bad, axis=1) <= exclude_tol] = _EXCLUDED

    order = np.argsort(values)[::-1]
    best_x, best_val = cand[order[0]].copy(), float(values[order[0]])

    def objective(x):
        if _near_any(x, exclude, exclude_tol):
            return _PENALTY
        v = criterion(x)
        return -v if np.isfinite(v) else _PENALTY

    failures = 0
    for idx in order[:polish_top]:
        if not np.isfinite(values[idx]):
            continue
        try:
            res = minimize(objective, cand[idx], method="L-BFGS-B",
                           bounds=list(zip(lo, hi)))
        except Exception:
            failures += 1
            continue
        if np.isfinite(res.fun) and -res.fun > best_val \
                and not _near_any(res.x, exclude, exclude_tol):
            best_x, best_val = res.x.copy(), float(-res.fun)
    if failures and best_val == _EXCLUDED:
        warnings.warn("all acquisition polish attempts failed; "
                      "falling back to the best raw candidate")
    return np.clip(best_x, lo, hi), best_val


# ---------------------------------------------------------------------------
# per-step selection


def _box(dataset: MultiFidelityDataset) -> np.ndarray:
    return np.asarray(dataset.bounds, dtype=float)


def _pick(per_level: dict[int, tuple[np.ndarray, float]],
          allowed: list[int]) -> int:
    best = allowed[0]
    for lvl in allowed[1:]:
        if per_level[lvl][1] > per_level[best][1]:
            best = lvl
    return best


def select_acquisition(emulator: RnaEmulator, strategy: str, costs: CostModel,
                       options: AlOptions = AlOptions(), step: int = 0,
                       allowed_levels: list[int] | None = None,
                       ) -> AcquisitionResult:
    """Run one strategy and return its chosen (level, location).

    Randomness (optimizer starts, alc integration points, imputation
    draws) derives from (options.seed, step) so repeated calls with the
    same arguments agree and alc candidates share draws.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    dataset = emulator.dataset
    box = _box(dataset)
    levels = list(range(1, emulator.levels + 1))
    allowed = allowed_levels if allowed_levels is not None else levels
    if not allowed:
        raise ValueError("no levels allowed")

    if strategy == "almc":
        return _almc(emulator, costs, options, step, allowed)

    per_level: dict[int, tuple[np.ndarray, float]] = {}
    if strategy == "alc":
        srng = np.random.default_rng([options.seed, step, 0xA1C])
        lo, hi = box[:, 0], box[:, 1]
        xi = lo + srng.uniform(size=(options.n_integration, len(box))) * (hi - lo)
        base = emulator.predict(xi).variance
        z = srng.standard_normal((options.n_imputations, emulator.levels))

    for lvl in levels:
        if strategy == "ald":
            # a fresh generator per call keeps the decomposition draws
            # common across candidate locations
            def crit(x, lvl=lvl):
                rng = np.random.default_rng([options.seed, step, 0xA1D])
                return ald_criterion(emulator, x, lvl, costs,
                                     n_samples=options.decomposition_samples,
                                     rng=rng)
            if emulator.levels == 2:
                def batch(xs, lvl=lvl):
                    shares = emulator.decompose_variance_two_batch(np.atleast_2d(xs))
                    return np.maximum(shares[lvl - 1], 0.0) / costs.cumulative(lvl)
            else:
                batch = None
            grid_points = options.grid_points
        elif strategy == "alm":
            def crit(x, lvl=lvl):
                return alm_criterion(emulator, x, lvl, costs)

            def batch(xs, lvl=lvl):
                var = emulator.predict(np.atleast_2d(xs)).variances[lvl - 1]
                return np.maximum(var, 0.0) / costs.cumulative(lvl)
            grid_points = options.grid_points
        else:
            cum = costs.cumulative(lvl)

            def crit(x, lvl=lvl, cum=cum):
                return _alc_value(emulator, np.asarray(x, dtype=float).ravel(),
                                  lvl, cum, xi, base, z)
            batch = None
            grid_points = options.alc_grid_points

        x_lvl, v_lvl = optimize_acquisition(
            crit, box,
            n_starts=options.n_starts,
            seed=int(np.random.default_rng([options.seed, step, lvl]).integers(2**31)),
            design_points=dataset.designs[lvl - 1],
            exclude=dataset.designs[lvl - 1],
            grid_points=grid_points,
            polish_top=options.polish_top,
            batch=batch,
        )
        per_level[lvl] = (x_lvl, v_lvl)

    chosen = _pick(per_level, allowed)
    x_star, value = per_level[chosen]
    return AcquisitionResult(strategy=strategy, level=chosen, location=x_star,
                             criterion_value=value,
                             cost_charged=costs.cumulative(chosen),
                             per_level=per_level)


def _almc(emulator: RnaEmulator, costs: CostModel, options: AlOptions,
          step: int, allowed: list[int]) -> AcquisitionResult:
    """Variance argmax for the location, then alc over levels there."""
    dataset = emulator.dataset
    box = _box(dataset)

    def stage1(x):
        return float(emulator.predict(np.atleast_2d(x)).variance[0])

    def stage1_batch(xs):
        return emulator.predict(np.atleast_2d(xs)).variance

    top = emulator.levels
    x_star, _ = optimize_acquisition(
        stage1, box,
        n_starts=options.n_starts,
        seed=int(np.random.default_rng([options.seed, step, 0x5E1]).integers(2**31)),
        design_points=dataset.designs[top - 1],
        exclude=dataset.designs[top - 1],
        grid_points=options.grid_points,
        polish_top=options.polish_top,
        batch=stage1_batch,
    )

    # the shared location must not already sit in the design of the level
    # it gets acquired at; when every affordable level already holds it,
    # rerun the variance search barring all of their points
    valid = [l for l in allowed
             if dataset.find_point(l, x_star, tol=MATCH_TOL) is None]
    if not valid:
        taken = np.vstack([dataset.designs[l - 1] for l in allowed])
        x_star, _ = optimize_acquisition(
            stage1, box,
            n_starts=options.n_starts,
            seed=int(np.random.default_rng(
                [options.seed, step, 0x5E2]).integers(2**31)),
            design_points=dataset.designs[top - 1],
            exclude=taken,
            grid_points=options.grid_points,
            polish_top=options.polish_top,
            batch=stage1_batch,
        )
        valid = [l for l in allowed
                 if dataset.find_point(l, x_star, tol=MATCH_TOL) is None]
        if not valid:
            valid = allowed

    srng = np.random.default_rng([options.seed, step, 0xA1C])
    lo, hi = box[:, 0], box[:, 1]
    xi = lo + srng.uniform(size=(options.n_integration, len(box))) * (hi - lo)
    base = emulator.predict(xi).variance
    z = srng.standard_normal((options.n_imputations, emulator.levels))

    per_level = {}
    for lvl in range(1, emulator.levels + 1):
        val = _alc_value(emulator, x_star, lvl, costs.cumulative(lvl), xi, base, z)
        per_level[lvl] = (x_star, val)
    chosen = _pick(per_level, valid)
    return AcquisitionResult(strategy="almc", level=chosen, location=x_star,
                             criterion_value=per_level[chosen][1],
                             cost_charged=costs.cumulative(chosen),
                             per_level=per_level)


def almc_select(emulator: RnaEmulator, costs: CostModel,
                options: AlOptions = AlOptions(), step: int = 0,
                ) -> AcquisitionResult:
    return _almc(emulator, costs, options, step,
                 allowed=list(range(1, emulator.levels + 1)))


# ---------------------------------------------------------------------------
# the budgeted loop


def _score(emulator: RnaEmulator, options: AlOptions):
    if options.test_inputs is None or options.test_truth is None:
        return None, None
    pm = emulator.predict(options.test_inputs)
    return (rmse(pm.mean, options.test_truth),
            crps(pm.mean, pm.variance, options.test_truth))


def al_loop(simulate, dataset: MultiFidelityDataset, strategy: str,
            costs: CostModel, budget: float,
            kind: KernelKind = KernelKind.SQEXP,
            options: AlOptions = AlOptions()) -> AlTrace:
    """Acquire until the budget cannot cover the cheapest level.

    `simulate(level, x) -> float` runs one simulator; acquiring level l
    triggers runs at every level 1..l not already holding x, and the full
    cumulative cost of level l is charged either way.  A simulate failure
    stops the loop and leaves the partial trace in trace.error.
    """
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    if costs.levels != dataset.levels:
        raise ValueError("cost model and dataset disagree on level count")

    emulator = RnaEmulator.fit(dataset, kind=kind, options=options.fit_options)
    r0, c0 = _score(emulator, options)
    trace = AlTrace(strategy=strategy, budget=float(budget), costs=costs,
                    initial_rmse=r0, initial_crps=c0)

    accrued = 0.0
    step = 0
    while True:
        step += 1
        if options.max_steps is not None and step > options.max_steps:
            break
        remaining = budget - accrued
        affordable = [l for l in range(1, dataset.levels + 1)
                      if costs.cumulative(l) <= remaining + 1e-9]
        if not affordable:
            break

        result = select_acquisition(emulator, strategy, costs, options,
                                    step=step, allowed_levels=affordable)
        lvl, x_star = result.level, result.location

        needed = [s for s in range(1, lvl + 1)
                  if dataset.find_point(s, x_star) is None]
        reused = tuple(s for s in range(1, lvl + 1) if s not in needed)
        try:
            fresh = {s: float(simulate(s, x_star)) for s in needed}
        except Exception as exc:  # noqa: BLE001 - adapter boundary
            trace.error = f"simulator failed at level(s) {needed}: {exc}"
            break

        try:
            dataset = dataset.with_point(lvl, x_star, fresh)
        except DatasetError as exc:
            trace.error = f"could not append acquisition: {exc}"
            break
        accrued += result.cost_charged
        emulator = emulator.refit(dataset)

        r, c = _score(emulator, options)
        trace.records.append(AlRecord(
            step=step, strategy=strategy, level=lvl, location=x_star,
            criterion_value=result.criterion_value, simulated=fresh,
            reused_levels=reused, accrued_cost=accrued, rmse=r, crps=c))

    trace.dataset = dataset
    trace.emulator = emulator
    return trace
