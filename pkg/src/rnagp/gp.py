"""Single-level GP machinery: profiled likelihood, MLE fitting, conditional
moments, and rank-one design updates.

The model for one level is y ~ N(alpha * 1, tau^2 * K(theta)) with constant
mean alpha and a unit-diagonal correlation matrix K.  For a fixed theta the
mean and variance have closed-form maximizers,

    alpha_hat = (1' K^-1 y) / (1' K^-1 1)
    tau2_hat  = (y - alpha_hat 1)' K^-1 (y - alpha_hat 1) / n

so the optimizer only searches over log-lengthscales.  The profiled
objective, dropping constants, is

    nll(theta) = (n/2) log tau2_hat + (1/2) log det K.

Inputs are rescaled to the unit box (per coordinate, using a caller-supplied
or data-derived bounding box) before any kernel evaluation; fitted
lengthscales live in those rescaled units.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .kernels import (
    JITTER_DEFAULT,
    ConditioningError,
    KernelKind,
    Lengthscales,
    chol_with_jitter,
    cross_matrix,
)

__all__ = [
    "FitOptions",
    "FitError",
    "LevelGP",
    "neg_log_likelihood",
    "fit_level",
    "rebuild_level",
    "conditional_moments",
]

# profiled tau^2 is floored at TAU_FLOOR_REL * var(y) (plus a tiny absolute
# floor so constant data cannot produce log(0))
TAU_FLOOR_REL = 1e-12
_TAU_FLOOR_ABS = 1e-300

# objective value reported to the optimizer when a parameter setting is
# numerically infeasible; finite so that L-BFGS-B line searches stay sane
_BIG_NLL = 1e25

LOG_SCALE_LO = np.log(1e-2)
LOG_SCALE_HI = np.log(1e2)


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitOptions:
    """Knobs for maximum-likelihood fitting of one level."""

    restarts: int = 5
    max_iters: int = 200
    lengthscale_bounds: tuple[float, float] = (LOG_SCALE_LO, LOG_SCALE_HI)
    rng_seed: int = 0
    jitter: float = JITTER_DEFAULT

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        lo, hi = self.lengthscale_bounds
        if not lo < hi:
            raise ValueError("lengthscale_bounds must satisfy lo < hi")
        if self.jitter < 0:
            raise ValueError("jitter must be nonnegative")


def unit_box(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate bounding box of a point set, widened where degenerate."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    flat = hi - lo <= 0
    if np.any(flat):
        # constant coordinate: keep the transform affine and well defined
        hi = np.where(flat, lo + 1.0, hi)
    return lo, hi


def to_unit(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return (np.asarray(points, dtype=float) - lo) / (hi - lo)


def neg_log_likelihood(design: np.ndarray, outputs: np.ndarray, kind: KernelKind,
                       scales: Lengthscales, jitter: float = JITTER_DEFAULT,
                       ) -> tuple[float, float, float]:
    """Profiled negative log-likelihood (up to an additive constant).

    Returns (value, alpha_hat, tau2_hat).  Design rows are used as given;
    callers who want unit-box scaling apply it first.
    """
    design = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(outputs, dtype=float).ravel()
    n = design.shape[0]
    if y.size != n:
        raise ValueError(f"{n} design rows but {y.size} outputs")
    if n < 2:
        # tau2_hat degenerates at n=1; reject so optimizers move away
        return np.inf, float(y[0]) if n else 0.0, 0.0

    K, L, _ = chol_with_jitter(kind, design, scales, jitter)
    ones = np.ones(n)
    kinv_y = cho_solve((L, True), y)
    kinv_1 = cho_solve((L, True), ones)
    alpha = float(ones @ kinv_y / (ones @ kinv_1))
    resid = y - alpha
    tau2 = float(resid @ cho_solve((L, True), resid)) / n
    floor = TAU_FLOOR_REL * float(np.var(y)) + _TAU_FLOOR_ABS
    tau2 = max(tau2, floor)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    value = 0.5 * n * np.log(tau2) + 0.5 * logdet
    return value, alpha, tau2


@dataclass(frozen=True)
class LevelGP:
    """One fitted GP level with cached solves.

    design/outputs are stored in original units; lo/hi give the affine map
    to the unit box in which `scales` is expressed.  chol, kinv and
    kinv_resid are the Cholesky factor of K + jitter*I, its inverse, and
    K^-1 (y - alpha 1) (the r vector of the recursive moment formulas).
    chol is None for models produced by with_point, which update kinv
    directly by a bordered inverse.
    """

    kind: KernelKind
    scales: Lengthscales
    alpha: float
    tau_sq: float
    design: np.ndarray
    outputs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    jitter: float
    chol: np.ndarray | None
    kinv: np.ndarray
    kinv_resid: np.ndarray
    nll: float = np.nan

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def augmented(self) -> bool:
        return self.scales.output_scale is not None

    def scaled_design(self) -> np.ndarray:
        return to_unit(self.design, self.lo, self.hi)

    def scale_point(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.design.shape[1]:
            raise ValueError(
                f"point has {z.shape[-1]} coordinates, model expects "
                f"{self.design.shape[1]}"
            )
        return to_unit(z, self.lo, self.hi)

    def cross_correlation(self, z: np.ndarray) -> np.ndarray:
        """k(z) against the training design; z shape (..., arity)."""
        zs = np.atleast_2d(self.scale_point(z))
        return cross_matrix(self.kind, zs, self.scaled_design(), self.scales)

    def with_point(self, z_new: np.ndarray, y_new: float) -> "LevelGP":
        """Design augmented by one point, same hyperparameters.

        K^-1 is updated with the bordered (block) inverse, so no
        refactorization happens.  Raises ConditioningError when the new
        point makes the correlation matrix numerically singular (duplicate
        point), which callers treat as "no information gained".
        """
        z_new = np.asarray(z_new, dtype=float).ravel()
        zs = self.scale_point(z_new)
        # an (almost) repeated row would survive the Schur test whenever the
        # jitter keeps s positive, yet 1/s near 1/jitter wrecks the inverse;
        # reject it outright instead
        if self.n and float(np.min(np.max(np.abs(self.scaled_design() - zs),
                                          axis=1))) < 1e-9:
            raise ConditioningError(
                "new point duplicates an existing design row",
                jitter=self.jitter,
            )
        k_new = self.cross_correlation(z_new).ravel()
        c = 1.0 + self.jitter
        kinv_b = self.kinv @ k_new
        s = c - float(k_new @ kinv_b)
        if s <= 1e-12:
            raise ConditioningError(
                "bordered update is numerically singular (duplicate point?)",
                jitter=self.jitter,
            )
        n = self.n
        kinv = np.empty((n + 1, n + 1))
        kinv[:n, :n] = self.kinv + np.outer(kinv_b, kinv_b) / s
        kinv[:n, n] = -kinv_b / s
        kinv[n, :n] = -kinv_b / s
        kinv[n, n] = 1.0 / s
        design = np.vstack([self.design, z_new])
        outputs = np.append(self.outputs, float(y_new))
        resid = outputs - self.alpha
        return replace(
            self,
            design=design,
            outputs=outputs,
            chol=None,
            kinv=kinv,
            kinv_resid=kinv @ resid,
        )


def conditional_moments(model: LevelGP, z: np.ndarray) -> tuple[float, float]:
    """Plain GP posterior mean and variance at one point.

    mu = alpha + k(z)' K^-1 (y - alpha 1)
    var = tau^2 (1 - k(z)' K^-1 k(z)), clamped at zero.
    """
    k = model.cross_correlation(z).ravel()
    mu = model.alpha + float(k @ model.kinv_resid)
    var = model.tau_sq * (1.0 - float(k @ (model.kinv @ k)))
    return mu, max(var, 0.0)


def _median_heuristic_start(sdesign: np.ndarray, kind: KernelKind,
                            bounds: tuple[float, float]) -> np.ndarray:
    """Start at the per-coordinate median pairwise distance (squared for
    sqexp, matching each kernel's distance convention)."""
    n, d = sdesign.shape
    iu = np.triu_indices(n, k=1)
    starts = np.empty(d)
    lo, hi = bounds
    for j in range(d):
        diff = np.abs(sdesign[:, j, None] - sdesign[None, :, j])[iu]
        m = float(np.median(diff))
        if m <= 0:
            starts[j] = 0.5 * (lo + hi)
            continue
        val = m * m if kind == KernelKind.SQEXP else m
        starts[j] = np.clip(np.log(val), lo, hi)
    return starts


def _build_level(design, outputs, kind, scales, jitter, lo, hi, nll_value) -> LevelGP:
    sdesign = to_unit(design, lo, hi)
    y = np.asarray(outputs, dtype=float).ravel()
    n = y.size
    K, L, j_used = chol_with_jitter(kind, sdesign, scales, jitter)
    ones = np.ones(n)
    kinv_y = cho_solve((L, True), y)
    kinv_1 = cho_solve((L, True), ones)
    alpha = float(ones @ kinv_y / (ones @ kinv_1))
    resid = y - alpha
    tau2 = float(resid @ cho_solve((L, True), resid)) / n
    tau2 = max(tau2, TAU_FLOOR_REL * float(np.var(y)) + _TAU_FLOOR_ABS)
    linv = solve_triangular(L, np.eye(n), lower=True)
    kinv = linv.T @ linv
    kinv = 0.5 * (kinv + kinv.T)
    return LevelGP(
        kind=kind,
        scales=scales,
        alpha=alpha,
        tau_sq=tau2,
        design=np.array(design, dtype=float),
        outputs=y,
        lo=np.asarray(lo, dtype=float),
        hi=np.asarray(hi, dtype=float),
        jitter=j_used,
        chol=L,
        kinv=kinv,
        kinv_resid=kinv @ resid,
        nll=float(nll_value),
    )


def rebuild_level(design: np.ndarray, outputs: np.ndarray, kind: KernelKind,
                  scales: Lengthscales, *, jitter: float = JITTER_DEFAULT,
                  box: tuple[np.ndarray, np.ndarray] | None = None,
                  nll: float = np.nan) -> LevelGP:
    """Reassemble a fitted level from stored lengthscales, no optimization.

    alpha, tau^2 and the factorization caches are deterministic functions
    of the lengthscales given the data, so serialized models only carry
    the scales (and the scaling box); everything else is recomputed here.
    """
    design = np.atleast_2d(np.asarray(design, dtype=float))
    lo, hi = box if box is not None else unit_box(design)
    return _build_level(design, outputs, kind, scales, jitter, lo, hi, nll)


def fit_level(design: np.ndarray, outputs: np.ndarray, kind: KernelKind,
              options: FitOptions = FitOptions(), *,
              augmented: bool = False,
              box: tuple[np.ndarray, np.ndarray] | None = None,
              start_scales: Lengthscales | None = None) -> LevelGP:
    """Maximum-likelihood fit of one GP level with multistart L-BFGS-B.

    design: (n, d) plain rows or (n, d+1) augmented rows (set `augmented`).
    box: optional (lo, hi) for the unit-box rescaling; defaults to the
        design's own bounding box.  The recursive emulator passes the
        level-1 box for the input coordinates so all levels share one map.
    start_scales: optional warm start (in scaled units) added to the
        multistart list, used when refitting after an acquisition.
    """
    design = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(outputs, dtype=float).ravel()
    n, arity = design.shape
    if y.size != n:
        raise ValueError(f"{n} design rows but {y.size} outputs")
    if n < 2:
        raise FitError("need at least 2 points to fit a level")

    lo, hi = box if box is not None else unit_box(design)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.size != arity or hi.size != arity:
        raise ValueError("box arity does not match the design")
    sdesign = to_unit(design, lo, hi)

    b_lo, b_hi = options.lengthscale_bounds
    rng = np.random.default_rng(options.rng_seed)

    starts = [_median_heuristic_start(sdesign, kind, (b_lo, b_hi))]
    if start_scales is not None:
        starts.append(np.clip(np.log(start_scales.as_vector()), b_lo, b_hi))
    while len(starts) < options.restarts + (start_scales is not None):
        starts.append(rng.uniform(b_lo, b_hi, size=arity))

    def objective(log_theta: np.ndarray) -> float:
        try:
            scales = Lengthscales.from_vector(np.exp(log_theta), augmented)
            value, _, _ = neg_log_likelihood(sdesign, y, kind, scales, options.jitter)
        except ConditioningError:
            return _BIG_NLL
        if not np.isfinite(value):
            return _BIG_NLL
        return value

    best_val = np.inf
    best_log = None
    failures = []
    for x0 in starts:
        try:
            res = minimize(
                objective,
                x0,
                method="L-BFGS-B",
                bounds=[(b_lo, b_hi)] * arity,
                options={"maxiter": options.max_iters, "gtol": 1e-6},
            )
        except Exception as exc:  # pragma: no cover - scipy internal failure
            failures.append((np.exp(x0), repr(exc)))
            continue
        val = float(res.fun)
        if val < best_val and val < _BIG_NLL:
            best_val = val
            best_log = res.x
    if best_log is None:
        raise FitError(
            f"all {len(starts)} restarts failed; attempted scales "
            f"{[np.exp(s).round(6).tolist() for s in starts]}; errors {failures}"
        )
    scales = Lengthscales.from_vector(np.exp(best_log), augmented)
    return _build_level(design, y, kind, scales, options.jitter, lo, hi, best_val)
