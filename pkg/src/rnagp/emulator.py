"""Recursive multi-fidelity emulator with closed-form posterior moments.

Level 1 is a plain GP on the inputs. Each higher level is a GP on the
augmented input z = (x, y_prev), fitted to the nested design where the
previous level's observed output is available by prefix alignment. At
prediction time the previous level's posterior is folded in analytically:
with f_prev ~ N(mu', var') and r = K^-1 (y - alpha 1),

    mu*  = alpha + sum_i r_i psix_i xi_i
    var* = tau^2 - (mu* - alpha)^2
           + sum_ik (r_i r_k - tau^2 K^-1_ik) psix_i psix_k zeta_ik

where psix is the input-coordinate correlation and xi/zeta are the
Gaussian expectations of the output-coordinate correlation (moments.py),
taken in the scaled units the hyperparameters live in.

The variance splits by level: for two levels both contributions are
closed-form and sum to var* exactly; for three levels the middle terms
average conditional level-2 moments over the level-1 posterior by Monte
Carlo with antithetic pairs, and the top contribution stays closed-form.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import MultiFidelityDataset
from .gp import FitOptions, LevelGP, fit_level, rebuild_level, to_unit
from .kernels import (ConditioningError, KernelKind, Lengthscales,
                      kernel_input, psi)
from .moments import (expected_psi, expected_psi_cross, expected_psi_elem,
                      expected_psi_pair)

__all__ = [
    "PosteriorMoments",
    "VarianceDecomposition",
    "RnaEmulator",
    "PREDICT_CHUNK",
]

# test points are processed in chunks so the (m, n, n) zeta tensor of the
# recursive variance stays modest even for large prediction grids
PREDICT_CHUNK = 128

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class PosteriorMoments:
    """Per-level posterior means and variances at a batch of inputs.

    means/variances have shape (levels, m); mean/variance expose the top
    level, which is what emulation of the high-fidelity simulator uses.
    """

    means: np.ndarray
    variances: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return self.means[-1]

    @property
    def variance(self) -> np.ndarray:
        return self.variances[-1]

    def level(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        if not 1 <= level <= self.means.shape[0]:
            raise ValueError(f"level {level} out of range 1..{self.means.shape[0]}")
        return self.means[level - 1], self.variances[level - 1]


@dataclass(frozen=True)
class VarianceDecomposition:
    """Split of the top-level predictive variance by contributing level.

    contributions[l-1] estimates the variance share owed to level l.
    total is the closed-form top-level variance at the same point. se is
    the Monte Carlo standard error of contributions' sum (None when every
    term is closed-form and the sum matches total by construction).
    """

    contributions: np.ndarray
    total: float
    se: float | None
    n_samples: int


def _level_training_rows(dataset: MultiFidelityDataset, lv: int):
    """Training rows and scaling box for one level.

    Level 1 trains on its design under the dataset bounds.  Higher levels
    train on rows augmented with the previous level's output at the same
    location (the nested prefix makes that a slice), and the box gains the
    previous level's output range as its last coordinate.
    """
    box_lo, box_hi = dataset.bounds[:, 0], dataset.bounds[:, 1]
    x = dataset.designs[lv - 1]
    if lv == 1:
        return x, (box_lo, box_hi)
    cond = dataset.outputs[lv - 2][: x.shape[0]]
    y_lo, y_hi = dataset.output_range(lv - 1)
    return (np.hstack([x, cond[:, None]]),
            (np.append(box_lo, y_lo), np.append(box_hi, y_hi)))


def _xpart(model: LevelGP, dim: int):
    return model.lo[:dim], model.hi[:dim]


def _y_map(model: LevelGP, dim: int) -> tuple[float, float]:
    """Affine map (lo, span) of the augmented output coordinate."""
    return float(model.lo[dim]), float(model.hi[dim] - model.lo[dim])


def _input_corr(model: LevelGP, xs_scaled: np.ndarray, dim: int) -> np.ndarray:
    strain = model.scaled_design()[:, :dim]
    return kernel_input(
        model.kind, xs_scaled[:, None, :], strain[None, :, :], model.scales
    )


class RnaEmulator:
    """Recursive nested emulator over a MultiFidelityDataset.

    Mutable only in its clamp_events counter, which counts predictive
    variances that came out negative by rounding and were clamped to zero.
    """

    def __init__(self, dataset: MultiFidelityDataset, kind: KernelKind,
                 models: tuple[LevelGP, ...], options: FitOptions):
        self.dataset = dataset
        self.kind = KernelKind.parse(kind)
        self.models = tuple(models)
        self.options = options
        self.clamp_events = 0

    @property
    def levels(self) -> int:
        return len(self.models)

    @property
    def dim(self) -> int:
        return self.dataset.dim

    @classmethod
    def fit(cls, dataset: MultiFidelityDataset, kind: KernelKind,
            options: FitOptions = FitOptions(),
            warm_from: "RnaEmulator | None" = None) -> "RnaEmulator":
        """Maximum-likelihood fit of every level.

        warm_from adds the previous hyperparameters to each level's
        multistart list, which is how refits inside an active-learning
        loop stay cheap without locking in stale lengthscales.
        """
        kind = KernelKind.parse(kind)
        models = []
        for lv in range(1, dataset.levels + 1):
            rows, box = _level_training_rows(dataset, lv)
            opts = replace(options, rng_seed=options.rng_seed + 101 * lv)
            warm = None
            if warm_from is not None and lv <= warm_from.levels:
                warm = warm_from.models[lv - 1].scales
            models.append(fit_level(rows, dataset.outputs[lv - 1], kind, opts,
                                    augmented=lv > 1, box=box,
                                    start_scales=warm))
        return cls(dataset, kind, tuple(models), options)

    @classmethod
    def from_hyperparameters(cls, dataset: MultiFidelityDataset,
                             kind: KernelKind,
                             scales: "list[Lengthscales]",
                             options: FitOptions = FitOptions(),
                             nll: "list[float] | None" = None,
                             ) -> "RnaEmulator":
        """Assemble an emulator from per-level lengthscales, no optimization.

        This is the deserialization path: given the training data, the
        mean, variance and factorization caches of each level are
        deterministic functions of its lengthscales, so model files only
        need to store the scales.
        """
        kind = KernelKind.parse(kind)
        if len(scales) != dataset.levels:
            raise ValueError(
                f"{len(scales)} lengthscale sets for {dataset.levels} levels"
            )
        models = []
        for lv in range(1, dataset.levels + 1):
            rows, box = _level_training_rows(dataset, lv)
            models.append(rebuild_level(
                rows, dataset.outputs[lv - 1], kind, scales[lv - 1],
                jitter=options.jitter, box=box,
                nll=np.nan if nll is None else nll[lv - 1]))
        return cls(dataset, kind, tuple(models), options)

    def refit(self, dataset: MultiFidelityDataset) -> "RnaEmulator":
        return RnaEmulator.fit(dataset, self.kind, self.options, warm_from=self)

    # ------------------------------------------------------------------
    # prediction

    def predict(self, x: np.ndarray, chunk: int = PREDICT_CHUNK) -> PosteriorMoments:
        """Posterior moments of every level at inputs x of shape (m, d)."""
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        if xs.shape[1] != self.dim:
            raise ValueError(f"inputs have {xs.shape[1]} coordinates, expected {self.dim}")
        pieces = [self._predict_chunk(xs[i:i + chunk])
                  for i in range(0, xs.shape[0], max(chunk, 1))]
        means = np.concatenate([p[0] for p in pieces], axis=1)
        variances = np.concatenate([p[1] for p in pieces], axis=1)
        return PosteriorMoments(means=means, variances=variances)

    def _predict_chunk(self, xs: np.ndarray):
        d = self.dim
        m = xs.shape[0]
        means = np.empty((self.levels, m))
        variances = np.empty((self.levels, m))

        first = self.models[0]
        k = first.cross_correlation(xs)
        mu = first.alpha + k @ first.kinv_resid
        var = first.tau_sq * (1.0 - np.einsum("mi,ik,mk->m", k, first.kinv, k))
        var = self._clamp(var)
        means[0], variances[0] = mu, var

        for lv in range(2, self.levels + 1):
            model = self.models[lv - 1]
            xs_sc = to_unit(xs, *_xpart(model, d))
            psix = _input_corr(model, xs_sc, d)
            mu, var = self._level_moments(model, psix, mu, var)
            means[lv - 1], variances[lv - 1] = mu, var
        return means, variances

    def _level_moments(self, model: LevelGP, psix: np.ndarray,
                       mu_prev: np.ndarray, var_prev: np.ndarray):
        """One recursion step: fold N(mu_prev, var_prev) into level `model`."""
        d = self.dim
        lo_y, span_y = _y_map(model, d)
        mu_t = (mu_prev - lo_y) / span_y
        var_t = var_prev / span_y**2
        ytrain = model.scaled_design()[:, d]
        theta_y = model.scales.output_scale
        r = model.kinv_resid

        xi = expected_psi(model.kind, mu_t, var_t, ytrain, theta_y)
        if xi.ndim == 1:
            xi = xi[None, :]
        mu = model.alpha + np.einsum("mi,i,mi->m", psix, r, xi)

        zeta = expected_psi_pair(model.kind, mu_t, var_t, ytrain, theta_y)
        if zeta.ndim == 2:
            zeta = zeta[None, :, :]
        quad_w = np.outer(r, r) - model.tau_sq * model.kinv
        quad = np.einsum("mik,ik,mi,mk->m", zeta, quad_w, psix, psix, optimize=True)
        var = model.tau_sq - (mu - model.alpha) ** 2 + quad
        return mu, self._clamp(var)

    def _clamp(self, var: np.ndarray) -> np.ndarray:
        neg = var < 0.0
        if np.any(neg):
            self.clamp_events += int(np.count_nonzero(neg))
            var = np.where(neg, 0.0, var)
        return var

    # ------------------------------------------------------------------
    # Monte Carlo reference for the same posterior

    def sample_posterior(self, x: np.ndarray, n_samples: int,
                         rng: np.random.Generator) -> np.ndarray:
        """Samples of the top-level posterior at one input, shape (n_samples,).

        Draws the whole chain: a normal draw at level 1, then each higher
        level draws from its plain GP conditional at the augmented input
        containing the previous draw. This is the quantity the closed-form
        moments integrate analytically, so it serves as an independent
        reference for them.
        """
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dim:
            raise ValueError(f"point has {x.shape[0]} coordinates, expected {self.dim}")
        first = self.models[0]
        k = first.cross_correlation(x).ravel()
        mu1 = first.alpha + float(k @ first.kinv_resid)
        var1 = max(first.tau_sq * (1.0 - float(k @ (first.kinv @ k))), 0.0)
        f = rng.normal(mu1, np.sqrt(var1), size=n_samples)
        for lv in range(2, self.levels + 1):
            mu_c, var_c = self._conditional_on_draws(self.models[lv - 1], x, f)
            f = rng.normal(mu_c, np.sqrt(var_c))
        return f

    def _conditional_on_draws(self, model: LevelGP, x: np.ndarray,
                              f_prev: np.ndarray):
        """Plain GP conditional moments at (x, f_prev) for an array of draws."""
        d = self.dim
        xs_sc = to_unit(x[None, :], *_xpart(model, d))
        psix = _input_corr(model, xs_sc, d).ravel()
        lo_y, span_y = _y_map(model, d)
        ytrain = model.scaled_design()[:, d]
        f_sc = (np.asarray(f_prev, dtype=float) - lo_y) / span_y
        psiy = psi(model.kind, f_sc[:, None], ytrain[None, :],
                   model.scales.output_scale)
        ks = psix[None, :] * psiy
        mu = model.alpha + ks @ model.kinv_resid
        quad = np.einsum("si,ik,sk->s", ks, model.kinv, ks, optimize=True)
        var = np.maximum(model.tau_sq * (1.0 - quad), 0.0)
        return mu, var

    # ------------------------------------------------------------------
    # variance decomposition

    def decompose_variance(self, x: np.ndarray, n_samples: int = 10_000,
                           rng: np.random.Generator | None = None,
                           ) -> VarianceDecomposition:
        """Split the top-level predictive variance at one point by level.

        Supports one to three levels. With two levels both shares are
        closed-form and sum to the predictive variance identically; with
        three the level-1/level-2 shares are Monte Carlo averages over the
        level-1 posterior (antithetic pairs, standard error reported) and
        only the top share is closed-form.
        """
        x = np.asarray(x, dtype=float).ravel()
        moments = self.predict(x[None, :])
        total = float(moments.variance[0])
        if self.levels == 1:
            return VarianceDecomposition(np.array([total]), total, None, 0)
        if self.levels == 2:
            contributions = self._decompose_two(x, moments)
            return VarianceDecomposition(contributions, total, None, 0)
        if self.levels == 3:
            if rng is None:
                rng = np.random.default_rng(0)
            contributions, se, used = self._decompose_three(x, moments, n_samples, rng)
            return VarianceDecomposition(contributions, total, se, used)
        raise NotImplementedError(
            "variance decomposition is implemented for up to three levels"
        )

    def _top_level_pieces(self, x: np.ndarray, level: int):
        model = self.models[level - 1]
        d = self.dim
        xs_sc = to_unit(x[None, :], *_xpart(model, d))
        psix = _input_corr(model, xs_sc, d).ravel()
        return model, psix

    def _decompose_two(self, x: np.ndarray, moments: PosteriorMoments):
        model, psix = self._top_level_pieces(x, 2)
        d = self.dim
        lo_y, span_y = _y_map(model, d)
        mu1, var1 = (float(a[0]) for a in moments.level(1))
        mu2 = float(moments.level(2)[0][0])
        ytrain = model.scaled_design()[:, d]
        zeta = expected_psi_pair(
            model.kind, (mu1 - lo_y) / span_y, var1 / span_y**2, ytrain,
            model.scales.output_scale,
        )
        rp = model.kinv_resid * psix
        v1 = -((mu2 - model.alpha) ** 2) + float(rp @ zeta @ rp)
        kp = psix[:, None] * psix[None, :] * zeta
        v2 = model.tau_sq * (1.0 - float(np.sum(model.kinv * kp)))
        return np.array([v1, v2])

    def decompose_variance_two_batch(self, x: np.ndarray) -> np.ndarray:
        """Closed-form (2, m) variance contributions, two levels only.

        Same quantities as decompose_variance row-by-row, but the kernel
        expectations are evaluated for the whole batch at once; acquisition
        searches call this on grids.
        """
        if self.levels != 2:
            raise NotImplementedError("batched decomposition needs exactly "
                                      "two levels")
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        model = self.models[1]
        d = self.dim
        lo_y, span_y = _y_map(model, d)
        ytrain = model.scaled_design()[:, d]
        out = np.empty((2, len(xs)))
        for i in range(0, len(xs), PREDICT_CHUNK):
            part = xs[i:i + PREDICT_CHUNK]
            pm = self.predict(part, chunk=len(part))
            xs_sc = to_unit(part, *_xpart(model, d))
            psix = _input_corr(model, xs_sc, d)
            zeta = expected_psi_pair(
                model.kind, (pm.means[0] - lo_y) / span_y,
                pm.variances[0] / span_y ** 2, ytrain,
                model.scales.output_scale)
            rp = model.kinv_resid[None, :] * psix
            v1 = (-(pm.means[1] - model.alpha) ** 2
                  + np.einsum("mi,mik,mk->m", rp, zeta, rp))
            trace = np.einsum("ik,mik,mi,mk->m", model.kinv, zeta,
                              psix, psix, optimize=True)
            out[0, i:i + len(part)] = v1
            out[1, i:i + len(part)] = model.tau_sq * (1.0 - trace)
        return out

    def _decompose_three(self, x: np.ndarray, moments: PosteriorMoments,
                         n_samples: int, rng: np.random.Generator):
        top, psix3 = self._top_level_pieces(x, 3)
        d = self.dim
        lo3, span3 = _y_map(top, d)
        ytrain3 = top.scaled_design()[:, d]
        theta3 = top.scales.output_scale
        r3 = top.kinv_resid
        rp = r3 * psix3
        mu1, var1 = (float(a[0]) for a in moments.level(1))
        mu2s, var2s = (float(a[0]) for a in moments.level(2))
        mu3 = float(moments.level(3)[0][0])

        # closed-form top share, at the recursive level-2 posterior
        zeta_star = expected_psi_pair(
            top.kind, (mu2s - lo3) / span3, var2s / span3**2, ytrain3, theta3
        )
        kp = psix3[:, None] * psix3[None, :] * zeta_star
        v3 = top.tau_sq * (1.0 - float(np.sum(top.kinv * kp)))

        # Monte Carlo over the level-1 posterior, antithetic pairs
        half = max(n_samples // 2, 1)
        z = rng.standard_normal(half)
        f1 = mu1 + np.sqrt(max(var1, 0.0)) * np.concatenate([z, -z])
        used = f1.size
        m2, v2 = self._conditional_on_draws(self.models[1], x, f1)
        m2_t = (m2 - lo3) / span3
        v2_t = v2 / span3**2

        j_vals = np.empty(used)
        t_vals = np.empty(used)
        step = 2048
        for i in range(0, used, step):
            sl = slice(i, min(i + step, used))
            xi = expected_psi(top.kind, m2_t[sl], v2_t[sl], ytrain3, theta3)
            zeta = expected_psi_pair(top.kind, m2_t[sl], v2_t[sl], ytrain3, theta3)
            j_vals[sl] = top.alpha + xi @ rp
            t_vals[sl] = np.einsum("sik,i,k->s", zeta, rp, rp, optimize=True)

        v1 = float(np.var(j_vals, ddof=1))
        v2_share = -((mu3 - top.alpha) ** 2) + float(np.mean(t_vals))
        # standard error of the Monte Carlo part of the sum v1 + v2
        a_vals = (j_vals - np.mean(j_vals)) ** 2 + t_vals
        pair_means = 0.5 * (a_vals[:half] + a_vals[half:])
        se = float(np.std(pair_means, ddof=1) / np.sqrt(half)) if half > 1 else None
        return np.array([v1, v2_share, v3]), se, used

    # ------------------------------------------------------------------
    # variance transfer diagnostic

    def scaling_factor(self, x: np.ndarray, level: int | None = None) -> np.ndarray:
        """Factor in (0, 1] by which a level discounts incoming correlation.

        For the squared-exponential kernel this is the exact ratio between
        the expected output-coordinate correlation under the previous
        level's posterior and the same correlation with that posterior
        collapsed to its mean: sqrt(theta_y / (theta_y + 2 var_scaled)).
        For the Matern kernels the same ratio is averaged over the
        conditioning values. Values near 1 mean the previous level is
        effectively known; small values mean its uncertainty suppresses
        the correlation structure.
        """
        if self.levels < 2:
            raise ValueError("scaling factor needs at least two levels")
        level = self.levels if level is None else int(level)
        if not 2 <= level <= self.levels:
            raise ValueError(f"level must be in 2..{self.levels}")
        xs = np.atleast_2d(np.asarray(x, dtype=float))
        moments = self.predict(xs)
        mu_prev, var_prev = moments.level(level - 1)
        model = self.models[level - 1]
        d = self.dim
        lo_y, span_y = _y_map(model, d)
        mu_t = (mu_prev - lo_y) / span_y
        var_t = var_prev / span_y**2
        theta_y = model.scales.output_scale
        if model.kind is KernelKind.SQEXP:
            factor = np.sqrt(theta_y / (theta_y + 2.0 * var_t))
        else:
            ytrain = model.scaled_design()[:, d]
            xi = expected_psi(model.kind, mu_t, var_t, ytrain, theta_y)
            if xi.ndim == 1:
                xi = xi[None, :]
            base = psi(model.kind, mu_t[:, None], ytrain[None, :], theta_y)
            factor = np.mean(xi / np.maximum(base, _TINY), axis=1)
        return np.clip(factor, _TINY, 1.0)

    # ------------------------------------------------------------------
    # fantasy updates for lookahead criteria

    def with_imputed(self, x: np.ndarray, y_chain,
                     skip_levels=frozenset()) -> "RnaEmulator":
        """Emulator with (x, imputed outputs) appended through level len(y_chain).

        Hyperparameters are reused; each level's K^-1 grows by the
        bordered-inverse update, so this is cheap enough to run inside an
        acquisition optimizer. Raises ConditioningError when x duplicates
        an existing design point at some level.

        Levels in skip_levels are left untouched: their y_chain entry must
        be the already-observed output at x, still needed as the augmented
        input of the level above.
        """
        x = np.asarray(x, dtype=float).ravel()
        y_chain = [float(v) for v in np.asarray(y_chain, dtype=float).ravel()]
        if not 1 <= len(y_chain) <= self.levels:
            raise ValueError(
                f"y_chain must cover levels 1..l with l <= {self.levels}"
            )
        models = list(self.models)
        if 1 not in skip_levels:
            models[0] = models[0].with_point(x, y_chain[0])
        for lv in range(2, len(y_chain) + 1):
            if lv in skip_levels:
                continue
            z = np.append(x, y_chain[lv - 2])
            models[lv - 1] = models[lv - 1].with_point(z, y_chain[lv - 1])
        clone = RnaEmulator(self.dataset, self.kind, tuple(models), self.options)
        return clone

    def imputed_top_variance(self, x: np.ndarray, y_chains: np.ndarray,
                             xs: np.ndarray,
                             skip_levels=frozenset()) -> np.ndarray:
        """Top-level variance at xs after appending (x, chain), per chain.

        y_chains is (n_chains, l); the result is (n_chains, len(xs)).
        Chains touching only level 1 share their kernel rows, so all of
        them ride through the recursion in one batch instead of one
        fantasy emulator per chain.
        """
        x = np.asarray(x, dtype=float).ravel()
        y_chains = np.atleast_2d(np.asarray(y_chains, dtype=float))
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        n_chains, depth = y_chains.shape
        if depth == 1 and self.levels >= 2 and 1 not in skip_levels:
            return self._fanned_level1(x, y_chains[:, 0], xs)
        if depth == 2 and self.levels == 2 and 2 not in skip_levels:
            return self._fanned_level2(x, y_chains, xs,
                                       skip1=1 in skip_levels)
        out = np.empty((n_chains, len(xs)))
        for s, chain in enumerate(y_chains):
            fantasy = self.with_imputed(x, chain, skip_levels=skip_levels)
            out[s] = fantasy.predict(xs, chunk=len(xs)).variance
        return out

    def _fanned_level1(self, x: np.ndarray, y_draws: np.ndarray,
                       xs: np.ndarray) -> np.ndarray:
        """All level-1-only imputations at once.

        The bordered kernel rows do not depend on the drawn output, so the
        fantasy level-1 posteriors share one variance and have means linear
        in the draw; the upper levels then see a stacked batch of rows.
        """
        base = self.models[0]
        d = self.dim
        m, n_draws = len(xs), len(y_draws)
        ghosts = [base.with_point(x, float(y)) for y in y_draws]
        k = ghosts[0].cross_correlation(xs)
        var1 = ghosts[0].tau_sq * (
            1.0 - np.einsum("mi,ik,mk->m", k, ghosts[0].kinv, k))
        var1 = self._clamp(var1)
        resid = np.stack([g.kinv_resid for g in ghosts], axis=1)
        mu1 = base.alpha + k @ resid          # (m, n_draws)

        # keep the stacked batch small enough that the pairwise moment
        # tensors stay a few tens of MB
        out = np.empty((n_draws, m))
        max_rows = 20_000
        block = max(1, max_rows // max(m, 1))
        for start in range(0, n_draws, block):
            stop = min(start + block, n_draws)
            mu = mu1[:, start:stop].T.reshape(-1)
            var = np.tile(var1, stop - start)
            for lv in range(2, self.levels + 1):
                model = self.models[lv - 1]
                xs_sc = to_unit(xs, *_xpart(model, d))
                psix = np.tile(_input_corr(model, xs_sc, d), (stop - start, 1))
                mu, var = self._level_moments(model, psix, mu, var)
            out[start:stop] = var.reshape(stop - start, m)
        return out

    def _fanned_level2(self, x: np.ndarray, chains: np.ndarray,
                       xs: np.ndarray, skip1: bool) -> np.ndarray:
        """All two-level imputations of a two-level emulator at once.

        The bordered level-2 inverse splits into base/border/corner blocks
        whose weights are cheap per draw; the expensive Gaussian kernel
        expectations then batch over (draw, point) with the border column
        handled by the elementwise cross forms.
        """
        m1, m2 = self.models[0], self.models[1]
        d = self.dim
        m, n_draws = len(xs), len(chains)
        y1, y2 = chains[:, 0], chains[:, 1]

        if skip1:
            k1 = m1.cross_correlation(xs)
            var1 = m1.tau_sq * (1.0 - np.einsum("mi,ik,mk->m", k1, m1.kinv, k1))
            mu1 = np.broadcast_to(
                (m1.alpha + k1 @ m1.kinv_resid)[None, :], (n_draws, m))
        else:
            ghosts = [m1.with_point(x, float(v)) for v in y1]
            k1 = ghosts[0].cross_correlation(xs)
            var1 = ghosts[0].tau_sq * (
                1.0 - np.einsum("mi,ik,mk->m", k1, ghosts[0].kinv, k1))
            resid = np.stack([g.kinv_resid for g in ghosts], axis=1)
            mu1 = (m1.alpha + k1 @ resid).T
        var1 = self._clamp(var1)

        z_new = np.column_stack([np.broadcast_to(x, (n_draws, d)), y1])
        k2 = m2.cross_correlation(z_new)
        u = k2 @ m2.kinv
        sf = (1.0 + m2.jitter) - np.einsum("si,si->s", u, k2)
        if np.any(sf <= 1e-12):
            raise ConditioningError(
                "bordered update is numerically singular (duplicate point?)",
                jitter=m2.jitter,
            )
        p = m2.kinv_resid
        tau2 = m2.tau_sq
        last = (y2 - m2.alpha - k2 @ p) / sf
        top = p[None, :] - u * last[:, None]
        w_bb = (top[:, :, None] * top[:, None, :]
                - tau2 * (m2.kinv[None, :, :]
                          + u[:, :, None] * u[:, None, :] / sf[:, None, None]))
        w_bn = top * last[:, None] + tau2 * u / sf[:, None]
        w_nn = last ** 2 - tau2 / sf

        xs_sc = to_unit(xs, *_xpart(m2, d))
        psix_b = _input_corr(m2, xs_sc, d)
        x_sc = to_unit(x[None, :], *_xpart(m2, d))
        psix_n = kernel_input(
            m2.kind, xs_sc[:, None, :], x_sc[None, :, :], m2.scales)[:, 0]

        lo_y, span_y = _y_map(m2, d)
        ytr = m2.scaled_design()[:, d]
        y1_t = (y1 - lo_y) / span_y
        theta_y = m2.scales.output_scale
        n = len(ytr)

        out = np.empty((n_draws, m))
        max_rows = 20_000
        block = max(1, max_rows // max(m, 1))
        for a in range(0, n_draws, block):
            b = min(a + block, n_draws)
            nb = b - a
            mu_t = ((mu1[a:b] - lo_y) / span_y).reshape(-1)
            var_t = np.tile(var1 / span_y ** 2, nb)
            y_new = np.repeat(y1_t[a:b], m)

            xi_b = expected_psi(self.kind, mu_t, var_t, ytr,
                                theta_y).reshape(nb, m, n)
            xi_n = expected_psi_elem(self.kind, mu_t, var_t, y_new,
                                     theta_y).reshape(nb, m)
            z_bb = expected_psi_pair(self.kind, mu_t, var_t, ytr,
                                     theta_y).reshape(nb, m, n, n)
            z_bn = expected_psi_cross(
                self.kind, mu_t[:, None], var_t[:, None],
                ytr[None, :], y_new[:, None], theta_y).reshape(nb, m, n)
            z_nn = expected_psi_cross(self.kind, mu_t, var_t, y_new, y_new,
                                      theta_y).reshape(nb, m)

            mean_dev = (np.einsum("smi,si,mi->sm", xi_b, top[a:b], psix_b)
                        + xi_n * last[a:b, None] * psix_n[None, :])
            quad = (np.einsum("smik,sik,mi,mk->sm", z_bb, w_bb[a:b],
                              psix_b, psix_b, optimize=True)
                    + 2.0 * np.einsum("smi,si,mi,m->sm", z_bn, w_bn[a:b],
                                      psix_b, psix_n)
                    + z_nn * w_nn[a:b, None] * (psix_n ** 2)[None, :])
            out[a:b] = self._clamp(tau2 - mean_dev ** 2 + quad)
        return out


# re-exported so callers catching fantasy-update failures need one import
__all__.append("ConditioningError")
