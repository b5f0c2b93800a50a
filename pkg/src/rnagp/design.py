"""Nested space-filling designs on the unit hypercube.

Construction: the full design is a maximin Latin hypercube (best of a
seeded candidate pool by minimum pairwise distance); each coarser level
keeps a maximin subset of the level above it, picked by greedy
farthest-point selection over several restarts.  Rows are then permuted
so every level is literally the leading block of the level below it,
which is the layout the dataset container expects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import qmc

__all__ = [
    "NestedDesign",
    "Violation",
    "lhs",
    "maximin_lhs",
    "nested_design",
    "validate_nested",
]

NEST_TOL = 1e-12


def lhs(n: int, d: int, seed: int) -> np.ndarray:
    """Scrambled Latin hypercube: one point per 1/n stratum per axis."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    sampler = qmc.LatinHypercube(d=d, seed=seed)
    return sampler.random(n)


def _min_pairwise(x: np.ndarray) -> float:
    if len(x) < 2:
        return np.inf
    return float(pdist(x).min())


def maximin_lhs(n: int, d: int, seed: int, candidates: int = 20) -> np.ndarray:
    """Best of `candidates` seeded LHS draws by minimum pairwise distance."""
    if candidates < 1:
        raise ValueError("candidates must be >= 1")
    best, best_score = None, -np.inf
    for c in range(candidates):
        x = lhs(n, d, seed=seed + 7919 * c)
        score = _min_pairwise(x)
        if score > best_score:
            best, best_score = x, score
    return best


def _farthest_point_subset(points: np.ndarray, m: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Greedy maximin subset of size m, started from a random point.

    Returns indices into `points`.
    """
    n = len(points)
    if m >= n:
        return np.arange(n)
    start = int(rng.integers(n))
    chosen = [start]
    # distance from every point to the chosen set so far
    dist = np.linalg.norm(points - points[start], axis=1)
    dist[start] = -np.inf
    for _ in range(m - 1):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        d_new = np.linalg.norm(points - points[nxt], axis=1)
        np.minimum(dist, d_new, out=dist)
        dist[nxt] = -np.inf
    return np.asarray(chosen)


def _best_subset(points: np.ndarray, m: int, seed: int,
                 restarts: int) -> np.ndarray:
    best, best_score = None, -np.inf
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        idx = _farthest_point_subset(points, m, rng)
        score = _min_pairwise(points[idx])
        if score > best_score:
            best, best_score = idx, score
    return best


@dataclass(frozen=True)
class NestedDesign:
    """Unit-cube designs with each level a leading block of the previous."""

    sizes: tuple[int, ...]
    designs: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.designs[0].shape[1]

    @property
    def levels(self) -> int:
        return len(self.designs)

    def map_to_bounds(self, bounds: np.ndarray) -> tuple[np.ndarray, ...]:
        """Affinely rescale every level from [0,1]^d to the given box."""
        bounds = np.asarray(bounds, dtype=float)
        lo, hi = bounds[:, 0], bounds[:, 1]
        return tuple(lo + x * (hi - lo) for x in self.designs)


def nested_design(sizes, d: int, seed: int,
                  maximin_candidates: int = 20) -> NestedDesign:
    """Build a nested maximin design with the given per-level sizes.

    sizes[0] is the largest (cheapest) level.  Sizes must be
    non-increasing; equal adjacent sizes give identical levels.
    """
    sizes = tuple(int(n) for n in sizes)
    if any(n < 1 for n in sizes):
        raise ValueError(f"sizes must be >= 1, got {sizes}")
    if any(b > a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sizes must be non-increasing, got {sizes}")

    full = maximin_lhs(sizes[0], d, seed, candidates=maximin_candidates)

    # Select index sets S_1 >= S_2 >= ... by repeated maximin subsetting,
    # each level drawn from the one above it.
    index_sets = [np.arange(sizes[0])]
    for lvl, m in enumerate(sizes[1:], start=2):
        parent = index_sets[-1]
        sub = _best_subset(full[parent], m, seed=seed + 104729 * lvl,
                           restarts=maximin_candidates)
        index_sets.append(parent[sub])

    # Permute the full design so the deepest subset comes first, then each
    # shell of points dropped between adjacent levels.  After this, level l
    # is exactly full[perm][:sizes[l-1]] and prefix nesting holds everywhere.
    perm: list[int] = list(index_sets[-1])
    seen = set(perm)
    for coarse in reversed(index_sets[:-1]):
        for i in coarse:
            if int(i) not in seen:
                perm.append(int(i))
                seen.add(int(i))
    ordered = full[np.asarray(perm)]

    designs = tuple(ordered[:m].copy() for m in sizes)
    return NestedDesign(sizes=sizes, designs=designs)


@dataclass(frozen=True)
class Violation:
    level: int
    row: int
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"level {self.level}, row {self.row}: {self.kind} ({self.detail})"


def validate_nested(designs, tol: float = NEST_TOL) -> list[Violation]:
    """Check prefix nesting between every adjacent pair of levels.

    Accepts a NestedDesign, a MultiFidelityDataset, or a plain sequence of
    arrays ordered from largest level to smallest.  Returns an empty list
    when nesting holds; otherwise one Violation per bad row, flagging both
    rows missing from the level below and rows present but out of place.
    """
    if hasattr(designs, "designs"):
        designs = designs.designs
    designs = [np.asarray(x, dtype=float) for x in designs]

    problems: list[Violation] = []
    for lvl in range(1, len(designs)):
        lower, upper = designs[lvl - 1], designs[lvl]
        if len(upper) > len(lower):
            problems.append(Violation(
                level=lvl + 1, row=-1, kind="size",
                detail=f"{len(upper)} rows but level {lvl} has {len(lower)}"))
            continue
        for i, row in enumerate(upper):
            gaps = np.max(np.abs(lower - row), axis=1)
            if gaps.min() > tol:
                problems.append(Violation(
                    level=lvl + 1, row=i, kind="missing",
                    detail=f"no match in level {lvl} within {tol:g}"))
            elif gaps[i] > tol:
                j = int(np.argmin(gaps))
                problems.append(Violation(
                    level=lvl + 1, row=i, kind="misaligned",
                    detail=f"matches level {lvl} row {j}, expected row {i}"))
    return problems
