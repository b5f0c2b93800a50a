"""Multi-fidelity datasets with prefix-nested designs.

Designs are nested by index alignment: the level-(l+1) design is exactly
the first n_{l+1} rows of the level-l design, in the same order. That
convention makes the lower-level outputs at any higher-level design point
available by slicing, and it survives point insertion (see with_point).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DatasetError", "MultiFidelityDataset", "MATCH_TOL"]

# two points closer than this (max-norm) count as the same design location
MATCH_TOL = 1e-8


class DatasetError(ValueError):
    pass


def _as_float_array(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DatasetError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class MultiFidelityDataset:
    """Designs, outputs and per-level evaluation costs for one problem.

    bounds : (d, 2) array of input-box lower/upper limits
    designs : per level, (n_l, d) arrays with n_1 >= n_2 >= ... >= n_L
    outputs : per level, (n_l,) arrays
    costs : per level marginal evaluation costs; an acquisition at level l
        pays the cumulative cost of levels 1..l because the nested design
        requires every lower simulator at the same location
    """

    bounds: np.ndarray
    designs: tuple[np.ndarray, ...]
    outputs: tuple[np.ndarray, ...]
    costs: tuple[float, ...]

    def __post_init__(self):
        bounds = _as_float_array(self.bounds, "bounds")
        if bounds.ndim != 2 or bounds.shape[1] != 2:
            raise DatasetError(f"bounds must have shape (d, 2), got {bounds.shape}")
        if np.any(bounds[:, 0] >= bounds[:, 1]):
            raise DatasetError("bounds must satisfy lo < hi in every dimension")
        designs = tuple(
            np.atleast_2d(_as_float_array(x, f"designs[{i}]"))
            for i, x in enumerate(self.designs)
        )
        outputs = tuple(
            _as_float_array(y, f"outputs[{i}]").ravel()
            for i, y in enumerate(self.outputs)
        )
        costs = tuple(float(c) for c in self.costs)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "designs", designs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "costs", costs)
        self.validate()

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def levels(self) -> int:
        return len(self.designs)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(x.shape[0] for x in self.designs)

    def validate(self) -> None:
        if not self.designs:
            raise DatasetError("dataset needs at least one level")
        if len(self.outputs) != self.levels:
            raise DatasetError(
                f"{self.levels} designs but {len(self.outputs)} output arrays"
            )
        if len(self.costs) != self.levels:
            raise DatasetError(f"{self.levels} designs but {len(self.costs)} costs")
        if any(c <= 0 for c in self.costs):
            raise DatasetError("costs must be positive")
        d = self.dim
        for lv, (x, y) in enumerate(zip(self.designs, self.outputs), start=1):
            if x.ndim != 2 or x.shape[1] != d:
                raise DatasetError(
                    f"level {lv} design has shape {x.shape}, expected (n, {d})"
                )
            if y.shape[0] != x.shape[0]:
                raise DatasetError(
                    f"level {lv}: {x.shape[0]} design rows but {y.shape[0]} outputs"
                )
            if np.any(x < self.bounds[:, 0] - MATCH_TOL) or np.any(
                x > self.bounds[:, 1] + MATCH_TOL
            ):
                raise DatasetError(f"level {lv} design leaves the input bounds")
        for lv in range(1, self.levels):
            upper, lower = self.designs[lv], self.designs[lv - 1]
            n_up = upper.shape[0]
            if n_up > lower.shape[0]:
                raise DatasetError(
                    f"level {lv + 1} has more points than level {lv}"
                )
            if not np.array_equal(upper, lower[:n_up]):
                raise DatasetError(
                    f"nesting violated: level {lv + 1} design is not the "
                    f"leading block of level {lv}"
                )

    def cumulative_cost(self, level: int) -> float:
        """Cost of one nested evaluation up to and including `level`."""
        self._check_level(level)
        return float(sum(self.costs[:level]))

    def find_point(self, level: int, x: np.ndarray, tol: float = MATCH_TOL):
        """Row index of x in the level's design, or None."""
        self._check_level(level)
        x = np.asarray(x, dtype=float).ravel()
        design = self.designs[level - 1]
        if design.size == 0:
            return None
        hits = np.flatnonzero(np.max(np.abs(design - x), axis=1) <= tol)
        return int(hits[0]) if hits.size else None

    def levels_containing(self, x: np.ndarray, tol: float = MATCH_TOL) -> tuple[int, ...]:
        return tuple(
            lv for lv in range(1, self.levels + 1)
            if self.find_point(lv, x, tol) is not None
        )

    def with_point(self, level: int, x: np.ndarray,
                   new_outputs: dict[int, float]) -> "MultiFidelityDataset":
        """Dataset with x added to levels 1..level, nesting preserved.

        new_outputs maps each level where x is not yet present to its
        simulator value; levels that already contain x reuse the stored
        output. The inserted point lands at the same row index q (the new
        top-level size minus one) in every affected design, which keeps
        the leading-block alignment intact at every pair of levels.
        """
        self._check_level(level)
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dim:
            raise DatasetError(f"point has {x.shape[0]} coordinates, expected {self.dim}")
        if self.find_point(level, x) is not None:
            raise DatasetError(
                f"point already present at level {level}; acquiring it again "
                "adds no information"
            )
        q = self.sizes[level - 1]  # insertion row in every updated design
        designs = list(self.designs)
        outputs = list(self.outputs)
        for lv in range(level, 0, -1):
            idx = self.find_point(lv, x)
            if idx is None:
                if lv not in new_outputs:
                    raise DatasetError(f"missing output for level {lv}")
                y_here = float(new_outputs[lv])
                design_wo = designs[lv - 1]
                output_wo = outputs[lv - 1]
            else:
                y_here = float(outputs[lv - 1][idx])
                design_wo = np.delete(designs[lv - 1], idx, axis=0)
                output_wo = np.delete(outputs[lv - 1], idx)
            designs[lv - 1] = np.insert(design_wo, q, x, axis=0)
            outputs[lv - 1] = np.insert(output_wo, q, y_here)
        return MultiFidelityDataset(
            bounds=self.bounds,
            designs=tuple(designs),
            outputs=tuple(outputs),
            costs=self.costs,
        )

    def output_range(self, level: int) -> tuple[float, float]:
        """Range of a level's outputs, widened when the outputs are constant."""
        self._check_level(level)
        y = self.outputs[level - 1]
        lo, hi = float(np.min(y)), float(np.max(y))
        if hi <= lo:
            hi = lo + 1.0
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "levels": self.levels,
            "bounds": self.bounds.tolist(),
            "costs": list(self.costs),
            "designs": [x.tolist() for x in self.designs],
            "outputs": [y.tolist() for y in self.outputs],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MultiFidelityDataset":
        required = {"dim", "levels", "bounds", "costs", "designs", "outputs"}
        missing = required - set(payload)
        if missing:
            raise DatasetError(f"dataset payload missing keys: {sorted(missing)}")
        ds = cls(
            bounds=payload["bounds"],
            designs=tuple(np.asarray(x, dtype=float) for x in payload["designs"]),
            outputs=tuple(np.asarray(y, dtype=float) for y in payload["outputs"]),
            costs=tuple(payload["costs"]),
        )
        if int(payload["dim"]) != ds.dim:
            raise DatasetError(
                f"declared dim {payload['dim']} does not match bounds ({ds.dim})"
            )
        if int(payload["levels"]) != ds.levels:
            raise DatasetError(
                f"declared levels {payload['levels']} does not match designs "
                f"({ds.levels})"
            )
        return ds

    def _check_level(self, level: int) -> None:
        if not 1 <= level <= self.levels:
            raise DatasetError(
                f"level {level} out of range 1..{self.levels}"
            )
