"""Correlation kernels and covariance assembly.

Three stationary correlation functions are supported, each parameterized
by a per-dimension lengthscale theta:

    sqexp      psi(x, x') = exp(-(x - x')^2 / theta)
    matern15   psi(x, x') = (1 + sqrt(3)|x - x'| / theta) exp(-sqrt(3)|x - x'| / theta)
    matern25   psi(x, x') = (1 + sqrt(5)|x - x'| / theta + 5(x - x')^2 / (3 theta^2))
                            exp(-sqrt(5)|x - x'| / theta)

Note the convention: theta divides the *squared* distance for sqexp but the
*absolute* distance for the Materns.  Other GP packages often divide by
theta^2 or 2*theta^2; lengthscales are not interchangeable across
conventions.

Multidimensional inputs use the anisotropic product over coordinates.
Augmented inputs (x, y), as used by the higher levels of the recursive
emulator, multiply the input product by one more factor psi(y, y'; theta_y).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KernelKind",
    "Lengthscales",
    "ConditioningError",
    "psi",
    "kernel_input",
    "kernel_augmented",
    "cross_matrix",
    "cov_matrix",
    "chol_with_jitter",
    "JITTER_DEFAULT",
    "JITTER_MAX",
]

SQRT3 = np.sqrt(3.0)
SQRT5 = np.sqrt(5.0)

# The default is deliberately small: recursive predictions inherit the
# level-1 posterior variance at nested design points (roughly jitter * tau^2),
# and deeper levels amplify that floor by ~1/theta_y, so anything coarser
# than ~1e-12 visibly breaks interpolation at the observed outputs of a
# three-level model.  Conditioning is policed separately (fits reject
# lengthscales whose correlation matrix needs a crutch this size), and the
# escalation ladder in chol_with_jitter still climbs to JITTER_MAX for
# genuinely ill-conditioned rebuilds.
JITTER_DEFAULT = 1e-12
JITTER_MAX = 1e-4


class KernelKind(str, enum.Enum):
    SQEXP = "sqexp"
    MATERN15 = "matern15"
    MATERN25 = "matern25"

    @classmethod
    def parse(cls, name: "str | KernelKind") -> "KernelKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(
                f"unknown kernel kind {name!r}; expected one of "
                f"{[k.value for k in cls]}"
            ) from None


@dataclass(frozen=True)
class Lengthscales:
    """Per-dimension lengthscales, plus an optional scale for the augmented
    output coordinate (present only for levels >= 2 of the recursive model)."""

    input_scales: np.ndarray
    output_scale: float | None = None

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.input_scales, dtype=float))
        object.__setattr__(self, "input_scales", arr)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("input_scales must be a nonempty 1-d array")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError("lengthscales must be positive and finite")
        if self.output_scale is not None:
            y = float(self.output_scale)
            if not np.isfinite(y) or y <= 0:
                raise ValueError("output_scale must be positive and finite")
            object.__setattr__(self, "output_scale", y)

    @property
    def dim(self) -> int:
        return self.input_scales.size

    def as_vector(self) -> np.ndarray:
        """All scales as one vector, output scale last when present."""
        if self.output_scale is None:
            return self.input_scales.copy()
        return np.append(self.input_scales, self.output_scale)

    @classmethod
    def from_vector(cls, vec: np.ndarray, augmented: bool) -> "Lengthscales":
        vec = np.asarray(vec, dtype=float)
        if augmented:
            return cls(vec[:-1], float(vec[-1]))
        return cls(vec, None)


class ConditioningError(RuntimeError):
    """Cholesky factorization failed even at the maximum jitter."""

    def __init__(self, message: str, jitter: float):
        super().__init__(message)
        self.jitter = jitter


def _check_theta(theta) -> np.ndarray:
    th = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(th)) or np.any(th <= 0):
        raise ValueError(f"kernel lengthscale must be positive and finite, got {theta!r}")
    return th


def psi(kind: KernelKind, x, x2, theta):
    """One-dimensional correlation psi(x, x'; theta).  Broadcasts.

    Returns values in (0, 1], equal to 1 iff x == x'.
    """
    th = _check_theta(theta)
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(x2))):
        raise ValueError("kernel inputs must be finite")
    if kind == KernelKind.SQEXP:
        return np.exp(-((x - x2) ** 2) / th)
    a = np.abs(x - x2) / th
    if kind == KernelKind.MATERN15:
        u = SQRT3 * a
        return (1.0 + u) * np.exp(-u)
    if kind == KernelKind.MATERN25:
        u = SQRT5 * a
        return (1.0 + u + u * u / 3.0) * np.exp(-u)
    raise ValueError(f"unknown kernel kind {kind!r}")


def kernel_input(kind: KernelKind, x, x2, scales: Lengthscales):
    """Anisotropic product kernel over the d input coordinates.

    x, x2: arrays of shape (..., d).  Returns the product over the last axis.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    d = scales.dim
    if x.shape[-1] != d or x2.shape[-1] != d:
        raise ValueError(
            f"dimension mismatch: inputs have {x.shape[-1]} and {x2.shape[-1]} "
            f"coordinates, lengthscales have {d}"
        )
    return np.prod(psi(kind, x, x2, scales.input_scales), axis=-1)


def kernel_augmented(kind: KernelKind, z, z2, scales: Lengthscales):
    """Kernel on augmented inputs z = (x, y): input product times psi on y."""
    if scales.output_scale is None:
        raise ValueError("augmented kernel requires an output_scale")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    z2 = np.atleast_1d(np.asarray(z2, dtype=float))
    if z.shape[-1] != scales.dim + 1 or z2.shape[-1] != scales.dim + 1:
        raise ValueError(
            f"augmented inputs must have {scales.dim + 1} coordinates, "
            f"got {z.shape[-1]} and {z2.shape[-1]}"
        )
    k_in = kernel_input(kind, z[..., :-1], z2[..., :-1], scales)
    return k_in * psi(kind, z[..., -1], z2[..., -1], scales.output_scale)


def _kernel_any(kind, a, b, scales: Lengthscales):
    if scales.output_scale is None:
        return kernel_input(kind, a, b, scales)
    return kernel_augmented(kind, a, b, scales)


def cross_matrix(kind: KernelKind, a: np.ndarray, b: np.ndarray,
                 scales: Lengthscales) -> np.ndarray:
    """Kernel matrix between two point sets, shape (len(a), len(b))."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    return _kernel_any(kind, a[:, None, :], b[None, :, :], scales)


def cov_matrix(kind: KernelKind, points: np.ndarray, scales: Lengthscales,
               jitter: float = 0.0) -> np.ndarray:
    """Symmetric correlation matrix of one point set, jitter on the diagonal.

    points may be plain (n, d) or augmented (n, d+1) rows; which one is
    expected follows from whether scales carries an output_scale.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        raise ValueError("cov_matrix needs at least one point")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    K = cross_matrix(kind, points, points, scales)
    # exact symmetry regardless of floating noise in the product order
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0 + jitter)
    return K


def chol_with_jitter(kind: KernelKind, points: np.ndarray, scales: Lengthscales,
                     jitter: float = JITTER_DEFAULT) -> tuple[np.ndarray, np.ndarray, float]:
    """Covariance matrix and its lower Cholesky factor, escalating jitter.

    Starts at `jitter` and multiplies by 10 up to JITTER_MAX until the
    factorization succeeds.  Returns (K, L, jitter_used) where K includes
    the jitter actually used.  Raises ConditioningError when even
    JITTER_MAX fails.
    """
    j = max(float(jitter), 0.0)
    K0 = cov_matrix(kind, points, scales, 0.0)
    n = K0.shape[0]
    while True:
        K = K0 + j * np.eye(n) if j > 0 else K0
        try:
            L = np.linalg.cholesky(K)
            return K, L, j
        except np.linalg.LinAlgError:
            nxt = max(j, JITTER_DEFAULT) * 10.0 if j > 0 else JITTER_DEFAULT
            if j >= JITTER_MAX or nxt > JITTER_MAX * (1 + 1e-12):
                raise ConditioningError(
                    f"covariance matrix of {n} points is not positive definite "
                    f"even with jitter {j:.1e}", jitter=j,
                ) from None
            j = nxt
