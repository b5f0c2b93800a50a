"""Typed documents on disk: datasets, fitted emulators, run configurations.

Everything is JSON.  Floats pass through Python's repr, the shortest
decimal that round-trips to the same double, so save -> load is exact.
Writers are atomic (temp file in the target directory + os.replace), so a
reader never observes a half-written document.

Emulator files deliberately do not store factorization caches.  They hold
the per-level lengthscales plus a fingerprint of the training dataset; the
Cholesky factor, K^-1, and the profiled mean and variance are recomputed
on load.  That keeps model files small, portable across BLAS builds, and
impossible to desynchronize from their data without tripping the
fingerprint check.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .active_learning import STRATEGIES
from .data import MultiFidelityDataset
from .emulator import RnaEmulator
from .gp import FitOptions
from .kernels import JITTER_DEFAULT, KernelKind, Lengthscales

__all__ = [
    "SerializationError",
    "StaleModelError",
    "RunConfig",
    "atomic_write_text",
    "canonical_json",
    "dataset_fingerprint",
    "save_dataset",
    "load_dataset",
    "emulator_to_dict",
    "emulator_from_dict",
    "save_emulator",
    "load_emulator",
    "run_config_from_dict",
    "load_run_config",
]

EMULATOR_FORMAT = "rnagp.emulator"
EMULATOR_VERSION = 1


class SerializationError(ValueError):
    """A document failed to parse or violated its schema."""


class StaleModelError(SerializationError):
    """An emulator file does not match the dataset it is being used with."""


# ---------------------------------------------------------------------------
# low-level plumbing


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text so that the destination is never partially written.

    The temp file lives in the destination directory, so os.replace is a
    same-filesystem rename and therefore atomic.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."),
                               prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def canonical_json(payload) -> str:
    """Key-sorted, whitespace-free JSON; the form that gets fingerprinted."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _load_json(path: str | Path, what: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SerializationError(f"cannot read {what} file {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SerializationError(f"{what} file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SerializationError(f"{what} file {path} must hold a JSON object")
    return payload


def _reject_unknown(payload: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise SerializationError(f"unknown {where} keys: {unknown}")


# ---------------------------------------------------------------------------
# datasets


def dataset_fingerprint(dataset: MultiFidelityDataset) -> str:
    return hashlib.sha256(
        canonical_json(dataset.to_dict()).encode("utf-8")
    ).hexdigest()


def save_dataset(dataset: MultiFidelityDataset, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(dataset.to_dict(), indent=2) + "\n")


def load_dataset(path: str | Path) -> MultiFidelityDataset:
    """Parse and validate a dataset file; every invariant is re-checked."""
    payload = _load_json(path, "dataset")
    return MultiFidelityDataset.from_dict(payload)


# ---------------------------------------------------------------------------
# emulators


def _float_or_none(x: float):
    x = float(x)
    return x if np.isfinite(x) else None


def emulator_to_dict(emulator: RnaEmulator) -> dict:
    levels = []
    for model in emulator.models:
        levels.append({
            "input_lengthscales": model.scales.input_scales.tolist(),
            "output_lengthscale": (None if model.scales.output_scale is None
                                   else float(model.scales.output_scale)),
            "alpha": float(model.alpha),
            "tau_sq": float(model.tau_sq),
            # strict JSON has no NaN; an unfit level stores null
            "nll": _float_or_none(model.nll),
        })
    return {
        "format": EMULATOR_FORMAT,
        "version": EMULATOR_VERSION,
        "kernel": emulator.kind.value,
        "jitter": float(emulator.options.jitter),
        "dataset_sha256": dataset_fingerprint(emulator.dataset),
        "levels": levels,
    }


def save_emulator(emulator: RnaEmulator, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(emulator_to_dict(emulator), indent=2) + "\n")


def emulator_from_dict(payload: dict, dataset: MultiFidelityDataset,
                       options: FitOptions | None = None) -> RnaEmulator:
    """Rebuild an emulator against the dataset it was fitted on.

    The stored fingerprint must match the dataset byte for byte; anything
    else means the model is stale and its hyperparameters untrustworthy.
    """
    if payload.get("format") != EMULATOR_FORMAT:
        raise SerializationError(
            f"not an emulator file (format={payload.get('format')!r})"
        )
    if payload.get("version") != EMULATOR_VERSION:
        raise SerializationError(
            f"unsupported emulator file version {payload.get('version')!r}"
        )
    expected = payload.get("dataset_sha256")
    actual = dataset_fingerprint(dataset)
    if expected != actual:
        raise StaleModelError(
            "emulator was fitted on a different dataset "
            f"(file {str(expected)[:12]}…, data {actual[:12]}…)"
        )
    raw_levels = payload.get("levels")
    if not isinstance(raw_levels, list) or len(raw_levels) != dataset.levels:
        raise SerializationError(
            f"emulator file has {len(raw_levels) if isinstance(raw_levels, list) else 'no'} "
            f"levels, dataset has {dataset.levels}"
        )
    scales = []
    nll = []
    for lv, entry in enumerate(raw_levels, start=1):
        try:
            out = entry["output_lengthscale"]
            scales.append(Lengthscales(
                input_scales=np.asarray(entry["input_lengthscales"], dtype=float),
                output_scale=None if out is None else float(out),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise SerializationError(f"level {lv} entry is malformed: {exc}") from exc
        if (lv > 1) != (scales[-1].output_scale is not None):
            raise SerializationError(
                f"level {lv} {'lacks' if lv > 1 else 'carries'} an output lengthscale"
            )
        stored = entry.get("nll")
        nll.append(float("nan") if stored is None else float(stored))
    if options is None:
        options = FitOptions(jitter=float(payload.get("jitter", JITTER_DEFAULT)))
    kind = KernelKind.parse(payload.get("kernel", ""))
    return RnaEmulator.from_hyperparameters(dataset, kind, scales, options, nll=nll)


def load_emulator(path: str | Path, dataset: MultiFidelityDataset,
                  options: FitOptions | None = None) -> RnaEmulator:
    return emulator_from_dict(_load_json(path, "emulator"), dataset, options)


# ---------------------------------------------------------------------------
# run configuration

_PATH_KEYS = {"emulator", "report", "predictions", "trace", "dataset",
              "results", "summary", "svg"}
_FIT_KEYS = {"restarts", "max_iters", "jitter"}
_ALC_KEYS = {"integration", "imputations"}
_TOP_KEYS = {"kernel", "fit", "strategy", "budget", "alc", "seed", "paths"}


@dataclass(frozen=True)
class RunConfig:
    """Everything a command run needs beyond its input files.

    alc sample counts follow the defaults used throughout: 1000
    integration points and 100 imputation draws per candidate.
    """

    kernel: KernelKind = KernelKind.SQEXP
    fit: FitOptions = field(default_factory=FitOptions)
    strategy: str = "almc"
    budget: float = 0.0
    n_integration: int = 1000
    n_imputations: int = 100
    seed: int = 0
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kernel", KernelKind.parse(self.kernel))
        if self.strategy not in STRATEGIES:
            raise SerializationError(
                f"strategy must be one of {list(STRATEGIES)}, got {self.strategy!r}"
            )
        if self.budget < 0:
            raise SerializationError("budget must be nonnegative")
        if self.n_integration < 1 or self.n_imputations < 1:
            raise SerializationError("alc sample counts must be positive")


def run_config_from_dict(payload: dict) -> RunConfig:
    """Strict parse: a key the schema does not know is an error, not a
    silent no-op, because a typoed knob would otherwise run the defaults."""
    _reject_unknown(payload, _TOP_KEYS, "config")
    kwargs = {}
    if "kernel" in payload:
        try:
            kwargs["kernel"] = KernelKind.parse(payload["kernel"])
        except ValueError as exc:
            raise SerializationError(str(exc)) from exc
    if "fit" in payload:
        section = payload["fit"]
        if not isinstance(section, dict):
            raise SerializationError("config key 'fit' must be an object")
        _reject_unknown(section, _FIT_KEYS, "config.fit")
        try:
            kwargs["fit"] = FitOptions(
                restarts=int(section.get("restarts", 5)),
                max_iters=int(section.get("max_iters", 200)),
                jitter=float(section.get("jitter", JITTER_DEFAULT)),
            )
        except (TypeError, ValueError) as exc:
            raise SerializationError(f"bad fit options: {exc}") from exc
    if "strategy" in payload:
        kwargs["strategy"] = str(payload["strategy"]).lower()
    if "budget" in payload:
        try:
            kwargs["budget"] = float(payload["budget"])
        except (TypeError, ValueError) as exc:
            raise SerializationError(f"budget must be a number: {exc}") from exc
    if "alc" in payload:
        section = payload["alc"]
        if not isinstance(section, dict):
            raise SerializationError("config key 'alc' must be an object")
        _reject_unknown(section, _ALC_KEYS, "config.alc")
        if "integration" in section:
            kwargs["n_integration"] = int(section["integration"])
        if "imputations" in section:
            kwargs["n_imputations"] = int(section["imputations"])
    if "seed" in payload:
        kwargs["seed"] = int(payload["seed"])
    if "paths" in payload:
        section = payload["paths"]
        if not isinstance(section, dict):
            raise SerializationError("config key 'paths' must be an object")
        _reject_unknown(section, _PATH_KEYS, "config.paths")
        if not all(isinstance(v, str) for v in section.values()):
            raise SerializationError("config paths must be strings")
        kwargs["paths"] = dict(section)
    return RunConfig(**kwargs)


def load_run_config(path: str | Path) -> RunConfig:
    return run_config_from_dict(_load_json(path, "config"))
