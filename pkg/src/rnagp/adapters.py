"""Simulator adapters: where the active-learning loop gets fresh outputs.

Two sources exist.  Builtin synthetic problems run in process.  External
simulators run as one subprocess per evaluation, speaking a one-line JSON
protocol: the request {"level": l, "x": [..]} goes to the child's stdin,
and the child answers with exactly one line {"y": value} on stdout.  A
nonzero exit status, malformed output, or a timeout is an AdapterError.

Both sources are plain callables (level, x) -> float, which is the shape
al_loop consumes.  CachedSimulator wraps either one with a write-through
cache keyed by (level, full-precision x): simulators are assumed
deterministic, so a repeated request must never re-invoke the child.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .benchmarks import SyntheticProblem, get_problem
from .serialize import atomic_write_text, canonical_json

__all__ = [
    "AdapterError",
    "DEFAULT_TIMEOUT",
    "SubprocessAdapter",
    "BuiltinAdapter",
    "CachedSimulator",
    "resolve_adapter",
]

DEFAULT_TIMEOUT = 300.0


class AdapterError(RuntimeError):
    """The external simulator broke the protocol."""


def _request_line(level: int, x) -> str:
    xs = [float(v) for v in np.asarray(x, dtype=float).ravel()]
    return canonical_json({"level": int(level), "x": xs})


@dataclass(frozen=True)
class SubprocessAdapter:
    """One subprocess invocation per evaluation."""

    argv: tuple[str, ...]
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if not self.argv:
            raise ValueError("adapter command must not be empty")
        object.__setattr__(self, "argv", tuple(str(a) for a in self.argv))

    def __call__(self, level: int, x) -> float:
        request = _request_line(level, x)
        try:
            proc = subprocess.run(
                list(self.argv), input=request + "\n",
                capture_output=True, text=True, timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise AdapterError(
                f"adapter {self.argv[0]!r} timed out after {self.timeout:g}s"
            ) from exc
        except OSError as exc:
            raise AdapterError(f"cannot launch adapter {self.argv}: {exc}") from exc
        if proc.returncode != 0:
            detail = proc.stderr.strip().splitlines()
            raise AdapterError(
                f"adapter {self.argv[0]!r} exited with status {proc.returncode}"
                + (f": {detail[-1][:200]}" if detail else "")
            )
        lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
        if len(lines) != 1:
            raise AdapterError(
                f"adapter must write exactly one JSON line, got {len(lines)}"
            )
        try:
            payload = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise AdapterError(
                f"adapter output is not JSON: {lines[0][:120]!r}"
            ) from exc
        if not isinstance(payload, dict) or "y" not in payload:
            raise AdapterError(f'adapter output lacks a "y" field: {lines[0][:120]!r}')
        y = payload["y"]
        if isinstance(y, bool) or not isinstance(y, (int, float)):
            raise AdapterError(f'adapter "y" must be a number, got {y!r}')
        y = float(y)
        if not np.isfinite(y):
            raise AdapterError(f'adapter returned a non-finite value: {y!r}')
        return y


@dataclass(frozen=True)
class BuiltinAdapter:
    """In-process evaluation of a bundled synthetic problem."""

    problem: SyntheticProblem

    def __call__(self, level: int, x) -> float:
        return float(self.problem.evaluate(level, np.asarray(x, dtype=float)))


class CachedSimulator:
    """Write-through evaluation cache around any (level, x) -> y callable.

    Keys are the canonical request lines, so two requests collide exactly
    when they would have produced byte-identical child stdin.  When a path
    is given the cache persists after every miss, next to whatever trace
    the caller is writing, and primes itself from that file on restart.
    """

    def __init__(self, simulate, path: str | Path | None = None):
        self.simulate = simulate
        self.path = Path(path) if path is not None else None
        self.entries: dict[str, float] = {}
        self.calls = 0
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        try:
            records = json.loads(self.path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise AdapterError(f"evaluation cache {self.path} is unreadable: {exc}")
        if not isinstance(records, list):
            raise AdapterError(f"evaluation cache {self.path} must hold a list")
        for rec in records:
            self.entries[_request_line(rec["level"], rec["x"])] = float(rec["y"])

    def _persist(self) -> None:
        records = []
        for key, y in self.entries.items():
            req = json.loads(key)
            records.append({"level": req["level"], "x": req["x"], "y": y})
        atomic_write_text(self.path, json.dumps(records, indent=2) + "\n")

    def __call__(self, level: int, x) -> float:
        key = _request_line(level, x)
        hit = self.entries.get(key)
        if hit is not None:
            return hit
        y = float(self.simulate(level, x))
        self.calls += 1
        self.entries[key] = y
        if self.path is not None:
            self._persist()
        return y


def resolve_adapter(spec: str, timeout: float = DEFAULT_TIMEOUT):
    """Build a simulator from a CLI spec.

    "builtin:<name>" gives the bundled problem; anything else is parsed as
    a shell-style command line for a subprocess adapter.
    """
    spec = spec.strip()
    if spec.startswith("builtin:"):
        return BuiltinAdapter(get_problem(spec[len("builtin:"):]))
    argv = tuple(shlex.split(spec))
    if not argv:
        raise AdapterError("empty adapter command")
    return SubprocessAdapter(argv, timeout=timeout)
