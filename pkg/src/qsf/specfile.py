"""System specification files: a versioned JSON document describing a
bilinear system, its observables, the uncertainty model, and synthesis
targets.  Unknown fields are rejected so golden outputs stay stable."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .lie import BilinearSystem, PauliParseError, parse_pauli
from .quantum import HADAMARD
from .robust import UncertaintyModel

__all__ = ["ScheduleSpec", "SpecError", "SystemSpec", "UncertaintySpec", "load_spec"]

SPEC_VERSION = 1


class SpecError(ValueError):
    """Invalid spec document; message carries the offending field path."""

    def __init__(self, message: str, path: str = ""):
        loc = f" (field {path})" if path else ""
        super().__init__(f"{message}{loc}")
        self.path = path


@dataclass(frozen=True)
class UncertaintySpec:
    directions: tuple
    delta: float
    bath_dim: int = 1


@dataclass(frozen=True)
class ScheduleSpec:
    horizon: float
    segments: int


@dataclass(frozen=True)
class SystemSpec:
    n_qubits: int
    drift: str
    controls: tuple
    observables: dict = field(default_factory=dict)
    uncertainty: UncertaintySpec | None = None
    target: str | list | None = None
    schedule: ScheduleSpec | None = None

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    def system(self) -> BilinearSystem:
        return BilinearSystem.from_pauli(self.drift, list(self.controls), self.n_qubits)

    def observable_matrices(self) -> dict[str, np.ndarray]:
        return {
            name: parse_pauli(expr, self.n_qubits).matrix()
            for name, expr in self.observables.items()
        }

    def uncertainty_model(self) -> UncertaintyModel:
        if self.uncertainty is None:
            raise SpecError("spec has no uncertainty section", "uncertainty")
        u = self.uncertainty
        bath_qubits = int(np.log2(u.bath_dim)) if u.bath_dim > 1 else 0
        if 2 ** bath_qubits != u.bath_dim:
            raise SpecError("bath_dim must be a power of two", "uncertainty.bath_dim")
        n_total = self.n_qubits + bath_qubits
        dirs = tuple(parse_pauli(e, n_total).matrix() for e in u.directions)
        return UncertaintyModel(directions=dirs, delta=u.delta, bath_dim=u.bath_dim)

    def target_matrix(self) -> np.ndarray:
        if self.target is None:
            raise SpecError("spec has no target gate", "target")
        if isinstance(self.target, str):
            single = {"hadamard": HADAMARD, "identity": np.eye(2, dtype=complex)}
            if self.target not in single:
                raise SpecError(f"unknown named gate {self.target!r}", "target")
            return reduce(np.kron, [single[self.target]] * self.n_qubits)
        rows = self.target
        try:
            mat = np.array(
                [[complex(c[0], c[1]) for c in row] for row in rows], dtype=complex
            )
        except (TypeError, IndexError) as exc:
            raise SpecError(
                "matrix literal must be rows of [re, im] pairs", "target"
            ) from exc
        if mat.shape != (self.dim, self.dim):
            raise SpecError(
                f"target matrix must be {self.dim}x{self.dim}", "target"
            )
        return mat


def _require(doc: dict, key: str, typ, path: str):
    if key not in doc:
        raise SpecError(f"missing required field", f"{path}{key}")
    val = doc[key]
    if typ is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, typ):
        raise SpecError(
            f"expected {getattr(typ, '__name__', typ)}, got {type(val).__name__}",
            f"{path}{key}",
        )
    return val


def _reject_unknown(doc: dict, allowed: set, path: str):
    for key in doc:
        if key not in allowed:
            raise SpecError("unknown field", f"{path}{key}")


def load_spec(path: str) -> SystemSpec:
    """Load and validate a system spec document.

    Checks the version marker, field types, Pauli grammar and string
    lengths, and rejects unknown fields with their path.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise SpecError(f"spec file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(doc, dict):
        raise SpecError("spec document must be a JSON object")
    _reject_unknown(
        doc,
        {"version", "n_qubits", "drift", "controls", "observables",
         "uncertainty", "target", "schedule"},
        "",
    )
    version = _require(doc, "version", int, "")
    if version != SPEC_VERSION:
        raise SpecError(f"unsupported spec version {version}", "version")
    n_qubits = _require(doc, "n_qubits", int, "")
    if not 1 <= n_qubits <= 10:
        raise SpecError("n_qubits must be between 1 and 10", "n_qubits")
    drift = _require(doc, "drift", str, "")
    controls = _require(doc, "controls", list, "")

    def check_expr(expr: str, where: str, n: int = n_qubits) -> str:
        if not isinstance(expr, str):
            raise SpecError("expected a Pauli expression string", where)
        try:
            parse_pauli(expr, n)
        except PauliParseError as exc:
            raise SpecError(str(exc), where) from exc
        return expr

    check_expr(drift, "drift")
    for i, c in enumerate(controls):
        check_expr(c, f"controls[{i}]")

    observables = {}
    for name, expr in doc.get("observables", {}).items():
        observables[name] = check_expr(expr, f"observables.{name}")

    uncertainty = None
    if "uncertainty" in doc:
        u = doc["uncertainty"]
        _reject_unknown(u, {"directions", "delta", "bath_dim"}, "uncertainty.")
        delta = float(_require(u, "delta", (int, float), "uncertainty."))
        if delta < 0:
            raise SpecError("delta must be nonnegative", "uncertainty.delta")
        bath_dim = u.get("bath_dim", 1)
        if not isinstance(bath_dim, int) or bath_dim not in (1, 2, 4):
            raise SpecError("bath_dim must be 1, 2 or 4", "uncertainty.bath_dim")
        bath_qubits = {1: 0, 2: 1, 4: 2}[bath_dim]
        dirs = _require(u, "directions", list, "uncertainty.")
        for i, e in enumerate(dirs):
            check_expr(e, f"uncertainty.directions[{i}]", n_qubits + bath_qubits)
        uncertainty = UncertaintySpec(tuple(dirs), delta, bath_dim)

    schedule = None
    if "schedule" in doc:
        s = doc["schedule"]
        _reject_unknown(s, {"T", "segments"}, "schedule.")
        horizon = float(_require(s, "T", (int, float), "schedule."))
        segments = _require(s, "segments", int, "schedule.")
        if horizon <= 0 or segments < 1:
            raise SpecError("schedule needs T > 0 and segments >= 1", "schedule")
        schedule = ScheduleSpec(horizon, segments)

    target = doc.get("target")
    if target is not None and not isinstance(target, (str, list)):
        raise SpecError("target must be a gate name or a matrix literal", "target")

    spec = SystemSpec(
        n_qubits=n_qubits,
        drift=drift,
        controls=tuple(controls),
        observables=observables,
        uncertainty=uncertainty,
        target=target,
        schedule=schedule,
    )
    # constructing the matrices validates dimension consistency end to end
    spec.system()
    if target is not None:
        spec.target_matrix()
    if uncertainty is not None:
        spec.uncertainty_model()
    return spec
