"""Instance files: JSON with complex numbers encoded as ``[re, im]`` pairs.

Top-level fields::

    d, m, p, p_prime        dimensions (p, p_prime default to m)
    phi                     [mu][nu] array of m x m complex matrices
    kappa                   m matrices of shape p_prime x p (optional)
    involution              m x m complex matrix (optional)
    step_functions          {name: {"breakpoints": [...], "values": [...]}}
    constants               {"fe_constant": "exp" | "linear"}
    engine                  {"truncation", "slots", "quadrature_steps", "lift_max"}
    seed                    integer seed for random perturbations
    coalgebra               {"delta", "counit", "varphi"} (optional)

When ``kappa`` is missing and ``p = p_prime = m`` the initial condition is
the diagonal embedding ``b_i -> E_ii``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coalgebra import Coalgebra, GeneratorFunctional
from .coefficients import Coefficient, InitialMap, InitialSpace
from .noise import StepFunction

DEFAULT_ENGINE = {"truncation": 18, "slots": 64, "quadrature_steps": 64, "lift_max": 3}
DEFAULT_CONSTANTS = {"fe_constant": "exp"}


class SchemaError(ValueError):
    """Instance file violates the schema; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _complex(value, path: str) -> complex:
    if isinstance(value, bool):
        raise SchemaError(path, "expected a number or [re, im] pair")
    if isinstance(value, (int, float)):
        z = complex(value)
    elif isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        z = complex(value[0], value[1])
    else:
        raise SchemaError(path, "expected a number or [re, im] pair")
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise SchemaError(path, "NaN/Inf not allowed")
    return z


def _vector(value, n: int, path: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != n:
        got = len(value) if isinstance(value, list) else type(value).__name__
        raise SchemaError(path, f"expected {n} entries, got {got}")
    return np.array([_complex(z, f"{path}[{i}]") for i, z in enumerate(value)])


def _matrix(value, rows: int, cols: int, path: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != rows:
        got = len(value) if isinstance(value, list) else type(value).__name__
        raise SchemaError(path, f"expected {rows}x{cols} matrix, got {got} rows")
    return np.array([_vector(row, cols, f"{path}[{i}]") for i, row in enumerate(value)])


def _encode(a) -> list:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [_encode(x) for x in a]


def _int(data: dict, key: str, default=None) -> int:
    if key not in data:
        if default is None:
            raise SchemaError(key, "missing required field")
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise SchemaError(key, "expected a nonnegative integer")
    return v


@dataclass(eq=False)
class Instance:
    d: int
    m: int
    p: int
    p_prime: int
    phi: Coefficient
    kappa: InitialMap
    involution: np.ndarray | None = None
    step_functions: dict = field(default_factory=dict)
    constants: dict = field(default_factory=lambda: dict(DEFAULT_CONSTANTS))
    engine: dict = field(default_factory=lambda: dict(DEFAULT_ENGINE))
    seed: int = 0
    coalgebra: Coalgebra | None = None
    varphi: GeneratorFunctional | None = None
    kappa_given: bool = True

    @property
    def space(self) -> InitialSpace:
        return InitialSpace(self.m, self.involution)

    def step_function(self, name: str | None) -> StepFunction:
        if name is None or name in ("0", "zero"):
            return self.step_functions.get(name or "zero", StepFunction.zero(self.d))
        try:
            return self.step_functions[name]
        except KeyError:
            raise SchemaError(f"step_functions.{name}", "no such step function") from None

    def to_dict(self) -> dict:
        out = {
            "d": self.d, "m": self.m, "p": self.p, "p_prime": self.p_prime,
            "phi": _encode(self.phi.theta),
            "step_functions": {k: f.to_dict() for k, f in self.step_functions.items()},
            "constants": dict(self.constants),
            "engine": dict(self.engine),
            "seed": self.seed,
        }
        if self.kappa_given:
            out["kappa"] = _encode(self.kappa.kappa)
        if self.involution is not None:
            out["involution"] = _encode(self.involution)
        if self.coalgebra is not None:
            out["coalgebra"] = {
                "delta": _encode(self.coalgebra.delta),
                "counit": _encode(self.coalgebra.counit),
                "varphi": _encode(self.varphi.varphi),
            }
        return out

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise SchemaError("$", "instance must be a JSON object")
    d = _int(data, "d")
    m = _int(data, "m")
    if m < 1:
        raise SchemaError("m", "must be positive")
    p = _int(data, "p", m)
    pp = _int(data, "p_prime", p)
    D = d + 1

    if "phi" not in data:
        raise SchemaError("phi", "missing required field")
    raw = data["phi"]
    if not isinstance(raw, list) or len(raw) != D:
        raise SchemaError("phi", f"expected {D} rows of blocks")
    theta = np.empty((D, D, m, m), dtype=complex)
    for a in range(D):
        if not isinstance(raw[a], list) or len(raw[a]) != D:
            raise SchemaError(f"phi[{a}]", f"expected {D} blocks")
        for b in range(D):
            theta[a, b] = _matrix(raw[a][b], m, m, f"phi[{a}][{b}]")
    phi = Coefficient(theta)

    kappa_given = "kappa" in data
    if kappa_given:
        raw = data["kappa"]
        if not isinstance(raw, list) or len(raw) != m:
            raise SchemaError("kappa", f"expected {m} matrices")
        kappa = InitialMap(np.array([_matrix(k, pp, p, f"kappa[{i}]") for i, k in enumerate(raw)]))
    elif p == pp == m:
        kappa = InitialMap.diagonal(m)
    else:
        raise SchemaError("kappa", "missing; the identity default needs p = p_prime = m")

    involution = None
    if data.get("involution") is not None:
        involution = _matrix(data["involution"], m, m, "involution")

    steps = {}
    for name, f in (data.get("step_functions") or {}).items():
        path = f"step_functions.{name}"
        if not isinstance(f, dict) or "breakpoints" not in f or "values" not in f:
            raise SchemaError(path, "expected {breakpoints, values}")
        bps = f["breakpoints"]
        if not isinstance(bps, list) or not all(
                isinstance(b, (int, float)) and math.isfinite(b) for b in bps):
            raise SchemaError(f"{path}.breakpoints", "expected finite numbers")
        if not isinstance(f["values"], list) or len(f["values"]) != len(bps):
            raise SchemaError(f"{path}.values", "expected one value per breakpoint")
        vals = [_vector(v, d, f"{path}.values[{j}]") for j, v in enumerate(f["values"])]
        try:
            steps[name] = StepFunction(bps, np.array(vals).reshape(len(bps), d), d=d)
        except ValueError as exc:
            raise SchemaError(path, str(exc)) from None

    constants = dict(DEFAULT_CONSTANTS)
    constants.update(data.get("constants") or {})
    if constants["fe_constant"] not in ("exp", "linear"):
        raise SchemaError("constants.fe_constant", "expected 'exp' or 'linear'")
    engine = dict(DEFAULT_ENGINE)
    for key, val in (data.get("engine") or {}).items():
        if key not in DEFAULT_ENGINE:
            raise SchemaError(f"engine.{key}", "unknown engine option")
        if isinstance(val, bool) or not isinstance(val, int) or val < 1:
            raise SchemaError(f"engine.{key}", "expected a positive integer")
        engine[key] = val
    seed = _int(data, "seed", 0)

    coalg = varphi = None
    if data.get("coalgebra") is not None:
        raw = data["coalgebra"]
        if "counit" not in raw or "delta" not in raw or "varphi" not in raw:
            raise SchemaError("coalgebra", "expected delta, counit and varphi")
        counit = raw["counit"]
        n = len(counit) if isinstance(counit, list) else 0
        eps = _vector(counit, n, "coalgebra.counit")
        if not isinstance(raw["delta"], list) or len(raw["delta"]) != n:
            raise SchemaError("coalgebra.delta", f"expected {n} slices")
        delta = np.array([_matrix(s, n, n, f"coalgebra.delta[{i}]")
                          for i, s in enumerate(raw["delta"])])
        if not isinstance(raw["varphi"], list) or len(raw["varphi"]) != n:
            raise SchemaError("coalgebra.varphi", f"expected {n} matrices")
        vp = np.array([_matrix(s, D, D, f"coalgebra.varphi[{i}]")
                       for i, s in enumerate(raw["varphi"])])
        coalg, varphi = Coalgebra(delta, eps), GeneratorFunctional(vp)

    return Instance(d, m, p, pp, phi, kappa, involution, steps, constants, engine, seed,
                    coalg, varphi, kappa_given)


def parse_instance(path) -> Instance:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return instance_from_dict(data)
