"""Random circuit ensembles and topologies.

A circuit with depth d has cycles c = 1..d.  Each cycle is a layer of
single-qubit gates followed by a layer of two-qubit gates taken from
``pattern[(c - 1) % len(pattern)]``.  An optional final single-qubit layer
(cycle d + 1, no two-qubit gates) can be appended; ensemble-averaged
quantities computed by :mod:`phaselab.popdyn` refer to circuits with that
final layer.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from . import rng

FORMAT_VERSION = 1

DISCRETE_P = tuple(k / 4 for k in range(-4, 4))  # -1, -3/4, ..., 3/4
CLIFFORD_P = (-1.0, -0.5, 0.0, 0.5)
ENSEMBLES = ("discrete_zxz", "clifford_zxz", "haar_1q")
ENTANGLERS = ("iswap", "fsim")

# hardware-like fSim angles
FSIM_HARDWARE = (0.495 * math.pi, 0.09 * math.pi)


class SpecError(ValueError):
    """Invalid circuit specification; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class NoiseInjection:
    sigma_angle: float
    axis_mean: float = -1.0
    axis_std: float = 1.0
    per_layer: bool = True


@dataclass(frozen=True)
class NoiseModel:
    p2: float = 0.0
    p1: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        for name in ("p2", "p1", "epsilon"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SpecError(name, f"must lie in [0, 1], got {v}")

    def fidelity_per_cycle(self, n: int) -> float:
        return math.exp(-self.epsilon * n)


@dataclass(frozen=True)
class WeakLink:
    cut_position: int
    period_T: int


@dataclass(frozen=True)
class CircuitSpec:
    n: int
    depth_cycles: int
    topology: str = "chain1d"
    rows: int = 0
    cols: int = 0
    pattern: tuple = ("A", "B")
    gate_ensemble: str = "haar_1q"
    entangler: str = "iswap"
    fsim_theta: float = math.pi / 2
    fsim_phi: float = 0.0
    weak_link: Optional[WeakLink] = None
    noise_inject: Optional[NoiseInjection] = None
    final_layer: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(self.pattern))
        validate(self)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitSpec":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise SpecError(sorted(extra)[0], "unknown field")
        if "n" not in d:
            raise SpecError("n", "missing")
        if "depth_cycles" not in d:
            raise SpecError("depth_cycles", "missing")
        if d.get("weak_link") is not None:
            d["weak_link"] = WeakLink(**d["weak_link"])
        if d.get("noise_inject") is not None:
            d["noise_inject"] = NoiseInjection(**d["noise_inject"])
        return cls(**d)


@functools.lru_cache(maxsize=None)
def pattern_data() -> dict:
    text = resources.files("phaselab").joinpath("data/patterns_v1.json").read_text()
    return json.loads(text)


def grid_index(r: int, c: int, cols: int) -> int:
    return r * cols + c


def topology_bonds(spec: CircuitSpec) -> set:
    """All adjacent qubit pairs (i, j), i < j."""
    if spec.topology == "chain1d":
        return {(i, i + 1) for i in range(spec.n - 1)}
    out = set()
    for r in range(spec.rows):
        for c in range(spec.cols):
            i = grid_index(r, c, spec.cols)
            if c + 1 < spec.cols:
                out.add((i, i + 1))
            if r + 1 < spec.rows:
                out.add((i, i + spec.cols))
    return out


def layer_bonds(spec: CircuitSpec, label: str) -> list:
    """Bonds of one pattern layer, before any weak-link filtering."""
    if spec.topology == "chain1d":
        if label not in ("A", "B"):
            raise SpecError("pattern", f"label {label!r} undefined for chain1d")
        central = spec.n // 2 - 1
        same = label == "B"
        return [(i, i + 1) for i in range(spec.n - 1) if ((i - central) % 2 == 0) == same]
    data = pattern_data()
    if label not in data["grid"]:
        raise SpecError("pattern", f"label {label!r} undefined for grid2d")
    out = []
    for (r0, c0), (r1, c1) in data["grid"][label]:
        if max(r0, r1) < spec.rows and max(c0, c1) < spec.cols:
            a, b = grid_index(r0, c0, spec.cols), grid_index(r1, c1, spec.cols)
            out.append((min(a, b), max(a, b)))
    return sorted(out)


def cut_sides(spec: CircuitSpec) -> np.ndarray:
    """Boolean mask of qubits on the left of the weak-link cut."""
    if spec.weak_link is None:
        cut = spec.n // 2 if spec.topology == "chain1d" else spec.cols // 2
    else:
        cut = spec.weak_link.cut_position
    if spec.topology == "chain1d":
        return np.arange(spec.n) < cut
    cols = np.arange(spec.n) % spec.cols
    return cols < cut


def crosses_cut(spec: CircuitSpec, bond) -> bool:
    left = cut_sides(spec)
    return bool(left[bond[0]] != left[bond[1]])


def cycle_pairs(spec: CircuitSpec, cycle: int) -> list:
    """Two-qubit pairs applied in ``cycle`` (1-based), weak link included."""
    if cycle > spec.depth_cycles:
        return []
    label = spec.pattern[(cycle - 1) % len(spec.pattern)]
    bonds = layer_bonds(spec, label)
    if spec.weak_link is None:
        return bonds
    link_cycle = cycle % spec.weak_link.period_T == 0
    return [b for b in bonds if link_cycle or not crosses_cut(spec, b)]


def validate(spec: CircuitSpec) -> None:
    if spec.n < 1:
        raise SpecError("n", "must be positive")
    if spec.depth_cycles < 0:
        raise SpecError("depth_cycles", "must be non-negative")
    if spec.topology == "grid2d":
        if spec.rows * spec.cols != spec.n:
            raise SpecError("rows", f"rows*cols = {spec.rows * spec.cols} != n = {spec.n}")
        master = pattern_data()["grid_master"]
        if spec.rows > master[0] or spec.cols > master[1]:
            raise SpecError("rows", f"grid larger than the {master} pattern patch")
    elif spec.topology != "chain1d":
        raise SpecError("topology", f"unknown topology {spec.topology!r}")
    if not spec.pattern:
        raise SpecError("pattern", "empty")
    for lab in spec.pattern:
        layer_bonds(spec, lab)
    if spec.gate_ensemble not in ENSEMBLES:
        raise SpecError("gate_ensemble", f"unknown ensemble {spec.gate_ensemble!r}")
    if spec.entangler not in ENTANGLERS:
        raise SpecError("entangler", f"unknown entangler {spec.entangler!r}")
    wl = spec.weak_link
    if wl is not None:
        width = spec.n if spec.topology == "chain1d" else spec.cols
        if 2 * wl.cut_position != width:
            raise SpecError("weak_link", f"cut at {wl.cut_position} does not bisect {width}")
        if wl.period_T < 1:
            raise SpecError("weak_link", "period_T must be >= 1")
        if spec.topology == "chain1d" and spec.n >= 2:
            # the cut bond must be present in the layers of link cycles
            for c in range(wl.period_T, spec.depth_cycles + 1, wl.period_T):
                label = spec.pattern[(c - 1) % len(spec.pattern)]
                cut_bond = (wl.cut_position - 1, wl.cut_position)
                if cut_bond not in layer_bonds(spec, label):
                    raise SpecError(
                        "weak_link",
                        f"cycle {c} uses layer {label!r}, which lacks the cut bond; "
                        "choose a period compatible with the pattern",
                    )


# ---------------------------------------------------------------- gates

def z_pow(t: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * math.pi * t)])


SQRT_X = np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]) / 2
ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)


def zxz(p: float) -> np.ndarray:
    """Z^p X^(1/2) Z^-p."""
    return z_pow(p) @ SQRT_X @ z_pow(-p)


def fsim(theta: float, phi: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[1, 0, 0, 0], [0, c, -1j * s, 0], [0, -1j * s, c, 0], [0, 0, 0, np.exp(-1j * phi)]],
        dtype=complex,
    )


def haar_unitary(gen: np.random.Generator) -> np.ndarray:
    """Haar 2x2 unitary via Gram-Schmidt on two complex Gaussian columns."""
    z = gen.normal(size=(2, 2)) + 1j * gen.normal(size=(2, 2))
    a = z[:, 0] / np.linalg.norm(z[:, 0])
    b = z[:, 1] - np.vdot(a, z[:, 1]) * a
    b = b / np.linalg.norm(b)
    return np.column_stack([a, b])


def injected(z: float, a: float, x: float) -> np.ndarray:
    """Z^z Z^a X^x Z^-a with z, x rotation angles (radians), a an exponent."""
    rz = np.diag([1.0, np.exp(1j * z)])
    c, s = math.cos(x / 2), math.sin(x / 2)
    rx = np.array([[c, -1j * s], [-1j * s, c]])
    return rz @ z_pow(a) @ rx @ z_pow(-a)


@dataclass(frozen=True)
class Gate:
    cycle: int
    kind: str
    qubits: tuple
    params: dict = field(default_factory=dict, compare=True, hash=False)

    def matrix(self) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "zxz":
            return zxz(p["p"])
        if k == "haar":
            u = np.asarray(p["u"], dtype=float).reshape(2, 2, 2)
            return u[0] + 1j * u[1]
        if k == "iswap":
            return ISWAP
        if k == "iswap_omitted":
            return np.eye(4, dtype=complex)
        if k == "fsim":
            return fsim(p["theta"], p["phi"])
        if k == "inject":
            return injected(p["z"], p["a"], p["x"])
        raise ValueError(f"unknown gate kind {k!r}")

    def to_dict(self) -> dict:
        return {"cycle": self.cycle, "kind": self.kind, "qubits": list(self.qubits), "params": self.params}


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple
    spec: Optional[CircuitSpec] = None

    def layers(self):
        """Gates grouped into consecutive (cycle, role) blocks, in order."""
        block, key = [], None
        for g in self.gates:
            k = (g.cycle, len(g.qubits), g.kind == "inject")
            if key is not None and k != key:
                yield block
                block = []
            key = k
            block.append(g)
        if block:
            yield block

    def to_json(self) -> str:
        doc = {
            "version": FORMAT_VERSION,
            "spec": self.spec.to_dict() if self.spec is not None else {"n": self.n},
            "gates": [g.to_dict() for g in self.gates],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        doc = json.loads(text)
        if doc.get("version") != FORMAT_VERSION:
            raise SpecError("version", f"unsupported circuit format {doc.get('version')!r}")
        raw = doc["spec"]
        spec = CircuitSpec.from_dict(raw) if "depth_cycles" in raw else None
        gates = tuple(Gate(g["cycle"], g["kind"], tuple(g["qubits"]), g["params"]) for g in doc["gates"])
        return cls(raw["n"], gates, spec)


def _one_qubit_gate(spec: CircuitSpec, cycle: int, q: int) -> Gate:
    gen = rng.stream(spec.seed, "1q", cycle, q)
    if spec.gate_ensemble == "haar_1q":
        u = haar_unitary(gen)
        return Gate(cycle, "haar", (q,), {"u": np.stack([u.real, u.imag]).ravel().tolist()})
    choices = DISCRETE_P if spec.gate_ensemble == "discrete_zxz" else CLIFFORD_P
    p = choices[int(gen.integers(len(choices)))]
    return Gate(cycle, "zxz", (q,), {"p": p})


def _two_qubit_gate(spec: CircuitSpec, cycle: int, pair) -> Gate:
    if spec.entangler == "iswap":
        return Gate(cycle, "iswap", tuple(pair), {})
    return Gate(cycle, "fsim", tuple(pair), {"theta": spec.fsim_theta, "phi": spec.fsim_phi})


def build_circuit(spec: CircuitSpec) -> Circuit:
    """Deterministic gate list for ``spec``; draws use streams keyed by (cycle, qubit)."""
    validate(spec)
    gates = []
    for c in range(1, spec.depth_cycles + 1):
        gates.extend(_one_qubit_gate(spec, c, q) for q in range(spec.n))
        gates.extend(_two_qubit_gate(spec, c, pr) for pr in cycle_pairs(spec, c))
    if spec.final_layer:
        c = spec.depth_cycles + 1
        gates.extend(_one_qubit_gate(spec, c, q) for q in range(spec.n))
    circ = Circuit(spec.n, tuple(gates), spec)
    if spec.noise_inject is not None:
        circ = inject_noise_gates(circ, spec.noise_inject, spec.seed)
    return circ


def inject_noise_gates(circuit: Circuit, inj: NoiseInjection, seed: int) -> Circuit:
    """Insert one random Z^z Z^a X^x Z^-a per qubit after every single-qubit layer."""
    if inj.sigma_angle < 0:
        raise SpecError("sigma_angle", "must be non-negative")
    out = []
    for block in circuit.layers():
        out.extend(block)
        if len(block[0].qubits) != 1 or block[0].kind == "inject":
            continue
        cyc = block[0].cycle
        for g in block:
            q = g.qubits[0]
            gen = rng.stream(seed, "inject", cyc if inj.per_layer else 0, q)
            z, x = gen.normal(0.0, inj.sigma_angle, size=2) if inj.sigma_angle > 0 else (0.0, 0.0)
            a = gen.normal(inj.axis_mean, inj.axis_std)
            out.append(Gate(cyc, "inject", (q,), {"z": float(z), "a": float(a), "x": float(x)}))
    return Circuit(circuit.n, tuple(out), circuit.spec)


def count_cross_cut(circuit: Circuit, spec: CircuitSpec) -> list:
    """Cycles of every two-qubit gate crossing the cut."""
    return [g.cycle for g in circuit.gates if len(g.qubits) == 2 and crosses_cut(spec, g.qubits)]
