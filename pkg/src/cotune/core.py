"""Domain types shared across the tuner: subspaces, configurations, records, tasks.

All performance values are minimized (execution-time-like). Costs and budgets
are simulated time units.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class SubspaceKind(str, Enum):
    CONTINUOUS = "continuous-box"
    BINARY = "binary-set"
    CATEGORICAL = "categorical-tuple"


class InvalidConfiguration(ValueError):
    """Raised when a configuration does not fit its subspace."""


@dataclass(frozen=True, order=True)
class ComponentId:
    index: int
    name: str

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("component index must be non-negative")


@dataclass(frozen=True)
class Subspace:
    """Domain of one component's settings.

    ``lower``/``upper`` are used by continuous boxes, ``cardinalities`` by
    categorical tuples, and ``weights``/``capacity`` form the optional linear
    resource constraint of a binary set.
    """

    kind: SubspaceKind
    dims: int
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    cardinalities: tuple[int, ...] | None = None
    weights: tuple[float, ...] | None = None
    capacity: float | None = None
    default: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SubspaceKind(self.kind))
        if self.dims < 1:
            raise ValueError("dims must be positive")
        if self.kind is SubspaceKind.CONTINUOUS:
            if self.lower is None or self.upper is None:
                raise ValueError("continuous-box needs lower and upper bounds")
            lo, hi = tuple(map(float, self.lower)), tuple(map(float, self.upper))
            if len(lo) != self.dims or len(hi) != self.dims:
                raise ValueError("bounds length must equal dims")
            if any(not a < b for a, b in zip(lo, hi)):
                raise ValueError("lower < upper required per dimension")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        elif self.kind is SubspaceKind.BINARY:
            if (self.weights is None) != (self.capacity is None):
                raise ValueError("binary constraint needs both weights and capacity")
            if self.weights is not None:
                w = tuple(map(float, self.weights))
                if len(w) != self.dims or any(x < 0 for x in w) or self.capacity < 0:
                    raise ValueError("constraint weights and capacity must be non-negative")
                object.__setattr__(self, "weights", w)
                object.__setattr__(self, "capacity", float(self.capacity))
        else:
            if self.cardinalities is None or len(self.cardinalities) != self.dims:
                raise ValueError("categorical-tuple needs one cardinality per dimension")
            if any(c < 2 for c in self.cardinalities):
                raise ValueError("every cardinality must be >= 2")
            object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        if self.default is None:
            object.__setattr__(self, "default", self._natural_default())
        else:
            object.__setattr__(self, "default", self.coerce(self.default))
            if not self.contains(self.default):
                raise ValueError("default configuration is not valid for the subspace")

    # -- constructors -------------------------------------------------------

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float], default=None) -> "Subspace":
        return cls(SubspaceKind.CONTINUOUS, len(lower), lower=tuple(lower), upper=tuple(upper), default=default)

    @classmethod
    def binary(cls, dims: int, weights=None, capacity=None, default=None) -> "Subspace":
        return cls(SubspaceKind.BINARY, dims,
                   weights=None if weights is None else tuple(weights),
                   capacity=capacity, default=default)

    @classmethod
    def categorical(cls, cardinalities: Sequence[int], default=None) -> "Subspace":
        return cls(SubspaceKind.CATEGORICAL, len(cardinalities), cardinalities=tuple(cardinalities), default=default)

    def _natural_default(self) -> tuple:
        if self.kind is SubspaceKind.CONTINUOUS:
            return tuple((a + b) / 2.0 for a, b in zip(self.lower, self.upper))
        if self.kind is SubspaceKind.BINARY:
            return (False,) * self.dims
        return (0,) * self.dims

    # -- values -------------------------------------------------------------

    def coerce(self, values: Iterable) -> tuple:
        """Normalize element types (float / bool / int) without validating."""
        if self.kind is SubspaceKind.CONTINUOUS:
            return tuple(float(v) for v in values)
        if self.kind is SubspaceKind.BINARY:
            return tuple(bool(v) for v in values)
        return tuple(int(v) for v in values)

    def load(self, values: Iterable) -> tuple:
        """Strict element parsing used by deserialization."""
        values = list(values)
        if self.kind is SubspaceKind.CATEGORICAL:
            for v in values:
                if isinstance(v, bool) or not float(v).is_integer():
                    raise InvalidConfiguration(f"category index must be an integer, got {v!r}")
        return self.coerce(values)

    def resource_usage(self, values: Sequence) -> float:
        if self.weights is None:
            return 0.0
        return math.fsum(w for w, v in zip(self.weights, values) if v)

    def contains(self, values: Sequence) -> bool:
        if len(values) != self.dims:
            return False
        if self.kind is SubspaceKind.CONTINUOUS:
            return all(math.isfinite(v) and lo <= v <= hi
                       for v, lo, hi in zip(values, self.lower, self.upper))
        if self.kind is SubspaceKind.BINARY:
            if not all(isinstance(v, (bool, np.bool_)) or v in (0, 1) for v in values):
                return False
            if self.weights is None:
                return True
            return self.resource_usage(values) <= self.capacity
        return all(0 <= int(v) < c and float(v) == int(v) for v, c in zip(values, self.cardinalities))

    @property
    def encoding_length(self) -> int:
        if self.kind is SubspaceKind.CATEGORICAL:
            return sum(self.cardinalities)
        return self.dims

    def encode(self, values: Sequence) -> np.ndarray:
        """Surrogate input encoding: reals as-is, bits as 0/1, categories one-hot."""
        return self.encode_batch([values])[0]

    def encode_batch(self, batch: Sequence[Sequence]) -> np.ndarray:
        arr = np.asarray(batch, dtype=float).reshape(len(batch), self.dims)
        if self.kind is not SubspaceKind.CATEGORICAL:
            return arr
        out = np.zeros((len(batch), self.encoding_length))
        offset = 0
        for d, c in enumerate(self.cardinalities):
            out[np.arange(len(batch)), offset + arr[:, d].astype(int)] = 1.0
            offset += c
        return out

    def sample_array(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` uniform valid configurations as an (n, dims) array.

        Binary sets are rejection-sampled against the capacity constraint;
        when acceptance is very low the remaining draws are repaired by
        dropping random set bits until feasible.
        """
        if self.kind is SubspaceKind.CONTINUOUS:
            lo, hi = np.array(self.lower), np.array(self.upper)
            return lo + (hi - lo) * rng.random((n, self.dims))
        if self.kind is SubspaceKind.CATEGORICAL:
            return np.column_stack([rng.integers(0, c, size=n) for c in self.cardinalities])
        if self.weights is None:
            return rng.random((n, self.dims)) < 0.5
        chunks, have = [], 0
        for _ in range(20):
            bits = rng.random((max(n, 64), self.dims)) < 0.5
            ok = bits[self._feasible(bits)][: n - have]
            chunks.append(ok)
            have += len(ok)
            if have >= n:
                break
        while have < n:
            b = rng.random(self.dims) < 0.5
            while not self._feasible(b[None, :])[0]:
                on = np.flatnonzero(b)
                b[on[rng.integers(len(on))]] = False
            chunks.append(b[None, :])
            have += 1
        return np.vstack(chunks)[:n]

    def _feasible(self, bits: np.ndarray) -> np.ndarray:
        """Vectorized capacity check that agrees exactly with ``contains``."""
        usage = bits.astype(float) @ np.array(self.weights)
        tol = 1e-9 * max(1.0, self.capacity)
        ok = usage <= self.capacity - tol
        # rows near the boundary are decided by the exact fsum used in contains
        for i in np.flatnonzero(np.abs(usage - self.capacity) <= tol):
            ok[i] = self.resource_usage(bits[i]) <= self.capacity
        return ok

    def sample(self, rng: np.random.Generator, n: int) -> list[tuple]:
        """Draw ``n`` uniform valid configurations as value tuples."""
        return [self.coerce(row) for row in self.sample_array(rng, n)]

    def _repair(self, bits: tuple) -> tuple:
        b = list(bits)
        order = sorted(range(self.dims), key=lambda d: -self.weights[d])
        for d in order:
            if self.resource_usage(b) <= self.capacity:
                break
            b[d] = False
        return tuple(b)

    def row(self, array, i: int) -> tuple:
        return self.coerce(array[i])

    def encode_arrays(self, array) -> np.ndarray:
        return self.encode_batch(array)

    def grid(self, levels: int = 3) -> list[tuple]:
        """Per-dimension value lists used for discretized enumeration."""
        if self.kind is SubspaceKind.CONTINUOUS:
            return [tuple(float(x) for x in np.linspace(lo, hi, levels)) for lo, hi in zip(self.lower, self.upper)]
        if self.kind is SubspaceKind.BINARY:
            return [(False, True)] * self.dims
        return [tuple(range(c)) for c in self.cardinalities]

    def to_record(self) -> dict:
        rec = {"kind": self.kind.value, "dims": self.dims}
        for name in ("lower", "upper", "cardinalities", "weights", "capacity"):
            val = getattr(self, name)
            if val is not None:
                rec[name] = list(val) if isinstance(val, tuple) else val
        rec["default"] = list(self.default)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Subspace":
        kw = dict(rec)
        for name in ("lower", "upper", "cardinalities", "weights", "default"):
            if kw.get(name) is not None:
                kw[name] = tuple(kw[name])
        return cls(**kw)


@dataclass(frozen=True)
class Configuration:
    component: ComponentId
    values: tuple

    def to_record(self) -> dict:
        return {"component": {"index": self.component.index, "name": self.component.name},
                "values": list(self.values)}

    @classmethod
    def from_record(cls, rec: dict, subspace: Subspace | None = None) -> "Configuration":
        comp = ComponentId(**rec["component"])
        values = tuple(rec["values"]) if subspace is None else subspace.load(rec["values"])
        return cls(comp, values)


def validate(config: Configuration, subspace: Subspace) -> bool:
    """True iff ``config`` is dimensionally matched, in-domain and feasible."""
    try:
        return subspace.contains(config.values)
    except (TypeError, ValueError):
        return False


@dataclass(frozen=True)
class JointConfiguration:
    """One configuration per component, stored in component-index order."""

    configs: tuple[Configuration, ...]

    def __post_init__(self):
        configs = tuple(sorted(self.configs, key=lambda c: c.component.index))
        if [c.component.index for c in configs] != list(range(len(configs))):
            raise ValueError("joint configuration needs exactly one config per component 0..m-1")
        object.__setattr__(self, "configs", configs)

    def __len__(self):
        return len(self.configs)

    def __getitem__(self, index: int) -> Configuration:
        return self.configs[index]

    def by_name(self, name: str) -> Configuration:
        for c in self.configs:
            if c.component.name == name:
                return c
        raise KeyError(name)

    def replace(self, config: Configuration) -> "JointConfiguration":
        configs = list(self.configs)
        configs[config.component.index] = config
        return JointConfiguration(tuple(configs))

    def is_valid(self, subspaces: Sequence[Subspace]) -> bool:
        return len(subspaces) == len(self.configs) and all(
            validate(c, s) for c, s in zip(self.configs, subspaces))

    def to_record(self) -> dict:
        return {"configs": [c.to_record() for c in self.configs]}

    @classmethod
    def from_record(cls, rec: dict, subspaces: Sequence[Subspace] | None = None) -> "JointConfiguration":
        recs = rec["configs"]
        if subspaces is None:
            return cls(tuple(Configuration.from_record(r) for r in recs))
        return cls(tuple(Configuration.from_record(r, s) for r, s in zip(recs, subspaces)))


@dataclass(frozen=True)
class ContextFeature:
    """Normalized internal metrics describing the environment an agent tunes in."""

    values: tuple[float, ...]
    epoch_tag: int = 0

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("context values must be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_record(self) -> dict:
        return {"values": list(self.values), "epoch_tag": self.epoch_tag}

    @classmethod
    def from_record(cls, rec: dict) -> "ContextFeature":
        return cls(tuple(rec["values"]), rec["epoch_tag"])


@dataclass(frozen=True)
class EvaluationRecord:
    context: ContextFeature
    configuration: Configuration
    performance: float
    cost: float
    epoch: int = 0

    def __post_init__(self):
        if not math.isfinite(self.performance):
            raise ValueError("performance must be finite")
        if not self.cost >= 0:
            raise ValueError("cost must be non-negative")
        if self.epoch < 0:
            raise ValueError("epoch must be non-negative")

    def to_record(self) -> dict:
        return {"context": self.context.to_record(), "configuration": self.configuration.to_record(),
                "performance": self.performance, "cost": self.cost, "epoch": self.epoch}

    @classmethod
    def from_record(cls, rec: dict) -> "EvaluationRecord":
        return cls(ContextFeature.from_record(rec["context"]), Configuration.from_record(rec["configuration"]),
                   rec["performance"], rec["cost"], rec["epoch"])


@dataclass(frozen=True)
class TransitionRecord:
    state: tuple[float, ...]
    action: Configuration
    next_state: tuple[float, ...]
    reward: float

    def __post_init__(self):
        if len(self.state) != len(self.next_state):
            raise ValueError("state and next_state must have identical length")

    def to_record(self) -> dict:
        return {"state": list(self.state), "action": self.action.to_record(),
                "next_state": list(self.next_state), "reward": self.reward}

    @classmethod
    def from_record(cls, rec: dict) -> "TransitionRecord":
        return cls(tuple(rec["state"]), Configuration.from_record(rec["action"]),
                   tuple(rec["next_state"]), rec["reward"])


@dataclass
class RewardHistory:
    """Append-only record of clamped improvements achieved by one agent."""

    agent: ComponentId
    entries: list[float] = field(default_factory=list)

    def __post_init__(self):
        if any(not (e >= 0) for e in self.entries):
            raise ValueError("rewards must be non-negative")
        self.entries = [float(e) for e in self.entries]

    def append(self, reward: float) -> None:
        if not reward >= 0:
            raise ValueError(f"reward must be non-negative, got {reward}")
        self.entries.append(float(reward))

    def __len__(self):
        return len(self.entries)

    def to_record(self) -> dict:
        return {"agent": {"index": self.agent.index, "name": self.agent.name}, "entries": list(self.entries)}

    @classmethod
    def from_record(cls, rec: dict) -> "RewardHistory":
        return cls(ComponentId(**rec["agent"]), list(rec["entries"]))


AGENT_KINDS = ("BO", "RL", "RLEstimator", "rule")


@dataclass(frozen=True)
class TuningTask:
    components: tuple[tuple[ComponentId, str], ...]
    tuning_budget: float
    sub_budget: float
    performance_metric: str = "execution-time"
    buffer_size: int = 7
    bootstrap_rounds: int = 3
    rfactor: float | None = None
    seed: int = 0

    def __post_init__(self):
        comps = tuple((c if isinstance(c, ComponentId) else ComponentId(**c), k) for c, k in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a task needs at least one component")
        if [c.index for c, _ in comps] != list(range(len(comps))):
            raise ValueError("component indices must be dense 0..m-1")
        if len({c.name for c, _ in comps}) != len(comps):
            raise ValueError("component names must be unique")
        for _, kind in comps:
            if kind not in AGENT_KINDS:
                raise ValueError(f"unknown agent kind {kind!r}")
        if not 0 < self.sub_budget <= self.tuning_budget:
            raise ValueError("need 0 < sub_budget <= tuning_budget")
        if self.buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        if self.bootstrap_rounds < 1:
            raise ValueError("bootstrap_rounds must be >= 1")
        if self.rfactor is not None and not self.rfactor > 0:
            raise ValueError("rfactor must be positive")

    @property
    def component_ids(self) -> list[ComponentId]:
        return [c for c, _ in self.components]

    def to_record(self) -> dict:
        return {"components": [[{"index": c.index, "name": c.name}, k] for c, k in self.components],
                "tuning_budget": self.tuning_budget, "sub_budget": self.sub_budget,
                "performance_metric": self.performance_metric, "buffer_size": self.buffer_size,
                "bootstrap_rounds": self.bootstrap_rounds, "rfactor": self.rfactor, "seed": self.seed}

    @classmethod
    def from_record(cls, rec: dict) -> "TuningTask":
        kw = dict(rec)
        kw["components"] = tuple((ComponentId(**c), k) for c, k in rec["components"])
        return cls(**kw)


def dumps(record: dict) -> str:
    """One-line canonical JSON; floats use shortest round-trip repr."""
    return json.dumps(record, sort_keys=False, separators=(",", ":"), allow_nan=False)


def loads(line: str) -> dict:
    return json.loads(line)


class ProductSpace:
    """Concatenation of subspaces, used by the joint-optimization baseline.

    Values are tuples of per-component value tuples.
    """

    def __init__(self, subspaces: Sequence[Subspace]):
        self.subspaces = tuple(subspaces)
        self.dims = len(self.subspaces)

    @property
    def encoding_length(self) -> int:
        return sum(s.encoding_length for s in self.subspaces)

    @property
    def default(self) -> tuple:
        return tuple(s.default for s in self.subspaces)

    def contains(self, values) -> bool:
        return len(values) == self.dims and all(s.contains(v) for s, v in zip(self.subspaces, values))

    def coerce(self, values) -> tuple:
        return tuple(s.coerce(v) for s, v in zip(self.subspaces, values))

    def encode_batch(self, batch) -> np.ndarray:
        parts = [s.encode_batch([v[i] for v in batch]) for i, s in enumerate(self.subspaces)]
        return np.hstack(parts)

    def encode(self, values) -> np.ndarray:
        return self.encode_batch([values])[0]

    def sample_array(self, rng: np.random.Generator, n: int) -> list[np.ndarray]:
        return [s.sample_array(rng, n) for s in self.subspaces]

    def row(self, arrays, i: int) -> tuple:
        return tuple(s.coerce(a[i]) for s, a in zip(self.subspaces, arrays))

    def encode_arrays(self, arrays) -> np.ndarray:
        return np.hstack([s.encode_batch(a) for s, a in zip(self.subspaces, arrays)])

    def sample(self, rng: np.random.Generator, n: int) -> list[tuple]:
        arrays = self.sample_array(rng, n)
        return [self.row(arrays, i) for i in range(n)]
