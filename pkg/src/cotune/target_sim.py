"""Deterministic simulated multi-component system used in place of a DBMS.

Three components contribute additive terms to an execution-time-like
objective:

* knob (continuous box): ``sum_d (k_d - mu_d(I))**2`` where the optimum of knob
  dimension ``d`` is 0.3 when its linked index bit is set and 0.7 otherwise;
* index (binary set under a storage capacity): ``B - sum g_d I_d +
  lam * sum_{d<e} g_d g_e I_d I_e / B`` with ``B = sum g``, so marginal gains
  shrink as more indexes are built;
* query (categorical rewrite choices): ``sum_q c_q * s[q, Q_q]``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .core import ComponentId, Configuration, InvalidConfiguration, JointConfiguration, Subspace
from .rng import make_rng

COMPONENT_NAMES = ("knob", "index", "query")
DEFAULT_ENUMERATION_CAP = 10 ** 6


@dataclass(frozen=True)
class SystemParams:
    knob_dims: int = 5
    knob_lower: float = 0.0
    knob_upper: float = 1.0
    knob_default: float | None = None
    index_bits: int = 10
    queries: int = 4
    rewrites: int = 4
    lam: float = 0.3
    capacity_fraction: float = 0.5
    capacity: float | None = None
    gain_low: float = 0.5
    gain_high: float = 2.0
    weight_low: float = 1.0
    weight_high: float = 3.0
    cost_low: float = 0.5
    cost_high: float = 1.5
    speedup_low: float = 0.3
    speedup_high: float = 0.95
    metric_dims: int = 8
    noise_sigma: float = 0.0
    eval_cost: float = 1.0
    seed: int = 0
    order: tuple[str, ...] = COMPONENT_NAMES

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        if sorted(self.order) != sorted(COMPONENT_NAMES):
            raise ValueError(f"order must be a permutation of {COMPONENT_NAMES}")
        if self.knob_dims < 1 or self.index_bits < 1 or self.queries < 1 or self.rewrites < 2:
            raise ValueError("dimensions must be positive and rewrites >= 2")
        if not self.eval_cost > 0:
            raise ValueError("eval_cost must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.lam < 1:
            raise ValueError("lam must lie in [0, 1)")
        if self.metric_dims < 1:
            raise ValueError("metric_dims must be positive")
        if not 0 < self.gain_low <= self.gain_high:
            raise ValueError("gains must be positive")

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["order"] = list(self.order)
        return rec


@dataclass(frozen=True)
class GridOptimum:
    joint: JointConfiguration
    performance: float
    evaluations: int


class SyntheticSystem:
    """Evaluates joint configurations and reports internal runtime metrics.

    All coefficients are drawn once from ``params.seed``. With
    ``noise_sigma == 0`` evaluation is a pure function of the joint
    configuration.
    """

    def __init__(self, params: SystemParams | None = None, **overrides):
        params = params or SystemParams()
        if overrides:
            params = params.with_(**overrides)
        self.params = params
        p = params
        rng = make_rng(p.seed, "system")
        self.gains = rng.uniform(p.gain_low, p.gain_high, p.index_bits)
        self.weights = rng.uniform(p.weight_low, p.weight_high, p.index_bits)
        self.base_costs = rng.uniform(p.cost_low, p.cost_high, p.queries)
        speed = np.ones((p.queries, p.rewrites))
        speed[:, 1:] = rng.uniform(p.speedup_low, p.speedup_high, (p.queries, p.rewrites - 1))
        self.speedups = speed
        self.capacity = float(p.capacity if p.capacity is not None
                              else p.capacity_fraction * math.fsum(self.weights))
        # bit linked to knob dimension d (1-based): ceil(d * nb / dk), stored 0-based
        self.mu_bit = np.array([math.ceil(d * p.index_bits / p.knob_dims) - 1
                                for d in range(1, p.knob_dims + 1)], dtype=np.int64)

        n_in = p.index_bits + p.knob_dims + p.queries + 1
        self._proj_w = rng.normal(0.0, 2.0 / math.sqrt(n_in), (p.metric_dims, n_in))
        self._proj_b = rng.normal(0.0, 0.5, p.metric_dims)
        self._noise_rng = make_rng(p.seed, "noise")

        self.subspaces_by_name = {
            "knob": Subspace.box([p.knob_lower] * p.knob_dims, [p.knob_upper] * p.knob_dims,
                                 default=[p.knob_lower if p.knob_default is None else p.knob_default] * p.knob_dims),
            "index": Subspace.binary(p.index_bits, weights=tuple(self.weights), capacity=self.capacity),
            "query": Subspace.categorical([p.rewrites] * p.queries),
        }
        self.component_ids = [ComponentId(i, name) for i, name in enumerate(p.order)]
        self.subspaces = [self.subspaces_by_name[name] for name in p.order]
        self._slot = {name: i for i, name in enumerate(p.order)}
        self.n_evaluations = 0
        self._f_scale = 1.0
        self._f_scale = max(self.objective(self.default_joint()), 1e-9)

    # -- accessors ----------------------------------------------------------

    @property
    def eval_cost(self) -> float:
        return self.params.eval_cost

    @property
    def metric_dims(self) -> int:
        return self.params.metric_dims

    @property
    def n_components(self) -> int:
        return len(self.component_ids)

    def component(self, name: str) -> ComponentId:
        return self.component_ids[self._slot[name]]

    def default_config(self, index: int) -> Configuration:
        return Configuration(self.component_ids[index], self.subspaces[index].default)

    def default_joint(self) -> JointConfiguration:
        return JointConfiguration(tuple(self.default_config(i) for i in range(self.n_components)))

    def knob_optimum(self, bits: Sequence[bool]) -> tuple[float, ...]:
        """Knob setting minimizing the knob term under a given index setting."""
        b = np.asarray(bits, dtype=bool)
        return tuple(float(x) for x in np.where(b[self.mu_bit], 0.3, 0.7))

    # -- evaluation ---------------------------------------------------------

    def check(self, joint: JointConfiguration) -> None:
        if len(joint) != self.n_components:
            raise InvalidConfiguration("joint configuration has the wrong number of components")
        for cfg, cid, sub in zip(joint.configs, self.component_ids, self.subspaces):
            if cfg.component != cid:
                raise InvalidConfiguration(f"component mismatch: {cfg.component} vs {cid}")
            if not sub.contains(cfg.values):
                raise InvalidConfiguration(f"configuration for {cid.name!r} violates its subspace: {cfg.values}")

    def _arrays(self, joint: JointConfiguration):
        k = np.asarray(joint[self._slot["knob"]].values, dtype=float)[None, :]
        b = np.asarray(joint[self._slot["index"]].values, dtype=float)[None, :]
        q = np.asarray(joint[self._slot["query"]].values, dtype=np.int64)[None, :]
        return k, b, q

    def objective_batch(self, knobs, bits, queries) -> np.ndarray:
        return kernels.synthetic_objective(knobs, bits, queries, self.mu_bit, self.gains,
                                           self.params.lam, self.speedups, self.base_costs)

    def objective(self, joint: JointConfiguration) -> float:
        """Noise-free objective value without validation or cost accounting."""
        return float(self.objective_batch(*self._arrays(joint))[0])

    def terms(self, joint: JointConfiguration) -> dict[str, float]:
        k, b, q = (a[0] for a in self._arrays(joint))
        mu = np.where(b[self.mu_bit] > 0.5, 0.3, 0.7)
        total = self.gains.sum()
        p, pq = b @ self.gains, b @ (self.gains ** 2)
        return {
            "knob": float(((k - mu) ** 2).sum()),
            "index": float(total - p + self.params.lam * 0.5 * (p * p - pq) / total),
            "query": float((self.base_costs * self.speedups[np.arange(len(q)), q]).sum()),
        }

    def _metrics_from(self, joint: JointConfiguration, f: float) -> np.ndarray:
        p = self.params
        k, b, q = (a[0] for a in self._arrays(joint))
        knob01 = (k - p.knob_lower) / (p.knob_upper - p.knob_lower)
        x = np.concatenate([b, knob01, q / (p.rewrites - 1), [f / self._f_scale]])
        return 1.0 / (1.0 + np.exp(-(self._proj_w @ x + self._proj_b)))

    def internal_metrics(self, joint: JointConfiguration) -> np.ndarray:
        self.check(joint)
        return self._metrics_from(joint, self.objective(joint))

    def evaluate(self, joint: JointConfiguration) -> tuple[float, np.ndarray, float]:
        """Return (performance, internal metrics, cost); raises on invalid input."""
        self.check(joint)
        f = self.objective(joint)
        metrics = self._metrics_from(joint, f)
        if self.params.noise_sigma > 0:
            f += float(self._noise_rng.normal(0.0, self.params.noise_sigma))
        self.n_evaluations += 1
        return f, metrics, self.params.eval_cost


def grid_optimum(system: SyntheticSystem, levels: int = 3,
                 cap: int = DEFAULT_ENUMERATION_CAP) -> GridOptimum:
    """Exhaustive argmin over the discretized joint space.

    Continuous knob dimensions take ``levels`` evenly spaced values including
    both bounds. Infeasible index subsets are skipped and not counted.
    """
    p = system.params
    knob_sub = system.subspaces_by_name["knob"]
    index_sub = system.subspaces_by_name["index"]
    raw = levels ** p.knob_dims * 2 ** p.index_bits * p.rewrites ** p.queries
    if raw > cap:
        raise ValueError(f"discretized space has {raw} points, above the enumeration cap {cap}")

    knob_grid = np.array(list(itertools.product(*knob_sub.grid(levels))), dtype=float)
    query_grid = np.array(list(itertools.product(range(p.rewrites), repeat=p.queries)), dtype=np.int64)
    nk, nq = len(knob_grid), len(query_grid)
    kk = np.repeat(knob_grid, nq, axis=0)
    qq = np.tile(query_grid, (nk, 1))

    best_f, best = math.inf, None
    count = 0
    for bits in itertools.product((False, True), repeat=p.index_bits):
        if not index_sub.contains(bits):
            continue
        bb = np.broadcast_to(np.asarray(bits, dtype=float), (len(kk), p.index_bits))
        f = system.objective_batch(kk, bb, qq)
        count += len(f)
        i = int(np.argmin(f))
        if f[i] < best_f:
            best_f = float(f[i])
            best = (tuple(map(float, kk[i])), bits, tuple(map(int, qq[i])))
    system.n_evaluations += count

    by_name = {"knob": best[0], "index": best[1], "query": best[2]}
    joint = JointConfiguration(tuple(Configuration(cid, by_name[cid.name]) for cid in system.component_ids))
    return GridOptimum(joint, best_f, count)


def exact_optimum(system: SyntheticSystem) -> tuple[JointConfiguration, float]:
    """True minimum over the continuous space, using the separable structure.

    For every feasible index subset the knob term is minimized by the clipped
    per-dimension optimum and each query independently takes its cheapest
    rewrite. Only index subsets are enumerated.
    """
    p = system.params
    index_sub = system.subspaces_by_name["index"]
    q_best = tuple(int(i) for i in np.argmin(system.speedups, axis=1))
    best_f, best = math.inf, None
    for bits in itertools.product((False, True), repeat=p.index_bits):
        if not index_sub.contains(bits):
            continue
        knobs = tuple(float(min(max(x, p.knob_lower), p.knob_upper)) for x in system.knob_optimum(bits))
        f = float(system.objective_batch(np.array([knobs]), np.array([bits], dtype=float), np.array([q_best]))[0])
        if f < best_f:
            best_f, best = f, (knobs, bits, q_best)
    by_name = {"knob": best[0], "index": best[1], "query": best[2]}
    joint = JointConfiguration(tuple(Configuration(cid, by_name[cid.name]) for cid in system.component_ids))
    return joint, best_f
