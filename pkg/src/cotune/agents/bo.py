"""Bayesian-optimization agent: GP surrogate over (context ++ configuration) with EI."""
from __future__ import annotations

import numpy as np

from ..core import Configuration, ContextFeature, EvaluationRecord
from ..gp import GaussianProcess, expected_improvement
from .base import Agent


class BOAgent(Agent):
    kind = "BO"

    def __init__(self, component, subspace, seed=0, n_candidates=2000, refit_every=5,
                 lengthscale_bounds=(1e-2, 1e2)):
        super().__init__(component, subspace, seed)
        self.n_candidates = n_candidates
        self.refit_every = refit_every
        self.lengthscale_bounds = lengthscale_bounds
        self.gp: GaussianProcess | None = None
        self.rows: list[EvaluationRecord] = []

    def init_model(self, context_dims: int) -> None:
        super().init_model(context_dims)
        self.gp = GaussianProcess(context_dims + self.subspace.encoding_length, refit_every=self.refit_every,
                                  lengthscale_bounds=self.lengthscale_bounds)
        self.rows = []

    def features(self, context: ContextFeature, batch) -> np.ndarray:
        enc = self.subspace.encode_batch(batch)
        ctx = np.broadcast_to(context.as_array(), (len(batch), len(context)))
        return np.hstack([ctx, enc])

    def acquisition(self, context: ContextFeature, batch) -> np.ndarray:
        mean, var = self.gp.predict(self.features(context, batch))
        return expected_improvement(mean, np.sqrt(var), float(self.gp.y.min()))

    def suggest(self, context: ContextFeature, **kw) -> Configuration:
        self._ensure_model(context)
        if self.gp.n == 0:
            return self.random_config()
        arrays = self.subspace.sample_array(self.rng, self.n_candidates)
        enc = self.subspace.encode_arrays(arrays)
        ctx = np.broadcast_to(context.as_array(), (len(enc), len(context)))
        mean, var = self.gp.predict(np.hstack([ctx, enc]))
        if not np.any(var > 0):
            return self.random_config()
        ei = expected_improvement(mean, np.sqrt(var), float(self.gp.y.min()))
        values = self.subspace.row(arrays, int(np.argmax(ei)))
        if not self.subspace.contains(values):
            return self.random_config()
        return Configuration(self.component, values)

    def update_policy(self, record: EvaluationRecord) -> None:
        self._ensure_model(record.context)
        if record.configuration.component != self.component:
            raise ValueError("record belongs to another component")
        x = self.features(record.context, [record.configuration.values])[0]
        self.gp.add(x, record.performance)
        self.rows.append(record)
