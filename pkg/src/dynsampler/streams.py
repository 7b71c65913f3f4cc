"""Update streams for every model family behind one interface."""
from __future__ import annotations

from dataclasses import dataclass

from .engine import ResampleState, bootstrap_sample, compute_kappa, dynamic_sample
from .factor_graph import apply_update, vbl
from .io import LoadedModel
from .rng import RngStream
from .spin_models import (
    apply_hardcore_update,
    apply_spin_update,
    hardcore_bootstrap_sample,
    hardcore_dynamic_sample,
    hardcore_to_factor_graph,
    spin_bootstrap_sample,
    spin_dynamic_sample,
    spin_to_factor_graph,
)


@dataclass
class Stream:
    """A loaded model with its update stream, ready to run trials."""

    loaded: LoadedModel
    updates: list
    models: list  # post-update model after each update

    @classmethod
    def build(cls, loaded: LoadedModel, updates: list) -> "Stream":
        models = []
        m = loaded.model
        for u in updates:
            if loaded.kind == "generic":
                m = apply_update(m, u)
            elif loaded.kind == "hardcore":
                m = apply_hardcore_update(m, u)
            else:
                m = apply_spin_update(m, u)
            models.append(m)
        return cls(loaded, updates, models)

    @property
    def kind(self) -> str:
        return self.loaded.kind

    @property
    def final_model(self):
        return self.models[-1] if self.models else self.loaded.model

    def pre_model(self, index: int):
        return self.loaded.model if index == 0 else self.models[index - 1]

    def factor_graph(self, model):
        if self.kind == "generic":
            return model
        if self.kind == "hardcore":
            return hardcore_to_factor_graph(model)
        return spin_to_factor_graph(model)

    def initial_sample(self, rng: RngStream, budget=None):
        """Exact sample of the initial model via the bootstrap construction."""
        m = self.loaded.model
        if self.kind == "generic":
            return bootstrap_sample(m, rng, budget)[0]
        if self.kind == "hardcore":
            return hardcore_bootstrap_sample(m, rng, budget)[0]
        return spin_bootstrap_sample(m, rng, budget)[0]

    def step(self, index: int, x, rng: RngStream, budget=None, kappa=compute_kappa):
        """Run the sampler for update ``index`` from ``x``. ``kappa`` only
        affects generic models."""
        pre = self.pre_model(index)
        post = self.models[index]
        update = self.updates[index]
        if self.kind == "generic":
            return dynamic_sample(post, ResampleState(tuple(x), vbl(pre, update)), rng, budget, kappa=kappa)
        if self.kind == "hardcore":
            return hardcore_dynamic_sample(post, x, update.targets(), rng, budget)
        return spin_dynamic_sample(post, x, update.targets(), rng, budget)

    def run(self, x, rng: RngStream, budget=None, kappa=compute_kappa):
        """Thread ``x`` through every update; returns the final configuration
        and the per-update statistics."""
        all_stats = []
        for j in range(len(self.updates)):
            x, stats = self.step(j, x, rng, budget, kappa)
            all_stats.append(stats)
        return tuple(x), all_stats
