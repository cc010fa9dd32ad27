"""A fixed, named collection of test sets across the generator families."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .dyadic import GridGeometry
from .errors import QMDError
from .gridset import GridSet, gen_family


@dataclass(frozen=True)
class Recipe:
    name: str
    kind: str
    d: int
    L: int
    params: tuple = field(default_factory=tuple)

    def build(self, L: int | None = None) -> GridSet:
        geom = GridGeometry(self.d, self.L if L is None else L)
        return gen_family(self.kind, geom, **dict(self.params))


def _balls(*items):
    return (("balls", tuple((tuple(c), r) for c, r in items)),)


RECIPES: tuple[Recipe, ...] = (
    # one dimension
    Recipe("full-1d", "full", 1, 8),
    Recipe("E1", "counterexample", 1, 8, (("k", 1),)),
    Recipe("E2", "counterexample", 1, 8, (("k", 2),)),
    Recipe("E3", "counterexample", 1, 8, (("k", 3),)),
    Recipe("E4", "counterexample", 1, 8, (("k", 4),)),
    Recipe("cantor1-1d", "cantor", 1, 8, (("depth", 1),)),
    Recipe("cantor2-1d", "cantor", 1, 8, (("depth", 2),)),
    Recipe("cantor3-1d", "cantor", 1, 8, (("depth", 3),)),
    Recipe("bern10-1d", "bernoulli", 1, 8, (("p", 0.1), ("seed", 1))),
    Recipe("bern50-1d", "bernoulli", 1, 8, (("p", 0.5), ("seed", 2))),
    Recipe("bern90-1d", "bernoulli", 1, 8, (("p", 0.9), ("seed", 3))),
    Recipe("bern50-1d-L6", "bernoulli", 1, 6, (("p", 0.5), ("seed", 4))),
    Recipe("balls-a-1d", "ball-union", 1, 8, _balls(([0.3], 0.1), ([0.75], 0.05))),
    Recipe("balls-b-1d", "ball-union", 1, 8, _balls(([0.5], 0.02))),
    Recipe("balls-c-1d", "ball-union", 1, 8, _balls(([0.1], 0.05), ([0.4], 0.05), ([0.7], 0.05), ([0.95], 0.03))),
    # two dimensions
    Recipe("full-2d", "full", 2, 6),
    Recipe("cantor1-2d", "cantor", 2, 6, (("depth", 1),)),
    Recipe("cantor2-2d", "cantor", 2, 6, (("depth", 2),)),
    Recipe("bern10-2d", "bernoulli", 2, 6, (("p", 0.1), ("seed", 5))),
    Recipe("bern50-2d", "bernoulli", 2, 6, (("p", 0.5), ("seed", 6))),
    Recipe("bern90-2d", "bernoulli", 2, 6, (("p", 0.9), ("seed", 7))),
    Recipe("balls-a-2d", "ball-union", 2, 6, _balls(([0.3, 0.3], 0.2), ([0.75, 0.7], 0.15))),
    Recipe("balls-b-2d", "ball-union", 2, 6, _balls(([0.5, 0.5], 0.05))),
    Recipe("balls-c-2d", "ball-union", 2, 6, _balls(([0.2, 0.8], 0.1), ([0.8, 0.2], 0.1), ([0.5, 0.5], 0.1))),
    Recipe("full-2d-L7", "full", 2, 7),
    Recipe("bern50-2d-L7", "bernoulli", 2, 7, (("p", 0.5), ("seed", 8))),
    Recipe("cantor3-2d-L7", "cantor", 2, 7, (("depth", 3),)),
    Recipe("balls-d-2d-L7", "ball-union", 2, 7, _balls(([0.4, 0.6], 0.25))),
    Recipe("bern50-2d-L8", "bernoulli", 2, 8, (("p", 0.5), ("seed", 9))),
    Recipe("balls-e-2d-L8", "ball-union", 2, 8, _balls(([0.25, 0.25], 0.1), ([0.7, 0.6], 0.2))),
)


@lru_cache(maxsize=None)
def corpus() -> tuple[tuple[str, GridSet], ...]:
    """The 30 named sets at their native resolution."""
    return tuple((r.name, r.build()) for r in RECIPES)


@lru_cache(maxsize=None)
def corpus_at(d: int, L: int) -> tuple[tuple[str, GridSet], ...]:
    """Every dimension-d recipe rebuilt at level L; recipes that need a finer
    grid (or yield an empty set) are skipped."""
    out = []
    for r in RECIPES:
        if r.d != d:
            continue
        try:
            e = r.build(L)
        except QMDError:
            continue
        if not e.is_empty():
            out.append((r.name, e))
    return tuple(out)
