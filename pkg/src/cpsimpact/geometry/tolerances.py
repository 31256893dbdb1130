from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds used throughout the set computations.

    eps_feas
        constraint slack accepted by LP based tests
    eps_set
        margin for set inclusion / equality on unit-normalised rows
    eps_vol
        target relative half-width (95%) of Monte-Carlo volume estimates
    max_union
        cap on the number of pieces a single union may carry
    mc_samples
        Monte-Carlo batch size
    rng_seed
        master seed for every sampled quantity
    """

    eps_feas: float = 1e-9
    eps_set: float = 1e-7
    eps_vol: float = 0.02
    max_union: int = 64
    mc_samples: int = 10_000
    rng_seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0 and f.name != "rng_seed":
                raise ValueError(f"tolerance {f.name} must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be nonnegative")

    def with_(self, **kw) -> "Tolerances":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "Tolerances":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
        return cls(**d)


DEFAULT_TOL = Tolerances()
