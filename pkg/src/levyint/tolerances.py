"""Single defaults table for every tolerance the toolkit applies.

Experiments record the tolerances they actually used in their run manifest,
so a pass/fail verdict is always auditable against this table plus any
per-run overrides.
"""

from __future__ import annotations

from types import MappingProxyType

DEFAULTS = MappingProxyType(
    {
        # residual bound for identities that hold exactly per path
        "exact": 1e-12,
        # grid-quadrature slack for deterministic inequality checks
        "quadrature": 1e-9,
        # half-width multiplier for standard-error based statistical checks
        "se_multiplier": 3.0,
        # acceptance bound on isometry z-scores
        "z_max": 4.0,
        # relative slack allowed for time-discretization bias
        "discretization_rel": 0.05,
        # cross-run agreement of parallel reductions
        "parallel_reduction": 1e-9,
        # minimum spacing below which sampled jump times count as coincident
        "jump_separation": 1e-15,
    }
)


def resolve(overrides: dict[str, float] | None = None) -> dict[str, float]:
    """Merge per-run overrides into the defaults table.

    Unknown tolerance names are rejected so manifests never contain silently
    ignored knobs.
    """
    merged = dict(DEFAULTS)
    if overrides:
        unknown = set(overrides) - set(merged)
        if unknown:
            from .errors import ConfigError

            raise ConfigError(f"unknown tolerance names: {sorted(unknown)}")
        merged.update({k: float(v) for k, v in overrides.items()})
    return merged
