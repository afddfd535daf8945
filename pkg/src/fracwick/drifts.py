"""Registry of named bounded drifts with trusted constants.

Experiment configs may only reference drifts from this registry, so the
sup bound M, the l1 Lipschitz constant L and the derivative bound used by
the Gronwall and moment-bound gates are analytically known rather than
user-asserted.  All registry drifts act component-wise (decoupled);
coupled drifts can still be built programmatically for library use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Drift:
    """Drift b(t, x) with declared bound and regularity constants.

    For decoupled drifts `fn` and `dfn` are elementwise maps applied to a
    single component's values; for coupled drifts they act on the trailing
    component axis of x.  `dfn` is the diagonal derivative d b_i / d x_i
    and may be None for non-differentiable drifts.
    """

    name: str
    fn: Callable[[float, np.ndarray], np.ndarray]
    bound: float  # sup |b|
    lipschitz: float  # |b(t,x)-b(t,y)|_inf <= lipschitz * |x-y|_1
    dfn: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    derivative_bound: float = 0.0
    decoupled: bool = True
    params: dict = field(default_factory=dict)


def _zero(params: dict) -> Drift:
    return Drift(
        "zero",
        fn=lambda t, x: np.zeros_like(x),
        bound=0.0,
        lipschitz=0.0,
        dfn=lambda t, x: np.zeros_like(x),
        derivative_bound=0.0,
    )


def _sin(params: dict) -> Drift:
    return Drift(
        "sin",
        fn=lambda t, x: np.sin(x),
        bound=1.0,
        lipschitz=1.0,
        dfn=lambda t, x: np.cos(x),
        derivative_bound=1.0,
    )


def _tanh(params: dict) -> Drift:
    amp = float(params.get("amplitude", 1.0))
    rate = float(params.get("rate", 1.0))
    if amp <= 0 or rate <= 0:
        raise ConfigError("drift.params", "tanh amplitude and rate must be positive")
    return Drift(
        "tanh",
        fn=lambda t, x: amp * np.tanh(rate * x),
        bound=amp,
        lipschitz=amp * rate,
        dfn=lambda t, x: amp * rate / np.cosh(rate * x) ** 2,
        derivative_bound=amp * rate,
        params={"amplitude": amp, "rate": rate},
    )


_REGISTRY = {"zero": _zero, "sin": _sin, "tanh": _tanh}


def registry_ids() -> list[str]:
    return sorted(_REGISTRY)


def make_drift(drift_id: str, params: dict | None = None) -> Drift:
    if drift_id not in _REGISTRY:
        raise ConfigError(
            "drift.id", f"unknown drift {drift_id!r}; known: {registry_ids()}"
        )
    return _REGISTRY[drift_id](params or {})
