"""Compactly supported test functions for the weak-form residual.

Separable bumps phi(t, x) = psi(t) chi(x) built from the polynomial window
B(u) = (1 - u^2)^4 on |u| < 1, extended by zero: twice continuously
differentiable with compact support, and with moderate derivative scales
(an infinitely smooth mollifier buys nothing for the estimator and its
derivative constants are orders of magnitude larger).

Time supports sit strictly inside (0, T): the telescoping step of the weak
form needs phi to vanish at both ends of the time interval, and interior
support avoids interpreting any boundary convention.  The residual
estimator consumes the time and space factors separately, so both are
exposed along with their derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

_POW = 4


def _window(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = np.abs(u) < 1.0
    out[m] = (1.0 - u[m] ** 2) ** _POW
    return out


def _window_d1(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = np.abs(u) < 1.0
    out[m] = -2.0 * _POW * u[m] * (1.0 - u[m] ** 2) ** (_POW - 1)
    return out


def _window_d2(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = np.abs(u) < 1.0
    q = 1.0 - u[m] ** 2
    out[m] = -2.0 * _POW * q ** (_POW - 1) + 4.0 * _POW * (_POW - 1) * u[m] ** 2 * q ** (
        _POW - 2
    )
    return out


@dataclass(frozen=True)
class TestFunction:
    """Separable phi(t, x) = psi(t) chi(x) with the factor derivatives."""

    id: str
    time_value: Callable
    time_derivative: Callable
    space_value: Callable
    space_d1: Callable
    space_d2: Callable
    time_support: tuple[float, float] = (0.0, 0.0)

    def value(self, t, x):
        return self.time_value(t) * self.space_value(x)

    def dt(self, t, x):
        return self.time_derivative(t) * self.space_value(x)

    def dx(self, t, x):
        return self.time_value(t) * self.space_d1(x)

    def dxx(self, t, x):
        return self.time_value(t) * self.space_d2(x)


def separable_bump(fid: str, t0: float, t1: float, x0: float, width: float) -> TestFunction:
    tm, th = 0.5 * (t0 + t1), 0.5 * (t1 - t0)

    def ut(t):
        return (np.asarray(t, dtype=float) - tm) / th

    def ux(x):
        return (np.asarray(x, dtype=float) - x0) / width

    return TestFunction(
        id=fid,
        time_value=lambda t: _window(ut(t)),
        time_derivative=lambda t: _window_d1(ut(t)) / th,
        space_value=lambda x: _window(ux(x)),
        space_d1=lambda x: _window_d1(ux(x)) / width,
        space_d2=lambda x: _window_d2(ux(x)) / width**2,
        time_support=(t0, t1),
    )


def constant_test_function() -> TestFunction:
    """phi = 1: every derivative vanishes, so the residual is exactly zero.
    Degenerate estimator input, useful as a plumbing check only."""
    one = lambda t: np.ones_like(np.asarray(t, dtype=float))
    zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    return TestFunction("const", one, zero, one, zero, zero)


def registry(horizon: float = 1.0) -> dict[str, TestFunction]:
    """Named bumps scaled to the unit-horizon default problem.

    Space supports track where the solution mass actually lives (around
    x = 1.5..2 by the final time); time supports start away from 0, where
    the law is still nearly a point mass and residual cancellations are
    numerically delicate."""
    t = horizon
    return {
        "bump_early": separable_bump("bump_early", 0.15 * t, 0.75 * t, 1.7, 1.1),
        "bump_mid": separable_bump("bump_mid", 0.30 * t, 0.95 * t, 2.0, 1.4),
        "bump_wide": separable_bump("bump_wide", 0.10 * t, 0.90 * t, 1.6, 2.2),
        "const": constant_test_function(),
    }


def get_test_function(fid: str, horizon: float = 1.0) -> TestFunction:
    reg = registry(horizon)
    if fid not in reg:
        raise KeyError(f"unknown test function {fid!r}; known: {sorted(reg)}")
    return reg[fid]
