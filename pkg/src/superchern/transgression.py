"""Eta transgression forms between superconnections and to infinity.

eta(A0, A1) integrates Str( (dA/dt) exp(-A(t)^2) ) along the linear path
from A0 to A1; eta(A, infinity) integrates the same density along the
rescaled family A_t = t A_[0] + A_[1] + t^{-1} A_[2] + ... over [1, T],
where T is chosen from the Gaussian tail bound available when the degree-0
term has a spectral gap.

Both entry points accept a trace functional and a curvature map so the odd
(sigma-trace) and twisted (curving-shifted) variants can reuse the same
quadrature core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotInvertibleError
from .forms import GradedMatrixForm, algebra_exp, supertrace, wedge_mul
from .superconn import (
    Superconnection,
    affine_path,
    curvature,
    min_gap,
    rescale,
    rescale_derivative,
)

__all__ = [
    "QuadratureConfig",
    "EtaResult",
    "eta_between",
    "eta_infinity",
    "eta_along_path",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite Gauss-Legendre settings and the tail safety factor."""

    panels: int = 8
    order: int = 16
    tail_safety: float = 10.0

    def __post_init__(self):
        if self.panels < 1:
            raise ValueError("panels must be >= 1")
        if self.order < 2:
            raise ValueError("order must be >= 2")


@dataclass
class EtaResult:
    """A transgression form with its quadrature/tail error estimate."""

    form: GradedMatrixForm
    est_error: float
    truncation_T: float | None = None


def _panel_nodes(a: float, b: float, panels: int, order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    ts, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        ts.append(mid + half * nodes)
        ws.append(half * weights)
    return np.concatenate(ts), np.concatenate(ws)


def _quad_form(integrand, a: float, b: float, panels: int, order: int):
    ts, ws = _panel_nodes(a, b, panels, order)
    total = None
    for t, w in zip(ts, ws):
        val = integrand(float(t)) * w
        total = val if total is None else total + val
    return total


def integrate_form(integrand, a: float, b: float, cfg: QuadratureConfig):
    """Composite Gauss integral of a form-valued function with an order-halving
    error estimate.  Returns (form, est_error)."""
    full = _quad_form(integrand, a, b, cfg.panels, cfg.order)
    coarse = _quad_form(integrand, a, b, cfg.panels, max(1, cfg.order // 2))
    return full, (full - coarse).sup_norm()


def _default_theta(a: Superconnection) -> GradedMatrixForm:
    return curvature(a)


def eta_between(
    a0: Superconnection,
    a1: Superconnection,
    cfg: QuadratureConfig | None = None,
    *,
    trace_fn=supertrace,
    theta_fn=_default_theta,
) -> EtaResult:
    """Transgression form along the linear path from a0 to a1."""
    cfg = cfg or QuadratureConfig()
    path, diff = affine_path(a0, a1)

    def integrand(t):
        heat = algebra_exp(-theta_fn(path(t)))
        return trace_fn(wedge_mul(diff, heat))

    form, est = integrate_form(integrand, 0.0, 1.0, cfg)
    return EtaResult(form=form, est_error=est)


def eta_along_path(
    path,
    dpath,
    cfg: QuadratureConfig | None = None,
    *,
    trace_fn=supertrace,
    theta_fn=_default_theta,
) -> EtaResult:
    """Transgression along an arbitrary smooth path of superconnections.

    path(t) returns a Superconnection and dpath(t) its coefficient-form
    t-derivative; used for homotopy-invariance checks with user paths.
    """
    cfg = cfg or QuadratureConfig()

    def integrand(t):
        heat = algebra_exp(-theta_fn(path(t)))
        return trace_fn(wedge_mul(dpath(t), heat))

    form, est = integrate_form(integrand, 0.0, 1.0, cfg)
    return EtaResult(form=form, est_error=est)


def eta_infinity(
    a: Superconnection,
    tol: float = 1e-10,
    cfg: QuadratureConfig | None = None,
    *,
    gap: float | None = None,
    trace_fn=supertrace,
    theta_fn=_default_theta,
) -> EtaResult:
    """Transgression to infinity for an invertible degree-0 term.

    The integral over [1, T] is truncated where the tail bound
    C exp(-c^2 T^2 / 2) drops below tol, with c the spectral gap and C the
    integrand magnitude at t = 1 times the configured safety factor.
    """
    cfg = cfg or QuadratureConfig()
    c = min_gap(a) if gap is None else gap
    if not c > 0:
        raise NotInvertibleError("eta_infinity requires an invertible degree-0 term", c)

    def integrand(t):
        at = rescale(a, t)
        dat = rescale_derivative(a, t)
        heat = algebra_exp(-theta_fn(at))
        return trace_fn(wedge_mul(dat, heat))

    start = integrand(1.0)
    big_c = max(start.sup_norm(), tol) * cfg.tail_safety
    if big_c <= tol:
        t_max = 1.0 + 1.0 / c
    else:
        t_max = math.sqrt(2.0 * math.log(big_c / tol)) / c
        t_max = max(t_max, 1.0 + 0.5 / c)
    form, est = integrate_form(integrand, 1.0, t_max, cfg)
    tail = big_c * math.exp(-0.5 * (c * t_max) ** 2)
    return EtaResult(form=form, est_error=est + tail, truncation_T=t_max)
