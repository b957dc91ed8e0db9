"""Odd cocycle theory: the sigma-algebra, sigma-trace, odd Chern and eta forms.

A formal odd generator sigma with sigma^2 = 1 turns an ungraded bundle into
a graded one: the pair a + b sigma is represented on the doubled bundle as
[[a, b], [b, a]] with grading (+1..., -1...), which realizes the sign rule
"sigma anticommutes with odd-total-parity elements" through the ordinary
Koszul machinery.  An ungraded superconnection lifts by tagging its even
form-degree terms with sigma; the sigma-trace reads off the off-diagonal
block, and all transgression identities then run verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartMismatchError
from .forms import GradedMatrixForm, Grading, TorusChart, exterior_d, wedge_mul
from .superconn import Superconnection, curvature
from .transgression import EtaResult, QuadratureConfig, eta_between, eta_infinity

__all__ = [
    "SigmaElement",
    "OddCocycle",
    "sigma_lift",
    "tr_sigma",
    "odd_chern",
    "odd_eta_between",
    "odd_eta_infinity",
    "odd_curvature_class",
    "odd_cocycle_add",
    "odd_collapse_invertible",
    "odd_shift_superconnection",
    "suspend",
]


def _check_ungraded(grading: Grading):
    if grading.minus_indices.size:
        raise ChartMismatchError("odd theory expects an ungraded (all +1) bundle")


@dataclass
class SigmaElement:
    """a + b sigma with ungraded matrix coefficients a, b."""

    even_part: GradedMatrixForm
    odd_part: GradedMatrixForm

    def __post_init__(self):
        _check_ungraded(self.even_part.grading)
        self.even_part._check_compat(self.odd_part)

    @property
    def rank(self) -> int:
        return self.even_part.rank

    def to_rep(self) -> GradedMatrixForm:
        """Block representation [[a, b], [b, a]] on the graded double."""
        m = self.rank
        chart = self.even_part.chart
        rep = GradedMatrixForm.zeros(chart, Grading.balanced(m, m))
        rep.data[..., :m, :m] = self.even_part.data
        rep.data[..., m:, m:] = self.even_part.data
        rep.data[..., :m, m:] = self.odd_part.data
        rep.data[..., m:, :m] = self.odd_part.data
        return rep

    @classmethod
    def from_rep(cls, rep: GradedMatrixForm) -> "SigmaElement":
        m = rep.rank // 2
        chart = rep.chart
        grading = Grading.trivial(m)
        even = GradedMatrixForm(chart, grading, rep.data[..., :m, :m].copy())
        odd = GradedMatrixForm(chart, grading, rep.data[..., :m, m:].copy())
        return cls(even, odd)

    def mul(self, other: "SigmaElement") -> "SigmaElement":
        return SigmaElement.from_rep(wedge_mul(self.to_rep(), other.to_rep()))


def sigma_lift(a: Superconnection) -> Superconnection:
    """sigma-tag the even form-degree terms of an ungraded superconnection.

    The result lives on the doubled bundle with grading (+1.., -1..) and has
    odd total parity; its degree-0 term is hermitian and grading-odd exactly
    when the input degree-0 term is hermitian.
    """
    _check_ungraded(a.grading)
    m = a.rank
    chart = a.chart
    grading = Grading.balanced(m, m)
    coeff = GradedMatrixForm.zeros(chart, grading)
    for mask in range(chart.n_components):
        comp = a.coeff.data[mask]
        if not comp.any():
            continue
        if bin(mask).count("1") % 2 == 0:
            coeff.data[mask, ..., :m, m:] = comp
            coeff.data[mask, ..., m:, :m] = comp
        else:
            coeff.data[mask, ..., :m, :m] = comp
            coeff.data[mask, ..., m:, m:] = comp
    affine = {}
    for axis, slope in a.affine.items():
        big = np.zeros((2 * m, 2 * m), dtype=np.complex128)
        big[:m, m:] = slope
        big[m:, :m] = slope
        affine[axis] = big
    return Superconnection(coeff, affine)


def tr_sigma(x) -> GradedMatrixForm:
    """Tr of the sigma coefficient: Tr_sigma(a + b sigma) = Tr(b)."""
    if isinstance(x, SigmaElement):
        rep = x.to_rep()
    else:
        rep = x
    m = rep.rank // 2
    out = GradedMatrixForm.zeros(rep.chart, Grading.trivial(1))
    out.data[..., 0, 0] = np.einsum("...rr->...", rep.data[..., :m, m : 2 * m])
    return out


def odd_chern(a: Superconnection) -> GradedMatrixForm:
    """Tr_sigma exp(-(sigma-lift)^2); a closed scalar form of odd degrees."""
    lifted = sigma_lift(a)
    from .forms import algebra_exp  # local to avoid cycle at import time

    return tr_sigma(algebra_exp(-curvature(lifted)))


def odd_eta_between(
    a0: Superconnection, a1: Superconnection, cfg: QuadratureConfig | None = None
) -> EtaResult:
    """Transgression of the odd Chern character along the linear path."""
    return eta_between(sigma_lift(a0), sigma_lift(a1), cfg, trace_fn=tr_sigma)


def odd_eta_infinity(
    a: Superconnection, tol: float = 1e-10, cfg: QuadratureConfig | None = None
) -> EtaResult:
    """Odd transgression to infinity; requires an invertible degree-0 term."""
    return eta_infinity(sigma_lift(a), tol=tol, cfg=cfg, trace_fn=tr_sigma)


@dataclass
class OddCocycle:
    """Ungraded bundle with superconnection and an even-degree form."""

    A: Superconnection
    omega: GradedMatrixForm
    flavor: str = "odd"

    def __post_init__(self):
        _check_ungraded(self.A.grading)
        if self.omega.rank != 1:
            raise ChartMismatchError("omega must be a scalar (rank-1) form")
        if self.omega.chart != self.A.chart:
            raise ChartMismatchError("omega chart does not match the bundle")

    @property
    def chart(self) -> TorusChart:
        return self.A.chart

    @property
    def rank(self) -> int:
        return self.A.rank


def odd_curvature_class(c: OddCocycle) -> GradedMatrixForm:
    return odd_chern(c.A) + exterior_d(c.omega)


def odd_cocycle_add(c1: OddCocycle, c2: OddCocycle) -> OddCocycle:
    from .superconn import direct_sum

    if c1.chart != c2.chart:
        raise ChartMismatchError("cocycle sum requires a common chart")
    return OddCocycle(direct_sum(c1.A, c2.A), c1.omega + c2.omega)


def odd_collapse_invertible(
    c: OddCocycle, tol: float = 1e-10, cfg: QuadratureConfig | None = None
) -> OddCocycle:
    eta = odd_eta_infinity(c.A, tol=tol, cfg=cfg)
    zero = Superconnection.trivial(c.chart, Grading(np.zeros(0)))
    return OddCocycle(zero, c.omega + eta.form)


def odd_shift_superconnection(
    c: OddCocycle, a1: Superconnection, cfg: QuadratureConfig | None = None
) -> OddCocycle:
    c.A._check_compat(a1)
    eta = odd_eta_between(c.A, a1, cfg)
    return OddCocycle(a1, c.omega + eta.form)


def suspend(c: OddCocycle, fiber_modes: int = 6, grid_size: int | None = None):
    """Suspension to an even cocycle on the product with a new circle.

    The new circle coordinate u (period 1, inserted as axis 0) twists a
    truncated fiber Dirac block diag(i (n - u)) on modes |n| <= fiber_modes;
    the ungraded data rides along through its sigma-block embedding on the
    doubled fiber, and omega becomes 2 pi du ^ omega (the new coordinate is
    unit-period, so the circle form picks up the 2 pi length factor).  The
    mode-shift clutching of the fiber block makes its u-dependence affine,
    which the superconnection carries as an exact slope; contributions of the
    edge modes are Gaussian-suppressed by the heat factors.
    """
    from .dk import DKCocycle

    chart = c.chart
    if chart.dim + 1 > 3:
        raise ChartMismatchError("suspension would exceed dimension 3")
    new_chart = TorusChart(chart.dim + 1, grid_size or max(chart.grid_size, 8))
    m = c.rank
    n_modes = 2 * fiber_modes + 1
    fiber_n = np.arange(-fiber_modes, fiber_modes + 1, dtype=np.float64)
    big = n_modes * m
    grading = Grading.balanced(big, big)

    def pull_field(field):
        """Insert the new axis 0 into a field sampled on the old chart."""
        return np.broadcast_to(
            field[None, ...], (new_chart.grid_size,) + field.shape
        ).copy()

    coeff = GradedMatrixForm.zeros(new_chart, grading)
    eye_f = np.eye(n_modes)
    # sigma-block embedding of the pulled-back data on the doubled fiber
    for mask in range(chart.n_components):
        comp = c.A.coeff.data[mask]
        if not comp.any():
            continue
        block = np.einsum("ij,...kl->...ikjl", eye_f, comp).reshape(
            comp.shape[:-2] + (big, big)
        )
        block = pull_field(block)
        new_mask = mask << 1
        if bin(mask).count("1") % 2 == 0:
            coeff.data[new_mask, ..., :big, big:] += block
            coeff.data[new_mask, ..., big:, :big] += block
        else:
            coeff.data[new_mask, ..., :big, :big] += block
            coeff.data[new_mask, ..., big:, big:] += block
    # fiber Dirac block i (n - u), odd against the doubling
    nu = new_chart.grid_size
    u1d = np.arange(nu) / nu
    tmat = np.zeros((nu, n_modes, n_modes), dtype=np.complex128)
    idx = np.arange(n_modes)
    tmat[:, idx, idx] = 1j * (fiber_n[None, :] - u1d[:, None])
    tblock = np.einsum("uij,kl->uikjl", tmat, np.eye(m)).reshape(nu, big, big)
    tblock = tblock.reshape((nu,) + (1,) * chart.dim + (big, big))
    coeff.data[0, ..., :big, big:] += tblock
    coeff.data[0, ..., big:, :big] += np.conj(np.swapaxes(tblock, -1, -2))
    slope = np.zeros((2 * big, 2 * big), dtype=np.complex128)
    s_small = np.kron(-1j * np.eye(n_modes), np.eye(m))
    slope[:big, big:] = s_small
    slope[big:, :big] = np.conj(s_small.T)
    affine = {0: slope}
    for axis, old_slope in c.A.affine.items():
        big_slope = np.zeros((2 * big, 2 * big), dtype=np.complex128)
        emb = np.kron(np.eye(n_modes), old_slope)
        big_slope[:big, big:] = emb
        big_slope[big:, :big] = emb
        affine[axis + 1] = big_slope
    a_new = Superconnection(coeff, affine)

    omega_new = GradedMatrixForm.zeros(new_chart, Grading.trivial(1))
    for mask in range(chart.n_components):
        comp = c.omega.data[mask][..., 0, 0]
        if not comp.any():
            continue
        omega_new.data[(mask << 1) | 1, ..., 0, 0] = 2.0 * np.pi * pull_field(comp)
    return DKCocycle(a_new, omega_new)
