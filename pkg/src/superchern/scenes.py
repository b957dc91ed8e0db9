"""Seeded generators for band-limited test scenes.

Everything here is deterministic given a numpy Generator; fields are built
from a handful of low Fourier modes so spectral differentiation and the
identity residuals they feed stay well inside the declared tolerances, with
room to shrink further as the grid is refined.
"""

from __future__ import annotations

import itertools

import numpy as np

from .forms import GradedMatrixForm, Grading, TorusChart
from .superconn import Superconnection

__all__ = [
    "band_limited_field",
    "random_term0",
    "random_conn1",
    "random_higher",
    "random_superconnection",
    "gapped_superconnection",
    "winding_superconnection",
    "random_odd_superconnection",
    "dirac_twist_superconnection",
    "stabilizer_pair_scene",
    "random_omega",
    "random_scalar_form",
    "random_gauge",
]


def band_limited_field(rng, chart: TorusChart, trailing, max_mode=2, amp=1.0):
    """Complex field with Fourier support |k_a| <= max_mode, O(amp) entries."""
    trailing = tuple(trailing)
    out = np.zeros(chart.shape + trailing, dtype=np.complex128)
    if chart.dim == 0:
        coeff = amp * (rng.standard_normal(trailing) + 1j * rng.standard_normal(trailing))
        return out + coeff
    modes = list(itertools.product(range(-max_mode, max_mode + 1), repeat=chart.dim))
    coords = [chart.coordinate(a) for a in range(chart.dim)]
    norm = amp / len(modes) ** 0.5
    for k in modes:
        coeff = norm * (rng.standard_normal(trailing) + 1j * rng.standard_normal(trailing))
        phase = np.zeros(chart.shape)
        for a, ka in enumerate(k):
            phase = phase + ka * coords[a]
        out += np.exp(2j * np.pi * phase)[(...,) + (None,) * len(trailing)] * coeff
    return out


def _hermitize(field):
    return 0.5 * (field + np.conj(np.swapaxes(field, -1, -2)))


def _skew_hermitize(field):
    return 0.5 * (field - np.conj(np.swapaxes(field, -1, -2)))


def random_term0(rng, chart, grading: Grading, amp=1.0, max_mode=2):
    """Pointwise hermitian, gamma-odd matrix field."""
    m = grading.rank
    plus = grading.plus_indices
    minus = grading.minus_indices
    out = np.zeros(chart.shape + (m, m), dtype=np.complex128)
    if plus.size and minus.size:
        block = band_limited_field(rng, chart, (minus.size, plus.size), max_mode, amp)
        out[..., minus[:, None], plus[None, :]] = block
        out = out + np.conj(np.swapaxes(out, -1, -2))
    return out


def random_conn1(rng, chart, grading: Grading, amp=0.8, max_mode=2):
    """Per-axis skew-hermitian, gamma-even connection fields."""
    m = grading.rank
    fields = []
    for _ in range(chart.dim):
        w = np.zeros(chart.shape + (m, m), dtype=np.complex128)
        for idx in (grading.plus_indices, grading.minus_indices):
            if idx.size:
                blk = band_limited_field(rng, chart, (idx.size, idx.size), max_mode, amp)
                w[..., idx[:, None], idx[None, :]] = _skew_hermitize(blk)
        fields.append(w)
    return fields


def random_higher(rng, chart, grading: Grading, degree: int, amp=0.4, max_mode=1):
    """Homogeneous degree >= 2 term with odd total parity."""
    form = GradedMatrixForm.zeros(chart, grading)
    m = grading.rank
    table = grading.conj_table()
    for mask in range(chart.n_components):
        if bin(mask).count("1") != degree:
            continue
        field = band_limited_field(rng, chart, (m, m), max_mode, amp)
        if degree % 2 == 0:
            field = 0.5 * (field - field * table)  # gamma-odd matrix part
        else:
            field = 0.5 * (field + field * table)  # gamma-even matrix part
        form.data[mask] = field
    return form


def random_superconnection(
    rng,
    chart,
    grading: Grading,
    amp0=1.0,
    amp1=0.8,
    max_mode=2,
    with_higher=True,
):
    term0 = random_term0(rng, chart, grading, amp0, max_mode)
    conn1 = random_conn1(rng, chart, grading, amp1, max_mode)
    higher = []
    if with_higher and chart.dim >= 2:
        higher.append(random_higher(rng, chart, grading, 2, 0.4 * amp0, 1))
    return Superconnection.from_terms(chart, grading, term0, conn1, higher)


def gapped_superconnection(
    rng,
    chart,
    plus=1,
    minus=1,
    gap=1.0,
    wiggle=0.1,
    phase_amp=0.3,
    amp1=0.25,
    max_mode=1,
    with_higher=False,
):
    """Random superconnection whose degree-0 term has min_gap >= gap.

    Built around a constant isometry block with a gentle phase modulation;
    wiggle/phase_amp stay small so the heat factors of the rescaled family
    remain spectrally narrow on coarse grids.
    """
    grading = Grading.balanced(plus, minus)
    m = plus + minus
    base = np.zeros(chart.shape + (m, m), dtype=np.complex128)
    r = min(plus, minus)
    iso = np.zeros((minus, plus), dtype=np.complex128)
    iso[:r, :r] = np.eye(r)
    phase = band_limited_field(rng, chart, (), max_mode, phase_amp)
    phase = np.exp(1j * np.real(phase))
    base[..., plus:, :plus] = phase[..., None, None] * iso
    pert = random_term0(rng, chart, grading, wiggle * gap, max_mode)
    t0 = gap * (base + np.conj(np.swapaxes(base, -1, -2))) + pert
    # rescale so that the requested gap actually holds
    sv = np.linalg.svd(t0, compute_uv=False)
    have = float(sv.min())
    if have < gap:
        t0 = t0 * (gap / max(have, 1e-12) * 1.05)
    conn1 = random_conn1(rng, chart, grading, amp1, max_mode)
    higher = []
    if with_higher and chart.dim >= 2:
        higher.append(random_higher(rng, chart, grading, 2, 0.3 * amp1, 1))
    return Superconnection.from_terms(chart, grading, t0, conn1, higher)


def winding_superconnection(chart: TorusChart, k: int, radius=1.0, axis=0):
    """Rank (1|1) scene with off-diagonal winding phase r exp(2 pi i k x)."""
    grading = Grading.balanced(1, 1)
    x = chart.coordinate(axis)
    h = radius * np.exp(2j * np.pi * k * x)
    t0 = np.zeros(chart.shape + (2, 2), dtype=np.complex128)
    t0[..., 1, 0] = np.broadcast_to(h, chart.shape)
    t0[..., 0, 1] = np.conj(t0[..., 1, 0])
    return Superconnection.from_terms(chart, grading, t0)


def random_odd_superconnection(rng, chart, rank=2, amp0=1.0, amp1=0.8, max_mode=2):
    """Ungraded scene: hermitian degree-0 term, skew-hermitian connection."""
    grading = Grading.trivial(rank)
    t0 = _hermitize(band_limited_field(rng, chart, (rank, rank), max_mode, amp0))
    conn = [
        _skew_hermitize(band_limited_field(rng, chart, (rank, rank), max_mode, amp1))
        for _ in range(chart.dim)
    ]
    return Superconnection.from_terms(chart, grading, t0, conn)


def dirac_twist_superconnection(chart: TorusChart, k: int, modes=4, scale=2.0, axis=0):
    """Ungraded truncated mode-shift family diag(scale * (n - k x)) on a circle.

    Carries k units of spectral flow per period; the affine x-dependence is
    stored as an exact slope so differentiation does not see the wrap jump.
    """
    n = np.arange(-modes, modes + 1, dtype=np.float64)
    m = n.size
    grading = Grading.trivial(m)
    x = chart.coordinate(axis)
    field = np.zeros(chart.shape + (m, m), dtype=np.complex128)
    diag = scale * (n.reshape((1,) * chart.dim + (m,)) - k * x[..., None])
    idx = np.arange(m)
    field[..., idx, idx] = diag
    slope = np.diag(np.full(m, -scale * k, dtype=np.complex128))
    return Superconnection.from_terms(chart, grading, field, affine={axis: slope})


def stabilizer_pair_scene(rng, chart, plus=1, minus=1, e_rank=1, amp=0.7, max_mode=2):
    """Fields for a stabilizer: map into the minus sector plus a connection."""
    s_field = band_limited_field(rng, chart, (minus, e_rank), max_mode, amp)
    conn = [
        _skew_hermitize(band_limited_field(rng, chart, (e_rank, e_rank), max_mode, 0.5))
        for _ in range(chart.dim)
    ]
    return s_field, conn


def random_scalar_form(rng, chart, degrees, amp=0.8, max_mode=2):
    """Rank-1 form supported on the requested degrees."""
    out = GradedMatrixForm.zeros(chart, Grading.trivial(1))
    for mask in range(chart.n_components):
        if bin(mask).count("1") in degrees:
            out.data[mask, ..., 0, 0] = band_limited_field(
                rng, chart, (), max_mode, amp
            )
    return out


def random_omega(rng, chart, amp=0.8, max_mode=2):
    """Odd-degree scalar form (a cocycle's differential-form component)."""
    return random_scalar_form(
        rng, chart, degrees=set(range(1, chart.dim + 1, 2)), amp=amp, max_mode=max_mode
    )


def random_gauge(rng, chart, grading: Grading, amp=0.6, max_mode=2):
    """gamma-even pointwise unitary built as exp(i H) of a hermitian field."""
    from .forms import expm_batched
    from .superconn import GaugeTransform

    m = grading.rank
    h = np.zeros(chart.shape + (m, m), dtype=np.complex128)
    for idx in (grading.plus_indices, grading.minus_indices):
        if idx.size:
            blk = band_limited_field(rng, chart, (idx.size, idx.size), max_mode, amp)
            h[..., idx[:, None], idx[None, :]] = _hermitize(blk)
    u = expm_batched(1j * h)
    return GaugeTransform(chart, grading, u)
