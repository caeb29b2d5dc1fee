"""Geometric power, GAPoT current decomposition, power factor and sequence split."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatch,
    MultiHarmonicUnsupported,
    NearZeroVoltage,
    NotThreePhase,
    SignalError,
    ZeroSignal,
)
from .ga import Multivector, grade_project, norm
from .signals import (
    LEAD,
    GeometricTrajectory,
    HarmonicSignal,
    HarmonicTerm,
    PolyphaseSignal,
    fit_harmonics,
    hilbert_geometric,
    mean_product,
    to_geometric,
)

AVERAGED = "averaged"
INSTANTANEOUS = "instantaneous"
MODES = (AVERAGED, INSTANTANEOUS)

KEEP_IP = "keep_ip"
KEEP_IF = "keep_iF"
STRATEGIES = (KEEP_IP, KEEP_IF)

# Sign applied to the componentwise Hilbert image of u when forming i_B.  With
# -1, i_B = (q/|u|^2) * sum_k (u_{2k-1} s_{2k} - u_{2k} s_{2k-1}), i.e. u rotated
# a quarter turn inside every phase plane, which makes i_B the mean-orthogonal
# projection of i_q on that direction.
BUDEANU_ORIENTATION = -1.0

# relative |u|^2 thresholds below which a point is treated as a voltage zero
HARMONIC_ZERO_EPS = 1e-14
SAMPLED_ZERO_EPS = 1e-9
MAX_CONTINUATION_ORDER = 4

COMPONENTS = ("i_p", "i_q", "i_F", "i_f", "i_B", "i_b", "i")


def _check_mode(mode: str, dim: int) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; use one of {MODES}")
    if mode == AVERAGED and dim % 2:
        raise DimensionMismatch(f"averaged mode needs an even dimension, got {dim}")


def _check_pair(u: GeometricTrajectory, i: GeometricTrajectory) -> None:
    if u.dim != i.dim:
        raise DimensionMismatch(f"voltage has dimension {u.dim}, current {i.dim}")
    if not math.isclose(u.base_omega, i.base_omega, rel_tol=1e-12):
        raise SignalError("voltage and current have different base frequencies")
    if u.is_sampled != i.is_sampled:
        raise SignalError("mix of sampled and harmonic trajectories; sample both or neither")
    if u.is_sampled and (u.samples.shape[0] != i.samples.shape[0] or u.periods != i.periods):
        raise DimensionMismatch("voltage and current are sampled on different grids")


def _scalar_coeff(mv: Multivector, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(mv.coefficient(), dtype=float), (n,))


@dataclass(frozen=True)
class GeometricPower:
    """``M = u i`` split into the scalar ``m_p`` and the bivector ``m_q``."""

    u: GeometricTrajectory = field(repr=False)
    i: GeometricTrajectory = field(repr=False)
    mode: str
    mean_m_p: float
    mean_m_q: Multivector
    active_power: float
    budeanu_q: float | None

    def m(self, t=None) -> Multivector:
        return self.u.at(t) * self.i.at(t)

    def m_p(self, t=None) -> np.ndarray:
        M = self.m(t)
        n = self.u.values(t).shape[0]
        return _scalar_coeff(grade_project(M, 0), n)

    def m_q(self, t=None) -> Multivector:
        return grade_project(self.m(t), 2)

    def m_norm_rms(self) -> float:
        """RMS over a period of ``|M(t)|``."""
        u, i = self.u, self.i
        if u.is_sampled:
            return float(np.sqrt(np.mean(norm(self.m()) ** 2)))
        from .signals import period_mean

        hint = u.order_hint + i.order_hint
        return math.sqrt(period_mean(lambda t: norm(u.at(t) * i.at(t)) ** 2, u.period, hint))


def in_plane_reactive(mean_m_q: Multivector) -> float:
    """Sum of the ``sigma_{2k-1,2k}`` coefficients of a bivector (k = 1..n)."""
    total = 0.0
    for k in range(1, mean_m_q.dim // 2 + 1):
        total += float(mean_m_q.coefficient(2 * k - 1, 2 * k))
    return total


def geometric_power(u: GeometricTrajectory, i: GeometricTrajectory, mode: str = AVERAGED) -> GeometricPower:
    _check_pair(u, i)
    _check_mode(mode, u.dim)
    m = u.dim
    mean_p = sum(mean_product(u, i, a, a) for a in range(m))
    coeffs = {}
    for a in range(m):
        for b in range(a + 1, m):
            c = mean_product(u, i, a, b) - mean_product(u, i, b, a)
            coeffs[(1 << a) | (1 << b)] = c
    mean_q = Multivector(m, coeffs)
    if mode == AVERAGED:
        return GeometricPower(u, i, mode, mean_p, mean_q, mean_p / 2.0, in_plane_reactive(mean_q) / 2.0)
    return GeometricPower(u, i, mode, mean_p, mean_q, mean_p, None)


def _parallel_current(
    U: np.ndarray,
    I: np.ndarray,
    zero_level: float,
    derivative_rows: Callable[[int, np.ndarray], np.ndarray] | None,
    derivative_scale: Callable[[int], float] | None,
) -> tuple[np.ndarray, np.ndarray]:
    """``u^-1 M_p`` at each row; returns the current and the singular-row mask.

    Rows where ``|u|^2 <= zero_level`` are voltage zeros.  There ``u/|u|`` is
    replaced by the direction of the first non-vanishing derivative of ``u``,
    the limit of the projection along the trajectory.
    """
    n, dim = U.shape
    u_mv = Multivector.vector(U)
    i_mv = Multivector.vector(I)
    m_p = _scalar_coeff(grade_project(u_mv * i_mv, 0), n)
    sq = norm(u_mv) ** 2
    sq = np.broadcast_to(np.asarray(sq, dtype=float), (n,))
    singular = sq <= zero_level
    u_inv = u_mv / np.where(singular, 1.0, sq)
    i_p = (u_inv * Multivector.scalar(dim, m_p)).vector_array(n)
    if singular.any():
        rows = np.nonzero(singular)[0]
        if derivative_rows is None:
            raise NearZeroVoltage(f"voltage vanishes at {rows.size} point(s) and cannot be continued")
        pending = rows
        for order in range(1, MAX_CONTINUATION_ORDER + 1):
            D = derivative_rows(order, pending)
            d_sq = np.sum(D * D, axis=1)
            ok = d_sq > 1e-18 * derivative_scale(order) ** 2
            if ok.any():
                Dk = D[ok]
                i_p[pending[ok]] = Dk * (np.sum(Dk * I[pending[ok]], axis=1) / d_sq[ok])[:, None]
            pending = pending[~ok]
            if pending.size == 0:
                break
        if pending.size:
            raise NearZeroVoltage(f"voltage vanishes to high order at {pending.size} point(s)")
    return i_p, singular


class _ParallelCurrentFn:
    """Exact pointwise ``i_p(t)`` for harmonic trajectories."""

    def __init__(self, u: GeometricTrajectory, i: GeometricTrajectory, eps: float):
        self.u = u
        self.i = i
        peak = u.peak_bound()
        self.zero_level = eps * peak * peak
        self._derivs: list[GeometricTrajectory] = []
        self._scales: list[float] = []
        if u.channels is not None:
            d = u
            for _ in range(MAX_CONTINUATION_ORDER):
                d = d.derivative()
                self._derivs.append(d)
                self._scales.append(d.peak_bound())

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rows_fn = (lambda order, rows: self._derivs[order - 1].values(t[rows])) if self._derivs else None
        i_p, _ = _parallel_current(
            self.u.values(t), self.i.values(t), self.zero_level, rows_fn, lambda k: self._scales[k - 1]
        )
        return i_p


@dataclass(frozen=True)
class CurrentDecomposition:
    u: GeometricTrajectory = field(repr=False)
    i: GeometricTrajectory = field(repr=False)
    i_p: GeometricTrajectory = field(repr=False)
    i_q: GeometricTrajectory = field(repr=False)
    i_F: GeometricTrajectory = field(repr=False)
    i_f: GeometricTrajectory = field(repr=False)
    i_B: GeometricTrajectory = field(repr=False)
    i_b: GeometricTrajectory = field(repr=False)
    power: GeometricPower = field(repr=False)
    mode: str
    orientation: float
    voltage_rms: float
    singular_samples: tuple[int, ...] = ()

    @cached_property
    def rms(self) -> dict[str, float]:
        """Geometric RMS norm of every component."""
        return {name: getattr(self, name).rms() for name in COMPONENTS}

    @cached_property
    def phase_rms(self) -> dict[str, float]:
        """Collective RMS of the time-domain phase channels (sigma_{2k-1} when averaged)."""
        chans = _phase_channels(self.u.dim, self.mode)
        return {name: getattr(self, name).channel_rms(chans) for name in COMPONENTS}

    def component(self, name: str) -> GeometricTrajectory:
        if name not in COMPONENTS:
            raise KeyError(name)
        return getattr(self, name)

    def components(self) -> dict[str, GeometricTrajectory]:
        return {name: getattr(self, name) for name in COMPONENTS}


def _phase_channels(dim: int, mode: str) -> range:
    return range(1, dim + 1, 2) if mode == AVERAGED else range(1, dim + 1)


def decompose(
    u: GeometricTrajectory,
    i: GeometricTrajectory,
    mode: str = AVERAGED,
    eps: float | None = None,
    convention: str = LEAD,
) -> CurrentDecomposition:
    """Full current decomposition ``i = i_p + i_q = i_F + i_f + i_B + i_b``.

    ``eps`` is the relative squared-norm level (times the peak of ``|u|^2``)
    below which a point counts as a voltage zero; see :func:`_parallel_current`.
    """
    _check_pair(u, i)
    _check_mode(mode, u.dim)
    power = geometric_power(u, i, mode)
    u_ms = u.mean_square()
    if not u_ms > 0.0:
        raise NearZeroVoltage("voltage is identically zero")
    singular: tuple[int, ...] = ()
    if u.is_sampled:
        eps = SAMPLED_ZERO_EPS if eps is None else eps
        peak_sq = float(np.max(np.sum(u.samples**2, axis=1)))
        derivs = []
        d = u
        for _ in range(MAX_CONTINUATION_ORDER):
            d = d.derivative()
            derivs.append(d.samples)
        scales = [float(np.sqrt(np.max(np.sum(x * x, axis=1)))) for x in derivs]
        ip_vals, mask = _parallel_current(
            u.samples, i.samples, eps * peak_sq, lambda k, rows: derivs[k - 1][rows], lambda k: scales[k - 1]
        )
        singular = tuple(int(k) for k in np.nonzero(mask)[0])
        i_p = GeometricTrajectory(u.dim, u.base_omega, samples=ip_vals, periods=u.periods, singular=singular)
    else:
        eps = HARMONIC_ZERO_EPS if eps is None else eps
        fn = _ParallelCurrentFn(u, i, eps)
        i_p = GeometricTrajectory(u.dim, u.base_omega, func=fn, order_hint=3 * u.order_hint + i.order_hint)
        exact = _exact_if_polynomial(i_p)
        if exact is not None:
            i_p = exact
    i_q = i - i_p
    i_F = u * (power.mean_m_p / u_ms)
    i_f = i_p - i_F
    if mode == AVERAGED:
        q_bar = in_plane_reactive(power.mean_m_q)
        i_B = hilbert_geometric(u, convention) * (BUDEANU_ORIENTATION * q_bar / u_ms)
    else:
        i_B = GeometricTrajectory.zeros(u.dim, u.base_omega)
        if u.is_sampled:
            i_B = GeometricTrajectory(u.dim, u.base_omega, samples=np.zeros_like(u.samples), periods=u.periods)
    i_b = i_q - i_B
    return CurrentDecomposition(
        u=u,
        i=i,
        i_p=i_p,
        i_q=i_q,
        i_F=i_F,
        i_f=i_f,
        i_B=i_B,
        i_b=i_b,
        power=power,
        mode=mode,
        orientation=BUDEANU_ORIENTATION,
        voltage_rms=math.sqrt(u_ms),
        singular_samples=singular,
    )


def _exact_if_polynomial(traj: GeometricTrajectory) -> GeometricTrajectory | None:
    """Channel form of ``traj`` when it is a trig polynomial of modest degree."""
    from .signals import to_harmonic

    if traj.order_hint > 256:
        return None
    return to_harmonic(traj, tol=1e-12)


def quadrature_current_direct(u: GeometricTrajectory, i: GeometricTrajectory, t=None) -> np.ndarray:
    """Grade-1 part of ``u^-1 M_q`` evaluated pointwise (no continuation)."""
    U = u.values(t)
    I = i.values(t)
    u_mv = Multivector.vector(U)
    M_q = grade_project(u_mv * Multivector.vector(I), 2)
    sq = norm(u_mv) ** 2
    return grade_project((u_mv / sq) * M_q, 1).vector_array(U.shape[0])


def power_factor(u: GeometricTrajectory, i: GeometricTrajectory, mode: str = AVERAGED) -> float:
    """``mean(M_p) / (|u|_rms |i|_rms)`` with geometric RMS norms."""
    u_rms = u.rms()
    i_rms = i.rms()
    if u_rms == 0.0 or i_rms == 0.0:
        raise ZeroSignal("power factor undefined for a zero voltage or current")
    return geometric_power(u, i, mode).mean_m_p / (u_rms * i_rms)


def power_factor_m_norm(u: GeometricTrajectory, i: GeometricTrajectory, mode: str = AVERAGED) -> float:
    """``mean(M_p) / rms|M|``, reported for comparison with :func:`power_factor`."""
    power = geometric_power(u, i, mode)
    m_rms = power.m_norm_rms()
    if m_rms == 0.0:
        raise ZeroSignal("power factor undefined for zero geometric power")
    return power.mean_m_p / m_rms


def compensate(d: CurrentDecomposition, strategy: str = KEEP_IP) -> GeometricTrajectory:
    """Source current left after compensation (``i_p`` or the Fryze current)."""
    if strategy == KEEP_IP:
        return d.i_p
    if strategy == KEEP_IF:
        return d.i_F
    raise ValueError(f"unknown strategy {strategy!r}; use one of {STRATEGIES}")


# symmetrical components

_A = cmath.exp(2j * math.pi / 3)


@dataclass(frozen=True)
class SequenceSplit:
    i_zero: GeometricTrajectory
    i_negative: GeometricTrajectory
    i_positive: GeometricTrajectory
    order: int | None
    phasors: dict[str, complex]


def _phase_phasors(traj: GeometricTrajectory) -> dict[int, list[complex]]:
    """Per-order RMS phasors of the three phase channels (sigma_1, sigma_3, sigma_5)."""
    if traj.channels is not None:
        phases = [traj.channels[k] for k in (0, 2, 4)]
    else:
        if traj.samples is not None:
            vals = traj.samples
            if traj.periods != 1:
                spp = vals.shape[0] // traj.periods
                vals = vals.reshape(traj.periods, spp, -1).mean(axis=0)
        else:
            n = max(256, 16 * (traj.order_hint + 1))
            vals = traj.values(traj.times(n))
        phases = fit_harmonics(vals[:, 0::2], traj.base_omega, floor=1e-9)
    out: dict[int, list[complex]] = {}
    for k, ph in enumerate(phases):
        if abs(ph.dc) > 0:
            raise SignalError("sequence split needs DC-free phases")
        for term in ph.terms:
            out.setdefault(term.order, [0j, 0j, 0j])[k] = term.phasor
    peak = max((abs(x) for v in out.values() for x in v), default=0.0)
    return {k: v for k, v in out.items() if max(abs(x) for x in v) > 1e-9 * peak}


def sequence_split(traj: GeometricTrajectory, n_phases: int = 3, convention: str = LEAD) -> SequenceSplit:
    """Fortescue split of a sinusoidal three-phase averaged-mode trajectory."""
    if n_phases != 3 or traj.dim != 6:
        raise NotThreePhase(f"sequence split needs a three-phase (dimension 6) trajectory, got dimension {traj.dim}")
    by_order = _phase_phasors(traj)
    if len(by_order) > 1:
        raise MultiHarmonicUnsupported(f"trajectory carries harmonic orders {sorted(by_order)}; only one is supported")
    w = traj.base_omega
    if not by_order:
        zero = GeometricTrajectory.zeros(6, w)
        return SequenceSplit(zero, zero, zero, None, {"zero": 0j, "positive": 0j, "negative": 0j})
    (order, (xa, xb, xc)), = by_order.items()
    x0 = (xa + xb + xc) / 3
    x1 = (xa + _A * xb + _A * _A * xc) / 3
    x2 = (xa + _A * _A * xb + _A * xc) / 3

    def embed(seq):
        phases = tuple(HarmonicSignal(w, (HarmonicTerm.from_complex(order, x),)) for x in seq)
        return to_geometric(PolyphaseSignal(phases), convention)

    return SequenceSplit(
        i_zero=embed((x0, x0, x0)),
        i_negative=embed((x2, _A * x2, _A * _A * x2)),
        i_positive=embed((x1, _A * _A * x1, _A * x1)),
        order=order,
        phasors={"zero": x0, "positive": x1, "negative": x2},
    )
