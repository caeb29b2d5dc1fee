"""Cross-vector instantaneous reactive power theory for three-phase systems.

Kept deliberately free of the geometric algebra code: plain numpy dot and
cross products, so it can serve as an independent check of the
instantaneous GAPoT mode.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NearZeroVoltage, NotThreePhase, ZeroSignal
from .signals import GeometricTrajectory, PolyphaseSignal, fit_harmonics, to_harmonic

CV_ZERO_EPS = 1e-9


def _require_three_phase(*signals: PolyphaseSignal) -> None:
    for s in signals:
        if s.n_phases == 1:
            raise NotThreePhase(
                "cross-vector theory is unsupported for single-phase circuits: u x i, and so q, is identically zero"
            )
        if s.n_phases != 3:
            raise NotThreePhase(f"cross-vector theory needs exactly 3 phases, got {s.n_phases}")


@dataclass(frozen=True)
class CvState:
    u: PolyphaseSignal = field(repr=False)
    i: PolyphaseSignal = field(repr=False)

    def p(self, t) -> np.ndarray:
        return np.sum(self.u.evaluate(t) * self.i.evaluate(t), axis=1)

    def q_vec(self, t) -> np.ndarray:
        u = self.u.evaluate(t)
        i = self.i.evaluate(t)
        uR, uS, uT = u.T
        iR, iS, iT = i.T
        return np.stack([uS * iT - uT * iS, uT * iR - uR * iT, uR * iS - uS * iR], axis=1)

    def q_norm(self, t) -> np.ndarray:
        q = self.q_vec(t)
        return np.sqrt(np.sum(q * q, axis=1))

    @property
    def active_power(self) -> float:
        return sum(a.mean_product(b) for a, b in zip(self.u.phases, self.i.phases))


def cv_powers(u: PolyphaseSignal, i: PolyphaseSignal) -> CvState:
    _require_three_phase(u, i)
    return CvState(u, i)


@dataclass(frozen=True)
class CvDecomposition:
    """``i = i_p + i_q`` with ``i_p = p/(u.u) u``.

    ``i_p`` and ``i_q`` are harmonic series; ``exact`` tells whether they
    reproduce the pointwise definition to 1e-9 or are a truncated fit.
    """

    state: CvState = field(repr=False)
    i_p: PolyphaseSignal
    i_q: PolyphaseSignal
    exact: bool
    eps: float = CV_ZERO_EPS

    def _u_sq(self, t):
        u = self.state.u.evaluate(t)
        sq = np.sum(u * u, axis=1)
        peak = sum(p.peak_bound() ** 2 for p in self.state.u.phases)
        if np.any(sq <= self.eps * peak):
            raise NearZeroVoltage("u.u vanishes; the cross-vector decomposition is singular here")
        return u, sq

    def i_p_at(self, t) -> np.ndarray:
        u, sq = self._u_sq(t)
        return u * (self.state.p(t) / sq)[:, None]

    def i_q_at(self, t) -> np.ndarray:
        return self.state.i.evaluate(t) - self.i_p_at(t)

    def i_q_cross_at(self, t) -> np.ndarray:
        """``(q x u) / (u.u)``, the textbook form of the quadrature current."""
        u, sq = self._u_sq(t)
        return np.cross(self.state.q_vec(t), u) / sq[:, None]

    def power_factor(self) -> float:
        """``P / (|u| |i_p|)`` after compensation, collective RMS values."""
        denom = self.state.u.rms() * self.i_p.rms()
        if denom == 0.0:
            raise ZeroSignal("power factor undefined for a zero voltage or compensated current")
        return self.state.active_power / denom


def cv_decompose(u: PolyphaseSignal, i: PolyphaseSignal, eps: float = CV_ZERO_EPS) -> CvDecomposition:
    state = cv_powers(u, i)
    probe = CvDecomposition(state, u, u, False, eps)
    hint = 3 * u.max_order + i.max_order
    traj = GeometricTrajectory(3, u.base_omega, func=probe.i_p_at, order_hint=hint)
    fitted = to_harmonic(traj)
    exact = fitted is not None
    if fitted is None:
        n = 4096
        while n < 8 * hint:
            n *= 2
        t = np.arange(n) * (u.period / n)
        i_p = PolyphaseSignal(tuple(fit_harmonics(probe.i_p_at(t), u.base_omega)))
    else:
        i_p = PolyphaseSignal(fitted.channels)
    return CvDecomposition(state, i_p, i - i_p, exact, eps)


_A = cmath.exp(2j * math.pi / 3)


@dataclass(frozen=True)
class SpectrumEntry:
    order: int
    sequence: str
    magnitude: float  # RMS of the sequence phasor


def cv_spectrum_report(s: PolyphaseSignal, floor: float = 1e-9) -> list[SpectrumEntry]:
    """Symmetrical-component magnitudes per harmonic order of a three-phase signal."""
    _require_three_phase(s)
    orders = sorted({t.order for p in s.phases for t in p.terms})
    rows = []
    for k in orders:
        xa, xb, xc = (p.term(k).phasor for p in s.phases)
        seq = {
            "zero": (xa + xb + xc) / 3,
            "positive": (xa + _A * xb + _A * _A * xc) / 3,
            "negative": (xa + _A * _A * xb + _A * xc) / 3,
        }
        for name in ("positive", "negative", "zero"):
            rows.append(SpectrumEntry(k, name, abs(seq[name])))
    peak = max((r.magnitude for r in rows), default=0.0)
    return [r for r in rows if r.magnitude > floor * peak]
