"""Per-harmonic phasor solver for linear branch circuits.

Uses complex arithmetic only and shares no code with the geometric algebra
path, so its answers are an independent reference for the engine.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DimensionMismatch, ResonantSingularity
from .signals import HarmonicSignal, HarmonicTerm, PolyphaseSignal

SERIES_RLC = "series_rlc"
STAR = "star"
TOPOLOGIES = (SERIES_RLC, STAR)


@dataclass(frozen=True)
class Branch:
    """Series R-L-C branch; ``C=None`` means no capacitor."""

    R: float = 0.0
    L: float = 0.0
    C: float | None = None

    def __post_init__(self):
        if self.R < 0 or self.L < 0:
            raise ValueError("R and L must be non-negative")
        if self.C is not None and not self.C > 0:
            raise ValueError("C must be positive when present")

    def impedance(self, omega: float) -> complex:
        z = complex(self.R, omega * self.L)
        if self.C is not None:
            z += 1.0 / (1j * omega * self.C)
        return z


@dataclass(frozen=True)
class LinearBranchCircuit:
    """Single series branch, or one branch per phase in star.

    A ``None`` branch is an open phase.  Without a neutral conductor the star
    point floats and its voltage follows from Kirchhoff's current law.
    """

    topology: str
    branches: tuple[Branch | None, ...]
    neutral: bool = True

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        object.__setattr__(self, "branches", tuple(self.branches))
        if self.topology == SERIES_RLC and len(self.branches) != 1:
            raise ValueError("a series RLC circuit has exactly one branch")
        if not self.branches:
            raise ValueError("circuit has no branches")

    @property
    def n_phases(self) -> int:
        return len(self.branches)


def _admittances(c: LinearBranchCircuit, omega: float, eps: float) -> list[complex]:
    out = []
    for k, br in enumerate(c.branches):
        if br is None:
            out.append(0j)
            continue
        z = br.impedance(omega)
        if abs(z) < eps:
            raise ResonantSingularity(f"branch {k + 1} impedance {z:.3g} vanishes at omega={omega:g}")
        out.append(1.0 / z)
    return out


def _phasors(s: HarmonicSignal, order: int) -> complex:
    return s.term(order).phasor


def solve_steady_state(c: LinearBranchCircuit, u: PolyphaseSignal, eps: float = 1e-12) -> PolyphaseSignal:
    """Steady-state branch currents for a DC-free harmonic supply."""
    if u.n_phases != c.n_phases:
        raise DimensionMismatch(f"supply has {u.n_phases} phases, circuit {c.n_phases}")
    for k, p in enumerate(u.phases):
        if p.dc != 0.0:
            raise ValueError(f"phase {k + 1} supply has a DC offset")
    w = u.base_omega
    orders = sorted({t.order for p in u.phases for t in p.terms if not t.is_zero})
    per_phase: list[list[HarmonicTerm]] = [[] for _ in u.phases]
    for k in orders:
        V = [_phasors(p, k) for p in u.phases]
        Y = _admittances(c, k * w, eps)
        if c.topology == STAR and not c.neutral:
            total = sum(Y)
            vn = sum(y * v for y, v in zip(Y, V)) / total if abs(total) > 0 else 0j
        else:
            vn = 0j
        for ph, (y, v) in enumerate(zip(Y, V)):
            current = y * (v - vn)
            if current != 0:
                per_phase[ph].append(HarmonicTerm.from_complex(k, current))
    return PolyphaseSignal(tuple(HarmonicSignal(w, tuple(terms)) for terms in per_phase))


def oracle_powers(u: PolyphaseSignal, i: PolyphaseSignal) -> tuple[float, float]:
    """Active power and Budeanu reactive power from RMS phasors."""
    if u.n_phases != i.n_phases:
        raise DimensionMismatch(f"{u.n_phases} voltage phases vs {i.n_phases} current phases")
    P = 0.0
    Q = 0.0
    for up, ip in zip(u.phases, i.phases):
        for term in up.terms:
            s = term.phasor * ip.term(term.order).phasor.conjugate()
            P += s.real
            Q += s.imag
    return P, Q


def oracle_harmonic_powers(u: PolyphaseSignal, i: PolyphaseSignal) -> dict[int, complex]:
    """Complex power ``sum_phases U_k conj(I_k)`` for each harmonic order."""
    out: dict[int, complex] = {}
    for up, ip in zip(u.phases, i.phases):
        for term in up.terms:
            out[term.order] = out.get(term.order, 0j) + term.phasor * ip.term(term.order).phasor.conjugate()
    return out
