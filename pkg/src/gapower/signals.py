"""Waveform representations and the mapping of polyphase signals into Cl(2n).

Two representations coexist:

* :class:`HarmonicSignal` -- an exact finite cosine/sine series.  Period means
  are computed from the coefficients, never by quadrature.
* :class:`SampledSignal` -- uniform samples over an integer number of periods.

Both map to a :class:`GeometricTrajectory`, a grade-1 multivector valued
function of time.  The Hilbert transform follows the convention
``H[cos] = -sin`` and ``H[sin] = cos`` (``convention="lead"``); the textbook
convention is available with ``convention="textbook"``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NonIntegerPeriodWindow,
    NonzeroDcComponent,
    SignalError,
    SinglePhaseInstantaneousUnsupported,
)
from .ga import Multivector

LEAD = "lead"
TEXTBOOK = "textbook"
CONVENTIONS = (LEAD, TEXTBOOK)

DEFAULT_GRID = 1024
# relative threshold below which a DC level or spectral line counts as absent
SPECTRAL_FLOOR = 1e-10


def _check_convention(convention: str) -> None:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown Hilbert convention {convention!r}; use one of {CONVENTIONS}")


@dataclass(frozen=True)
class HarmonicTerm:
    """``cos_amp * cos(order*w*t) + sin_amp * sin(order*w*t)`` with peak amplitudes."""

    order: int
    cos_amp: float = 0.0
    sin_amp: float = 0.0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise SignalError(f"harmonic order must be a positive integer, got {self.order!r}")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "cos_amp", float(self.cos_amp))
        object.__setattr__(self, "sin_amp", float(self.sin_amp))

    @classmethod
    def from_phasor(cls, order: int, rms: float, phase_deg: float = 0.0) -> HarmonicTerm:
        """Term equal to ``sqrt(2)*rms*cos(order*w*t + phase)``."""
        phi = math.radians(phase_deg)
        peak = math.sqrt(2.0) * rms
        return cls(order, peak * math.cos(phi), -peak * math.sin(phi))

    @classmethod
    def from_complex(cls, order: int, phasor: complex) -> HarmonicTerm:
        """Inverse of :attr:`phasor` (RMS complex amplitude, cosine reference)."""
        return cls(order, math.sqrt(2.0) * phasor.real, -math.sqrt(2.0) * phasor.imag)

    @property
    def phasor(self) -> complex:
        return complex(self.cos_amp, -self.sin_amp) / math.sqrt(2.0)

    @property
    def is_zero(self) -> bool:
        return self.cos_amp == 0.0 and self.sin_amp == 0.0


@dataclass(frozen=True)
class HarmonicSignal:
    base_omega: float
    terms: tuple[HarmonicTerm, ...] = ()
    dc: float = 0.0

    def __post_init__(self):
        if not self.base_omega > 0:
            raise SignalError(f"base_omega must be positive, got {self.base_omega!r}")
        terms = tuple(sorted(self.terms, key=lambda term: term.order))
        seen = set()
        for term in terms:
            if term.order in seen:
                raise SignalError(f"duplicate harmonic order {term.order}")
            seen.add(term.order)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "dc", float(self.dc))
        object.__setattr__(self, "base_omega", float(self.base_omega))

    @classmethod
    def zero(cls, base_omega: float) -> HarmonicSignal:
        return cls(base_omega)

    @classmethod
    def from_pairs(cls, base_omega: float, pairs: dict[int, tuple[float, float]], dc: float = 0.0):
        return cls(base_omega, tuple(HarmonicTerm(k, a, b) for k, (a, b) in pairs.items()), dc)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.base_omega

    @property
    def max_order(self) -> int:
        return max((t.order for t in self.terms if not t.is_zero), default=0)

    def term(self, order: int) -> HarmonicTerm:
        for t in self.terms:
            if t.order == order:
                return t
        return HarmonicTerm(order)

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.dc)
        for term in self.terms:
            arg = term.order * self.base_omega * t
            out = out + term.cos_amp * np.cos(arg) + term.sin_amp * np.sin(arg)
        return out

    __call__ = evaluate

    def derivative(self) -> HarmonicSignal:
        w = self.base_omega
        return HarmonicSignal(
            w,
            tuple(HarmonicTerm(t.order, t.sin_amp * t.order * w, -t.cos_amp * t.order * w) for t in self.terms),
        )

    def _combine(self, other: HarmonicSignal, sign: float) -> HarmonicSignal:
        if not math.isclose(self.base_omega, other.base_omega, rel_tol=1e-12):
            raise SignalError("signals have different base frequencies")
        acc: dict[int, list[float]] = {}
        for t in self.terms:
            acc[t.order] = [t.cos_amp, t.sin_amp]
        for t in other.terms:
            a, b = acc.get(t.order, [0.0, 0.0])
            acc[t.order] = [a + sign * t.cos_amp, b + sign * t.sin_amp]
        terms = tuple(HarmonicTerm(k, a, b) for k, (a, b) in acc.items() if a != 0.0 or b != 0.0)
        return HarmonicSignal(self.base_omega, terms, self.dc + sign * other.dc)

    def __add__(self, other: HarmonicSignal) -> HarmonicSignal:
        return self._combine(other, 1.0)

    def __sub__(self, other: HarmonicSignal) -> HarmonicSignal:
        return self._combine(other, -1.0)

    def __mul__(self, k: float) -> HarmonicSignal:
        k = float(k)
        return HarmonicSignal(
            self.base_omega, tuple(HarmonicTerm(t.order, k * t.cos_amp, k * t.sin_amp) for t in self.terms), k * self.dc
        )

    __rmul__ = __mul__

    def __neg__(self) -> HarmonicSignal:
        return self * -1.0

    def mean_product(self, other: HarmonicSignal) -> float:
        """Period mean of ``self(t) * other(t)`` from harmonic orthogonality."""
        total = self.dc * other.dc
        for t in self.terms:
            o = other.term(t.order)
            total += 0.5 * (t.cos_amp * o.cos_amp + t.sin_amp * o.sin_amp)
        return total

    def mean_square(self) -> float:
        return self.mean_product(self)

    def rms(self) -> float:
        return math.sqrt(self.mean_square())

    def peak_bound(self) -> float:
        return abs(self.dc) + sum(math.hypot(t.cos_amp, t.sin_amp) for t in self.terms)

    def is_zero(self) -> bool:
        return self.dc == 0.0 and all(t.is_zero for t in self.terms)


@dataclass(frozen=True)
class PolyphaseSignal:
    phases: tuple[HarmonicSignal, ...]

    def __post_init__(self):
        phases = tuple(self.phases)
        if not phases:
            raise SignalError("a polyphase signal needs at least one phase")
        w = phases[0].base_omega
        for k, p in enumerate(phases):
            if not math.isclose(p.base_omega, w, rel_tol=1e-12):
                raise SignalError(f"phase {k + 1} has base_omega {p.base_omega}, expected {w}")
        object.__setattr__(self, "phases", phases)

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    @property
    def base_omega(self) -> float:
        return self.phases[0].base_omega

    @property
    def period(self) -> float:
        return self.phases[0].period

    @property
    def max_order(self) -> int:
        return max(p.max_order for p in self.phases)

    def evaluate(self, t) -> np.ndarray:
        """Values with shape ``(len(t), n_phases)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([p.evaluate(t) for p in self.phases], axis=-1)

    def __add__(self, other: PolyphaseSignal) -> PolyphaseSignal:
        _same_phase_count(self, other)
        return PolyphaseSignal(tuple(a + b for a, b in zip(self.phases, other.phases)))

    def __sub__(self, other: PolyphaseSignal) -> PolyphaseSignal:
        _same_phase_count(self, other)
        return PolyphaseSignal(tuple(a - b for a, b in zip(self.phases, other.phases)))

    def __mul__(self, k: float) -> PolyphaseSignal:
        return PolyphaseSignal(tuple(p * k for p in self.phases))

    __rmul__ = __mul__

    def rms(self) -> float:
        """Collective RMS: square root of the summed per-phase mean squares."""
        return math.sqrt(sum(p.mean_square() for p in self.phases))


def _same_phase_count(a, b) -> None:
    if a.n_phases != b.n_phases:
        raise DimensionMismatch(f"{a.n_phases} phases vs {b.n_phases} phases")


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Uniform samples of an n-phase waveform over ``periods`` fundamental periods.

    ``samples`` has shape ``(n_samples, n_phases)``; sample ``j`` is taken at
    ``t = j / sample_rate``.
    """

    sample_rate: float
    samples: np.ndarray
    periods: int
    base_omega: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise SignalError("samples must have shape (n_samples, n_phases)")
        if int(self.periods) != self.periods or self.periods < 1:
            raise NonIntegerPeriodWindow(f"periods must be a positive integer, got {self.periods!r}")
        per_period = self.sample_rate * 2.0 * math.pi / self.base_omega
        spp = round(per_period)
        if spp < 1 or abs(per_period - spp) > 1e-6 * per_period:
            raise NonIntegerPeriodWindow(
                f"sample_rate * T = {per_period!r} is not an integer number of samples per period"
            )
        if arr.shape[0] != int(self.periods) * spp:
            raise NonIntegerPeriodWindow(
                f"{arr.shape[0]} samples do not cover exactly {self.periods} period(s) of {spp} samples"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "periods", int(self.periods))

    @classmethod
    def from_polyphase(cls, p: PolyphaseSignal, samples_per_period: int = 4096, periods: int = 1) -> SampledSignal:
        T = p.period
        t = np.arange(samples_per_period * periods) * (T / samples_per_period)
        return cls(samples_per_period / T, p.evaluate(t), periods, p.base_omega)

    @property
    def n_phases(self) -> int:
        return self.samples.shape[1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def samples_per_period(self) -> int:
        return self.n_samples // self.periods

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.base_omega

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate

    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.sum(self.samples**2, axis=1))))

    def to_csv(self, path: str | Path) -> None:
        write_waveform_csv(path, self.times(), self.samples)

    @classmethod
    def from_csv(cls, path: str | Path, base_omega: float) -> SampledSignal:
        """Read a ``t,phase1,...`` CSV; the window must span whole periods."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0].strip() != "t" or len(header) < 2:
                raise SignalError(f"{path}: expected header 't,phase1,...', got {header!r}")
            rows = [[float(x) for x in row] for row in reader if row]
        data = np.asarray(rows)
        t = data[:, 0]
        dt = float(np.mean(np.diff(t)))
        if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=0.0):
            raise SignalError(f"{path}: time column is not uniformly spaced")
        fs = 1.0 / dt
        T = 2.0 * math.pi / base_omega
        spp = round(fs * T)
        if spp < 1 or data.shape[0] % spp:
            raise NonIntegerPeriodWindow(f"{path}: {data.shape[0]} samples are not a whole number of periods")
        return cls(fs, data[:, 1:], data.shape[0] // spp, base_omega)


def write_waveform_csv(path: str | Path, t: np.ndarray, values: np.ndarray, digits: int = 17) -> None:
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"phase{k + 1}" for k in range(values.shape[1])])
        for tj, row in zip(t, values):
            writer.writerow([f"{tj:.{digits}g}"] + [f"{x:.{digits}g}" for x in row])


# Hilbert transform


def hilbert(s: HarmonicSignal, convention: str = LEAD) -> HarmonicSignal:
    """Exact Hilbert transform of a harmonic series.

    With the default convention ``H[cos] = -sin`` and ``H[sin] = cos``, so
    ``hilbert(hilbert(s)) == -s``.
    """
    _check_convention(convention)
    if s.dc != 0.0:
        raise NonzeroDcComponent(f"signal has DC offset {s.dc!r}; the Hilbert image of DC is undefined here")
    if convention == LEAD:
        terms = tuple(HarmonicTerm(t.order, t.sin_amp, -t.cos_amp) for t in s.terms)
    else:
        terms = tuple(HarmonicTerm(t.order, -t.sin_amp, t.cos_amp) for t in s.terms)
    return HarmonicSignal(s.base_omega, terms)


def _significant_bins(spec: np.ndarray) -> np.ndarray:
    mag = np.abs(spec)
    peak = mag.max() if mag.size else 0.0
    if peak == 0.0:
        return np.zeros(mag.shape[0], dtype=bool)
    return np.any(mag > SPECTRAL_FLOOR * peak, axis=tuple(range(1, mag.ndim)))


def _pow2_scale(x: np.ndarray) -> int:
    """Exponent that brings the peak of ``x`` to [0.5, 1); exact to undo."""
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    return math.frexp(peak)[1] if peak > 0 else 0


def _hilbert_columns(x: np.ndarray, periods: int, convention: str) -> np.ndarray:
    n = x.shape[0]
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak < np.finfo(float).tiny:
        # all-subnormal samples are quantization noise, not a waveform
        return np.zeros_like(x, dtype=float)
    e = _pow2_scale(x)
    x = np.ldexp(x, -e)
    peak = math.ldexp(peak, -e)
    spec = np.fft.fft(x, axis=0)
    dc = spec[0].real / n
    if np.any(np.abs(dc) > SPECTRAL_FLOOR * peak * 10):
        raise NonzeroDcComponent(f"sampled signal has DC level {np.max(np.abs(dc)):.3e}")
    significant = _significant_bins(spec[: n // 2 + 1])
    if significant.any():
        top_bin = int(np.nonzero(significant)[0].max())
        top_order = math.ceil(top_bin / periods)
        if n / periods < 8 * top_order:
            raise SignalError(
                f"{n // periods} samples per period cannot resolve harmonic order {top_order} "
                f"(need at least {8 * top_order})"
            )
    freqs = np.fft.fftfreq(n)
    mult = 1j * np.sign(freqs)  # lead convention: H[cos] = -sin
    if n % 2 == 0:
        mult[n // 2] = 0.0
    if convention == TEXTBOOK:
        mult = -mult
    return np.ldexp(np.fft.ifft(spec * mult[:, None], axis=0).real, e)


def hilbert_sampled(s: SampledSignal, convention: str = LEAD) -> SampledSignal:
    """Discrete Hilbert transform over the whole-period window (FFT based)."""
    _check_convention(convention)
    return SampledSignal(s.sample_rate, _hilbert_columns(s.samples, s.periods, convention), s.periods, s.base_omega)


def _spectral_derivative(x: np.ndarray, sample_rate: float) -> np.ndarray:
    n = x.shape[0]
    e = _pow2_scale(x)
    spec = np.fft.fft(np.ldexp(x, -e), axis=0)
    mult = 2j * math.pi * np.fft.fftfreq(n, d=1.0 / sample_rate)
    if n % 2 == 0:
        mult[n // 2] = 0.0
    return np.ldexp(np.fft.ifft(spec * mult[:, None], axis=0).real, e)


# period means


def period_mean(fn: Callable[[np.ndarray], np.ndarray], period: float, order_hint: int = 0) -> float:
    """Mean of a smooth periodic function over one period.

    Periodic trapezoid rule, which is exact for trigonometric polynomials of
    degree below the grid size; the grid is doubled until the value settles.
    """
    n = max(256, 1 << math.ceil(math.log2(16 * (order_hint + 1))))
    prev = float(np.mean(fn(np.arange(n) * (period / n))))
    while n < (1 << 18):
        n *= 2
        cur = float(np.mean(fn(np.arange(n) * (period / n))))
        if abs(cur - prev) <= 1e-14 * max(abs(cur), 1e-300) or cur == prev:
            return cur
        prev = cur
    return prev


def fit_harmonics(values: np.ndarray, base_omega: float, floor: float = 1e-13) -> list[HarmonicSignal]:
    """Harmonic series (one per column) of samples covering exactly one period."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[0]
    spec = np.fft.rfft(values, axis=0) / n
    scale = max(float(np.max(np.abs(values))), 1e-300)
    out = []
    for col in range(values.shape[1]):
        dc = float(spec[0, col].real)
        if abs(dc) <= floor * scale:
            dc = 0.0
        terms = []
        for k in range(1, (n + 1) // 2):
            a = 2.0 * spec[k, col].real
            b = -2.0 * spec[k, col].imag
            if math.hypot(a, b) > floor * scale:
                terms.append(HarmonicTerm(k, a, b))
        out.append(HarmonicSignal(base_omega, tuple(terms), dc))
    return out


# geometric trajectories


class GeometricTrajectory:
    """Grade-1 multivector valued function of time, dimension ``dim``.

    Backed by exactly one of:

    * ``channels``: one exact :class:`HarmonicSignal` per basis direction;
    * ``func``: a callable ``t -> (len(t), dim)`` array (exact pointwise);
    * ``samples``: an ``(n_samples, dim)`` array on a uniform whole-period grid.
    """

    __slots__ = ("dim", "base_omega", "channels", "func", "samples", "periods", "order_hint", "singular")

    def __init__(
        self,
        dim: int,
        base_omega: float,
        *,
        channels: Sequence[HarmonicSignal] | None = None,
        func: Callable[[np.ndarray], np.ndarray] | None = None,
        samples: np.ndarray | None = None,
        periods: int = 1,
        order_hint: int = 0,
        singular: Iterable[int] = (),
    ):
        if sum(x is not None for x in (channels, func, samples)) != 1:
            raise ValueError("exactly one of channels, func, samples must be given")
        self.dim = int(dim)
        self.base_omega = float(base_omega)
        self.channels = tuple(channels) if channels is not None else None
        self.func = func
        self.samples = None
        self.periods = int(periods)
        self.singular = tuple(sorted(set(int(k) for k in singular)))
        if self.channels is not None:
            if len(self.channels) != self.dim:
                raise DimensionMismatch(f"{len(self.channels)} channels for dimension {self.dim}")
            order_hint = max([order_hint] + [c.max_order for c in self.channels])
        if samples is not None:
            arr = np.asarray(samples, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != self.dim:
                raise DimensionMismatch(f"samples of shape {arr.shape} for dimension {self.dim}")
            self.samples = arr
        self.order_hint = int(order_hint)

    # construction

    @classmethod
    def zeros(cls, dim: int, base_omega: float) -> GeometricTrajectory:
        return cls(dim, base_omega, channels=[HarmonicSignal.zero(base_omega)] * dim)

    @classmethod
    def from_sampled(cls, s: SampledSignal, singular: Iterable[int] = ()) -> GeometricTrajectory:
        return cls(s.n_phases, s.base_omega, samples=s.samples, periods=s.periods, singular=singular)

    # properties

    @property
    def is_sampled(self) -> bool:
        return self.samples is not None

    @property
    def is_exact_harmonic(self) -> bool:
        return self.channels is not None

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.base_omega

    @property
    def n_samples(self) -> int | None:
        return None if self.samples is None else self.samples.shape[0]

    @property
    def sample_rate(self) -> float | None:
        if self.samples is None:
            return None
        return self.samples.shape[0] / (self.periods * self.period)

    def times(self, n: int | None = None) -> np.ndarray:
        """Evaluation grid: the sample times, or ``n`` points over one period."""
        if self.samples is not None:
            if n is not None and n != self.samples.shape[0]:
                raise ValueError("a sampled trajectory is only defined on its own grid")
            return np.arange(self.samples.shape[0]) / self.sample_rate
        n = DEFAULT_GRID if n is None else n
        return np.arange(n) * (self.period / n)

    def values(self, t=None) -> np.ndarray:
        """Coefficients with shape ``(n_points, dim)``."""
        if self.samples is not None:
            if t is not None:
                raise ValueError("a sampled trajectory is only defined on its own grid; pass t=None")
            return self.samples
        t = self.times() if t is None else np.atleast_1d(np.asarray(t, dtype=float))
        if self.channels is not None:
            return np.stack([c.evaluate(t) for c in self.channels], axis=-1)
        return np.asarray(self.func(t), dtype=float).reshape(t.shape[0], self.dim)

    __call__ = values

    def at(self, t=None) -> Multivector:
        """Batched multivector (one coefficient per time point)."""
        return Multivector.vector(self.values(t))

    def channel(self, k: int) -> HarmonicSignal | np.ndarray:
        """Waveform of basis direction ``sigma_k`` (1-based)."""
        if self.channels is not None:
            return self.channels[k - 1]
        if self.samples is not None:
            return self.samples[:, k - 1]
        raise ValueError("function-backed trajectories have no stored channel form")

    def derivative(self) -> GeometricTrajectory:
        if self.channels is not None:
            return GeometricTrajectory(self.dim, self.base_omega, channels=[c.derivative() for c in self.channels])
        if self.samples is not None:
            return GeometricTrajectory(
                self.dim,
                self.base_omega,
                samples=_spectral_derivative(self.samples, self.sample_rate),
                periods=self.periods,
            )
        raise ValueError("function-backed trajectories have no derivative")

    def peak_bound(self) -> float:
        """Upper bound on ``|v(t)|``."""
        if self.channels is not None:
            return math.sqrt(sum(c.peak_bound() ** 2 for c in self.channels))
        if self.samples is not None:
            return float(np.sqrt(np.max(np.sum(self.samples**2, axis=1)))) if self.samples.size else 0.0
        t = self.times(max(256, 32 * (self.order_hint + 1)))
        return float(np.sqrt(np.max(np.sum(self.values(t) ** 2, axis=1))))

    # means

    def mean(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """Period mean of ``fn(values)`` where ``fn`` maps ``(N, dim) -> (N,)``."""
        if self.samples is not None:
            return float(np.mean(fn(self.samples)))
        return period_mean(lambda t: fn(self.values(t)), self.period, self.order_hint)

    def mean_square(self) -> float:
        if self.channels is not None:
            return sum(c.mean_square() for c in self.channels)
        return self.mean(lambda v: np.sum(v * v, axis=1))

    def rms(self) -> float:
        return math.sqrt(max(self.mean_square(), 0.0))

    def channel_rms(self, channels: Iterable[int]) -> float:
        """Collective RMS of a subset of basis directions (1-based)."""
        idx = [k - 1 for k in channels]
        if self.channels is not None:
            return math.sqrt(sum(self.channels[k].mean_square() for k in idx))
        return math.sqrt(max(self.mean(lambda v: np.sum(v[:, idx] ** 2, axis=1)), 0.0))

    # arithmetic

    def _binary(self, other: GeometricTrajectory, sign: float) -> GeometricTrajectory:
        if not isinstance(other, GeometricTrajectory):
            return NotImplemented
        if self.dim != other.dim:
            raise DimensionMismatch(f"dimension {self.dim} vs {other.dim}")
        if not math.isclose(self.base_omega, other.base_omega, rel_tol=1e-12):
            raise SignalError("trajectories have different base frequencies")
        if self.channels is not None and other.channels is not None:
            chans = [a._combine(b, sign) for a, b in zip(self.channels, other.channels)]
            return GeometricTrajectory(self.dim, self.base_omega, channels=chans)
        if self.samples is not None or other.samples is not None:
            ref = self if self.samples is not None else other
            t = ref.times()
            a = self.samples if self.samples is not None else self.values(t)
            if other.samples is not None:
                if other.samples.shape != ref.samples.shape or other.periods != ref.periods:
                    raise DimensionMismatch("sampled trajectories use different grids")
                b = other.samples
            else:
                b = other.values(t)
            return GeometricTrajectory(
                self.dim,
                self.base_omega,
                samples=a + sign * b,
                periods=ref.periods,
                singular=set(self.singular) | set(other.singular),
            )
        a, b = self, other
        return GeometricTrajectory(
            self.dim,
            self.base_omega,
            func=lambda t: a.values(t) + sign * b.values(t),
            order_hint=max(a.order_hint, b.order_hint),
        )

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __mul__(self, k):
        k = float(k)
        if self.channels is not None:
            return GeometricTrajectory(self.dim, self.base_omega, channels=[c * k for c in self.channels])
        if self.samples is not None:
            return GeometricTrajectory(
                self.dim, self.base_omega, samples=self.samples * k, periods=self.periods, singular=self.singular
            )
        src = self
        return GeometricTrajectory(
            self.dim, self.base_omega, func=lambda t: k * src.values(t), order_hint=self.order_hint
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self) -> str:
        kind = "channels" if self.channels is not None else ("samples" if self.samples is not None else "func")
        return f"GeometricTrajectory(dim={self.dim}, base_omega={self.base_omega}, {kind})"


def mean_product(x: GeometricTrajectory, y: GeometricTrajectory, a: int, b: int) -> float:
    """Period mean of ``x_a(t) * y_b(t)`` (0-based channel indices)."""
    if x.channels is not None and y.channels is not None:
        return x.channels[a].mean_product(y.channels[b])
    if x.samples is not None or y.samples is not None:
        t = (x if x.samples is not None else y).times()
        xv = x.samples if x.samples is not None else x.values(t)
        yv = y.samples if y.samples is not None else y.values(t)
        return float(np.mean(xv[:, a] * yv[:, b]))
    hint = max(x.order_hint, y.order_hint)
    return period_mean(lambda t: x.values(t)[:, a] * y.values(t)[:, b], x.period, hint)


def _as_columns(p: PolyphaseSignal | SampledSignal):
    if isinstance(p, PolyphaseSignal):
        return p.phases
    if isinstance(p, SampledSignal):
        return p
    raise TypeError(f"expected PolyphaseSignal or SampledSignal, got {type(p).__name__}")


def to_geometric(p: PolyphaseSignal | SampledSignal, convention: str = LEAD) -> GeometricTrajectory:
    """Averaged-mode embedding ``sum_k u_k sigma_{2k-1} + H[u_k] sigma_{2k}``."""
    _check_convention(convention)
    cols = _as_columns(p)
    if isinstance(cols, SampledSignal):
        h = _hilbert_columns(cols.samples, cols.periods, convention)
        out = np.empty((cols.n_samples, 2 * cols.n_phases))
        out[:, 0::2] = cols.samples
        out[:, 1::2] = h
        return GeometricTrajectory(out.shape[1], cols.base_omega, samples=out, periods=cols.periods)
    chans: list[HarmonicSignal] = []
    for k, phase in enumerate(cols):
        if phase.dc != 0.0:
            raise NonzeroDcComponent(f"phase {k + 1} has DC offset {phase.dc!r}")
        chans += [phase, hilbert(phase, convention)]
    return GeometricTrajectory(len(chans), p.base_omega, channels=chans)


def to_geometric_instantaneous(p: PolyphaseSignal | SampledSignal) -> GeometricTrajectory:
    """Instantaneous-mode embedding ``sum_k u_k sigma_k`` (no Hilbert channels)."""
    n = p.n_phases
    if n < 2:
        raise SinglePhaseInstantaneousUnsupported(
            "single-phase systems cannot be compensated instantaneously; use averaged mode"
        )
    if isinstance(p, SampledSignal):
        return GeometricTrajectory(n, p.base_omega, samples=p.samples, periods=p.periods)
    return GeometricTrajectory(n, p.base_omega, channels=p.phases)


def hilbert_geometric(traj: GeometricTrajectory, convention: str = LEAD) -> GeometricTrajectory:
    """Componentwise Hilbert image of a trajectory (each channel transformed)."""
    if traj.channels is not None:
        return GeometricTrajectory(traj.dim, traj.base_omega, channels=[hilbert(c, convention) for c in traj.channels])
    if traj.samples is not None:
        return GeometricTrajectory(
            traj.dim,
            traj.base_omega,
            samples=_hilbert_columns(traj.samples, traj.periods, convention),
            periods=traj.periods,
        )
    raise ValueError("the Hilbert image needs a harmonic or sampled trajectory")


def to_harmonic(traj: GeometricTrajectory, tol: float = 1e-9) -> GeometricTrajectory | None:
    """Exact channel form of a function-backed trajectory, if it is a trig polynomial.

    Returns ``None`` when a DFT fit does not reproduce the function to ``tol``
    (relative to its peak) on an offset grid.
    """
    if traj.channels is not None:
        return traj
    if traj.samples is not None:
        return None
    n = max(256, 1 << math.ceil(math.log2(16 * (traj.order_hint + 1))))
    t = np.arange(n) * (traj.period / n)
    vals = traj.values(t)
    chans = fit_harmonics(vals, traj.base_omega)
    fitted = GeometricTrajectory(traj.dim, traj.base_omega, channels=chans)
    check = t + 0.37 * traj.period / n
    ref = traj.values(check)
    scale = max(float(np.max(np.abs(ref))), 1e-300)
    if float(np.max(np.abs(fitted.values(check) - ref))) > tol * scale:
        return None
    return fitted


def project_to_time(traj: GeometricTrajectory, n_phases: int | None = None) -> PolyphaseSignal | SampledSignal:
    """Time-domain waveforms: phase k is the ``sigma_{2k-1}`` coefficient."""
    if traj.dim % 2:
        raise DimensionMismatch(f"averaged-mode trajectories have even dimension, got {traj.dim}")
    n = traj.dim // 2
    if n_phases is not None and n_phases != n:
        raise DimensionMismatch(f"trajectory of dimension {traj.dim} carries {n} phases, not {n_phases}")
    exact = to_harmonic(traj) if traj.samples is None else None
    if exact is not None:
        return PolyphaseSignal(exact.channels[0::2])
    if traj.samples is not None:
        return SampledSignal(traj.sample_rate, traj.samples[:, 0::2], traj.periods, traj.base_omega)
    n_pts = max(1024, 32 * (traj.order_hint + 1))
    t = traj.times(n_pts)
    return SampledSignal(n_pts / traj.period, traj.values(t)[:, 0::2], 1, traj.base_omega)


def rms(s) -> float:
    """RMS over one period (collective over phases/channels)."""
    if isinstance(s, (HarmonicSignal, PolyphaseSignal, SampledSignal, GeometricTrajectory)):
        return s.rms()
    raise TypeError(f"cannot take the RMS of {type(s).__name__}")
