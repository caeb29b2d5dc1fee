import math

import numpy as np
import pytest
from hypothesis import settings

from gapower.signals import HarmonicSignal, HarmonicTerm, PolyphaseSignal, to_geometric

settings.register_profile("default", deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []

U_RMS = 230.0
G = 1.0


def three_phase(rms: float, order: int = 1, w: float = 1.0, shifts=(0.0, -120.0, 120.0)) -> PolyphaseSignal:
    return PolyphaseSignal(tuple(HarmonicSignal(w, (HarmonicTerm.from_phasor(order, rms, s),)) for s in shifts))


@pytest.fixture
def ill1():
    """Illustration 1: symmetric supply, conductance G on phase a only."""
    u = three_phase(U_RMS)
    i = PolyphaseSignal(
        (
            HarmonicSignal(1.0, (HarmonicTerm(1, math.sqrt(2) * G * U_RMS, 0.0),)),
            HarmonicSignal(1.0),
            HarmonicSignal(1.0),
        )
    )
    return u, i


@pytest.fixture
def ill2():
    """Illustration 2 supply and the current written from its solved phasors.

    Current phasors are 80+40j and 100/(1+7j/6) A RMS (fundamental, 3rd).
    """
    w = 1.0
    u = PolyphaseSignal((HarmonicSignal(w, (HarmonicTerm.from_phasor(1, 100.0), HarmonicTerm.from_phasor(3, 100.0))),))
    i3 = 100.0 / (1 + 7j / 6)
    i = PolyphaseSignal((HarmonicSignal(w, (HarmonicTerm.from_complex(1, 80 + 40j), HarmonicTerm.from_complex(3, i3))),))
    return u, i


@pytest.fixture
def ill2_geo(ill2):
    u, i = ill2
    return to_geometric(u), to_geometric(i)


@pytest.fixture
def ill1_geo(ill1):
    u, i = ill1
    return to_geometric(u), to_geometric(i)


@pytest.fixture
def rng():
    return np.random.default_rng(20201015)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
