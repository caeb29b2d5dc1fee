import math

import numpy as np
import pytest

from gapower.engine import (
    AVERAGED,
    INSTANTANEOUS,
    KEEP_IF,
    KEEP_IP,
    compensate,
    decompose,
    geometric_power,
    power_factor,
    power_factor_m_norm,
    quadrature_current_direct,
    sequence_split,
)
from gapower.errors import DimensionMismatch, MultiHarmonicUnsupported, NearZeroVoltage, NotThreePhase
from gapower.signals import (
    TEXTBOOK,
    HarmonicSignal,
    HarmonicTerm,
    PolyphaseSignal,
    SampledSignal,
    project_to_time,
    to_geometric,
    to_geometric_instantaneous,
)

from .conftest import G, U_RMS, three_phase

T = np.linspace(0, 2 * np.pi, 401)[:-1]


def _fit_2t(y):
    """Least-squares (c0, a_sin2t, b_cos2t)."""
    A = np.stack([np.ones_like(T), np.sin(2 * T), np.cos(2 * T)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    assert np.allclose(A @ coef, y, atol=1e-8 * np.max(np.abs(y)))
    return coef


def test_illustration2_m_p_and_m_q(ill2_geo):
    u, i = ill2_geo
    power = geometric_power(u, i)
    c = _fit_2t(power.m_p(T))
    assert c == pytest.approx([24470, 17882, 24470], rel=1e-3)
    q = np.asarray(power.m_q(T).coefficient(1, 2))
    assert _fit_2t(q) == pytest.approx([1882, 7530, 1882], rel=1e-3)


def test_illustration2_powers(ill2_geo):
    power = geometric_power(*ill2_geo)
    assert power.active_power == pytest.approx(12235.294117647, rel=1e-9)
    assert power.budeanu_q == pytest.approx(941.176470588, rel=1e-9)


def test_illustration2_closed_forms(ill2_geo):
    d = decompose(*ill2_geo)
    i_F = project_to_time(d.i_F).phases[0]
    i_B = project_to_time(d.i_B).phases[0]
    for k in (1, 3):
        assert i_F.term(k).cos_amp == pytest.approx(86.52, abs=0.01)
        assert i_F.term(k).sin_amp == pytest.approx(0.0, abs=1e-9)
        assert i_B.term(k).sin_amp == pytest.approx(6.65, abs=0.01)
        assert i_B.term(k).cos_amp == pytest.approx(0.0, abs=1e-9)


def test_illustration2_rms_column(ill2_geo):
    d = decompose(*ill2_geo)
    expected = dict(i_p=107.15, i_q=27.44, i_F=86.51, i_f=63.22, i_B=6.65, i_b=26.62, i=110.61)
    for name, value in expected.items():
        assert d.phase_rms[name] == pytest.approx(value, rel=5e-3), name
        assert d.rms[name] == pytest.approx(math.sqrt(2) * d.phase_rms[name], rel=1e-9), name


def test_illustration2_voltage_zero_is_flagged_not_fatal(ill2):
    s_u = SampledSignal.from_polyphase(ill2[0], 4096)
    s_i = SampledSignal.from_polyphase(ill2[1], 4096)
    d = decompose(to_geometric(s_u), to_geometric(s_i))
    assert d.singular_samples == (1024, 3072)
    assert np.all(np.isfinite(d.i_p.values()))


def test_quadrature_current_matches_difference(ill2_geo, ill1_geo):
    for u, i in (ill2_geo, ill1_geo):
        d = decompose(u, i)
        t = np.array([0.1, 0.7, 2.2, 3.0, 5.5])
        direct = quadrature_current_direct(u, i, t)
        assert np.allclose(direct, d.i_q.values(t), atol=1e-9 * np.max(np.abs(direct)))


def test_orthogonality_pointwise_and_on_average(ill2_geo):
    d = decompose(*ill2_geo)
    dot = np.sum(d.i_p.values(T) * d.i_q.values(T), axis=1)
    assert np.max(np.abs(dot)) < 1e-9 * d.rms["i"] ** 2
    for a, b in (("i_F", "i_f"), ("i_B", "i_b")):
        m = d.component(a).mean(lambda t, a=a, b=b: np.sum(d.component(a).values(t) * d.component(b).values(t), axis=1))
        assert abs(m) < 1e-9 * d.rms["i"] ** 2


def test_illustration1_decomposition(ill1_geo):
    u, i = ill1_geo
    d = decompose(u, i)
    assert np.allclose(d.i_p.values(T), G / 3 * u.values(T), atol=1e-9)
    assert np.allclose(d.i_F.values(T), d.i_p.values(T), atol=1e-9)
    assert d.rms["i_B"] == pytest.approx(0.0, abs=1e-9)
    assert d.power.budeanu_q == pytest.approx(0.0, abs=1e-6)
    # cross-phase bivectors do carry a mean
    assert abs(d.power.mean_m_q.coefficient(1, 3)) > 1.0


def test_power_factor_examples(ill1_geo, ill2_geo):
    u, i = ill1_geo
    d = decompose(u, i)
    assert power_factor(u, i) == pytest.approx(1 / math.sqrt(3), abs=1e-9)
    assert power_factor(u, compensate(d, KEEP_IP)) == pytest.approx(1.0, abs=1e-9)
    u2, i2 = ill2_geo
    d2 = decompose(u2, i2)
    assert power_factor(u2, compensate(d2, KEEP_IF)) == pytest.approx(1.0, abs=1e-9)
    assert 0 < power_factor(u2, i2) < 1
    assert 0 < power_factor_m_norm(u2, i2) <= 1 + 1e-12


def test_compensation_is_idempotent(ill1_geo):
    u, _ = ill1_geo
    d = decompose(*ill1_geo)
    d2 = decompose(u, compensate(d, KEEP_IP))
    assert np.allclose(d2.i_p.values(T), d.i_p.values(T), atol=1e-9)
    assert d2.rms["i_q"] == pytest.approx(0.0, abs=1e-7)
    with pytest.raises(ValueError):
        compensate(d, "nonsense")


def test_hilbert_convention_leaves_table_unchanged(ill2):
    a = decompose(to_geometric(ill2[0]), to_geometric(ill2[1]))
    b = decompose(to_geometric(ill2[0], TEXTBOOK), to_geometric(ill2[1], TEXTBOOK), convention=TEXTBOOK)
    for name in a.phase_rms:
        assert a.phase_rms[name] == pytest.approx(b.phase_rms[name], rel=1e-9)
    assert np.allclose(a.i_B.values(T)[:, 0], b.i_B.values(T)[:, 0], atol=1e-9)


def test_sequence_split_illustration1(ill1_geo):
    # (I, 0, 0) has I/3 in every sequence; the positive one is i_p = G/3 u
    u, i = ill1_geo
    split = sequence_split(i)
    third = math.sqrt(2) * G * U_RMS / 3
    for traj in (split.i_zero, split.i_negative, split.i_positive):
        peak = np.max(np.abs(traj.values(T)[:, 0]))
        assert peak == pytest.approx(third, rel=1e-9)
    assert np.allclose(split.i_positive.values(T), G / 3 * u.values(T), atol=1e-9)
    assert abs(split.phasors["zero"]) == pytest.approx(G * U_RMS / 3, rel=1e-12)
    total = split.i_zero + split.i_negative + split.i_positive
    assert np.allclose(total.values(T), i.values(T), atol=1e-9)


def test_sequence_split_rejections(ill2_geo):
    with pytest.raises(NotThreePhase):
        sequence_split(ill2_geo[1])
    two = PolyphaseSignal(
        tuple(HarmonicSignal(1.0, (HarmonicTerm(1, 1.0), HarmonicTerm(3, 1.0))) for _ in range(3))
    )
    with pytest.raises(MultiHarmonicUnsupported):
        sequence_split(to_geometric(two))


def test_balanced_resistive_load_is_all_active():
    u = three_phase(100.0, order=1, w=2 * math.pi * 50)
    d = decompose(to_geometric(u), to_geometric(u * 0.5))
    assert d.rms["i_q"] == pytest.approx(0.0, abs=1e-9)
    assert d.rms["i_f"] == pytest.approx(0.0, abs=1e-9)
    assert power_factor(to_geometric(u), to_geometric(u * 0.5)) == pytest.approx(1.0, abs=1e-12)


def test_pure_reactive_single_phase_goes_to_budeanu():
    w = 1.0
    u = PolyphaseSignal((HarmonicSignal(w, (HarmonicTerm.from_phasor(1, 10.0),)),))
    i = PolyphaseSignal((HarmonicSignal(w, (HarmonicTerm.from_phasor(1, 2.0, -90.0),)),))
    d = decompose(to_geometric(u), to_geometric(i))
    assert d.power.active_power == pytest.approx(0.0, abs=1e-9)
    assert d.power.budeanu_q == pytest.approx(20.0, rel=1e-12)
    assert d.rms["i_b"] == pytest.approx(0.0, abs=1e-9)
    assert d.rms["i_B"] == pytest.approx(d.rms["i"], rel=1e-12)


def test_instantaneous_mode(ill1):
    u, i = (to_geometric_instantaneous(x) for x in ill1)
    d = decompose(u, i, INSTANTANEOUS)
    assert d.power.budeanu_q is None
    assert d.rms["i_B"] == 0.0
    assert d.power.active_power == pytest.approx(G * U_RMS**2, rel=1e-9)
    with pytest.raises(DimensionMismatch):
        decompose(u, to_geometric(ill1[1]), INSTANTANEOUS)


def test_zero_voltage_raises():
    z = PolyphaseSignal((HarmonicSignal(1.0),))
    i = PolyphaseSignal((HarmonicSignal(1.0, (HarmonicTerm(1, 1.0),)),))
    with pytest.raises(NearZeroVoltage):
        decompose(to_geometric(z), to_geometric(i))


def test_mode_argument_validated(ill2_geo):
    with pytest.raises(ValueError):
        decompose(*ill2_geo, mode="weird")
    assert decompose(*ill2_geo, mode=AVERAGED).mode == AVERAGED
