"""Scenario analysis and the CSV / JSON-lines / waveform emitters."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cv import CvDecomposition, SpectrumEntry, cv_decompose, cv_spectrum_report
from .engine import (
    AVERAGED,
    COMPONENTS,
    INSTANTANEOUS,
    CurrentDecomposition,
    compensate,
    decompose,
    power_factor,
    power_factor_m_norm,
)
from .errors import NotThreePhase, ZeroSignal
from .oracle import oracle_powers
from .scenario import Scenario
from .signals import (
    GeometricTrajectory,
    HarmonicSignal,
    PolyphaseSignal,
    SampledSignal,
    fit_harmonics,
    to_geometric,
    to_geometric_instantaneous,
    to_harmonic,
    write_waveform_csv,
)

THEORIES = ("gapot", "cv", "both")
FORMATS = ("csv", "json-lines")


@dataclass
class GapotResult:
    decomposition: CurrentDecomposition
    strategy: str
    compensated: GeometricTrajectory
    pf_before: float | None
    pf_before_m_norm: float | None
    pf_after: float | None


@dataclass
class CvResult:
    decomposition: CvDecomposition
    pf_before: float | None
    pf_after: float | None
    spectrum: list[SpectrumEntry]
    equivalence_delta: float


@dataclass
class Report:
    scenario: Scenario
    theory: str
    sampled: int | None
    current: PolyphaseSignal
    gapot: GapotResult | None = None
    cv: CvResult | None = None
    oracle: dict[str, float] | None = None
    notes: list[str] = field(default_factory=list)


def _rel(a: float, b: float, scale: float) -> float:
    return abs(a - b) / max(abs(b), scale * 1e-15, 1e-300)


def _pf_or_none(fn, *args) -> float | None:
    """Power factor, or None when the current is identically zero."""
    try:
        return fn(*args)
    except ZeroSignal:
        return None


def _cv_pf(num: float, u_rms: float, i_rms: float) -> float | None:
    return None if i_rms == 0.0 else num / (u_rms * i_rms)


def cv_equivalence_delta(u: PolyphaseSignal, i: PolyphaseSignal, n: int = 1024) -> float:
    """Max pointwise gap between instantaneous GAPoT and cross-vector currents, relative to peak |i|."""
    cv = cv_decompose(u, i)
    ga = decompose(to_geometric_instantaneous(u), to_geometric_instantaneous(i), mode=INSTANTANEOUS)
    t = np.arange(n) * (u.period / n)
    scale = max(float(np.max(np.abs(i.evaluate(t)))), 1e-300)
    d_p = np.max(np.abs(ga.i_p.values(t) - cv.i_p_at(t)))
    d_q = np.max(np.abs(ga.i_q.values(t) - cv.i_q_at(t)))
    return float(max(d_p, d_q) / scale)


def analyze(scenario: Scenario, theory: str = "gapot", sampled: int | None = None) -> Report:
    """Run the requested theories on a scenario.

    ``sampled`` switches the GAPoT pipeline to uniform samples (that many per
    period) instead of the exact harmonic path.
    """
    if theory not in THEORIES:
        raise ValueError(f"theory must be one of {THEORIES}")
    current = scenario.load_current()
    report = Report(scenario, theory, sampled, current)
    u_sig, i_sig = scenario.supply, current
    opts = scenario.options

    if theory in ("gapot", "both"):
        if sampled:
            u_in = SampledSignal.from_polyphase(u_sig, sampled)
            i_in = SampledSignal.from_polyphase(i_sig, sampled)
        else:
            u_in, i_in = u_sig, i_sig
        if scenario.mode == AVERAGED:
            u = to_geometric(u_in, opts.hilbert_convention)
            i = to_geometric(i_in, opts.hilbert_convention)
        else:
            u = to_geometric_instantaneous(u_in)
            i = to_geometric_instantaneous(i_in)
        d = decompose(u, i, scenario.mode, opts.zero_eps, opts.hilbert_convention)
        comp = compensate(d, opts.compensation)
        report.gapot = GapotResult(
            decomposition=d,
            strategy=opts.compensation,
            compensated=comp,
            pf_before=_pf_or_none(power_factor, u, i, scenario.mode),
            pf_before_m_norm=_pf_or_none(power_factor_m_norm, u, i, scenario.mode),
            pf_after=_pf_or_none(power_factor, u, comp, scenario.mode),
        )
        if report.gapot.pf_before is None:
            report.notes.append("gapot: power factor undefined for a zero current")
        if d.singular_samples:
            report.notes.append(f"{len(d.singular_samples)} voltage-zero sample(s) filled by continuation")

    if theory in ("cv", "both"):
        if scenario.n_phases != 3:
            if theory == "cv":
                raise NotThreePhase(
                    f"scenario {scenario.name!r} has {scenario.n_phases} phase(s); cross-vector theory needs 3"
                )
            report.notes.append("cv: not applicable (cross-vector theory needs exactly 3 phases)")
        else:
            cvd = cv_decompose(u_sig, i_sig)
            P = cvd.state.active_power
            report.cv = CvResult(
                decomposition=cvd,
                pf_before=_cv_pf(P, u_sig.rms(), i_sig.rms()),
                pf_after=_cv_pf(P, u_sig.rms(), cvd.i_p.rms()),
                spectrum=cv_spectrum_report(cvd.i_p),
                equivalence_delta=cv_equivalence_delta(u_sig, i_sig),
            )
            if not cvd.exact:
                report.notes.append("cv: compensated current is not a finite harmonic series; spectrum is a truncated fit")

    if scenario.circuit is not None:
        P_o, Q_o = oracle_powers(u_sig, i_sig)
        oracle = {"oracle_P_W": P_o, "oracle_Q_VAr": Q_o}
        if report.gapot is not None:
            power = report.gapot.decomposition.power
            scale = math.hypot(P_o, Q_o)
            oracle["oracle_delta_P_rel"] = _rel(power.active_power, P_o, scale)
            if power.budeanu_q is not None:
                oracle["oracle_delta_Q_rel"] = _rel(abs(power.budeanu_q), abs(Q_o), scale)
        report.oracle = oracle
    return report


# formatting


def _fmt(x: float | None) -> str:
    return "undefined" if x is None else f"{x:.17g}"


def _fmt4(x: float | None) -> str:
    return "undefined" if x is None else f"{x:.4f}"


def _arg(order: int, omega: float) -> str:
    w = "" if omega == 1.0 else "wt" if order == 1 else f"{order}wt"
    if w:
        return w
    return "t" if order == 1 else f"{order}t"


def closed_form(sig: HarmonicSignal, digits: int = 2) -> str:
    """Human-readable series, e.g. ``86.52cos t - 63.22sin t``."""
    parts = []
    floor = 0.5 * 10.0**-digits
    for term in sig.terms:
        for amp, fn in ((term.cos_amp, "cos"), (term.sin_amp, "sin")):
            if abs(amp) < floor:
                continue
            sign = "-" if amp < 0 else "+"
            parts.append((sign, f"{abs(amp):.{digits}f}{fn} {_arg(term.order, sig.base_omega)}"))
    if not parts:
        return "0"
    text = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        text += f" {sign} {body}"
    return text


def _channel_forms(traj: GeometricTrajectory) -> list[HarmonicSignal] | None:
    if traj.samples is not None:
        if traj.periods != 1:
            return None
        return fit_harmonics(traj.samples, traj.base_omega, floor=1e-9)
    exact = to_harmonic(traj)
    return None if exact is None else list(exact.channels)


def gapot_records(report: Report) -> dict[str, list[list]]:
    g = report.gapot
    d = g.decomposition
    power = d.power
    summary = [
        ["gapot", "mode", d.mode],
        ["gapot", "path", "sampled" if report.sampled else "harmonic"],
        ["gapot", "active_power_W", _fmt(power.active_power)],
        ["gapot", "mean_m_p", _fmt(power.mean_m_p)],
    ]
    if power.budeanu_q is not None:
        summary.append(["gapot", "budeanu_Q_VAr", _fmt(power.budeanu_q)])
    summary += [
        ["gapot", "voltage_rms_geometric", _fmt(d.voltage_rms)],
        ["gapot", "pf_before", _fmt(g.pf_before)],
        ["gapot", "pf_before_m_norm", _fmt(g.pf_before_m_norm)],
        ["gapot", "compensation", g.strategy],
        ["gapot", "pf_after", _fmt(g.pf_after)],
        ["gapot", "orientation_factor", _fmt(d.orientation)],
        ["gapot", "singular_samples", str(len(d.singular_samples))],
    ]
    for name in COMPONENTS:
        summary.append(["gapot", f"rms_phase_{name}", _fmt(d.phase_rms[name])])
    for name in COMPONENTS:
        summary.append(["gapot", f"rms_geometric_{name}", _fmt(d.rms[name])])
    for key, value in (report.oracle or {}).items():
        summary.append(["oracle", key, _fmt(value)])

    dim = d.u.dim
    table = [["theory", "component"] + [f"sigma{k}" for k in range(1, dim + 1)] + ["rms"]]
    coeffs = [["theory", "component", "channel", "order", "cos_amp", "sin_amp"]]
    for name in COMPONENTS:
        traj = d.component(name)
        forms = _channel_forms(traj)
        cells = [closed_form(c) for c in forms] if forms else ["non-polynomial"] * dim
        table.append(["gapot", name] + cells + [f"{d.phase_rms[name]:.2f}"])
        for ch, sig in enumerate(forms or [], start=1):
            for term in sig.terms:
                coeffs.append(["gapot", name, str(ch), str(term.order), _fmt(term.cos_amp), _fmt(term.sin_amp)])
    return {"summary": summary, "gapot_table": table, "gapot_components": coeffs}


def cv_records(report: Report) -> dict[str, list[list]]:
    c = report.cv
    cvd = c.decomposition
    summary = [
        ["cv", "active_power_W", _fmt(cvd.state.active_power)],
        ["cv", "pf_before", _fmt(c.pf_before)],
        ["cv", "pf_after", _fmt(c.pf_after)],
        ["cv", "exact_harmonic_series", str(cvd.exact).lower()],
        ["cv", "gapot_instantaneous_equivalence_delta", _fmt(c.equivalence_delta)],
    ]
    n = cvd.i_p.n_phases
    table = [["theory", "component"] + [f"phase{k}" for k in range(1, n + 1)] + ["rms"]]
    for name, sig in (("i_p", cvd.i_p), ("i_q", cvd.i_q), ("i", cvd.state.i)):
        table.append(["cv", name] + [closed_form(p) for p in sig.phases] + [f"{sig.rms():.2f}"])
    spectrum = [["theory", "component", "order", "sequence", "magnitude"]]
    for e in c.spectrum:
        spectrum.append(["cv", "i_p", str(e.order), e.sequence, _fmt(e.magnitude)])
    return {"summary": summary, "cv_table": table, "cv_spectrum": spectrum}


def report_tables(report: Report) -> dict[str, list[list]]:
    tables: dict[str, list[list]] = {"summary": [["theory", "key", "value"]]}
    for present, builder in ((report.gapot, gapot_records), (report.cv, cv_records)):
        if present is not None:
            records = builder(report)
            tables["summary"] += records.pop("summary")
            tables.update(records)
    if report.oracle is not None and report.gapot is None:
        for key, value in report.oracle.items():
            tables["summary"].append(["oracle", key, _fmt(value)])
    for note in report.notes:
        tables["summary"].append(["note", "note", note])
    return tables


def _csv_text(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: Report, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
    """Write the report under ``out_dir/<scenario name>/``; returns the files written."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    target = Path(out_dir) / report.scenario.name
    tables = report_tables(report)
    written = []
    if fmt == "csv":
        for key, rows in tables.items():
            path = target / f"{key}.csv"
            atomic_write(path, _csv_text(rows))
            written.append(path)
    else:
        lines = []
        for key, rows in tables.items():
            header = rows[0]
            for row in rows[1:]:
                record = {"record": key}
                for h, v in zip(header, row):
                    record[h] = _json_value(v)
                lines.append(json.dumps(record, sort_keys=False))
        path = target / "report.jsonl"
        atomic_write(path, "\n".join(lines) + "\n")
        written.append(path)
    return written


def _json_value(v: str):
    try:
        x = float(v)
    except ValueError:
        return v
    return x if math.isfinite(x) else v


def render_text(report: Report) -> str:
    """Human-readable view, 2 decimals."""
    lines = [f"scenario {report.scenario.name} (mode={report.scenario.mode}, theory={report.theory})"]
    if report.gapot is not None:
        g = report.gapot
        d = g.decomposition
        lines.append(
            f"  GAPoT  P = {d.power.active_power:.2f} W"
            + (f"   Q = {d.power.budeanu_q:.2f} VAr" if d.power.budeanu_q is not None else "")
            + f"   pf = {_fmt4(g.pf_before)} -> {_fmt4(g.pf_after)} ({g.strategy})"
        )
        for row in gapot_records(report)["gapot_table"][1:]:
            lines.append(f"    {row[1]:<4} " + " | ".join(row[2:-1]) + f" | rms {row[-1]}")
    if report.cv is not None:
        c = report.cv
        lines.append(f"  CV     pf = {_fmt4(c.pf_before)} -> {_fmt4(c.pf_after)}   equivalence delta {c.equivalence_delta:.2e}")
        shown = [e for e in c.spectrum if e.magnitude >= 0.005]
        for e in shown:
            lines.append(f"    i_p harmonic {e.order} {e.sequence:<8} {e.magnitude:.2f} A")
        if len(shown) < len(c.spectrum):
            lines.append(f"    ({len(c.spectrum) - len(shown)} entries below 0.005 A omitted; see cv_spectrum)")
    if report.oracle:
        lines.append("  oracle " + "   ".join(f"{k} = {v:.6g}" for k, v in report.oracle.items()))
    for note in report.notes:
        lines.append(f"  note: {note}")
    return "\n".join(lines)


def emit_waveforms(report: Report, out_dir: str | Path, samples_per_period: int = 1024) -> list[Path]:
    """One CSV per current component (``t,phase1..phasen``) over one period."""
    target = Path(out_dir) / report.scenario.name / "waveforms"
    target.mkdir(parents=True, exist_ok=True)
    written = []
    if report.gapot is not None:
        d = report.gapot.decomposition
        averaged = d.mode == AVERAGED
        trajs = dict(d.components())
        trajs["u"] = d.u
        trajs["compensated"] = report.gapot.compensated
        for name, traj in trajs.items():
            t = traj.times(None if traj.is_sampled else samples_per_period)
            vals = traj.values(None if traj.is_sampled else t)
            if averaged:
                vals = vals[:, 0::2]
            written.append(_write_wave(target / f"gapot_{name}.csv", t, vals))
    if report.cv is not None:
        cvd = report.cv.decomposition
        T = report.scenario.supply.period
        t = np.arange(samples_per_period) * (T / samples_per_period)
        for name, vals in (("i_p", cvd.i_p_at(t)), ("i_q", cvd.i_q_at(t)), ("i", cvd.state.i.evaluate(t))):
            written.append(_write_wave(target / f"cv_{name}.csv", t, vals))
    return written


def _write_wave(path: Path, t, vals) -> Path:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    try:
        write_waveform_csv(tmp, t, vals)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
