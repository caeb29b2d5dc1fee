"""Scenario files: YAML schema, line-anchored validation, round-trip serialization.

Schema (version 1)::

    schema_version: 1
    name: illustration2
    mode: averaged            # or instantaneous
    base_omega: 1.0           # rad/s
    supply:
      unit: V
      phases:
        - name: a
          terms:
            - {order: 1, rms: 100.0, phase_deg: 0.0}    # sqrt(2)*rms*cos(k w t + phase)
            - {order: 3, cos: 141.42, sin: 0.0}         # peak cos/sin amplitudes
    load:                     # exactly one of circuit / current
      circuit:
        topology: series_rlc  # or star
        neutral: true         # star only
        branches:
          - {R: 1.0, L: 0.5, C: 1.0}   # ohm, henry, farad; null = open phase
      # current: {unit: A, phases: [...]}  same layout as supply
    options:
      hilbert_convention: lead
      compensation: keep_iF
      zero_eps: null
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .engine import AVERAGED, INSTANTANEOUS, KEEP_IP, MODES, STRATEGIES
from .errors import ScenarioError
from .oracle import SERIES_RLC, TOPOLOGIES, Branch, LinearBranchCircuit
from .signals import CONVENTIONS, LEAD, HarmonicSignal, HarmonicTerm, PolyphaseSignal

SCHEMA_VERSION = 1
BUILTIN_PACKAGE = "gapower.scenarios"


@dataclass(frozen=True)
class Issue:
    source: str
    line: int | None
    path: str
    message: str

    def __str__(self) -> str:
        where = f"{self.source}:{self.line}" if self.line else self.source
        return f"{where}: {self.path}: {self.message}" if self.path else f"{where}: {self.message}"


@dataclass(frozen=True)
class ScenarioOptions:
    hilbert_convention: str = LEAD
    compensation: str = KEEP_IP
    zero_eps: float | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    mode: str
    supply: PolyphaseSignal
    current: PolyphaseSignal | None = None
    circuit: LinearBranchCircuit | None = None
    options: ScenarioOptions = field(default_factory=ScenarioOptions)
    description: str = ""
    phase_names: tuple[str, ...] = ()

    @property
    def n_phases(self) -> int:
        return self.supply.n_phases

    @property
    def base_omega(self) -> float:
        return self.supply.base_omega

    def load_current(self) -> PolyphaseSignal:
        if self.current is not None:
            return self.current
        from .oracle import solve_steady_state

        return solve_steady_state(self.circuit, self.supply)

    def to_dict(self) -> dict[str, Any]:
        def phases(p: PolyphaseSignal):
            out = []
            for k, ph in enumerate(p.phases):
                name = self.phase_names[k] if k < len(self.phase_names) else f"phase{k + 1}"
                out.append(
                    {
                        "name": name,
                        "terms": [{"order": t.order, "cos": t.cos_amp, "sin": t.sin_amp} for t in ph.terms],
                    }
                )
            return out

        doc: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "mode": self.mode,
            "base_omega": self.base_omega,
            "supply": {"unit": "V", "phases": phases(self.supply)},
        }
        if self.current is not None:
            doc["load"] = {"current": {"unit": "A", "phases": phases(self.current)}}
        else:
            c = self.circuit
            doc["load"] = {
                "circuit": {
                    "topology": c.topology,
                    "neutral": c.neutral,
                    "branches": [
                        None if b is None else {"R": b.R, "L": b.L, **({"C": b.C} if b.C is not None else {})}
                        for b in c.branches
                    ],
                }
            }
        doc["options"] = {
            "hilbert_convention": self.options.hilbert_convention,
            "compensation": self.options.compensation,
            "zero_eps": self.options.zero_eps,
        }
        return doc

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


# YAML loading with line numbers


class _LineDict(dict):
    line: int | None = None
    key_lines: dict


class _LineList(list):
    line: int | None = None
    item_lines: list


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    loader.flatten_mapping(node)
    out = _LineDict()
    out.line = node.start_mark.line + 1
    out.key_lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        out[key] = loader.construct_object(value_node, deep=True)
        out.key_lines[key] = key_node.start_mark.line + 1
    return out


def _construct_sequence(loader, node):
    out = _LineList(loader.construct_object(child, deep=True) for child in node.value)
    out.line = node.start_mark.line + 1
    out.item_lines = [child.start_mark.line + 1 for child in node.value]
    return out


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)
_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_SEQUENCE_TAG, _construct_sequence)


class _Checker:
    def __init__(self, source: str):
        self.source = source
        self.issues: list[Issue] = []

    def fail(self, line, path, message) -> None:
        self.issues.append(Issue(self.source, line, path, message))

    @staticmethod
    def line_of(container, key=None):
        if key is not None and isinstance(container, _LineDict):
            return container.key_lines.get(key, container.line)
        if isinstance(container, _LineList) and isinstance(key, int) and key < len(container.item_lines):
            return container.item_lines[key]
        return getattr(container, "line", None)

    def mapping(self, value, path, line) -> dict | None:
        if not isinstance(value, dict):
            self.fail(line, path, f"expected a mapping, got {type(value).__name__}")
            return None
        return value

    def known_keys(self, doc: dict, allowed, path) -> None:
        for key in doc:
            if key not in allowed:
                self.fail(self.line_of(doc, key), path, f"unknown key {key!r}")

    def number(self, doc, key, path, *, default=None, required=False, positive=False, nonneg=False):
        if key not in doc or doc[key] is None:
            if required:
                self.fail(self.line_of(doc), path, f"missing required key {key!r}")
            return default
        value = doc[key]
        line = self.line_of(doc, key)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(line, f"{path}.{key}", f"expected a finite number, got {value!r}")
            return default
        if positive and not value > 0:
            self.fail(line, f"{path}.{key}", f"must be positive, got {value!r}")
            return default
        if nonneg and value < 0:
            self.fail(line, f"{path}.{key}", f"must be non-negative, got {value!r}")
            return default
        return float(value)


def _parse_phases(chk: _Checker, doc, path, base_omega, label) -> tuple[PolyphaseSignal | None, tuple[str, ...]]:
    doc = chk.mapping(doc, path, chk.line_of(doc))
    if doc is None:
        return None, ()
    chk.known_keys(doc, {"unit", "phases"}, path)
    phases = doc.get("phases")
    if not isinstance(phases, list) or not phases:
        chk.fail(chk.line_of(doc, "phases"), f"{path}.phases", f"{label} needs a non-empty list of phases")
        return None, ()
    signals = []
    names = []
    ok = True
    for k, ph in enumerate(phases):
        ppath = f"{path}.phases[{k}]"
        ph = chk.mapping(ph, ppath, chk.line_of(phases, k))
        if ph is None:
            ok = False
            continue
        chk.known_keys(ph, {"name", "terms", "dc"}, ppath)
        name = str(ph.get("name", f"phase{k + 1}"))
        names.append(name)
        dc = chk.number(ph, "dc", ppath, default=0.0)
        terms = ph.get("terms", [])
        if not isinstance(terms, list):
            chk.fail(chk.line_of(ph, "terms"), f"{ppath}.terms", "expected a list of harmonic terms")
            ok = False
            continue
        seen: dict[int, int] = {}
        parsed = []
        for j, term in enumerate(terms):
            tpath = f"{ppath}.terms[{j}]"
            tline = chk.line_of(terms, j)
            term = chk.mapping(term, tpath, tline)
            if term is None:
                ok = False
                continue
            chk.known_keys(term, {"order", "cos", "sin", "rms", "phase_deg"}, tpath)
            order = term.get("order")
            if isinstance(order, bool) or not isinstance(order, int) or order < 1:
                chk.fail(chk.line_of(term, "order"), f"{tpath}.order", f"order must be a positive integer, got {order!r}")
                ok = False
                continue
            if order in seen:
                chk.fail(
                    tline,
                    tpath,
                    f"duplicate harmonic order {order} in phase {name!r} (first given in terms[{seen[order]}])",
                )
                ok = False
                continue
            seen[order] = j
            peak_form = "cos" in term or "sin" in term
            phasor_form = "rms" in term or "phase_deg" in term
            if peak_form and phasor_form:
                chk.fail(tline, tpath, "give either cos/sin peaks or rms/phase_deg, not both")
                ok = False
                continue
            if phasor_form:
                rms = chk.number(term, "rms", tpath, required=True, nonneg=True)
                phase = chk.number(term, "phase_deg", tpath, default=0.0)
                if rms is None:
                    ok = False
                    continue
                parsed.append(HarmonicTerm.from_phasor(order, rms, phase))
            else:
                a = chk.number(term, "cos", tpath, default=0.0)
                b = chk.number(term, "sin", tpath, default=0.0)
                parsed.append(HarmonicTerm(order, a, b))
        if dc:
            chk.fail(chk.line_of(ph, "dc"), f"{ppath}.dc", "DC offsets are not supported (no Hilbert image)")
            ok = False
        if ok and base_omega is not None:
            signals.append(HarmonicSignal(base_omega, tuple(parsed)))
    if not ok or base_omega is None or len(signals) != len(phases):
        return None, tuple(names)
    return PolyphaseSignal(tuple(signals)), tuple(names)


def _parse_circuit(chk: _Checker, doc, path, n_phases) -> LinearBranchCircuit | None:
    doc = chk.mapping(doc, path, chk.line_of(doc))
    if doc is None:
        return None
    chk.known_keys(doc, {"topology", "neutral", "branches"}, path)
    topology = doc.get("topology")
    if topology not in TOPOLOGIES:
        chk.fail(chk.line_of(doc, "topology"), f"{path}.topology", f"topology must be one of {TOPOLOGIES}, got {topology!r}")
        return None
    neutral = doc.get("neutral", True)
    if not isinstance(neutral, bool):
        chk.fail(chk.line_of(doc, "neutral"), f"{path}.neutral", "neutral must be true or false")
        return None
    branches = doc.get("branches")
    if not isinstance(branches, list) or not branches:
        chk.fail(chk.line_of(doc, "branches"), f"{path}.branches", "needs a non-empty list of branches")
        return None
    ok = True
    parsed: list[Branch | None] = []
    for k, br in enumerate(branches):
        bpath = f"{path}.branches[{k}]"
        if br is None:
            parsed.append(None)
            continue
        br = chk.mapping(br, bpath, chk.line_of(branches, k))
        if br is None:
            ok = False
            continue
        chk.known_keys(br, {"R", "L", "C"}, bpath)
        before = len(chk.issues)
        R = chk.number(br, "R", bpath, default=0.0, nonneg=True)
        L = chk.number(br, "L", bpath, default=0.0, nonneg=True)
        C = chk.number(br, "C", bpath, default=None, positive=True)
        if len(chk.issues) > before:
            ok = False
            continue
        parsed.append(Branch(R, L, C))
    if topology == SERIES_RLC and len(branches) != 1:
        chk.fail(chk.line_of(doc, "branches"), f"{path}.branches", "series_rlc takes exactly one branch")
        ok = False
    if n_phases is not None and len(branches) != n_phases:
        chk.fail(
            chk.line_of(doc, "branches"),
            f"{path}.branches",
            f"{len(branches)} branches for a {n_phases}-phase supply",
        )
        ok = False
    if not ok:
        return None
    return LinearBranchCircuit(topology, tuple(parsed), neutral)


def parse_scenario(doc: Any, source: str = "<scenario>") -> Scenario:
    """Validate a loaded document; raises :class:`ScenarioError` listing every issue."""
    chk = _Checker(source)
    if not isinstance(doc, dict):
        chk.fail(None, "", "scenario must be a YAML mapping")
        raise ScenarioError(chk.issues)
    chk.known_keys(doc, {"schema_version", "name", "description", "mode", "base_omega", "supply", "load", "options"}, "")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        chk.fail(chk.line_of(doc, "schema_version"), "schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    name = doc.get("name")
    if not isinstance(name, str) or not name.strip():
        chk.fail(chk.line_of(doc, "name"), "name", "a non-empty scenario name is required")
        name = None
    mode = doc.get("mode", AVERAGED)
    if mode not in MODES:
        chk.fail(chk.line_of(doc, "mode"), "mode", f"mode must be one of {MODES}, got {mode!r}")
    base_omega = chk.number(doc, "base_omega", "", required=True, positive=True)

    supply, names = None, ()
    if "supply" not in doc or doc["supply"] is None:
        chk.fail(chk.line_of(doc), "supply", "missing supply")
    else:
        supply, names = _parse_phases(chk, doc["supply"], "supply", base_omega, "supply")
    n = len(doc["supply"].get("phases") or []) if isinstance(doc.get("supply"), dict) else None

    if mode == INSTANTANEOUS and n == 1:
        chk.fail(
            chk.line_of(doc, "mode"),
            "mode",
            "instantaneous mode needs at least 2 phases: single-phase systems cannot be compensated instantaneously",
        )

    current = circuit = None
    load = doc.get("load")
    if not isinstance(load, dict):
        chk.fail(chk.line_of(doc, "load"), "load", "missing load (give either 'circuit' or 'current')")
    else:
        chk.known_keys(load, {"circuit", "current"}, "load")
        has_circuit = load.get("circuit") is not None
        has_current = load.get("current") is not None
        if has_circuit == has_current:
            chk.fail(chk.line_of(load), "load", "exactly one of 'circuit' or 'current' must be given")
        elif has_current:
            current, _ = _parse_phases(chk, load["current"], "load.current", base_omega, "current")
            if current is not None and n is not None and current.n_phases != n:
                chk.fail(
                    chk.line_of(load, "current"), "load.current", f"{current.n_phases} current phases for {n} supply phases"
                )
                current = None
        else:
            circuit = _parse_circuit(chk, load["circuit"], "load.circuit", n)

    options = ScenarioOptions()
    opts = doc.get("options")
    if opts is not None:
        opts = chk.mapping(opts, "options", chk.line_of(doc, "options"))
    if opts:
        chk.known_keys(opts, {"hilbert_convention", "compensation", "zero_eps"}, "options")
        conv = opts.get("hilbert_convention", LEAD)
        if conv not in CONVENTIONS:
            chk.fail(chk.line_of(opts, "hilbert_convention"), "options.hilbert_convention", f"must be one of {CONVENTIONS}")
        strategy = opts.get("compensation", KEEP_IP)
        if strategy not in STRATEGIES:
            chk.fail(chk.line_of(opts, "compensation"), "options.compensation", f"must be one of {STRATEGIES}")
        zero_eps = chk.number(opts, "zero_eps", "options", default=None, positive=True)
        options = ScenarioOptions(conv, strategy, zero_eps)

    if chk.issues:
        raise ScenarioError(chk.issues)
    return Scenario(
        name=name,
        mode=mode,
        supply=supply,
        current=current,
        circuit=circuit,
        options=options,
        description=str(doc.get("description") or ""),
        phase_names=names,
    )


def loads(text: str, source: str = "<string>") -> Scenario:
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError([Issue(source, line, "", f"YAML syntax error: {getattr(exc, 'problem', exc)}")]) from exc
    return parse_scenario(doc, source)


def builtin_names() -> list[str]:
    root = resources.files(BUILTIN_PACKAGE)
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def load(ref: str | Path) -> Scenario:
    """Load a scenario from a file path or a built-in scenario name."""
    path = Path(ref)
    if path.is_file():
        return loads(path.read_text(), str(path))
    name = str(ref)
    if name in builtin_names():
        text = resources.files(BUILTIN_PACKAGE).joinpath(f"{name}.yaml").read_text()
        return loads(text, f"builtin:{name}")
    raise ScenarioError([Issue(str(ref), None, "", "no such scenario file or built-in scenario")])


def validate(ref: str | Path) -> list[Issue]:
    try:
        load(ref)
    except ScenarioError as exc:
        return exc.issues
    return []


def with_mode(s: Scenario, mode: str) -> Scenario:
    return replace(s, mode=mode)
