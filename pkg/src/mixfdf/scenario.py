"""Scenario files: one JSON document drives every CLI command.

The format is described by ``scenario.schema.json`` shipped next to this
module. Validation happens up front; messages carry the JSON key path and,
where it can be located, the line number in the source text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .errors import MixFdfError, ScenarioError
from .model import NONLINEARITIES, FilterRealization, QuasiLinearModel
from .simulate import SignalSpec, SimConfig

SCHEMA_PATH = Path(__file__).with_name("scenario.schema.json")

PLANT_KEYS = ("A0", "A1", "A2", "B0", "B1", "B2", "C0", "C1", "C2")
FILTER_KEYS = ("A_hat", "B_hat", "S_hat")
CERT_KEYS = ("P1", "P2", "beta", "A_check", "B_check", "S_check")
TOP_KEYS = {"name", "plant", "levels", "filter", "certificate", "signals", "disturbance_family",
            "fault_family", "simulation", "detection", "solver", "ari", "hji", "output"}


@dataclass
class Scenario:
    name: str
    plant: QuasiLinearModel
    gamma: float = 1.0
    delta: float = 0.5
    filter: Optional[FilterRealization] = None
    certificate: Optional[Dict[str, Any]] = None
    v: Optional[SignalSpec] = None
    f: Optional[SignalSpec] = None
    disturbance_family: Optional[List[SignalSpec]] = None
    fault_family: Optional[List[SignalSpec]] = None
    sim: SimConfig = field(default_factory=SimConfig)
    x0: Optional[np.ndarray] = None
    detection: Dict[str, Any] = field(default_factory=dict)
    solver: Dict[str, Any] = field(default_factory=dict)
    ari: Dict[str, Any] = field(default_factory=dict)
    hji: Dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None
    source: Optional[str] = None


class _Ctx:
    def __init__(self, text):
        self.text = text or ""

    def line_of(self, key):
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text.count("\n", 0, m.start()) + 1 if m else None

    def fail(self, path, msg):
        key = path.split(".")[-1].split("[")[0]
        line = self.line_of(key)
        where = f"line {line}: " if line else ""
        raise ScenarioError(f"{where}{path}: {msg}")


def _matrix(ctx, path, value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.array([[float(value)]])
    if not isinstance(value, list) or not value:
        ctx.fail(path, "expected a non-empty array of rows")
    if all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
        return np.array(value, dtype=float).reshape(-1, 1)
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list):
            ctx.fail(f"{path}[{i}]", "row is not an array")
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in row):
            ctx.fail(f"{path}[{i}]", "row has non-numeric entries")
        rows.append(row)
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        ctx.fail(path, f"ragged rows (lengths {sorted(widths)})")
    M = np.array(rows, dtype=float)
    if not np.all(np.isfinite(M)):
        ctx.fail(path, "non-finite entry")
    return M


def _number(ctx, path, value, positive=False):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not np.isfinite(value):
        ctx.fail(path, "expected a finite number")
    if positive and value <= 0:
        ctx.fail(path, "must be positive")
    return float(value)


def _nonlinearity(ctx, path, spec):
    name = spec if isinstance(spec, str) else (spec.get("name") if isinstance(spec, dict) else None)
    if name not in NONLINEARITIES:
        ctx.fail(path, f"unknown nonlinearity {name!r}; registered: {sorted(NONLINEARITIES)}")
    return spec


def _plant(ctx, d):
    if d == "benchmark":
        from .catalog import benchmark_plant

        return benchmark_plant()
    if not isinstance(d, dict):
        ctx.fail("plant", "expected an object or the string 'benchmark'")
    missing = [k for k in PLANT_KEYS if k not in d]
    if missing:
        ctx.fail("plant", f"missing {missing}")
    mats = {k: _matrix(ctx, f"plant.{k}", d[k]) for k in PLANT_KEYS}
    F0 = _nonlinearity(ctx, "plant.F0", d.get("F0", "zero"))
    F1 = _nonlinearity(ctx, "plant.F1", d.get("F1", "zero"))
    alpha = _number(ctx, "plant.alpha", d.get("alpha", 0.0))
    try:
        return QuasiLinearModel(**mats, F0=F0, F1=F1, alpha=alpha)
    except MixFdfError as exc:
        ctx.fail("plant", str(exc))
    except (ValueError, TypeError) as exc:
        ctx.fail("plant", str(exc))


def _signal(ctx, path, d, dim):
    if not isinstance(d, dict):
        ctx.fail(path, "expected a signal object")
    d = dict(d)
    d.setdefault("dim", dim)
    if d["dim"] != dim:
        ctx.fail(path, f"dim {d['dim']} does not match model dimension {dim}")
    try:
        return SignalSpec.from_dict(d)
    except (TypeError, ValueError) as exc:
        ctx.fail(path, str(exc))


def _sim(ctx, d):
    if not isinstance(d, dict):
        ctx.fail("simulation", "expected an object")
    allowed = {"dt", "horizon", "paths", "seed", "x0", "record_stride", "noise_dt", "n_jobs"}
    extra = set(d) - allowed
    if extra:
        ctx.fail("simulation", f"unknown keys {sorted(extra)}")
    kw = {k: d[k] for k in d if k != "x0"}
    try:
        cfg = SimConfig(**kw)
    except (TypeError, ValueError) as exc:
        ctx.fail("simulation", str(exc))
    x0 = None if d.get("x0") is None else np.asarray(d["x0"], dtype=float)
    return cfg, x0


def parse(doc: dict, text: str = "", source: Optional[str] = None) -> Scenario:
    ctx = _Ctx(text)
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    extra = set(doc) - TOP_KEYS
    if extra:
        ctx.fail(sorted(extra)[0], "unknown top-level key")
    if "plant" not in doc:
        raise ScenarioError("scenario: missing required key 'plant'")
    plant = _plant(ctx, doc["plant"])
    lv = doc.get("levels", {})
    gamma = _number(ctx, "levels.gamma", lv.get("gamma", 1.0), positive=True)
    delta = _number(ctx, "levels.delta", lv.get("delta", 0.5), positive=True)

    filt = None
    if doc.get("filter") is not None:
        fd = doc["filter"]
        missing = [k for k in FILTER_KEYS if k not in fd]
        if missing:
            ctx.fail("filter", f"missing {missing}")
        try:
            filt = FilterRealization(*[_matrix(ctx, f"filter.{k}", fd[k]) for k in FILTER_KEYS])
        except (MixFdfError, ValueError) as exc:
            ctx.fail("filter", str(exc))
        if filt.A_hat.shape != (plant.n, plant.n) or filt.B_hat.shape != (plant.n, plant.n_y) \
                or filt.S_hat.shape[1] != plant.n_y:
            ctx.fail("filter", "dimensions inconsistent with the plant")

    cert = None
    if doc.get("certificate") is not None:
        cd = doc["certificate"]
        missing = [k for k in CERT_KEYS if k not in cd]
        if missing:
            ctx.fail("certificate", f"missing {missing}")
        cert = {k: _matrix(ctx, f"certificate.{k}", cd[k]) for k in CERT_KEYS if k != "beta"}
        cert["beta"] = _number(ctx, "certificate.beta", cd["beta"])

    sig = doc.get("signals", {})
    v = _signal(ctx, "signals.v", sig["v"], plant.n_v) if "v" in sig else None
    f = _signal(ctx, "signals.f", sig["f"], plant.n_f) if "f" in sig else None
    dfam = [_signal(ctx, f"disturbance_family[{i}]", s, plant.n_v)
            for i, s in enumerate(doc["disturbance_family"])] if "disturbance_family" in doc else None
    ffam = [_signal(ctx, f"fault_family[{i}]", s, plant.n_f)
            for i, s in enumerate(doc["fault_family"])] if "fault_family" in doc else None
    cfg, x0 = _sim(ctx, doc.get("simulation", {}))
    if x0 is not None and x0.size not in (plant.n, 2 * plant.n):
        ctx.fail("simulation.x0", f"length {x0.size}; expected {plant.n} or {2 * plant.n}")
    return Scenario(
        name=str(doc.get("name", "scenario")), plant=plant, gamma=gamma, delta=delta, filter=filt,
        certificate=cert, v=v, f=f, disturbance_family=dfam, fault_family=ffam, sim=cfg, x0=x0,
        detection=dict(doc.get("detection", {})), solver=dict(doc.get("solver", {})),
        ari=dict(doc.get("ari", {})), hji=dict(doc.get("hji", {})), output=doc.get("output"),
        source=source,
    )


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
    return parse(doc, text, str(path))


def filter_to_dict(filt: FilterRealization):
    return {k: np.asarray(getattr(filt, k)).tolist() for k in FILTER_KEYS}


def certificate_to_dict(cert):
    return {k: (float(cert[k]) if k == "beta" else np.asarray(cert[k]).tolist()) for k in CERT_KEYS}
