"""Configuration documents, run records, CSV tables and SVG plots."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .arms import ArmError, ArmKind, ArmSet
from .engine import HierarchyError, HierarchySpec, RunTrace
from .experiments import ExperimentConfig, ExperimentKind, ExperimentResult
from .policies import PolicyError


class ConfigError(ValueError):
    """Invalid configuration document; the message starts with the field path."""


_POLICY = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["AlphaUCB", "EpsilonGreedy", "BadFixed", "LeastPulls"]},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "epsilon": {"type": "number", "minimum": 0, "maximum": 1},
        "target": {"type": "integer", "minimum": 0},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_ARMS = {
    "type": "object",
    "properties": {
        "kind": {"enum": [k.value for k in ArmKind]},
        "arms": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "p": {"type": "number", "minimum": 0, "maximum": 1},
                    "a": {"type": "number", "exclusiveMinimum": 0},
                    "b": {"type": "number", "exclusiveMinimum": 0},
                    "trials": {"type": "integer", "minimum": 1},
                },
                "additionalProperties": False,
            },
        },
    },
    "required": ["kind", "arms"],
    "additionalProperties": False,
}

_HIERARCHY = {
    "type": "object",
    "properties": {
        "top": _POLICY,
        "layers": {"type": "array", "items": {"type": "array", "items": _POLICY}},
        "observation_mode": {"enum": ["Shared", "Local"]},
        "clock": {"enum": ["Global", "Local"]},
    },
    "required": ["top"],
    "additionalProperties": False,
}

_EXPERIMENT = {
    "type": "object",
    "properties": {
        "kind": {"enum": [k.value for k in ExperimentKind]},
        "processes": {"type": "integer", "minimum": 1},
        "repeats": {"type": "integer", "minimum": 1},
        "horizon": {"type": "integer", "minimum": 1},
        "distribution": {"enum": [k.value for k in ArmKind]},
        "inflation_value": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "n_arms": {"type": "integer", "minimum": 2},
        "max_experts": {"type": "integer", "minimum": 1},
        "compare_experts": {"type": "integer", "minimum": 0},
        "arms": _ARMS,
        "hierarchy": _HIERARCHY,
    },
    "required": ["kind"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "arms": _ARMS,
        "hierarchy": _HIERARCHY,
        "horizon": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "epsilon": {"type": "number", "minimum": 0},
        "experiment": _EXPERIMENT,
    },
    "additionalProperties": False,
}


@dataclass
class Config:
    arms: ArmSet | None = None
    hierarchy: HierarchySpec | None = None
    horizon: int | None = None
    seed: int | None = None
    epsilon: float | None = None
    experiment: ExperimentConfig | None = None

    def to_dict(self) -> dict:
        doc = {}
        if self.arms is not None:
            doc["arms"] = self.arms.to_dict()
        if self.hierarchy is not None:
            doc["hierarchy"] = self.hierarchy.to_dict()
        for name in ("horizon", "seed", "epsilon"):
            if getattr(self, name) is not None:
                doc[name] = getattr(self, name)
        if self.experiment is not None:
            doc["experiment"] = self.experiment.to_dict()
        return doc


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _build_arms(doc, where):
    try:
        return ArmSet.from_dict(doc)
    except (ArmError, ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _build_hierarchy(doc, where, n_arms):
    try:
        spec = HierarchySpec.from_dict(doc)
    except (PolicyError, HierarchyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if n_arms is not None:
        try:
            spec.validate(n_arms)
        except HierarchyError as exc:
            raise ConfigError(f"{where}.{exc}") from None
    return spec


def parse_config(text: str) -> Config:
    """Parse and fully validate a JSON configuration document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: malformed JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"{_path(err.absolute_path)}: {err.message}")
    cfg = Config(horizon=doc.get("horizon"), seed=doc.get("seed"), epsilon=doc.get("epsilon"))
    if "arms" in doc:
        cfg.arms = _build_arms(doc["arms"], "arms")
    if "hierarchy" in doc:
        cfg.hierarchy = _build_hierarchy(doc["hierarchy"], "hierarchy", cfg.arms.K if cfg.arms else None)
    if "experiment" in doc:
        exp = dict(doc["experiment"])
        if "arms" in exp:
            exp["arms"] = _build_arms(exp["arms"], "experiment.arms")
        if "hierarchy" in exp:
            n_arms = exp["arms"].K if "arms" in exp else None
            exp["hierarchy"] = _build_hierarchy(exp["hierarchy"], "experiment.hierarchy", n_arms)
        try:
            cfg.experiment = ExperimentConfig(**exp)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"experiment: {exc}") from None
    return cfg


def serialize_config(cfg: Config) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n"


def config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def counts_digest(trace: RunTrace) -> str:
    h = hashlib.sha256()
    for m in trace.pair_counts:
        h.update(np.asarray(m.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(m, dtype=np.int64).tobytes())
    return h.hexdigest()[:16]


@dataclass
class RunRecord:
    seed: int
    config_hash: str
    timestamp: int | None
    final_regret: float
    horizon: int
    counts_digest: str

    @classmethod
    def from_trace(cls, trace: RunTrace, seed: int, cfg_hash: str) -> "RunRecord":
        # SOURCE_DATE_EPOCH keeps records byte-reproducible; unset means no stamp
        stamp = os.environ.get("SOURCE_DATE_EPOCH")
        return cls(
            seed=seed,
            config_hash=cfg_hash,
            timestamp=int(stamp) if stamp else None,
            final_regret=trace.final_regret,
            horizon=trace.n,
            counts_digest=counts_digest(trace),
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def write_jsonl(path, records) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write((rec if isinstance(rec, str) else json.dumps(rec, sort_keys=True)) + "\n")
    return path


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_curves(path, x_name, x, curves: dict) -> Path:
    names = list(curves)
    cols = [np.asarray(curves[k]) for k in names]
    return write_csv(path, [x_name, *names], ([xi, *(c[t] for c in cols)] for t, xi in enumerate(x)))


def emit_csv(result, out_dir, prefix: str = "") -> list[Path]:
    """Write every table of a RunTrace or ExperimentResult under `out_dir`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if isinstance(result, RunTrace):
        curve = np.concatenate([[0.0], result.cumulative_pseudo_regret])
        written.append(
            write_curves(out / f"{prefix}regret.csv", "round", np.arange(result.n + 1), {"cumulative_regret": curve})
        )
        for d, m in enumerate(result.pair_counts):
            rows = [[f"s{j + 1}", *row] for j, row in enumerate(m)]
            header = ["selector", *[f"c{c + 1}" for c in range(m.shape[1])]]
            written.append(write_csv(out / f"{prefix}selection_layer_{d}.csv", header, rows))
        return written
    if isinstance(result, ExperimentResult):
        for stem, (header, rows) in result.tables.items():
            written.append(write_csv(out / f"{prefix}{stem}.csv", header, rows))
        for stem, curves in result.curves.items():
            x_name, x = result.curve_x[stem]
            written.append(write_curves(out / f"{prefix}{stem}.csv", x_name, x, curves))
        return written
    raise TypeError(f"cannot emit {type(result).__name__}")


# -- SVG ---------------------------------------------------------------------

_W, _H = 800, 600
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 30, 40, 60
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
_MAX_POINTS = 2000


def _ticks(lo, hi, count=5):
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def _fmt(v):
    return f"{v:.2g}"


def emit_plot(curves: dict, path=None, x=None, title: str = "", xlabel: str = "round", ylabel: str = "regret") -> str:
    """Render named curves sharing one x axis as a standalone SVG document.

    Long curves are thinned to at most 2000 evenly spaced points (the last
    point is always kept). Returns the SVG text; also writes it when `path`
    is given.
    """
    if not curves:
        raise ValueError("emit_plot needs at least one curve")
    ys = {k: np.asarray(v, dtype=float) for k, v in curves.items()}
    lengths = {len(v) for v in ys.values()}
    if len(lengths) != 1 or 0 in lengths:
        raise ValueError("all curves must be non-empty and of equal length")
    n = lengths.pop()
    xs = np.arange(n, dtype=float) if x is None else np.asarray(x, dtype=float)
    if len(xs) != n or np.any(np.diff(xs) <= 0):
        raise ValueError("x must be strictly increasing and match the curve length")
    idx = np.unique(np.linspace(0, n - 1, min(n, _MAX_POINTS)).round().astype(int))

    x0, x1 = float(xs[0]), float(xs[-1])
    if x1 == x0:
        x1 = x0 + 1.0
    y0 = min(0.0, min(float(v.min()) for v in ys.values()))
    y1 = max(float(v.max()) for v in ys.values())
    if y1 <= y0:
        y1 = y0 + 1.0
    pw, ph = _W - _LEFT - _RIGHT, _H - _TOP - _BOTTOM

    def px(v):
        return _LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return _TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_W} {_H}" width="{_W}" height="{_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<line x1="{_LEFT}" y1="{_TOP + ph}" x2="{_LEFT + pw}" y2="{_TOP + ph}" stroke="black"/>',
        f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" y2="{_TOP + ph}" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        out.append(f'<line x1="{px(v):.2f}" y1="{_TOP + ph}" x2="{px(v):.2f}" y2="{_TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(v):.2f}" y="{_TOP + ph + 20}" text-anchor="middle" font-size="12">{_fmt(v)}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<line x1="{_LEFT - 5}" y1="{py(v):.2f}" x2="{_LEFT}" y2="{py(v):.2f}" stroke="black"/>')
        out.append(f'<text x="{_LEFT - 8}" y="{py(v) + 4:.2f}" text-anchor="end" font-size="12">{_fmt(v)}</text>')
    out.append(f'<text x="{_LEFT + pw / 2:.1f}" y="{_H - 15}" text-anchor="middle" font-size="14">{xlabel}</text>')
    out.append(
        f'<text x="20" y="{_TOP + ph / 2:.1f}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 20 {_TOP + ph / 2:.1f})">{ylabel}</text>'
    )
    for k, (name, y) in enumerate(ys.items()):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(xs[i]):.2f},{py(y[i]):.2f}" for i in idx)
        out.append(f'<polyline class="curve" data-name="{name}" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = _TOP + 15 + 18 * k
        out.append(f'<line x1="{_LEFT + 15}" y1="{ly}" x2="{_LEFT + 40}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{_LEFT + 46}" y="{ly + 4}" font-size="12">{name}</text>')
    out.append("</svg>")
    svg = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(svg, encoding="utf-8")
    return svg
