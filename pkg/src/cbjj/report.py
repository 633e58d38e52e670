"""Report bundles: CSV tables, JSON documents and SVG figures with provenance."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .svg import Figure

REPORT_FORMAT = "cbjj-report"


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def digest(obj) -> str:
    text = json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode()).hexdigest()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    return str(v)


@dataclass
class Table:
    """Rows with documented columns; ``columns`` maps name to description."""

    columns: dict
    rows: list = field(default_factory=list)

    def add(self, **values):
        unknown = set(values) - set(self.columns)
        if unknown:
            raise KeyError(f"unknown columns {sorted(unknown)}")
        self.rows.append([values.get(c) for c in self.columns])

    def column(self, name) -> np.ndarray:
        j = list(self.columns).index(name)
        return np.array([r[j] for r in self.rows], dtype=float)

    def to_csv(self, header: dict) -> str:
        lines = [f"# {k} = {v}" for k, v in header.items()]
        lines += [f"# column {name}: {desc}" for name, desc in self.columns.items()]
        lines.append(",".join(self.columns))
        lines += [",".join(_cell(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {"columns": dict(self.columns),
                "rows": [dict(zip(self.columns, r)) for r in self.rows]}


@dataclass
class Provenance:
    command: str
    seed: int
    config_digest: str
    config: dict
    version: str = __version__
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"command": self.command, "seed": self.seed, "config_digest": self.config_digest,
                "config": self.config, "version": self.version,
                "warnings": sorted(set(self.warnings))}


@dataclass
class ReportBundle:
    provenance: Provenance
    tables: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)  # name -> (Figure, table name)
    status: str = "ok"
    error: str | None = None

    def document(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "status": self.status,
            "error": self.error,
            "provenance": self.provenance.to_dict(),
            "results": self.results,
            "fits": self.fits,
            "tables": {k: t.to_json() for k, t in self.tables.items()},
        }

    def write(self, directory, formats=("csv", "json", "svg")) -> list[Path]:
        """Write the bundle and a manifest; returns the files written."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        formats = set(formats)
        written = []
        header = {"command": self.provenance.command, "seed": self.provenance.seed,
                  "config_digest": self.provenance.config_digest,
                  "version": self.provenance.version}
        # every figure ships with its data table
        csv_tables = set(self.tables) if "csv" in formats else set()
        if "svg" in formats:
            csv_tables |= {t for _, t in self.plots.values()}
        for name in sorted(csv_tables):
            path = out / f"{name}.csv"
            path.write_text(self.tables[name].to_csv(header))
            written.append(path)
        if "json" in formats:
            path = out / "report.json"
            path.write_text(dumps_json(self.document()))
            written.append(path)
            for name, fit in sorted(self.fits.items()):
                doc = {"format": "cbjj-fit", "name": name, **fit,
                       "provenance": self.provenance.to_dict()}
                path = out / f"fit_{name}.json"
                path.write_text(dumps_json(doc))
                written.append(path)
        if "svg" in formats:
            for name, (fig, _) in sorted(self.plots.items()):
                fig.version = self.provenance.version
                path = out / f"{name}.svg"
                path.write_text(fig.render())
                written.append(path)
        manifest = {"status": self.status, "error": self.error,
                    "files": sorted(p.name for p in written),
                    "provenance": self.provenance.to_dict()}
        path = out / "manifest.json"
        path.write_text(dumps_json(manifest))
        written.append(path)
        return written


def report_schema() -> dict:
    """JSON schema describing ``report.json``."""
    text = resources.files("cbjj").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def fit_document(fit, inputs) -> dict:
    """Structured fit record with a digest of the data that went in."""
    doc = fit.to_dict()
    doc["inputs_digest"] = digest(inputs)
    return doc
