"""File formats: spectrum CSV, raw detector records, JSON reports.

Spectrum CSV layout::

    # qdmsim spectrum v1
    # detector: A
    # n_averages: 399
    # ...                      (metadata, one "# key: value" per line, sorted)
    frequency_hz,power_db_rel_vacuum
    10000.000,-6.012345
    ...

Frequencies use 3 decimals, powers 6 decimals.

A detector record is ``<stem>.f64`` (little-endian float64 samples) plus a
``<stem>.json`` sidecar holding the readout metadata and acquisition.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .synth import AcquisitionConfig, DetectorRecord, Spectrum

CSV_MAGIC = "# qdmsim spectrum v1"
CSV_COLUMNS = "frequency_hz,power_db_rel_vacuum"


def _fmt_meta(value) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def spectrum_to_csv(spectrum: Spectrum) -> str:
    meta = {
        **{k: v for k, v in spectrum.metadata.items()},
        "n_averages": spectrum.n_averages,
        "rbw_effective": spectrum.rbw_effective,
        "effective_averages": spectrum.effective_averages,
    }
    lines = [CSV_MAGIC]
    lines += [f"# {k}: {_fmt_meta(meta[k])}" for k in sorted(meta)]
    lines.append(CSV_COLUMNS)
    rows = np.column_stack([spectrum.frequencies, spectrum.power_db_rel_vacuum])
    lines += [f"{f:.3f},{p:.6f}" for f, p in rows]
    return "\n".join(lines) + "\n"


def write_spectrum_csv(spectrum: Spectrum, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(spectrum_to_csv(spectrum))
    return path


def _parse_meta(value: str):
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


def read_spectrum_csv(path: str | Path) -> Spectrum:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_MAGIC:
        raise ValueError(f"{path}: not a qdmsim spectrum CSV")
    meta = {}
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].strip().partition(":")
        meta[key.strip()] = _parse_meta(value.strip())
        i += 1
    if i >= len(lines) or lines[i] != CSV_COLUMNS:
        raise ValueError(f"{path}: missing column header {CSV_COLUMNS!r}")
    data = np.loadtxt(lines[i + 1 :], delimiter=",", ndmin=2)
    try:
        n_avg = int(meta.pop("n_averages"))
        rbw = float(meta.pop("rbw_effective"))
        k_eff = float(meta.pop("effective_averages"))
    except KeyError as exc:
        raise ValueError(f"{path}: missing metadata {exc}") from None
    return Spectrum(data[:, 0], data[:, 1], n_avg, rbw, k_eff, meta)


RECORD_SIDECAR_SCHEMA = {
    "type": "object",
    "required": ["schema", "schema_version", "detector", "readout_angle", "n_samples", "dtype", "acquisition"],
    "properties": {
        "schema": {"const": "qdmsim.detector_record"},
        "schema_version": {"const": 1},
        "detector": {"enum": ["A", "B"]},
        "readout_angle": {"type": "number"},
        "n_samples": {"type": "integer", "minimum": 0},
        "dtype": {"const": "<f8"},
        "acquisition": {"type": "object"},
    },
}


def write_record(record: DetectorRecord, stem: str | Path) -> tuple[Path, Path]:
    stem = Path(stem)
    raw = stem.with_suffix(".f64")
    side = stem.with_suffix(".json")
    raw.write_bytes(record.samples.astype("<f8").tobytes())
    meta = {
        "schema": "qdmsim.detector_record",
        "schema_version": 1,
        "detector": record.detector,
        "readout_angle": record.readout_angle,
        "n_samples": int(record.samples.size),
        "dtype": "<f8",
        "acquisition": record.acquisition.to_dict(),
    }
    write_json(meta, side, RECORD_SIDECAR_SCHEMA)
    return raw, side


def read_record(stem: str | Path) -> DetectorRecord:
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    jsonschema.validate(meta, RECORD_SIDECAR_SCHEMA)
    samples = np.frombuffer(stem.with_suffix(".f64").read_bytes(), dtype="<f8")
    if samples.size != meta["n_samples"]:
        raise ValueError(f"{stem}: expected {meta['n_samples']} samples, found {samples.size}")
    return DetectorRecord(samples.astype(float), meta["detector"], meta["readout_angle"], AcquisitionConfig(**meta["acquisition"]))


_NUM = {"type": "number"}

ANALYTIC_SCHEMA = {
    "type": "object",
    "required": [
        "schema", "schema_version", "var_bhd_a", "var_bhd_b", "single_mode_bound",
        "arthurs_kelly_product", "qdm_product", "threshold_r", "uncertainty_product",
        "bound_label", "config", "signals",
    ],
    "properties": {
        "schema": {"const": "qdmsim.analytic_report"},
        "schema_version": {"const": 1},
        "var_bhd_a": {"type": "number", "exclusiveMinimum": 0},
        "var_bhd_b": {"type": "number", "exclusiveMinimum": 0},
        "single_mode_bound": _NUM,
        "arthurs_kelly_product": _NUM,
        "qdm_product": _NUM,
        "threshold_r": _NUM,
        "uncertainty_product": _NUM,
        "bound_label": {"enum": ["below_heisenberg", "below_arthurs_kelly", "classical"]},
        "signals": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["frequency", "kind", "angle_phi", "gain_a", "gain_b"],
            },
        },
    },
}

VETO_SCHEMA = {
    "type": "object",
    "required": ["schema", "schema_version", "theta", "threshold_sigma", "n_averages", "peaks"],
    "properties": {
        "schema": {"const": "qdmsim.veto_report"},
        "schema_version": {"const": 1},
        "theta": _NUM,
        "threshold_sigma": {"type": "number", "exclusiveMinimum": 0},
        "n_averages": {"type": "integer", "minimum": 1},
        "peaks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "frequency", "power_a_db", "power_b_db", "expected_b_db",
                    "residual_db", "significance", "classification",
                ],
                "properties": {
                    "classification": {"enum": ["science", "parasitic", "unresolved"]},
                },
            },
        },
    },
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(obj: dict, path: str | Path, schema: dict | None = None) -> Path:
    """Validate ``obj`` against ``schema`` (if given) and write it as JSON."""
    obj = _jsonable(obj)
    if schema is not None:
        jsonschema.validate(obj, schema)
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path
