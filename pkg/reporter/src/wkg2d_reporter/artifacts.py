"""Run-directory readers: schema-checked, no physics.

Every loader validates against the column or key list below and raises a
named error that repeats the expected schema, so a consumer pointed at
the wrong directory learns immediately what a run directory looks like.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

CSV_SCHEMAS = {
    "flat_series.csv": ("t", "sup_w", "sup_v", "en_w", "en_v"),
    "energies.csv": ("s", "E0_w", "E1_v", "Econ_w", "Ewt_g2_w", "Ewt_g05_w",
                     "l2f_v", "l2f_sv_dv", "l2f_dw_st",
                     "l2f_src_wave", "l2f_src_kg"),
    "pointwise.csv": ("s", "sup_tv", "sup_w_thm", "sup_dw_thm"),
    "sources_l2.csv": ("t", "l2_Fw", "l2_Fv"),
    "recon.csv": ("t", "recon_l2", "recon_sup"),
}

JSON_KEYS = {
    "manifest.json": ("model", "grid", "t_max", "t_end", "ok", "blowup"),
    "fits.json": ("theorem", "baselines", "decay"),
    "criticality.json": ("model", "sources"),
    "blowup.json": ("rows", "t_star_nonincreasing"),
}


class MissingArtifactError(FileNotFoundError):
    def __init__(self, path: Path, schema) -> None:
        self.path = Path(path)
        self.schema = tuple(schema)
        super().__init__(
            f"{path} is missing; expected a file with "
            f"{'columns' if str(path).endswith('.csv') else 'keys'} "
            f"{', '.join(schema)}")


class InvalidArtifactError(ValueError):
    def __init__(self, path: Path, problem: str, schema) -> None:
        self.path = Path(path)
        self.schema = tuple(schema)
        super().__init__(
            f"{path}: {problem}; expected {', '.join(schema)}")


def load_csv(run_dir, name: str) -> dict:
    schema = CSV_SCHEMAS[name]
    path = Path(run_dir) / name
    if not path.exists():
        raise MissingArtifactError(path, schema)
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    missing = [col for col in schema if col not in header]
    if missing:
        raise InvalidArtifactError(path, f"missing columns {missing}", schema)
    try:
        rows = [[float(cell) for cell in line.split(",")]
                for line in lines[1:]]
    except ValueError as exc:
        raise InvalidArtifactError(path, f"non-numeric cell ({exc})",
                                   schema) from exc
    table = {col: np.array([row[j] for row in rows])
             for j, col in enumerate(header)}
    return table


def load_json(run_dir, name: str) -> dict:
    schema = JSON_KEYS[name]
    path = Path(run_dir) / name
    if not path.exists():
        raise MissingArtifactError(path, schema)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidArtifactError(path, f"not valid JSON ({exc})",
                                   schema) from exc
    if not isinstance(doc, dict):
        raise InvalidArtifactError(path, "root is not an object", schema)
    missing = [key for key in schema if key not in doc]
    if missing:
        raise InvalidArtifactError(path, f"missing keys {missing}", schema)
    return doc
