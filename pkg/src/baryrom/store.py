"""On-disk artifacts: snapshot stores, reduced models, CSV reports.

A snapshot store is a directory with a manifest.json describing the sweep
and a snapshots.npz holding one row per snapshot (parameter components,
saturation values, mass). Generation writes one chunk file per simulated
parameter combination so interrupted sweeps resume where they stopped.
All floats are written with shortest round-trip formatting so reruns are
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .greedy import Dictionary, GreedyReport
from .online import ReducedModel

MANIFEST_NAME = "manifest.json"
SNAPSHOTS_NAME = "snapshots.npz"
CHUNK_DIR = "chunks"


class StoreError(RuntimeError):
    pass


@dataclass(frozen=True)
class SnapshotStore:
    name: str
    axis_names: tuple[str, ...]  # ("t", <sweep axes...>)
    params: np.ndarray  # (K, d)
    values: np.ndarray  # (K, N)
    masses: np.ndarray  # (K,)
    x_min: float
    x_max: float
    n_cells: int
    config: dict

    @property
    def count(self) -> int:
        return self.params.shape[0]


def fmt(value) -> str:
    """Shortest round-trip text for CSV cells."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    lines = [",".join(header)]
    lines.extend(",".join(fmt(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def read_csv(path):
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def _write_json(path, payload: dict):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def store_manifest(config: dict, axis_names, combo_count: int, time_count: int) -> dict:
    return {
        "kind": "snapshot_store",
        "schema_version": 1,
        "axis_names": list(axis_names),
        "combo_count": combo_count,
        "time_count": time_count,
        "config": config,
    }


def init_store_dir(directory, manifest: dict, force: bool = False) -> Path:
    """Create (or reuse, for resuming) a store directory for generation."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    man_path = directory / MANIFEST_NAME
    if man_path.exists() and not force:
        existing = json.loads(man_path.read_text())
        if existing != manifest:
            raise StoreError(
                f"{directory} holds a store for a different config; "
                "use --force to overwrite"
            )
    else:
        for stale in [directory / SNAPSHOTS_NAME, *sorted((directory / CHUNK_DIR).glob("*.npz"))]:
            stale.unlink(missing_ok=True)
        _write_json(man_path, manifest)
    (directory / CHUNK_DIR).mkdir(exist_ok=True)
    return directory


def chunk_path(directory, index: int) -> Path:
    return Path(directory) / CHUNK_DIR / f"sim_{index:05d}.npz"


def write_chunk(directory, index: int, params, values, masses):
    path = chunk_path(directory, index)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, params=params, values=values, masses=masses)
    tmp.replace(path)


def consolidate_store(directory, combo_count: int) -> None:
    """Merge all chunks into snapshots.npz and drop them."""
    directory = Path(directory)
    parts = []
    for idx in range(combo_count):
        path = chunk_path(directory, idx)
        if not path.exists():
            raise StoreError(f"store incomplete: missing chunk {path.name}")
        with np.load(path) as data:
            parts.append((data["params"], data["values"], data["masses"]))
    np.savez(
        directory / SNAPSHOTS_NAME,
        params=np.concatenate([p[0] for p in parts]),
        values=np.concatenate([p[1] for p in parts]),
        masses=np.concatenate([p[2] for p in parts]),
    )
    for idx in range(combo_count):
        chunk_path(directory, idx).unlink()


def load_store(directory) -> SnapshotStore:
    directory = Path(directory)
    man_path = directory / MANIFEST_NAME
    npz_path = directory / SNAPSHOTS_NAME
    if not man_path.exists():
        raise StoreError(f"not a snapshot store (no {MANIFEST_NAME}): {directory}")
    manifest = json.loads(man_path.read_text())
    if not npz_path.exists():
        raise StoreError(f"store incomplete (no {SNAPSHOTS_NAME}); rerun generate")
    with np.load(npz_path) as data:
        params = data["params"]
        values = data["values"]
        masses = data["masses"]
    cfg = manifest["config"]
    return SnapshotStore(
        name=cfg["name"],
        axis_names=tuple(manifest["axis_names"]),
        params=params,
        values=values,
        masses=masses,
        x_min=float(cfg["grid"]["x_min_km"]),
        x_max=float(cfg["grid"]["x_max_km"]),
        n_cells=int(cfg["grid"]["n_cells"]),
        config=cfg,
    )


def save_dictionary(path, dictionary: Dictionary):
    np.savez(
        path,
        atoms=dictionary.atoms,
        atom_params=dictionary.atom_params,
        atom_indices=dictionary.atom_indices,
        gram=dictionary.gram,
    )


def load_dictionary(path) -> Dictionary:
    with np.load(path) as data:
        return Dictionary(
            atoms=data["atoms"],
            atom_params=data["atom_params"],
            atom_indices=data["atom_indices"],
            gram=data["gram"],
        )


REPORT_COLUMNS = ("n", "delta", "mean_w2", "condition", "volume", "criterion",
                  "l1_mean", "l1_max")


def save_report(path, report: GreedyReport, l1_mean, l1_max):
    rows = []
    last = len(report.sizes) - 1
    for i, n in enumerate(report.sizes):
        rows.append(
            (
                n,
                report.delta[i],
                report.avg_error[i],
                report.condition[i],
                report.simplex_volume[i],
                report.termination if i == last else "",
                l1_mean[i],
                l1_max[i],
            )
        )
    write_csv(path, REPORT_COLUMNS, rows)


def load_report(path) -> tuple[GreedyReport, np.ndarray, np.ndarray]:
    header, rows = read_csv(path)
    if tuple(header) != REPORT_COLUMNS:
        raise StoreError(f"unexpected report columns in {path}")
    report = GreedyReport()
    l1_mean, l1_max = [], []
    for row in rows:
        report.sizes.append(int(row[0]))
        report.delta.append(float(row[1]))
        report.avg_error.append(float(row[2]))
        report.condition.append(float(row[3]))
        report.simplex_volume.append(float(row[4]))
        if row[5]:
            report.termination = row[5]
        l1_mean.append(float(row[6]))
        l1_max.append(float(row[7]))
    return report, np.asarray(l1_mean), np.asarray(l1_max)


def save_model(directory, model: ReducedModel, report: GreedyReport, l1_mean, l1_max):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arrays = {
        "atoms": model.dictionary.atoms,
        "atom_params": model.dictionary.atom_params,
        "atom_indices": model.dictionary.atom_indices,
        "gram": model.dictionary.gram,
        "weight_table": model.weight_table,
        "mass_table": model.mass_table,
    }
    for i, ax in enumerate(model.axes):
        arrays[f"axis_{i}"] = ax
    np.savez(directory / "model.npz", **arrays)
    _write_json(
        directory / "model.json",
        {
            "kind": "reduced_model",
            "schema_version": 1,
            "axis_names": list(model.axis_names),
            "n_raw": model.n_raw,
            "x_min_km": model.x_min,
            "x_max_km": model.x_max,
            "n_atoms": model.n_atoms,
            "termination": report.termination,
            "warnings": report.warnings,
        },
    )
    save_dictionary(directory / "dictionary.npz", model.dictionary)
    save_report(directory / "greedy_report.csv", report, l1_mean, l1_max)


def load_model(directory) -> ReducedModel:
    directory = Path(directory)
    meta_path = directory / "model.json"
    if not meta_path.exists():
        raise StoreError(f"not a model directory (no model.json): {directory}")
    meta = json.loads(meta_path.read_text())
    with np.load(directory / "model.npz") as data:
        dictionary = Dictionary(
            atoms=data["atoms"],
            atom_params=data["atom_params"],
            atom_indices=data["atom_indices"],
            gram=data["gram"],
        )
        axis_names = tuple(meta["axis_names"])
        axes = tuple(data[f"axis_{i}"] for i in range(len(axis_names)))
        return ReducedModel(
            dictionary=dictionary,
            axis_names=axis_names,
            axes=axes,
            weight_table=data["weight_table"],
            mass_table=data["mass_table"],
            n_raw=int(meta["n_raw"]),
            x_min=float(meta["x_min_km"]),
            x_max=float(meta["x_max_km"]),
        )


def load_model_report(directory):
    return load_report(Path(directory) / "greedy_report.csv")
