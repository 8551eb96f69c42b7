"""File formats: dataset CSV + JSON sidecar, score matrices, generic tables.

All floats are written as shortest round-trip decimals (Python repr), so
file -> load -> file is byte-stable and downstream numbers are exact.
"""

import json
from pathlib import Path

import numpy as np

from .sim import Dataset, LabelSet, SimParams, TimeGrid

FORMAT_VERSION = 1


def _fmt(v) -> str:
    return repr(float(v))


def write_json(path: Path, obj: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing artifact: {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_table_csv(path: Path, header: list[str], rows) -> None:
    """Write a float table; rows may be a 2-D array or list of sequences."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_table_csv(path: Path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing artifact: {path}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    if data.size and data.shape[1] != len(header):
        raise ValueError(f"{path}: header has {len(header)} columns, "
                         f"rows have {data.shape[1]}")
    return header, data


def grid_to_dict(grid: TimeGrid) -> dict:
    return {"start": grid.start, "stop": grid.stop, "count": grid.count}


def grid_from_dict(d: dict) -> TimeGrid:
    return TimeGrid(np.linspace(d["start"], d["stop"], d["count"]))


def sidecar_path(csv_path: Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def dataset_header(m: int) -> list[str]:
    return [f"t_{i}" for i in range(m)] + ["y1", "y2", "y3"]


def write_dataset(dataset: Dataset, csv_path: Path) -> None:
    """Write `<name>.csv` (values + labels) and a `<name>.json` sidecar."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(dataset_header(dataset.grid.count)) + "\n")
        for i in range(dataset.n):
            vals = ",".join(_fmt(v) for v in dataset.values[i])
            lab = dataset.labels
            fh.write(f"{vals},{int(lab.y1[i])},{int(lab.y2[i])},{_fmt(lab.y3[i])}\n")
    write_json(sidecar_path(csv_path), {
        "format_version": FORMAT_VERSION,
        "grid": grid_to_dict(dataset.grid),
        "provenance": dataset.provenance,
    })


def read_dataset(csv_path: Path) -> Dataset:
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise FileNotFoundError(f"missing artifact: {csv_path}")
    side = read_json(sidecar_path(csv_path))
    grid = grid_from_dict(side["grid"])
    header, data = read_table_csv(csv_path)
    if header != dataset_header(grid.count):
        raise ValueError(f"{csv_path}: header does not match dataset format "
                         f"for a {grid.count}-point grid")
    values = np.ascontiguousarray(data[:, :grid.count])
    labels = LabelSet(y1=data[:, grid.count].astype(np.int64),
                      y2=data[:, grid.count + 1].astype(np.int64),
                      y3=data[:, grid.count + 2].copy())
    return Dataset(grid, values, labels, side.get("provenance", {}))


def params_from_sidecar(csv_path: Path) -> SimParams:
    side = read_json(sidecar_path(csv_path))
    return SimParams.from_dict(side["provenance"]["params"])


def scores_header(r: int) -> list[str]:
    return [f"fpc_{j + 1}" for j in range(r)] + ["y1", "y2", "y3"]


def write_scores(csv_path: Path, scores: np.ndarray, labels: LabelSet) -> None:
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    r = scores.shape[1]
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(scores_header(r)) + "\n")
        for i in range(scores.shape[0]):
            vals = ",".join(_fmt(v) for v in scores[i])
            fh.write(f"{vals},{int(labels.y1[i])},{int(labels.y2[i])},"
                     f"{_fmt(labels.y3[i])}\n")


def read_scores(csv_path: Path) -> tuple[np.ndarray, LabelSet]:
    header, data = read_table_csv(csv_path)
    r = len(header) - 3
    if r < 1 or header != scores_header(r):
        raise ValueError(f"{csv_path}: not a score-matrix file")
    scores = np.ascontiguousarray(data[:, :r])
    labels = LabelSet(y1=data[:, r].astype(np.int64),
                      y2=data[:, r + 1].astype(np.int64),
                      y3=data[:, r + 2].copy())
    return scores, labels
