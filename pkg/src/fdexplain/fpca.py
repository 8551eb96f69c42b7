"""Functional principal component analysis on a uniform grid.

The covariance operator eigenproblem, discretized with quadrature weight
dt, is equivalent to the symmetric eigenproblem of the dt-scaled sample
covariance. We solve it through the SVD of the centered data matrix scaled
by sqrt(dt): with C = X - mean and S = C*sqrt(dt) = U diag(s) V^T,

    eigenvalue_j  = s_j**2 / (n - 1)
    eigenfunction_j = V_j / sqrt(dt)

which makes the eigenfunctions orthonormal under the quadrature inner
product sum_i f(t_i) g(t_i) dt, and score variances equal the eigenvalues.

Sign convention: every eigenfunction is oriented so its quadrature inner
product with (first training signature - mean) is non-negative; ties
(|inner product| <= 1e-12) orient the earliest nonzero grid value positive.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import (FORMAT_VERSION, grid_from_dict, grid_to_dict, read_json,
                     read_table_csv, write_json, write_table_csv)
from .errors import NumericalError
from .sim import Dataset, TimeGrid

RANK_TRUNCATION_RATIO = 1e-12
SIGN_TIE_TOL = 1e-12
SIGN_CONVENTION = "first-train-signature-nonnegative"


@dataclass(frozen=True)
class FpcaModel:
    """Fitted decomposition. `eigenfunctions` holds one component per row."""

    grid: TimeGrid
    mean: np.ndarray
    eigenfunctions: np.ndarray
    eigenvalues: np.ndarray
    n_train: int

    def __post_init__(self):
        for name in ("mean", "eigenfunctions", "eigenvalues"):
            arr = getattr(self, name)
            arr.flags.writeable = False

    @property
    def dt(self) -> float:
        return self.grid.dt

    @property
    def n_components(self) -> int:
        return self.eigenvalues.size


def _as_values(data, m: int) -> np.ndarray:
    values = data.values if isinstance(data, Dataset) else np.atleast_2d(
        np.asarray(data, dtype=np.float64))
    if values.shape[1] != m:
        raise ValueError(f"signatures have {values.shape[1]} points, "
                         f"model grid has {m}")
    return values


def fit(train: Dataset) -> FpcaModel:
    """Estimate mean, eigenfunctions and eigenvalues from training signatures."""
    n, m = train.values.shape
    if n < 2:
        raise ValueError("fPCA needs at least 2 training signatures")
    mean = train.values.mean(axis=0)
    centered = train.values - mean
    scaled = centered * np.sqrt(train.grid.dt)
    try:
        _, svals, vt = np.linalg.svd(scaled, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD failed on {n}x{m} centered data matrix: {exc}") from exc

    r = min(n - 1, m)
    svals = svals[:r]
    vt = vt[:r]
    eigenvalues = svals ** 2 / (n - 1)
    if eigenvalues[0] > 0.0:
        keep = int(np.sum(eigenvalues >= RANK_TRUNCATION_RATIO * eigenvalues[0]))
        eigenvalues = eigenvalues[:keep]
        vt = vt[:keep]

    # orient: quadrature inner product of component j with the first
    # centered signature is scaled[0] @ V_j
    first_scores = scaled[0] @ vt.T
    for j in range(vt.shape[0]):
        if first_scores[j] < -SIGN_TIE_TOL:
            vt[j] = -vt[j]
        elif abs(first_scores[j]) <= SIGN_TIE_TOL:
            nonzero = np.flatnonzero(np.abs(vt[j]) > SIGN_TIE_TOL)
            if nonzero.size and vt[j, nonzero[0]] < 0.0:
                vt[j] = -vt[j]

    eigenfunctions = vt / np.sqrt(train.grid.dt)
    return FpcaModel(train.grid, mean, np.ascontiguousarray(eigenfunctions),
                     eigenvalues.copy(), n)


def transform(model: FpcaModel, data) -> np.ndarray:
    """Project signatures to component scores (one row per signature)."""
    values = _as_values(data, model.grid.count)
    return (values - model.mean) @ model.eigenfunctions.T * model.dt


def inverse_transform(model: FpcaModel, scores: np.ndarray,
                      k: int | None = None) -> np.ndarray:
    """Reconstruct signatures from the first k component scores."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    if k is None:
        k = model.n_components
    if k > model.n_components:
        raise ValueError(f"k={k} exceeds {model.n_components} components")
    return model.mean + scores[:, :k] @ model.eigenfunctions[:k]


def variance_explained(model: FpcaModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-component variance fractions and their cumulative sums."""
    total = float(np.sum(model.eigenvalues))
    if total <= 0.0:
        raise ValueError("model has no positive eigenvalues")
    fractions = model.eigenvalues / total
    return fractions, np.cumsum(fractions)


def save_model(model: FpcaModel, outdir: Path) -> None:
    """Persist as JSON manifest plus CSV matrices for mean and eigenfunctions."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_json(outdir / "fpca.json", {
        "format_version": FORMAT_VERSION,
        "grid": grid_to_dict(model.grid),
        "dt": model.dt,
        "n_train": model.n_train,
        "n_components": model.n_components,
        "eigenvalues": [float(v) for v in model.eigenvalues],
        "sign_convention": SIGN_CONVENTION,
    })
    t = model.grid.points
    write_table_csv(outdir / "mean.csv", ["t", "mean"],
                    np.column_stack([t, model.mean]))
    header = ["t"] + [f"fpc_{j + 1}" for j in range(model.n_components)]
    write_table_csv(outdir / "eigenfunctions.csv", header,
                    np.column_stack([t, model.eigenfunctions.T]))


def load_model(outdir: Path) -> FpcaModel:
    outdir = Path(outdir)
    meta = read_json(outdir / "fpca.json")
    grid = grid_from_dict(meta["grid"])
    _, mean_tab = read_table_csv(outdir / "mean.csv")
    _, eig_tab = read_table_csv(outdir / "eigenfunctions.csv")
    eigenfunctions = np.ascontiguousarray(eig_tab[:, 1:].T)
    if eigenfunctions.shape[0] != meta["n_components"]:
        raise ValueError(f"{outdir}: eigenfunctions.csv does not match manifest")
    return FpcaModel(grid, mean_tab[:, 1].copy(), eigenfunctions,
                     np.asarray(meta["eigenvalues"], dtype=np.float64),
                     int(meta["n_train"]))
