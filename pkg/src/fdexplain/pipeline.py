"""End-to-end run orchestration.

A run executes simulate -> split -> component fit -> score transform ->
train three networks -> metrics -> permutation importance -> figures ->
report, all derived from one master seed, and records a manifest that
pins the materialized configuration, per-stage seeds, artifact paths,
and the numerics backend. Re-running the same configuration into a clean
directory reproduces every artifact byte for byte; manifest timings are
the only varying fields.
"""

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import explain, fpca, metrics, mlp, viz
from ._accel import BACKEND
from ._version import __version__
from .dataio import (read_json, write_dataset, write_json, write_scores,
                     write_table_csv)
from .errors import PipelineError
from .seeding import stage_seed
from .sim import Dataset, SimParams, default_grid, generate_dataset

SCHEMA_VERSION = 1

TARGETS = ("y1", "y2", "y3")
TARGET_TASK = {"y1": "classification", "y2": "classification",
               "y3": "regression"}
TARGET_LOSS = {"y1": "zero_one", "y2": "zero_one", "y3": "squared"}

DEFAULT_RATIOS = (0.7225, 0.15, 0.1275)
SPLIT_NAMES = ("train", "test", "validation")

DEFAULT_FIGURES = (
    "heatmap",
    "groups:by-y1", "groups:by-y2", "groups:by-y3-quartile",
    "eigenfunction:1", "eigenfunction:2", "eigenfunction:3",
    "mean-pm:1", "mean-pm:2", "mean-pm:3",
    "bundles:1", "bundles:2",
    "scatter:1,2:y1", "scatter:1,3:y2", "scatter:2:y3",
)

NEGLIGIBLE_INDEX = 10
NEGLIGIBLE_FRACTION = 0.05


def _default_mlp_configs() -> dict:
    # Raw scores keep the sqrt-eigenvalue scale, which already orders the
    # inputs by signal content; standardizing would blow the ~990 noise
    # columns up to unit variance and swamp training at this width.
    return {t: mlp.MlpConfig(task=TARGET_TASK[t], standardize=False)
            for t in TARGETS}


@dataclass
class RunConfig:
    """Materialized run settings; serializes to versioned JSON.

    Network training seeds and permutation seeds are derived from
    `seed` (the master seed) and the stage name, so one integer pins the
    whole run. The per-network `MlpConfig.seed` field acts as an extra
    key mixed into that derivation.
    """
    n: int = 2000
    grid_count: int = 1000
    grid_start: float = -4.0
    grid_stop: float = 0.0
    sim: SimParams = field(default_factory=SimParams)
    ratios: tuple = DEFAULT_RATIOS
    seed: int = 42
    mlp_configs: dict = field(default_factory=_default_mlp_configs)
    pfi_replications: int = 10
    pfi_split: str = "test"
    figures: tuple = DEFAULT_FIGURES
    bundle_size: int = 50
    heatmap_stride: int = 25
    outdir: str = "run"

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be >= 3")
        if self.grid_count < 2:
            raise ValueError("grid_count must be >= 2")
        self.ratios = tuple(float(r) for r in self.ratios)
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise ValueError("ratios must be three positive fractions")
        if abs(sum(self.ratios) - 1.0) > 1e-12:
            raise ValueError("ratios must sum to 1 within 1e-12")
        if set(self.mlp_configs) != set(TARGETS):
            raise ValueError(f"mlp_configs must cover exactly {TARGETS}")
        for t in TARGETS:
            if self.mlp_configs[t].task != TARGET_TASK[t]:
                raise ValueError(f"{t} network must have task "
                                 f"{TARGET_TASK[t]!r}")
        if self.pfi_replications < 1:
            raise ValueError("pfi_replications must be >= 1")
        if self.pfi_split not in SPLIT_NAMES:
            raise ValueError(f"pfi_split must be one of {SPLIT_NAMES}")
        self.figures = tuple(self.figures)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "grid": {"count": self.grid_count, "start": self.grid_start,
                     "stop": self.grid_stop},
            "sim_params": self.sim.to_dict(),
            "ratios": list(self.ratios),
            "seed": self.seed,
            "mlp": {t: self.mlp_configs[t].to_dict() for t in TARGETS},
            "pfi": {"replications": self.pfi_replications,
                    "split": self.pfi_split},
            "figures": list(self.figures),
            "bundle_size": self.bundle_size,
            "heatmap_stride": self.heatmap_stride,
            "outdir": self.outdir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {"schema_version", "n", "grid", "sim_params", "ratios",
                 "seed", "mlp", "pfi", "figures", "bundle_size",
                 "heatmap_stride", "outdir"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema_version {version}")
        kwargs = {}
        for key in ("n", "seed", "outdir", "bundle_size", "heatmap_stride"):
            if key in d:
                kwargs[key] = d[key]
        grid = d.get("grid", {})
        for src, dst in (("count", "grid_count"), ("start", "grid_start"),
                         ("stop", "grid_stop")):
            if src in grid:
                kwargs[dst] = grid[src]
        if "sim_params" in d:
            kwargs["sim"] = SimParams.from_dict(d["sim_params"])
        if "ratios" in d:
            kwargs["ratios"] = tuple(d["ratios"])
        if "mlp" in d:
            base = _default_mlp_configs()
            base.update({t: mlp.MlpConfig.from_dict(c)
                         for t, c in d["mlp"].items()})
            kwargs["mlp_configs"] = base
        pfi = d.get("pfi", {})
        if "replications" in pfi:
            kwargs["pfi_replications"] = pfi["replications"]
        if "split" in pfi:
            kwargs["pfi_split"] = pfi["split"]
        if "figures" in d:
            kwargs["figures"] = tuple(d["figures"])
        return cls(**kwargs)


def config_digest(config: RunConfig) -> str:
    """sha256 over the canonical config JSON, excluding the output
    directory (two runs into different directories are the same run)."""
    d = config.to_dict()
    d.pop("outdir")
    return hashlib.sha256(
        json.dumps(d, sort_keys=True).encode("utf-8")).hexdigest()


def split_sizes(n: int, ratios=DEFAULT_RATIOS) -> tuple[int, int, int]:
    """Train and test sizes round half away from zero; validation takes
    the remainder."""
    n_train = int(np.floor(ratios[0] * n + 0.5))
    n_test = int(np.floor(ratios[1] * n + 0.5))
    n_val = n - n_train - n_test
    if min(n_train, n_test, n_val) < 1:
        raise ValueError(f"split sizes {(n_train, n_test, n_val)} for n={n} "
                         "leave an empty split")
    return n_train, n_test, n_val


def split(dataset: Dataset, ratios=DEFAULT_RATIOS,
          seed: int = 0) -> tuple[Dataset, Dataset, Dataset]:
    """Partition into train/test/validation by a seeded uniform shuffle.

    Every index lands in exactly one split; rows keep their original
    dataset order within each split.
    """
    if dataset.n < 3:
        raise ValueError("need at least 3 signatures to split")
    n_train, n_test, _ = split_sizes(dataset.n, ratios)
    perm = np.random.default_rng(np.random.SeedSequence(seed)).permutation(dataset.n)
    parts = (np.sort(perm[:n_train]),
             np.sort(perm[n_train:n_train + n_test]),
             np.sort(perm[n_train + n_test:]))
    out = []
    for name, idx in zip(SPLIT_NAMES, parts):
        ds = dataset.subset(idx)
        ds.provenance = dict(ds.provenance, split=name,
                             indices=[int(i) for i in idx])
        out.append(ds)
    return tuple(out)


@dataclass
class RunManifest:
    schema_version: int
    tool_version: str
    backend: str
    config: dict
    config_digest: str
    stage_seeds: dict
    realized_width: int | None
    artifacts: dict
    timings: dict
    completed_stages: list
    failed_stage: str | None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _target_vector(labels, target: str) -> np.ndarray:
    return np.asarray(getattr(labels, target), dtype=np.float64)


def _write_text_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(row) for row in rows]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def evaluate_models(models: dict, scores: dict, splits: dict) -> dict:
    """Metric values per target and split.

    Classifiers report accuracy and F1 (with a degeneracy flag when no
    positives exist in predictions or actuals); the regressor reports
    mean squared error and R^2.
    """
    summary = {}
    for target, model in models.items():
        per_split = {}
        for name in SPLIT_NAMES:
            actual = _target_vector(splits[name].labels, target)
            if model.config.task == "classification":
                predicted = model.predict_labels(scores[name])
                value_f1, degenerate = metrics.f1_info(predicted, actual)
                per_split[name] = {
                    "accuracy": metrics.accuracy(predicted, actual),
                    "f1": value_f1,
                    "f1_degenerate": degenerate,
                }
            else:
                predicted = model.predict(scores[name])
                per_split[name] = {
                    "mse": metrics.mse(predicted, actual),
                    "r2": metrics.r2(predicted, actual),
                }
        summary[target] = per_split
    return summary


def ranking_checks(pfi_reports: dict) -> dict:
    """Qualitative expectations on the importance rankings.

    The binary-intensity target should be led by components 1 and 2; the
    gain target should keep component 1 in its top two and component 3 in
    its top three; the continuous timing target should be led by
    component 2; and every component beyond index 10 should be negligible
    (mean importance magnitude under 5% of that target's maximum).
    """
    ranks = {t: explain.rank_features(r) for t, r in pfi_reports.items()}
    checks = {}
    r1, r2_, r3 = ranks["y1"], ranks["y2"], ranks["y3"]
    checks["y1_top2_is_fpc_1_2"] = bool(len(r1) >= 2
                                        and set(r1[:2].tolist()) == {1, 2})
    checks["y2_top2_contains_fpc_1"] = bool(len(r2_) >= 2 and 1 in r2_[:2])
    checks["y2_top3_contains_fpc_3"] = bool(len(r2_) >= 3 and 3 in r2_[:3])
    checks["y3_top1_is_fpc_2"] = bool(len(r3) >= 1 and r3[0] == 2)
    tail_ok = True
    for report in pfi_reports.values():
        means = report.mean_importance
        peak = float(means.max())
        if peak <= 0:
            tail_ok = False
            break
        tail = np.abs(means[NEGLIGIBLE_INDEX:])
        if tail.size and float(tail.max()) >= NEGLIGIBLE_FRACTION * peak:
            tail_ok = False
            break
    checks["tail_importance_negligible"] = tail_ok
    return checks


def _figure_name(entry: str) -> str:
    return (entry.replace(":", "_").replace(",", "_")
            .replace("-", "_"))


def build_figure(entry: str, config: RunConfig, dataset: Dataset,
                 train_ds: Dataset, model, eval_scores: np.ndarray,
                 eval_labels) -> viz.PlotSpec:
    """Construct the PlotSpec for one figure-list entry.

    Entries: `heatmap`, `groups:<grouping>`, `eigenfunction:<j>`,
    `mean-pm:<j>`, `bundles:<j>`, `scatter:<a>,<b>:<target>` (binary
    target) or `scatter:<a>:<target>` (continuous target).
    """
    head, _, rest = entry.partition(":")
    if head == "heatmap":
        return viz.correlation_heatmap(dataset, config.heatmap_stride)
    if head == "groups":
        return viz.group_means_plot(dataset, rest)
    if head == "eigenfunction":
        return viz.eigenfunction_plot(model, int(rest))
    if head == "mean-pm":
        return viz.mean_pm_eigenfunction(model, int(rest))
    if head == "bundles":
        return viz.extreme_score_bundles(model, train_ds, int(rest),
                                         config.bundle_size)
    if head == "scatter":
        comps_part, _, target = rest.partition(":")
        if target not in TARGETS:
            raise ValueError(f"unknown scatter target in figure {entry!r}")
        comps = [int(c) for c in comps_part.split(",")]
        targets = _target_vector(eval_labels, target)
        return viz.score_scatter(eval_scores, targets, comps,
                                 target_name=target)
    raise ValueError(f"unknown figure entry {entry!r}")


def emit_figures(config: RunConfig, outdir: Path, dataset: Dataset,
                 train_ds: Dataset, model, eval_scores: np.ndarray,
                 eval_labels) -> dict:
    """Render every configured figure into `<outdir>/figures`."""
    figdir = Path(outdir) / "figures"
    paths = {}
    for entry in config.figures:
        spec = build_figure(entry, config, dataset, train_ds, model,
                            eval_scores, eval_labels)
        name = _figure_name(entry)
        svg_path, csv_path = viz.save_figure(spec, figdir, name)
        paths[f"figure_{name}_svg"] = str(svg_path.relative_to(outdir))
        paths[f"figure_{name}_csv"] = str(csv_path.relative_to(outdir))
    return paths


def write_report(outdir: Path, config: RunConfig, model, metric_summary: dict,
                 pfi_reports: dict) -> dict:
    """Write report.json and report.md; returns artifact paths.

    The report states the realized score width (component count is capped
    by the training-set rank), per-split metrics, importance rankings,
    and the qualitative ranking checks with any deviations flagged.
    """
    outdir = Path(outdir)
    fractions, cumulative = fpca.variance_explained(model)
    checks = ranking_checks(pfi_reports)
    deviations = [name for name, ok in checks.items() if not ok]
    rankings = {t: [int(v) for v in explain.rank_features(r)]
                for t, r in pfi_reports.items()}
    top10 = {t: rankings[t][:10] for t in TARGETS}
    report = {
        "schema_version": SCHEMA_VERSION,
        "config_digest": config_digest(config),
        "backend": BACKEND,
        "n": config.n,
        "split_sizes": dict(zip(SPLIT_NAMES, split_sizes(config.n,
                                                         config.ratios))),
        "realized_width": model.n_components,
        "grid_count": config.grid_count,
        "variance_explained": {
            "first": float(fractions[0]),
            "top3_cumulative": float(cumulative[min(2, len(cumulative) - 1)]),
            "fractions_top10": [float(v) for v in fractions[:10]],
        },
        "metrics": metric_summary,
        "pfi": {
            t: {
                "ranking_top10": top10[t],
                "baseline_loss": pfi_reports[t].baseline_loss,
                "mean_importance_top10": [
                    float(pfi_reports[t].mean_importance[j - 1])
                    for j in top10[t]
                ],
            } for t in TARGETS
        },
        "ranking_checks": checks,
        "deviations": deviations,
    }
    write_json(outdir / "report.json", report)

    lines = ["# Run report", ""]
    lines.append(f"- backend: {BACKEND}")
    lines.append(f"- signatures: {config.n} on {config.grid_count} grid points")
    lines.append(f"- master seed: {config.seed}")
    sizes = split_sizes(config.n, config.ratios)
    lines.append(f"- split sizes: train {sizes[0]}, test {sizes[1]}, "
                 f"validation {sizes[2]}")
    lines.append(f"- realized score width: {model.n_components} components "
                 "(capped by training-set rank)")
    lines.append("")
    lines.append("## Variance explained")
    lines.append("")
    lines.append(f"- first component: {fractions[0]:.4f}")
    lines.append(f"- first three cumulative: "
                 f"{cumulative[min(2, len(cumulative) - 1)]:.4f}")
    lines.append("")
    lines.append("## Model quality")
    lines.append("")
    lines.append("| target | split | " + " | ".join(
        ["accuracy", "f1", "mse", "r2"]) + " |")
    lines.append("|---|---|---|---|---|---|")
    for target in TARGETS:
        for name in SPLIT_NAMES:
            row = metric_summary[target][name]
            cells = [f"{row[k]:.4f}" if k in row else "-"
                     for k in ("accuracy", "f1", "mse", "r2")]
            lines.append(f"| {target} | {name} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("## Importance rankings (top 10)")
    lines.append("")
    for target in TARGETS:
        lines.append(f"- {target}: " + ", ".join(str(v) for v in top10[target]))
    lines.append("")
    lines.append("## Ranking checks")
    lines.append("")
    for name, ok in checks.items():
        lines.append(f"- {name}: {'pass' if ok else 'DEVIATION'}")
    if deviations:
        lines.append("")
        lines.append("Deviations from the expected component-role mapping "
                     "were detected; see ranking_checks in report.json.")
    with open(outdir / "report.md", "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return {"report_json": "report.json", "report_md": "report.md"}


def run_pipeline(config: RunConfig) -> RunManifest:
    """Execute the full pipeline into `config.outdir`.

    Any stage failure writes a manifest flagging the failed stage and the
    artifacts completed so far, then raises PipelineError naming the
    stage.
    """
    outdir = Path(config.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for sub in ("data", "fpca", "scores", "models", "pfi", "tables"):
        (outdir / sub).mkdir(exist_ok=True)

    artifacts = {}
    timings = {}
    stage_seeds = {}
    completed = []
    state = {"realized_width": None}

    write_json(outdir / "config.json", config.to_dict())
    artifacts["config"] = "config.json"

    def manifest(failed: str | None) -> RunManifest:
        return RunManifest(schema_version=SCHEMA_VERSION,
                           tool_version=__version__,
                           backend=BACKEND,
                           config=config.to_dict(),
                           config_digest=config_digest(config),
                           stage_seeds=dict(stage_seeds),
                           realized_width=state["realized_width"],
                           artifacts=dict(artifacts),
                           timings=dict(timings),
                           completed_stages=list(completed),
                           failed_stage=failed)

    def run_stage(name: str, fn):
        start = time.perf_counter()
        try:
            fn()
        except Exception as exc:
            write_json(outdir / "manifest.json", manifest(name).to_dict())
            raise PipelineError(name, exc) from exc
        timings[name] = time.perf_counter() - start
        completed.append(name)

    def stage_simulate():
        seed = stage_seed(config.seed, "simulate")
        stage_seeds["simulate"] = seed
        grid = default_grid(config.grid_count, config.grid_start,
                            config.grid_stop)
        state["dataset"] = generate_dataset(config.n, config.sim, seed, grid)
        write_dataset(state["dataset"], outdir / "data" / "dataset.csv")
        artifacts["dataset"] = "data/dataset.csv"

    def stage_split():
        seed = stage_seed(config.seed, "split")
        stage_seeds["split"] = seed
        parts = split(state["dataset"], config.ratios, seed)
        state["splits"] = dict(zip(SPLIT_NAMES, parts))
        for name, ds in state["splits"].items():
            write_dataset(ds, outdir / "data" / f"{name}.csv")
            artifacts[f"split_{name}"] = f"data/{name}.csv"

    def stage_fpca():
        model = fpca.fit(state["splits"]["train"])
        state["model"] = model
        state["realized_width"] = model.n_components
        fpca.save_model(model, outdir / "fpca")
        artifacts["fpca_model"] = "fpca/fpca.json"
        fractions, cumulative = fpca.variance_explained(model)
        rows = np.column_stack([
            np.arange(1, model.n_components + 1, dtype=np.float64),
            model.eigenvalues, fractions, cumulative,
        ])
        write_table_csv(outdir / "tables" / "variance_explained.csv",
                        ["component", "eigenvalue", "fraction", "cumulative"],
                        rows)
        artifacts["variance_explained"] = "tables/variance_explained.csv"

    def stage_transform():
        state["scores"] = {}
        for name, ds in state["splits"].items():
            s = fpca.transform(state["model"], ds)
            state["scores"][name] = s
            write_scores(outdir / "scores" / f"{name}.csv", s, ds.labels)
            artifacts[f"scores_{name}"] = f"scores/{name}.csv"

    def stage_train():
        state["mlps"] = {}
        train_scores = state["scores"]["train"]
        train_labels = state["splits"]["train"].labels
        for target in TARGETS:
            base = config.mlp_configs[target]
            seed = stage_seed(config.seed, f"train-{target}:{base.seed}")
            stage_seeds[f"train-{target}"] = seed
            effective = dataclasses.replace(base, seed=seed)
            model = mlp.train(train_scores,
                              _target_vector(train_labels, target), effective)
            state["mlps"][target] = model
            mlp.save_mlp(model, outdir / "models" / target)
            artifacts[f"mlp_{target}"] = f"models/{target}/mlp.json"

    def stage_metrics():
        summary = evaluate_models(state["mlps"], state["scores"],
                                  state["splits"])
        state["metrics"] = summary
        write_json(outdir / "tables" / "metrics.json", summary)
        rows = []
        for target in TARGETS:
            for name in SPLIT_NAMES:
                for metric, value in summary[target][name].items():
                    rows.append([target, name, metric, repr(float(value))])
        _write_text_csv(outdir / "tables" / "metrics.csv",
                        ["target", "split", "metric", "value"], rows)
        artifacts["metrics_json"] = "tables/metrics.json"
        artifacts["metrics_csv"] = "tables/metrics.csv"

    def stage_pfi():
        state["pfi"] = {}
        X = state["scores"][config.pfi_split]
        labels = state["splits"][config.pfi_split].labels
        for target in TARGETS:
            seed = stage_seed(config.seed, f"pfi-{target}")
            stage_seeds[f"pfi-{target}"] = seed
            report = explain.permutation_importance(
                state["mlps"][target].predict, X,
                _target_vector(labels, target), TARGET_LOSS[target],
                config.pfi_replications, seed)
            state["pfi"][target] = report
            explain.save_pfi(report, outdir / "pfi", target)
            artifacts[f"pfi_{target}"] = f"pfi/{target}_pfi.csv"

    def stage_report():
        paths = write_report(outdir, config, state["model"],
                             state["metrics"], state["pfi"])
        artifacts.update(paths)

    def stage_figures():
        paths = emit_figures(config, outdir, state["dataset"],
                             state["splits"]["train"], state["model"],
                             state["scores"][config.pfi_split],
                             state["splits"][config.pfi_split].labels)
        artifacts.update(paths)

    run_stage("simulate", stage_simulate)
    run_stage("split", stage_split)
    run_stage("fpca", stage_fpca)
    run_stage("transform", stage_transform)
    run_stage("train", stage_train)
    run_stage("metrics", stage_metrics)
    run_stage("pfi", stage_pfi)
    run_stage("report", stage_report)
    run_stage("figures", stage_figures)

    result = manifest(None)
    write_json(outdir / "manifest.json", result.to_dict())
    return result


def load_manifest(outdir: Path) -> dict:
    return read_json(Path(outdir) / "manifest.json")


def load_run_config(path: Path) -> RunConfig:
    return RunConfig.from_dict(read_json(Path(path)))
