"""Stage graph: screen -> load -> scale -> train -> visualize -> rank -> compare.

Every artifact is written with fixed numeric formatting so that two runs of the
same config are byte-identical. The manifest echoes the resolved config and can
be fed back to :func:`run_pipeline` to repeat a run.
"""
from __future__ import annotations

import csv
import json
import logging
import re
import time
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .analysis import compare_rankings, load_ranking, plane_correlation, rank_factors, write_comparison, write_ranking
from .config import PipelineConfig, build_config
from .fuzzy import load_panel, screen_variables, write_screening
from .preprocess import Dataset, load_dataset, save_dataset, scale_unit_variance
from .som import PRNG_NAME, data_range, init_grid, load_model, save_model, topographic_error, train
from .viz import get_colormap, hit_histogram, render_heatmap, umatrix, weight_planes, weight_positions, write_matrix_csv

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower() or "var"


class _Run:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.summary = {
            "version": __version__,
            "config": cfg.to_items(),
            "seed": cfg.schedule.seed,
            "prng": PRNG_NAME,
            "stages_completed": [],
            "timings": {},
            "artifacts": [],
        }

    def artifact(self, name: str) -> Path:
        self.summary["artifacts"].append(name)
        return self.out / name

    @contextmanager
    def stage(self, name: str):
        log.info("stage %s", name)
        t0 = time.perf_counter()
        try:
            yield
        except Exception as exc:
            self.summary["failed_stage"] = name
            self.summary["error"] = str(exc)
            raise StageError(name, exc) from exc
        finally:
            self.summary["timings"][name] = round(time.perf_counter() - t0, 6)
        self.summary["stages_completed"].append(name)

    def write_manifest(self, name=MANIFEST):
        (self.out / name).write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _prepare(run: _Run) -> Dataset:
    cfg = run.cfg
    selected = None
    if cfg.panel is not None:
        with run.stage("screen"):
            result = screen_variables(load_panel(cfg.panel), cfg.threshold)
            write_screening(result, run.artifact("screening.csv"))
            selected = result.selected_variables
            run.summary["selected_variables"] = selected
            if not selected:
                raise ValueError(f"no variable passed the threshold {cfg.threshold}")
    with run.stage("load"):
        ds = load_dataset(cfg.dataset)
        if selected is not None:
            ds = ds.select(selected)
        run.summary["n_samples"] = ds.n_samples
        run.summary["variables"] = list(ds.variable_names)
    with run.stage("scale"):
        ds = scale_unit_variance(ds)
        save_dataset(ds, run.artifact("scaled_dataset.csv"))
    return ds


def _write_history(report, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "phase", "mse"])
        rough = report.epochs_per_phase.get("rough", 0)
        for k, v in enumerate(report.mse_history):
            w.writerow([k + 1, "rough" if k < rough else "fine", f"{v:.17g}"])


def _train(run: _Run, ds: Dataset):
    cfg = run.cfg
    with run.stage("train"):
        grid = init_grid(cfg.topology, ds.n_variables, cfg.schedule.seed, data_range(ds))
        grid, report = train(grid, ds, cfg.schedule)
        save_model(grid, run.artifact("model.txt"), cfg.schedule.seed, cfg.schedule, ds.variable_names)
        _write_history(report, run.artifact("mse_history.csv"))
        run.summary["initial_mse"] = report.initial_mse
        run.summary["final_mse"] = report.final_mse
        run.summary["epochs_per_phase"] = report.epochs_per_phase
    return grid


def _report(run: _Run, ds: Dataset, grid):
    cfg = run.cfg
    names = list(ds.variable_names)
    with run.stage("visualize"):
        if grid.dim != ds.n_variables:
            raise ValueError(f"model dim {grid.dim} does not match dataset with {ds.n_variables} variables")
        cm = get_colormap(cfg.colormap)
        render_heatmap(umatrix(grid), cm, run.artifact("umatrix.ppm"), cfg.cell_px)
        hits = hit_histogram(grid, ds)
        render_heatmap(hits, cm, run.artifact("hits.ppm"), cfg.cell_px)
        planes = weight_planes(grid, names)
        for j, plane in enumerate(planes):
            render_heatmap(plane, cm, run.artifact(f"plane_{j + 1:02d}_{_slug(plane.label)}.ppm"), cfg.cell_px)
        weight_positions(grid, ds, cfg.position_dims, names).write(run.artifact("weight_positions.svg"))
        run.summary["artifacts"] += [
            p.replace(".ppm", ".csv") for p in run.summary["artifacts"] if p.endswith(".ppm")
        ]
        run.summary["hits_total"] = int(hits.values.sum())
        run.summary["topographic_error"] = topographic_error(grid, ds) if grid.n_neurons > 1 else None
    with run.stage("rank"):
        ranking = rank_factors(planes, names, absolute=cfg.importance == "mean_abs")
        write_ranking(ranking, run.artifact("ranking.csv"))
        run.summary["ranking"] = [name for name, _, _ in ranking.entries]
        if len(planes) > 1:
            try:
                write_matrix_csv(plane_correlation(planes), run.artifact("plane_correlation.csv"))
            except ValueError as exc:
                log.warning("plane correlation skipped: %s", exc)
    if cfg.expert_ranking is not None:
        with run.stage("compare"):
            expert = load_ranking(cfg.expert_ranking)
            dropped = [v for v in expert.variables if v not in ranking.variables]
            if dropped and "selected_variables" in run.summary:
                # variables removed by screening cannot be compared
                expert = expert.restricted([v for v in expert.variables if v in ranking.variables])
                run.summary["compare_dropped"] = dropped
            cmp = compare_rankings(expert, ranking)
            write_comparison(cmp, run.artifact("comparison.csv"))
            run.summary["spearman"] = cmp.spearman


def _execute(cfg: PipelineConfig, steps: str, model_path=None) -> dict:
    run = _Run(cfg)
    run.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        ds = _prepare(run)
        if steps in ("all", "train"):
            grid = _train(run, ds)
        else:
            with run.stage("load_model"):
                grid, _ = load_model(model_path or run.out / "model.txt")
        if steps in ("all", "report"):
            _report(run, ds, grid)
        run.summary["status"] = "ok"
    except StageError:
        run.summary["status"] = "failed"
        raise
    finally:
        run.summary["timings"]["total"] = round(time.perf_counter() - t0, 6)
        run.summary["artifacts"] = sorted(set(run.summary["artifacts"]))
        run.write_manifest(MANIFEST if steps == "all" else f"manifest_{steps}.json")
    return run.summary


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every configured stage; returns the manifest dict (also written to disk)."""
    return _execute(cfg, "all")


def run_train(cfg: PipelineConfig) -> dict:
    """Screening, loading, scaling and training only."""
    return _execute(cfg, "train")


def run_report(cfg: PipelineConfig, model_path=None) -> dict:
    """Visualize/rank/compare from a saved model (default: ``<output_dir>/model.txt``)."""
    return _execute(cfg, "report", model_path)


def config_from_manifest(path) -> PipelineConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return build_config(data["config"], base_dir=Path(path).parent)
