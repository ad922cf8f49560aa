"""Pipeline configuration: a flat ``key = value`` text file.

Every key, its type and its default is listed in ``KEYS``. Relative paths are
resolved against the directory holding the config file. Unknown keys are
errors. Validation collects every problem before reporting.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .fuzzy import DEFAULT_THRESHOLD
from .som import KINDS, MODES, Phase, Topology, TrainingSchedule
from .viz import COLORMAPS, DEFAULT_COLORMAP

OUTPUT_DIR_ENV = "SOMDELPHI_OUTPUT_DIR"
SECTION = "pipeline"

# key: (type, default, help). A default of None means optional/unset.
KEYS = {
    "dataset": ("path", None, "respondent CSV (required)"),
    "panel": ("path", None, "expert panel CSV; enables Delphi screening"),
    "threshold": ("float", DEFAULT_THRESHOLD, "screening threshold on the geometric mean (strict >)"),
    "topology": ("choice", "hexagonal", "lattice kind: hexagonal | rectangular"),
    "rows": ("int", 10, "lattice rows"),
    "cols": ("int", 10, "lattice columns"),
    "mode": ("choice", "sequential", "training mode: sequential | batch"),
    "seed": ("int", 42, "PRNG seed (unsigned 64-bit)"),
    "shuffle": ("bool", True, "reshuffle samples every epoch (sequential mode)"),
    "epochs": ("int", None, "total epochs, split evenly between phases (rough gets the larger half)"),
    "rough_epochs": ("int", 100, "rough phase epochs"),
    "rough_lr_start": ("float", 0.5, "rough phase initial learning rate"),
    "rough_lr_end": ("float", 0.05, "rough phase final learning rate"),
    "rough_radius_start": ("float", None, "rough phase initial radius in lattice units; default max(rows, cols)/2"),
    "rough_radius_end": ("float", 1.0, "rough phase final radius"),
    "fine_epochs": ("int", 100, "fine phase epochs"),
    "fine_lr_start": ("float", 0.05, "fine phase initial learning rate"),
    "fine_lr_end": ("float", 0.01, "fine phase final learning rate"),
    "fine_radius_start": ("float", 1.0, "fine phase initial radius"),
    "fine_radius_end": ("float", 0.3, "fine phase final radius"),
    "radius_floor": ("float", 0.01, "lower clamp applied to every radius during training"),
    "output_dir": ("path_out", "somdelphi_out", "directory for all artifacts"),
    "colormap": ("choice", DEFAULT_COLORMAP, "heatmap colormap: " + " | ".join(sorted(COLORMAPS))),
    "cell_px": ("int", 20, "pixels per heatmap cell"),
    "position_dims": ("pair", (0, 1), "two 0-based input dimensions for the weight-position plot"),
    "expert_ranking": ("path", None, "CSV (variable, rank) to compare the study ranking against"),
    "importance": ("choice", "mean", "importance score: mean | mean_abs"),
}
CHOICES = {
    "topology": KINDS,
    "mode": MODES,
    "colormap": tuple(sorted(COLORMAPS)),
    "importance": ("mean", "mean_abs"),
}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class PipelineConfig:
    dataset: Path
    panel: Optional[Path]
    threshold: float
    topology: Topology
    schedule: TrainingSchedule
    output_dir: Path
    colormap: str
    cell_px: int
    position_dims: tuple
    expert_ranking: Optional[Path]
    importance: str

    def to_items(self) -> dict:
        """Fully resolved key/value strings; feeding them back reproduces this config."""
        s = self.schedule
        items = {
            "dataset": str(self.dataset),
            "panel": str(self.panel) if self.panel else "",
            "threshold": repr(self.threshold),
            "topology": self.topology.kind,
            "rows": str(self.topology.rows),
            "cols": str(self.topology.cols),
            "mode": s.mode,
            "seed": str(s.seed),
            "shuffle": str(s.shuffle).lower(),
            "output_dir": str(self.output_dir),
            "colormap": self.colormap,
            "cell_px": str(self.cell_px),
            "position_dims": f"{self.position_dims[0]}, {self.position_dims[1]}",
            "expert_ranking": str(self.expert_ranking) if self.expert_ranking else "",
            "importance": self.importance,
            "radius_floor": repr(s.radius_floor),
        }
        for name, phase in (("rough", s.rough), ("fine", s.fine)):
            for f in fields(phase):
                items[f"{name}_{f.name}"] = repr(getattr(phase, f.name))
        return items


def _convert(key, raw, kind, base_dir, errors):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind in ("path", "path_out"):
            if not raw:
                return None
            p = Path(raw).expanduser()
            return p if p.is_absolute() else (base_dir / p)
        if kind == "pair":
            parts = [int(x) for x in raw.replace(",", " ").split()]
            if len(parts) != 2:
                raise ValueError(f"expected two integers, got {raw!r}")
            return tuple(parts)
        if kind == "choice":
            if raw not in CHOICES[key]:
                raise ValueError(f"must be one of {', '.join(CHOICES[key])}, got {raw!r}")
            return raw
    except ValueError as exc:
        errors.append(f"{key}: {exc}")
        return None
    raise AssertionError(kind)


def build_config(items: dict, base_dir=".", check_paths: bool = True) -> PipelineConfig:
    """Validate raw string values and fill defaults; raises ConfigError listing every problem."""
    base_dir = Path(base_dir).resolve()
    errors = []
    vals = {}
    for key in items:
        if key not in KEYS:
            errors.append(f"{key}: unknown key")
    for key, (kind, default, _) in KEYS.items():
        if key in items and str(items[key]).strip() != "":
            vals[key] = _convert(key, str(items[key]), kind, base_dir, errors)
        else:
            vals[key] = Path(default) if kind == "path_out" and default else default
    if vals["output_dir"] is not None and not vals["output_dir"].is_absolute():
        vals["output_dir"] = base_dir / vals["output_dir"]

    if vals["dataset"] is None and "dataset" not in {e.split(":")[0] for e in errors}:
        errors.append("dataset: required")
    if check_paths:
        for key in ("dataset", "panel", "expert_ranking"):
            if vals[key] is not None and not vals[key].is_file():
                errors.append(f"{key}: file not found: {vals[key]}")
    for key in ("rows", "cols", "cell_px"):
        if vals[key] is not None and vals[key] < 1:
            errors.append(f"{key}: must be >= 1, got {vals[key]}")
    if vals["threshold"] is not None and not vals["threshold"] > 0:
        errors.append(f"threshold: must be positive, got {vals['threshold']}")
    if vals["seed"] is not None and not 0 <= vals["seed"] < 2**64:
        errors.append(f"seed: must be an unsigned 64-bit integer, got {vals['seed']}")
    if vals["position_dims"] is not None and min(vals["position_dims"]) < 0:
        errors.append("position_dims: indices must be >= 0")
    if vals["epochs"] is not None:
        if "rough_epochs" in items or "fine_epochs" in items:
            errors.append("epochs: cannot be combined with rough_epochs/fine_epochs")
        elif vals["epochs"] < 0:
            errors.append(f"epochs: must be >= 0, got {vals['epochs']}")
        else:
            vals["fine_epochs"] = vals["epochs"] // 2
            vals["rough_epochs"] = vals["epochs"] - vals["fine_epochs"]
    for key in ("rough_epochs", "fine_epochs"):
        if vals[key] is not None and vals[key] < 0:
            errors.append(f"{key}: must be >= 0, got {vals[key]}")

    if errors:
        raise ConfigError(errors)

    if vals["rough_radius_start"] is None:
        vals["rough_radius_start"] = max(max(vals["rows"], vals["cols"]) / 2.0, vals["rough_radius_end"])
    phases = {}
    for name in ("rough", "fine"):
        phases[name] = Phase(
            vals[f"{name}_epochs"],
            vals[f"{name}_lr_start"],
            vals[f"{name}_lr_end"],
            vals[f"{name}_radius_start"],
            vals[f"{name}_radius_end"],
        )
    # schedule checks are collected rather than raised one by one
    sched_errors = phases["rough"].validate("rough") + phases["fine"].validate("fine")
    if not vals["radius_floor"] > 0:
        sched_errors.append("radius_floor: must be positive")
    if sched_errors:
        raise ConfigError(sched_errors)

    return PipelineConfig(
        dataset=vals["dataset"],
        panel=vals["panel"],
        threshold=vals["threshold"],
        topology=Topology(vals["topology"], vals["rows"], vals["cols"]),
        schedule=TrainingSchedule(
            phases["rough"], phases["fine"], vals["mode"], vals["seed"], vals["shuffle"], vals["radius_floor"]
        ),
        output_dir=vals["output_dir"],
        colormap=vals["colormap"],
        cell_px=vals["cell_px"],
        position_dims=vals["position_dims"],
        expert_ranking=vals["expert_ranking"],
        importance=vals["importance"],
    )


def read_items(path) -> dict:
    """Parse a config file into raw key/value strings."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    parser = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",)
    )
    parser.optionxform = str
    try:
        parser.read_string(f"[{SECTION}]\n" + path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    extra = [s for s in parser.sections() if s != SECTION]
    if extra:
        raise ConfigError([f"{path}: sections are not supported ({', '.join(extra)})"])
    return dict(parser[SECTION])


def validate_config(path, overrides: Optional[dict] = None) -> PipelineConfig:
    """Load, apply overrides, and validate a config file.

    Precedence for ``output_dir``: override > $SOMDELPHI_OUTPUT_DIR > file.
    """
    path = Path(path)
    items = read_items(path)
    env_out = os.environ.get(OUTPUT_DIR_ENV)
    if env_out:
        items["output_dir"] = str(Path(env_out).resolve())
    overrides = dict(overrides or {})
    if "epochs" in overrides:
        items.pop("rough_epochs", None)
        items.pop("fine_epochs", None)
    items.update(overrides)
    return build_config(items, base_dir=path.parent)


def describe_keys() -> str:
    lines = []
    for key, (kind, default, text) in KEYS.items():
        d = "" if default is None else f" [default: {default if not isinstance(default, tuple) else ', '.join(map(str, default))}]"
        lines.append(f"{key} ({kind}){d}: {text}")
    return "\n".join(lines)
