"""Single configuration surface for all pipeline tunables."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

__all__ = ["PipelineConfig", "ConfigConflict", "MissingInput"]


class ConfigConflict(ValueError):
    """The config file contains unknown or ill-typed settings."""


class MissingInput(FileNotFoundError):
    """A stage input file does not exist."""

    def __init__(self, path: str | Path, what: str = "input"):
        self.path = Path(path)
        super().__init__(f"missing {what}: {self.path}")


@dataclass
class PipelineConfig:
    """Every tunable of the pipeline, with configured defaults.

    Values come from an optional JSON config file; explicit command-line
    flags override file values. The fully resolved config of a run is
    written next to the artifacts.
    """

    # clustering
    min_cluster_size: int = 3
    eps: float = 2.0
    merge_threshold: float = 1.6
    # mention grouping
    sim_threshold: float = 0.85
    # graph expansion
    top_k_candidates: int = 20
    min_edge_support: int = 5
    min_degree: int = 3
    # sequencing
    start_const: float = 1.0
    term_const: float = 1e-3
    pairs: str = "adjacent"
    per_review_dedup: bool = False
    # impressions
    tau_skew: float = 1.0
    tau_mean: float | None = None
    tau_var: float | None = None
    entropy_bins: int = 50
    kernel_width: int = 3
    pca_components: int = 4
    # misc
    seed: int = 0

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise MissingInput(path, "config file") from None
        except json.JSONDecodeError as exc:
            raise ConfigConflict(f"{path}: invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ConfigConflict(f"{path}: config must be a JSON object")
        unknown = set(obj) - set(cls.field_names())
        if unknown:
            raise ConfigConflict(f"{path}: unknown settings {sorted(unknown)}")
        return cls(**obj)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        """Apply non-None overrides (CLI flags beat file values)."""
        updates = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(updates) - set(self.field_names())
        if unknown:
            raise ConfigConflict(f"unknown settings {sorted(unknown)}")
        return dataclasses.replace(self, **updates)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def write_resolved(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
