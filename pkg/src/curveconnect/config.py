"""Pipeline configuration and its ``key=value`` file format."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    s1: float = 0.5
    s2: float = 0.2
    s3: float = 0.4
    n_sample: int = 512
    max_rois: int = 2000
    canvas_stride: float = 4.0
    strides: tuple[int, ...] = (8, 16, 32, 64)
    k_set: tuple[float, ...] = (2.0, 2.5, 3.0, 3.5)
    seed: int = 0
    iou_thr: float = 0.5

    def __post_init__(self):
        for name in ("s1", "s2", "s3", "iou_thr"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.max_rois < 1:
            raise ConfigError("max_rois must be at least 1")
        if self.n_sample < 7:
            raise ConfigError("n_sample must be at least 7")
        if not self.canvas_stride > 0:
            raise ConfigError("canvas_stride must be positive")
        if not self.strides or any(s <= 0 for s in self.strides):
            raise ConfigError("strides must be positive")
        if not self.k_set or any(k <= 0 for k in self.k_set):
            raise ConfigError("k_set must be positive")

    def updated(self, **overrides: Any) -> PipelineConfig:
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean)

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _convert(key: str, raw: str) -> Any:
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple[int, ...]":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if kind == "tuple[float, ...]":
            return tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    raise ConfigError(f"unsupported config type for {key}")


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    return replace(base or PipelineConfig(), **values)


def load_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is not None:
        cfg = parse_config(Path(path).read_text(), cfg)
    if overrides:
        cfg = cfg.updated(**overrides)
    return cfg
