"""CSV and JSON files exchanged with the command-line front end."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError

from scattomo.exceptions import ConfigValidationError
from scattomo.schemas.waveguide_schemas import GridAxis, SampledSurface

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

T_SURFACE_COLUMNS = ("khat", "delta_k", "delta_p", "re", "im", "abs2")


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write rows under a fixed header; floats use repr so reruns are byte-identical."""
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row of length {len(row)} does not match header {tuple(header)}")
            writer.writerow([_cell(value) for value in row])
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def read_csv(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def write_json(path: Path, document: BaseModel) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {type(document).__name__} to {path}")
    return path


def load_model(path: Path, model: type[ModelT]) -> ModelT:
    """Read and validate a JSON file.

    Raises:
        ConfigValidationError: If the file is missing or fails validation
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigValidationError(f"cannot read {path}: {e.strerror or e}")
    try:
        return model.model_validate_json(text)
    except ValidationError as e:
        raise ConfigValidationError(f"{path} is not a valid {model.__name__}: {e}")


def t_surface_rows(surface: SampledSurface) -> list[tuple[float, ...]]:
    """Rows in T_SURFACE_COLUMNS order, khat-major then delta_k then delta_p."""
    khat = surface.axis("khat").values
    delta_p = surface.axis("delta_p").values
    delta_k = surface.axis("delta_k").values
    order = [surface.axis_names.index(name) for name in ("khat", "delta_k", "delta_p")]
    values = np.transpose(np.asarray(surface.values), order)
    rows = []
    for i, k in enumerate(khat):
        for a, dk in enumerate(delta_k):
            for b, dp in enumerate(delta_p):
                value = complex(values[i, a, b])
                rows.append((float(k), float(dk), float(dp), value.real, value.imag, abs(value) ** 2))
    return rows


def write_t_surface(path: Path, surface: SampledSurface, scale: float = 1.0) -> Path:
    """T surface CSV; `scale` multiplies the values (e.g. gamma for |gamma T|^2)."""
    rows = [
        (k, dk, dp, re * scale, im * scale, abs2 * scale * scale) for k, dk, dp, re, im, abs2 in t_surface_rows(surface)
    ]
    return write_csv(path, T_SURFACE_COLUMNS, rows)


def read_t_surface(path: Path) -> SampledSurface:
    """Rebuild a (khat, delta_p, delta_k) surface from a CSV written by `write_t_surface`."""
    rows = read_csv(path)
    if not rows:
        raise ConfigValidationError(f"{path} holds no samples")

    def axis(name: str) -> GridAxis:
        points = np.unique(np.array([float(row[name]) for row in rows]))
        step = float(points[1] - points[0]) if points.size > 1 else 1.0
        return GridAxis(name=name, origin=float(points[0]), step=step, count=int(points.size))

    khat, delta_p, delta_k = axis("khat"), axis("delta_p"), axis("delta_k")
    values = np.zeros((khat.count, delta_p.count, delta_k.count), dtype=np.complex128)
    for row in rows:
        i = khat.index_of(float(row["khat"]), atol=1e-6)
        a = delta_p.index_of(float(row["delta_p"]), atol=1e-6)
        b = delta_k.index_of(float(row["delta_k"]), atol=1e-6)
        values[i, a, b] = complex(float(row["re"]), float(row["im"]))
    return SampledSurface(axes=(khat, delta_p, delta_k), values=values)


def load_config(path: Optional[str], seed: Optional[int], model: type[ModelT]) -> ModelT:
    """Load a command config (defaults when no path) and apply a --seed override."""
    config = load_model(Path(path), model) if path else model()
    if seed is None:
        return config
    try:
        return model.model_validate({**config.model_dump(), "seed": seed})
    except ValidationError as e:
        raise ConfigValidationError(f"invalid seed {seed}: {e}")
