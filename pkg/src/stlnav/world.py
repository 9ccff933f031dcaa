"""Ground-truth world grid: semantic labels, stop signs, and stop zones.

The world is a top-down cell grid. Cell (row, col) covers
x in [col*res, (col+1)*res) and y in [row*res, (row+1)*res); positions on a
boundary belong to the higher-index cell. World files are YAML documents in
one of two grid forms: a character grid with a legend, or a background label
plus rectangular label regions (inclusive cell ranges).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Any, Mapping, Optional

import numpy as np
import yaml

from .errors import SchemaError, WorldError
from .semantic_map import DistanceField, distance_field

DEFAULT_SIGN_RADIUS = 5.0

_LABEL_RE = re.compile(r"^[a-z_][a-z0-9_]*$")


@dataclass(frozen=True)
class StopSign:
    """A stop sign at a fixed position with a detection radius."""

    x: float
    y: float
    radius: float = DEFAULT_SIGN_RADIUS

    def detects(self, x: float, y: float) -> bool:
        return math.hypot(x - self.x, y - self.y) <= self.radius


@dataclass(frozen=True)
class StopZone:
    """Axis-aligned region (meters) in which the robot must hold its stop."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self) -> None:
        if self.x0 >= self.x1 or self.y0 >= self.y1:
            raise WorldError("stop zone must have positive extent")

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


class WorldModel:
    """Immutable world snapshot; treat all attributes as read-only."""

    def __init__(
        self,
        grid: np.ndarray,
        labels: tuple[str, ...],
        resolution: float,
        obstacle_labels: tuple[str, ...] = ("obstacle", "tree"),
        stop_signs: tuple[StopSign, ...] = (),
        stop_zones: tuple[StopZone, ...] = (),
    ):
        grid = np.asarray(grid, dtype=np.int16)
        if grid.ndim != 2:
            raise WorldError("label grid must be 2-D")
        if not labels:
            raise WorldError("label set is empty")
        if len(set(labels)) != len(labels):
            raise WorldError("labels must be unique")
        for label in labels:
            if not _LABEL_RE.match(label):
                raise WorldError(f"label {label!r} is not a valid identifier")
        if grid.size and (grid.min() < 0 or grid.max() >= len(labels)):
            raise WorldError("grid references labels outside the label set")
        unknown = [name for name in obstacle_labels if name not in labels]
        if unknown:
            raise WorldError(f"obstacle label(s) not in label set: {', '.join(unknown)}")
        if resolution <= 0:
            raise WorldError("resolution must be positive")
        self.grid = grid
        self.labels = tuple(labels)
        self.resolution = float(resolution)
        self.obstacle_labels = tuple(obstacle_labels)
        self.stop_signs = tuple(stop_signs)
        self.stop_zones = tuple(stop_zones)
        self._distance: Optional[DistanceField] = None

    # -- geometry -----------------------------------------------------------

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def extent(self) -> tuple[float, float]:
        """(x span, y span) in meters."""
        return self.width * self.resolution, self.height * self.resolution

    def in_bounds(self, x: float, y: float) -> bool:
        span_x, span_y = self.extent
        return 0.0 <= x < span_x and 0.0 <= y < span_y

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        if not self.in_bounds(x, y):
            raise WorldError(f"position ({x:.3f}, {y:.3f}) outside world bounds")
        return int(math.floor(y / self.resolution)), int(math.floor(x / self.resolution))

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (col + 0.5) * self.resolution, (row + 0.5) * self.resolution

    # -- semantics ------------------------------------------------------------

    def label_index_at(self, x: float, y: float) -> int:
        row, col = self.cell_of(x, y)
        return int(self.grid[row, col])

    def label_at(self, x: float, y: float) -> str:
        return self.labels[self.label_index_at(x, y)]

    def obstacle_mask(self) -> np.ndarray:
        indices = [self.labels.index(name) for name in self.obstacle_labels]
        return np.isin(self.grid, indices)

    def distance_field(self) -> DistanceField:
        if self._distance is None:
            self._distance = distance_field(self.obstacle_mask(), self.resolution)
        return self._distance

    def distance_at(self, x: float, y: float) -> float:
        row, col = self.cell_of(x, y)
        return self.distance_field().at_cell(row, col)

    def in_stop_zone(self, x: float, y: float) -> bool:
        return any(zone.contains(x, y) for zone in self.stop_zones)

    def near_stop_sign(self, x: float, y: float) -> bool:
        return any(sign.detects(x, y) for sign in self.stop_signs)

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        index_to_char = {i: _LEGEND_ALPHABET[i] for i in range(len(self.labels))}
        rows = ["".join(index_to_char[int(v)] for v in row) for row in self.grid]
        return {
            "resolution": self.resolution,
            "labels": list(self.labels),
            "obstacle_labels": list(self.obstacle_labels),
            "legend": {index_to_char[i]: label for i, label in enumerate(self.labels)},
            "grid": rows,
            "stop_signs": [
                {"position": [sign.x, sign.y], "radius": sign.radius}
                for sign in self.stop_signs
            ],
            "stop_zones": [
                {"x": [zone.x0, zone.x1], "y": [zone.y0, zone.y1]}
                for zone in self.stop_zones
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "WorldModel":
        try:
            resolution = float(data["resolution"])
            labels = tuple(str(name) for name in data["labels"])
        except KeyError as exc:
            raise SchemaError(f"world file missing required key {exc.args[0]!r}") from None
        obstacle_labels = tuple(
            str(name) for name in data.get("obstacle_labels", ("obstacle", "tree"))
        )
        obstacle_labels = tuple(name for name in obstacle_labels if name in labels)

        if "grid" in data:
            grid = _grid_from_legend(data, labels)
        elif "regions" in data or "background" in data:
            grid = _grid_from_regions(data, labels)
        else:
            raise SchemaError("world file needs either a legend grid or background+regions")

        stop_signs = []
        for item in data.get("stop_signs", ()):
            radius = float(item.get("radius", DEFAULT_SIGN_RADIUS))
            if "position" in item:
                x, y = (float(v) for v in item["position"])
            elif "cell" in item:
                row, col = (int(v) for v in item["cell"])
                x, y = (col + 0.5) * resolution, (row + 0.5) * resolution
            else:
                raise SchemaError("stop sign needs a position or cell")
            stop_signs.append(StopSign(x, y, radius))

        stop_zones = []
        for item in data.get("stop_zones", ()):
            try:
                x0, x1 = (float(v) for v in item["x"])
                y0, y1 = (float(v) for v in item["y"])
            except KeyError as exc:
                raise SchemaError(f"stop zone missing key {exc.args[0]!r}") from None
            stop_zones.append(StopZone(x0, x1, y0, y1))

        return cls(
            grid,
            labels,
            resolution,
            obstacle_labels=obstacle_labels,
            stop_signs=tuple(stop_signs),
            stop_zones=tuple(stop_zones),
        )

    def to_file(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            yaml.safe_dump(self.to_dict(), handle, sort_keys=True)

    @classmethod
    def from_file(cls, path: str) -> "WorldModel":
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
        if not isinstance(data, Mapping):
            raise SchemaError(f"world file {path} is not a mapping document")
        return cls.from_dict(data)


_LEGEND_ALPHABET = ".sTwo#XABCDEFGHIJKLMNOPQRSUVWYZabcdefghijklmnpqrtuvxyz"


def _grid_from_legend(data: Mapping[str, Any], labels: tuple[str, ...]) -> np.ndarray:
    legend = data.get("legend")
    if not isinstance(legend, Mapping):
        raise SchemaError("legend grid form requires a legend mapping")
    char_to_index: dict[str, int] = {}
    for char, label in legend.items():
        char = str(char)
        if len(char) != 1:
            raise SchemaError(f"legend key {char!r} must be one character")
        if label not in labels:
            raise SchemaError(f"legend maps {char!r} to unknown label {label!r}")
        char_to_index[char] = labels.index(label)
    rows = data["grid"]
    if not rows:
        raise SchemaError("grid has no rows")
    width = len(rows[0])
    grid = np.zeros((len(rows), width), dtype=np.int16)
    for r, row in enumerate(rows):
        row = str(row)
        if len(row) != width:
            raise SchemaError(f"grid row {r} has length {len(row)}, expected {width}")
        for c, char in enumerate(row):
            if char not in char_to_index:
                raise SchemaError(f"grid row {r} uses character {char!r} not in legend")
            grid[r, c] = char_to_index[char]
    return grid


def _grid_from_regions(data: Mapping[str, Any], labels: tuple[str, ...]) -> np.ndarray:
    background = data.get("background")
    if background not in labels:
        raise SchemaError(f"background label {background!r} not in label set")
    size = data.get("size")
    if not size or len(size) != 2:
        raise SchemaError("regions grid form requires size: [rows, cols]")
    rows, cols = int(size[0]), int(size[1])
    if rows <= 0 or cols <= 0:
        raise SchemaError("grid size must be positive")
    grid = np.full((rows, cols), labels.index(background), dtype=np.int16)
    for region in data.get("regions", ()):
        label = region.get("label")
        if label not in labels:
            raise SchemaError(f"region label {label!r} not in label set")
        try:
            r0, r1 = (int(v) for v in region["rows"])
            c0, c1 = (int(v) for v in region["cols"])
        except KeyError as exc:
            raise SchemaError(f"region missing key {exc.args[0]!r}") from None
        if not (0 <= r0 <= r1 < rows and 0 <= c0 <= c1 < cols):
            raise SchemaError(f"region rows {r0}..{r1} cols {c0}..{c1} outside the grid")
        grid[r0 : r1 + 1, c0 : c1 + 1] = labels.index(label)
    return grid
