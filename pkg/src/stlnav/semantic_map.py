"""Semantic cost maps: label-confidence tensors, cost contraction, obstacle
buffer inflation, and the Euclidean distance field behind the dist_o signal.

The map pipeline is: a (mocked) segmentation model produces per-cell label
confidences; contracting those with the active mode's per-label cost vector
yields the traversal cost map; obstacle cells are then inflated by the
mode's clearance margin using the distance field.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionError, SchemaError, ValidationError

CAP = 1e9
DEFAULT_OBSTACLE_COST = 1e6


@dataclass(frozen=True)
class SegmentationTensor:
    """Per-cell label confidences, shape (H, W, K) with K = len(labels)."""

    values: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 3:
            raise DimensionError(f"segmentation tensor must be 3-D, got shape {values.shape}")
        if values.shape[2] != len(self.labels):
            raise DimensionError(
                f"label axis {values.shape[2]} does not match {len(self.labels)} labels"
            )
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("labels must be unique")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValidationError("confidences must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[0], self.values.shape[1]

    def argmax_labels(self) -> np.ndarray:
        """Index grid of the most confident label per cell (ties to the
        lowest label index)."""
        return np.argmax(self.values, axis=2)


@dataclass(frozen=True)
class CostVector:
    """Nonnegative traversal cost per label."""

    costs: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        costs = np.asarray(self.costs, dtype=np.float64)
        object.__setattr__(self, "costs", costs)
        if costs.ndim != 1 or costs.shape[0] != len(self.labels):
            raise DimensionError("cost vector length must match the label set")
        if costs.size and costs.min() < 0.0:
            raise ValidationError("costs must be nonnegative")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float], labels: Sequence[str]) -> "CostVector":
        missing = [label for label in labels if label not in mapping]
        if missing:
            raise SchemaError(f"missing cost entry for label(s): {', '.join(missing)}")
        unknown = [name for name in mapping if name not in labels]
        if unknown:
            raise SchemaError(f"cost entry for unknown label(s): {', '.join(unknown)}")
        return cls(np.array([float(mapping[label]) for label in labels]), tuple(labels))

    def cost_of(self, label: str) -> float:
        return float(self.costs[self.labels.index(label)])


@dataclass(frozen=True)
class CostMap:
    """Per-cell traversal cost with provenance (mode name, version)."""

    values: np.ndarray
    resolution: float
    provenance: tuple[str, int] = ("unknown", 0)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise DimensionError("cost map must be 2-D")
        if self.resolution <= 0:
            raise ValidationError("resolution must be positive")
        if values.size and values.min() < 0.0:
            raise ValidationError("cost map entries must be nonnegative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class DistanceField:
    """Meters to the nearest obstacle cell center, measured between cell
    centers; zero on obstacle cells, CAP everywhere when no obstacles."""

    values: np.ndarray
    resolution: float

    def at_cell(self, row: int, col: int) -> float:
        return float(self.values[row, col])


def build_cost_map(
    tensor: SegmentationTensor,
    costs: CostVector,
    resolution: float = 0.5,
    provenance: tuple[str, int] = ("unknown", 0),
) -> CostMap:
    """Contract the confidence tensor with the cost vector:
    C[i,j] = sum_k S[i,j,k] * c[k]."""
    if tensor.labels != costs.labels:
        raise DimensionError("tensor and cost vector label sets differ")
    s = tensor.values
    # Accumulate label by label in index order so the result matches a
    # per-cell sequential sum bit for bit.
    out = np.zeros(tensor.shape, dtype=np.float64)
    for k in range(s.shape[2]):
        out += s[:, :, k] * costs.costs[k]
    return CostMap(out, resolution, provenance)


def distance_field(mask: np.ndarray, resolution: float) -> DistanceField:
    """Exact Euclidean distance transform of the obstacle mask, in meters.
    An all-false mask yields CAP everywhere."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DimensionError("obstacle mask must be 2-D")
    if resolution <= 0:
        raise ValidationError("resolution must be positive")
    if not mask.any():
        return DistanceField(np.full(mask.shape, CAP), resolution)
    cells = ndimage.distance_transform_edt(~mask)
    return DistanceField(cells * resolution, resolution)


def inflate_obstacle_buffer(
    cost_map: CostMap,
    mask: np.ndarray,
    margin: float,
    obstacle_cost: float = DEFAULT_OBSTACLE_COST,
) -> CostMap:
    """Raise cost to at least obstacle_cost on every cell strictly closer
    than `margin` meters to an obstacle cell."""
    if margin < 0:
        raise ValidationError("margin must be nonnegative")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != cost_map.shape:
        raise DimensionError("mask shape does not match the cost map")
    if margin == 0:
        return CostMap(cost_map.values.copy(), cost_map.resolution, cost_map.provenance)
    field = distance_field(mask, cost_map.resolution)
    values = cost_map.values.copy()
    inside = field.values < margin
    values[inside] = np.maximum(values[inside], obstacle_cost)
    return CostMap(values, cost_map.resolution, cost_map.provenance)


def mock_segmentation(
    truth: np.ndarray,
    confusion: np.ndarray,
    seed: int,
    labels: Sequence[str],
    noise_amplitude: float = 0.0,
) -> SegmentationTensor:
    """Stand-in for a segmentation model: each cell's confidence vector is
    the confusion-matrix row of its true label, optionally perturbed by
    seeded Gaussian noise and clipped to [0, 1]."""
    truth = np.asarray(truth)
    confusion = np.asarray(confusion, dtype=np.float64)
    k = len(labels)
    if confusion.shape != (k, k):
        raise DimensionError(f"confusion matrix must be {k}x{k}")
    if confusion.size and confusion.min() < 0.0:
        raise ValidationError("confusion matrix entries must be nonnegative")
    if not np.allclose(confusion.sum(axis=1), 1.0, atol=1e-9):
        raise ValidationError("confusion matrix rows must sum to 1")
    if truth.size and (truth.min() < 0 or truth.max() >= k):
        raise ValidationError("truth grid references labels outside the label set")
    values = confusion[truth]
    if noise_amplitude > 0.0:
        rng = np.random.default_rng(seed)
        values = values + rng.normal(0.0, noise_amplitude, size=values.shape)
    values = np.clip(values, 0.0, 1.0)
    return SegmentationTensor(values, tuple(labels))


def reweight_region(
    cost_map: CostMap,
    cells: Iterable[tuple[int, int]],
    factor: float,
) -> CostMap:
    """Multiply the listed cells by `factor` (>= 1) and bump the map
    version; re-weighting only ever penalizes."""
    if factor < 1.0:
        raise ValidationError("reweight factor must be >= 1")
    h, w = cost_map.shape
    values = cost_map.values.copy()
    for row, col in cells:
        if not (0 <= row < h and 0 <= col < w):
            raise ValidationError(f"cell ({row}, {col}) outside the {h}x{w} map")
        values[row, col] *= factor
    mode, version = cost_map.provenance
    return CostMap(values, cost_map.resolution, (mode, version + 1))
