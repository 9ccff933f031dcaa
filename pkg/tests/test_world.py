"""World model: validation, cell geometry, stop primitives, and the two
on-disk grid forms."""

import numpy as np
import pytest

from stlnav.data import data_path
from stlnav.errors import SchemaError, WorldError
from stlnav.world import StopSign, StopZone, WorldModel

from conftest import small_world


def test_constructor_validation():
    grid = np.zeros((2, 2), dtype=np.int16)
    with pytest.raises(WorldError, match="2-D"):
        WorldModel(np.zeros(4, dtype=np.int16), ("grass",), 1.0, obstacle_labels=())
    with pytest.raises(WorldError, match="label set is empty"):
        WorldModel(grid, (), 1.0, obstacle_labels=())
    with pytest.raises(WorldError, match="unique"):
        WorldModel(grid, ("grass", "grass"), 1.0, obstacle_labels=())
    with pytest.raises(WorldError, match="not a valid identifier"):
        WorldModel(grid, ("Grass",), 1.0, obstacle_labels=())
    with pytest.raises(WorldError, match="outside the label set"):
        WorldModel(np.full((2, 2), 3, dtype=np.int16), ("grass",), 1.0, obstacle_labels=())
    with pytest.raises(WorldError, match="obstacle label"):
        WorldModel(grid, ("grass",), 1.0, obstacle_labels=("rock",))
    with pytest.raises(WorldError, match="resolution"):
        WorldModel(grid, ("grass",), 0.0, obstacle_labels=())


def test_cell_boundaries_belong_to_higher_cell():
    world = small_world(np.zeros((4, 4), dtype=np.int16), resolution=0.5)
    assert world.extent == (2.0, 2.0)
    assert world.cell_of(0.0, 0.0) == (0, 0)
    # x = 0.5 sits on the boundary between cols 0 and 1
    assert world.cell_of(0.5, 0.0) == (0, 1)
    assert world.cell_of(0.49999, 0.75) == (1, 0)
    assert world.in_bounds(1.999, 0.0)
    assert not world.in_bounds(2.0, 0.0)
    assert not world.in_bounds(-0.001, 0.0)
    with pytest.raises(WorldError, match="outside world bounds"):
        world.cell_of(2.0, 0.0)
    assert world.cell_center(1, 2) == (1.25, 0.75)


def test_labels_and_obstacle_mask():
    grid = np.array([[0, 1], [2, 0]], dtype=np.int16)
    world = small_world(grid, resolution=1.0)
    assert world.label_at(0.5, 0.5) == "grass"
    assert world.label_at(1.5, 0.5) == "sidewalk"
    assert world.label_at(0.5, 1.5) == "obstacle"
    assert world.obstacle_mask().tolist() == [[False, False], [True, False]]


def test_distance_field_cached_and_queryable():
    grid = np.zeros((3, 3), dtype=np.int16)
    grid[0, 0] = 2
    world = small_world(grid, resolution=2.0)
    field = world.distance_field()
    assert world.distance_field() is field
    assert world.distance_at(1.0, 1.0) == 0.0
    assert world.distance_at(3.0, 1.0) == 2.0
    assert world.distance_at(3.0, 3.0) == pytest.approx(2.0 * np.sqrt(2.0), abs=0.0)


def test_stop_sign_and_zone_predicates():
    sign = StopSign(2.0, 3.0, 1.5)
    assert sign.detects(2.0, 4.5)  # boundary inclusive
    assert not sign.detects(2.0, 4.5001)
    zone = StopZone(1.0, 2.0, 3.0, 4.0)
    assert zone.contains(1.0, 3.0)
    assert not zone.contains(2.0, 3.5)  # upper edges exclusive
    assert not zone.contains(1.5, 4.0)
    with pytest.raises(WorldError, match="positive extent"):
        StopZone(2.0, 1.0, 0.0, 1.0)


def test_dict_round_trip_legend_form():
    grid = np.array([[0, 1, 2], [1, 0, 0]], dtype=np.int16)
    world = WorldModel(
        grid,
        ("grass", "sidewalk", "obstacle"),
        0.5,
        obstacle_labels=("obstacle",),
        stop_signs=(StopSign(0.75, 0.25, 2.0),),
        stop_zones=(StopZone(0.0, 0.5, 0.5, 1.0),),
    )
    data = world.to_dict()
    assert data["grid"] == [".sT", "s.."]
    back = WorldModel.from_dict(data)
    assert np.array_equal(back.grid, world.grid)
    assert back.labels == world.labels
    assert back.obstacle_labels == world.obstacle_labels
    assert back.resolution == world.resolution
    assert back.stop_signs == world.stop_signs
    assert back.stop_zones == world.stop_zones


def test_from_dict_regions_form():
    data = {
        "resolution": 1.0,
        "labels": ["grass", "obstacle"],
        "obstacle_labels": ["obstacle"],
        "background": "grass",
        "size": [4, 5],
        "regions": [{"label": "obstacle", "rows": [1, 2], "cols": [2, 4]}],
    }
    world = WorldModel.from_dict(data)
    expect = np.zeros((4, 5), dtype=np.int16)
    expect[1:3, 2:5] = 1
    assert np.array_equal(world.grid, expect)


def test_from_dict_sign_by_cell():
    data = {
        "resolution": 2.0,
        "labels": ["grass"],
        "obstacle_labels": [],
        "background": "grass",
        "size": [3, 3],
        "stop_signs": [{"cell": [1, 2], "radius": 4.0}],
    }
    world = WorldModel.from_dict(data)
    assert world.stop_signs == (StopSign(5.0, 3.0, 4.0),)


@pytest.mark.parametrize(
    "mutation,message",
    [
        ({"resolution": None}, "missing required key"),
        ({"labels": None}, "missing required key"),
        ({"background": "lava"}, "not in label set"),
        ({"size": None}, "requires size"),
        ({"size": [0, 4]}, "must be positive"),
        ({"regions": [{"label": "obstacle", "rows": [0, 9], "cols": [0, 1]}]}, "outside the grid"),
        ({"regions": [{"label": "lava", "rows": [0, 1], "cols": [0, 1]}]}, "not in label set"),
        ({"regions": [{"label": "obstacle", "rows": [0, 1]}]}, "region missing key"),
        ({"stop_signs": [{"radius": 1.0}]}, "position or cell"),
        ({"stop_zones": [{"x": [0, 1]}]}, "stop zone missing key"),
    ],
)
def test_from_dict_region_form_errors(mutation, message):
    data = {
        "resolution": 1.0,
        "labels": ["grass", "obstacle"],
        "obstacle_labels": ["obstacle"],
        "background": "grass",
        "size": [4, 4],
    }
    data.update(mutation)
    data = {k: v for k, v in data.items() if v is not None}
    with pytest.raises(SchemaError, match=message):
        WorldModel.from_dict(data)


@pytest.mark.parametrize(
    "mutation,message",
    [
        ({"legend": None}, "requires a legend mapping"),
        ({"legend": {"ab": "grass"}}, "must be one character"),
        ({"legend": {".": "lava"}}, "unknown label"),
        ({"grid": [".." , "."]}, "has length 1, expected 2"),
        ({"grid": ["..", ".x"]}, "not in legend"),
        ({"grid": []}, "no rows"),
    ],
)
def test_from_dict_legend_form_errors(mutation, message):
    data = {
        "resolution": 1.0,
        "labels": ["grass"],
        "obstacle_labels": [],
        "legend": {".": "grass"},
        "grid": ["..", ".."],
    }
    data.update(mutation)
    data = {k: v for k, v in data.items() if v is not None}
    if "legend" in mutation and mutation["legend"] is None:
        del data["grid"]
        data["grid"] = [".."]
    with pytest.raises(SchemaError, match=message):
        WorldModel.from_dict(data)


def test_from_dict_requires_some_grid_form():
    with pytest.raises(SchemaError, match="legend grid or background"):
        WorldModel.from_dict({"resolution": 1.0, "labels": ["grass"]})


def test_file_round_trip(tmp_path):
    world = small_world(np.array([[0, 1], [2, 0]], dtype=np.int16), resolution=0.5)
    dest = tmp_path / "w.yaml"
    world.to_file(str(dest))
    back = WorldModel.from_file(str(dest))
    assert np.array_equal(back.grid, world.grid)
    assert back.labels == world.labels
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n")
    with pytest.raises(SchemaError, match="not a mapping"):
        WorldModel.from_file(str(bad))


@pytest.mark.parametrize("name", ["world_a.yaml", "world_b.yaml", "world_flat.yaml"])
def test_bundled_worlds_load(name):
    world = WorldModel.from_file(data_path(name))
    assert world.height > 0 and world.width > 0
    assert world.obstacle_mask().any() or name == "world_flat.yaml"
