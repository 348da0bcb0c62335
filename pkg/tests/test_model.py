import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from altp.model import (
    ImageBuffer,
    ImportanceMap,
    PruneConfig,
    PruneResult,
    RegionTokenAssignment,
    SuperpixelMap,
    SuperpixelParams,
    TokenGrid,
    budget_for,
)


def test_image_flat_layout_is_row_major_interleaved():
    img = ImageBuffer.from_flat(2, 1, 3, [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    assert img.width == 2 and img.height == 1 and img.channels == 3
    assert img.data[0, 1].tolist() == [0.4, 0.5, 0.6]


@pytest.mark.parametrize(
    "data",
    [np.zeros((0, 3)), np.full((2, 2), 1.5), np.full((2, 2), -0.1), np.zeros((2, 2, 2))],
)
def test_image_rejects_invalid(data):
    with pytest.raises(ValueError):
        ImageBuffer(data)


def test_image_does_not_alias_caller_array():
    src = np.zeros((2, 2, 1))
    img = ImageBuffer(src)
    src[0, 0, 0] = 1.0
    assert img.data[0, 0, 0] == 0.0
    with pytest.raises(ValueError):
        img.data[0, 0, 0] = 1.0


def test_superpixel_map_rejects_empty_label():
    with pytest.raises(ValueError):
        SuperpixelMap(np.array([[0, 0], [2, 2]]), 3)


def test_superpixel_params_bounds():
    with pytest.raises(ValueError):
        SuperpixelParams(num_superpixels=0)
    with pytest.raises(ValueError):
        SuperpixelParams(compactness=0)
    with pytest.raises(ValueError):
        SuperpixelParams(10).check_image(3, 3)


def test_assignment_must_partition():
    with pytest.raises(ValueError):
        RegionTokenAssignment(((0, 1), (1,)), (0, 1))
    with pytest.raises(ValueError):
        RegionTokenAssignment(((0,),), (0, 0))


@pytest.mark.parametrize("r", [0.0, -0.1, 1.01])
def test_config_rejects_keep_ratio(r):
    with pytest.raises(ValueError):
        PruneConfig(keep_ratio=r)


def test_config_rejects_alpha():
    with pytest.raises(ValueError):
        PruneConfig(keep_ratio=0.5, alpha=1.0)


@pytest.mark.parametrize(
    "v_total,r,expected",
    [(576, 0.10, 57), (576, 0.25, 144), (576, 0.50, 288), (256, 0.10, 25), (256, 0.25, 64), (576, 1.0, 576)],
)
def test_budget_matches_published_counts(v_total, r, expected):
    assert budget_for(r, v_total) == expected


def test_result_rejects_unsorted():
    with pytest.raises(ValueError):
        PruneResult((3, 1), (0.0,), (1.0,), (2.0,), (2,), 4, 2)


images = st.builds(
    lambda h, w, c, seed: ImageBuffer(np.random.default_rng(seed).random((h, w, c))),
    st.integers(1, 6),
    st.integers(1, 6),
    st.sampled_from([1, 3]),
    st.integers(0, 2**32 - 1),
)


@given(images)
def test_image_roundtrip(img):
    assert ImageBuffer.from_dict(img.to_dict()) == img


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_superpixel_map_roundtrip(h, w, seed):
    labels = np.random.default_rng(seed).integers(0, 3, (h, w))
    _, labels = np.unique(labels, return_inverse=True)
    labels = labels.reshape(h, w)
    spmap = SuperpixelMap(labels, int(labels.max()) + 1)
    assert SuperpixelMap.from_dict(spmap.to_dict()) == spmap


@given(
    st.floats(0.01, 1.0),
    st.floats(1.01, 5.0),
    st.sampled_from(["altp", "ddc_uniform", "global_topk"]),
    st.sampled_from(["exact_budget", "paper_ceiling"]),
    st.integers(1, 40),
)
def test_config_roundtrip(r, alpha, mode, policy, n):
    cfg = PruneConfig(r, alpha, mode, policy, SuperpixelParams(n, 3.0, 0.5, 5))
    assert PruneConfig.from_dict(cfg.to_dict()) == cfg


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=20))
def test_importance_roundtrip(values):
    imp = ImportanceMap(values)
    assert ImportanceMap.from_dict(imp.to_dict()) == imp


def test_grid_and_assignment_and_result_roundtrip():
    grid = TokenGrid(2, 3, 5, 4, 10, 12)
    assert TokenGrid.from_dict(grid.to_dict()) == grid
    a = RegionTokenAssignment(((0, 2, 4), (1, 3, 5)), (0, 1, 0, 1, 0, 1))
    assert RegionTokenAssignment.from_dict(a.to_dict()) == a
    res = PruneResult((1, 4), (0.1, 0.0), (0.6, 0.4), (1.2, 0.8), (1, 1), 6, 2, 0.5)
    assert PruneResult.from_dict(res.to_dict()) == res


def test_importance_names_bad_index():
    with pytest.raises(ValueError, match="index 2"):
        ImportanceMap([0.0, 1.0, float("nan")])
