import filecmp
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plstm.arrows import (
    DatasetSpec,
    draw_line,
    draw_ring,
    generate_dataset,
    load_dataset,
    rasterize,
    ray_hits_disk,
    ray_march_hits,
    read_pgm,
    sample_scene,
    scene_for_index,
    write_pgm,
)
from plstm.errors import DatasetError, RangeError


def tree_bytes(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_ray_straight_at_the_center_hits():
    assert ray_hits_disk((0.2, 0.5), (0.3, 0.5), (0.8, 0.5), 0.05)


def test_ray_pointing_away_misses():
    assert not ray_hits_disk((0.3, 0.5), (0.2, 0.5), (0.8, 0.5), 0.05)


def test_disk_behind_a_sideways_ray_misses():
    assert not ray_hits_disk((0.5, 0.5), (0.5, 0.6), (0.8, 0.5), 0.1)


@pytest.mark.parametrize("label", [False, True])
def test_sampled_labels_agree_with_ray_marching(label):
    for i in range(1000):
        rng = np.random.default_rng(np.random.SeedSequence([1234, int(label), i]))
        scene = sample_scene(rng, 32, label)
        assert scene.label == label
        assert ray_march_hits(scene) == label


def test_resolution_below_minimum_is_rejected():
    with pytest.raises(RangeError):
        sample_scene(np.random.default_rng(0), 16, True)


def test_blank_scene_is_white():
    img = rasterize(None, 32)
    assert img.dtype == np.uint8 and img.shape == (32, 32)
    assert np.all(img == 255)


def test_horizontal_stroke_covers_two_rows():
    img = np.full((32, 32), 255, np.uint8)
    draw_line(img, (3, 10), (25, 10))
    rows, cols = np.nonzero(img == 0)
    assert set(rows) == {10, 11}
    assert set(cols) == set(range(3, 26))
    assert np.sum(img == 0) == 2 * 23


def test_vertical_stroke_covers_two_columns():
    img = np.full((32, 32), 255, np.uint8)
    draw_line(img, (7, 2), (7, 20))
    assert set(np.nonzero(img == 0)[1]) == {7, 8}


def test_ring_pixels_lie_between_the_two_radii():
    img = np.full((64, 64), 255, np.uint8)
    draw_ring(img, (32, 32), 10)
    ys, xs = np.nonzero(img == 0)
    d = np.hypot(xs - 32, ys - 32)
    assert d.min() >= 8.5 and d.max() <= 10.5
    assert img[32, 42] == 0 and img[32, 41] == 0 and img[32, 32] == 255


@given(st.integers(0, 10_000), st.sampled_from([32, 64]))
def test_rasterizing_is_deterministic_and_stays_on_canvas(index, res):
    scene = scene_for_index(5, index, res)
    a, b = rasterize(scene), rasterize(scene)
    assert a.tobytes() == b.tobytes()
    assert a.shape == (res, res)
    assert np.any(a == 0)
    # margin keeps every stroke off the outermost pixel ring
    assert np.all(a[0] == 255) and np.all(a[:, 0] == 255)


@given(st.integers(0, 10_000))
def test_geometry_scales_with_resolution(index):
    s1, s2 = scene_for_index(3, index, 192), scene_for_index(3, index, 384)
    assert s1.label == s2.label
    for a, b in ((s1.tail, s2.tail), (s1.tip, s2.tip), (s1.center, s2.center)):
        np.testing.assert_allclose(np.multiply(b, 384), 2 * np.multiply(a, 192), atol=1e-9)
    assert s2.radius * 384 == pytest.approx(2 * s1.radius * 192)


def test_pgm_round_trip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (5, 7), dtype=np.uint8)
    write_pgm(tmp_path / "a.pgm", img)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n7 5\n255\n")
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), img)
    (tmp_path / "b.pgm").write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(DatasetError):
        read_pgm(tmp_path / "b.pgm")


def test_regeneration_is_byte_identical(tmp_path):
    a = generate_dataset(DatasetSpec(4, 32, 7, str(tmp_path / "a")))
    b = generate_dataset(DatasetSpec(4, 32, 7, str(tmp_path / "b")))
    assert tree_bytes(a) == tree_bytes(b)
    assert sorted(tree_bytes(a)) == ["img_0.pgm", "img_1.pgm", "img_2.pgm", "img_3.pgm", "labels.csv", "manifest.json"]
    assert not filecmp.cmp(a / "img_0.pgm", a / "img_1.pgm", shallow=False)


def test_images_do_not_depend_on_generation_order(tmp_path):
    big = generate_dataset(DatasetSpec(6, 32, 11, str(tmp_path / "big")))
    small = generate_dataset(DatasetSpec(2, 32, 11, str(tmp_path / "small")))
    for i in range(2):
        assert (big / f"img_{i}.pgm").read_bytes() == (small / f"img_{i}.pgm").read_bytes()


def test_labels_are_exactly_balanced(tmp_path):
    root = generate_dataset(DatasetSpec(1000, 32, 0, str(tmp_path / "d")))
    images, labels = load_dataset(root)
    assert images.shape == (1000, 32, 32)
    assert np.sum(labels == 1) == 500 and np.sum(labels == 0) == 500
    assert (root / "labels.csv").read_text().startswith("index,label\n0,0\n1,1\n")


def test_odd_counts_and_missing_datasets_are_rejected(tmp_path):
    with pytest.raises(DatasetError):
        generate_dataset(DatasetSpec(3, 32, 0, str(tmp_path / "odd")))
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "nothing")
