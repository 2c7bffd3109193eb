"""Image tensor conversions and 8-bit PNG round-trips."""

import numpy as np
import pytest
import torch

from aif.images import as_hwc_tensor, chw_to_hwc, hwc_to_chw, load_image, save_image, to_numpy_hwc


def test_as_hwc_accepts_numpy_and_torch():
    arr = np.random.default_rng(0).random((5, 6, 3))
    t = as_hwc_tensor(arr)
    assert t.shape == (5, 6, 3) and t.dtype == torch.float32
    same = as_hwc_tensor(torch.zeros(4, 4, 3, dtype=torch.float64))
    assert same.dtype == torch.float64


def test_as_hwc_rejects_wrong_shape():
    with pytest.raises(ValueError):
        as_hwc_tensor(np.zeros((3, 5, 5)))
    with pytest.raises(ValueError):
        as_hwc_tensor(np.zeros((5, 5)))


def test_as_hwc_accepts_read_only_numpy():
    arr = np.random.default_rng(0).random((4, 4, 3))
    arr.setflags(write=False)
    as_hwc_tensor(arr)


def test_chw_round_trip():
    t = torch.arange(24.0).reshape(2, 4, 3)
    assert torch.equal(chw_to_hwc(hwc_to_chw(t)), t)
    assert hwc_to_chw(t).shape == (3, 2, 4)


def test_to_numpy_detaches_grad():
    t = torch.rand(3, 3, 3, requires_grad=True)
    arr = to_numpy_hwc(t * 2)
    assert isinstance(arr, np.ndarray)
    assert arr.dtype == np.float64


def test_png_round_trip_is_exact_on_8bit_grid(tmp_path):
    # Values on the u8 grid survive the write/read cycle exactly.
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(16, 16, 3)).astype(np.float64) / 255.0
    path = tmp_path / "x.png"
    save_image(path, img)
    back = load_image(path)
    assert back.shape == (16, 16, 3)
    assert np.array_equal(back, img)


def test_png_write_is_deterministic(tmp_path):
    img = np.random.default_rng(4).random((12, 12, 3))
    p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
    save_image(p1, img)
    save_image(p2, img)
    assert p1.read_bytes() == p2.read_bytes()


def test_save_rounds_to_nearest(tmp_path):
    img = np.full((4, 4, 3), 100.4 / 255.0)
    path = tmp_path / "x.png"
    save_image(path, img)
    assert np.allclose(load_image(path), 100.0 / 255.0)


def test_save_accepts_torch(tmp_path):
    save_image(tmp_path / "t.png", torch.rand(8, 8, 3))
    assert load_image(tmp_path / "t.png").shape == (8, 8, 3)
