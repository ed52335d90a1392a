# storage/test_storage.py
import json

import numpy as np
import pytest

from mosaicmem.model.models import Intrinsics, Pose, Camera
from mosaicmem.memory.store import MosaicMemory
from mosaicmem.storage.tensorfile import (
    MAGIC, TensorFormatError, encode_tensor, decode_tensor, read_tensor, write_tensor,
)
from mosaicmem.storage.ppm import read_ppm, write_ppm, to_uint8
from mosaicmem.storage.memory_dir import load_memory, save_memory, patch_filename

K = Intrinsics(fx=32.0, fy=32.0, cx=15.5, cy=15.5, width=32, height=32)


def test_tensor_header_layout():
    data = encode_tensor(np.zeros((2, 3), dtype=np.float32))
    assert data[:4] == MAGIC
    assert data[4:6] == b"\x01\x00"       # version 1 LE
    assert data[6] == 0 and data[7] == 2  # f32, ndim=2
    assert len(data) == 8 + 4 * 2 + 2 * 3 * 4


@pytest.mark.parametrize("dtype", [np.float32, np.float64, np.uint8])
def test_tensor_file_preserves_dtype(tmp_path, dtype):
    arr = (np.arange(24).reshape(2, 3, 4) % 7).astype(dtype)
    write_tensor(tmp_path / "a.mmtb", arr)
    out = read_tensor(tmp_path / "a.mmtb")
    assert out.dtype == np.dtype(dtype)
    np.testing.assert_array_equal(out, arr)


def test_unsupported_dtype_is_value_error():
    with pytest.raises(ValueError):
        encode_tensor(np.zeros(3, dtype=np.int32))


def test_truncated_payload_raises_format_error(tmp_path):
    data = encode_tensor(np.ones((4, 4)))
    (tmp_path / "t.mmtb").write_bytes(data[:-5])
    with pytest.raises(TensorFormatError):
        read_tensor(tmp_path / "t.mmtb")


@pytest.mark.parametrize("mutate", [
    lambda d: b"XXXX" + d[4:],
    lambda d: d[:4] + b"\x02\x00" + d[6:],
    lambda d: d[:6] + b"\x09" + d[7:],
    lambda d: d[:9],
])
def test_bad_headers_raise_format_error(mutate):
    with pytest.raises(TensorFormatError):
        decode_tensor(mutate(encode_tensor(np.ones((2, 2)))))


def test_format_error_is_an_os_error():
    assert issubclass(TensorFormatError, OSError)


def test_ppm_round_trip_quantizes(tmp_path):
    img = np.linspace(0, 1, 4 * 5 * 3).reshape(4, 5, 3)
    write_ppm(tmp_path / "a.ppm", img)
    head = (tmp_path / "a.ppm").read_bytes()[:11]
    assert head == b"P6\n5 4\n255\n"
    np.testing.assert_array_equal(read_ppm(tmp_path / "a.ppm"), to_uint8(img))


def test_ppm_rejects_non_rgb(tmp_path):
    with pytest.raises(ValueError):
        write_ppm(tmp_path / "a.ppm", np.zeros((4, 4)))


def _memory():
    mem = MosaicMemory()
    rng = np.random.default_rng(0)
    latent = rng.uniform(size=(4, 4, 3)).astype(np.float32)
    depth = np.full((4, 4), 3.0)
    depth[:2, :2] = np.inf
    mem.lift_and_insert(latent, depth, Camera(K, Pose.identity()), 0, 2, downsample=8)
    return mem


def test_memory_directory_round_trip(tmp_path):
    mem = _memory()
    assert len(mem) == 3  # 背景を含むパッチは除外
    save_memory(mem, tmp_path / "m")
    manifest = json.loads((tmp_path / "m" / "manifest.json").read_text())
    assert manifest["convention"] == "world_to_camera"
    assert [e["file"] for e in manifest["patches"]] == [patch_filename(i) for i in mem.ids()]

    back = load_memory(tmp_path / "m")
    assert back.same_contents(mem)
    assert back.next_id == mem.next_id
    assert back.voxel_size == pytest.approx(mem.voxel_size)
    p, q = mem.get(1), back.get(1)
    assert q.rope_origin == p.rope_origin and q.source_time == p.source_time
    np.testing.assert_array_equal(q.depth, p.depth)


def test_empty_memory_round_trip(tmp_path):
    save_memory(MosaicMemory(), tmp_path / "m")
    back = load_memory(tmp_path / "m")
    assert len(back) == 0 and back.voxel_size is None


def test_truncated_patch_file_is_format_error(tmp_path):
    save_memory(_memory(), tmp_path / "m")
    f = tmp_path / "m" / patch_filename(1)
    f.write_bytes(f.read_bytes()[:-8])
    with pytest.raises(TensorFormatError):
        load_memory(tmp_path / "m")
