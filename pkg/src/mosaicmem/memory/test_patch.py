# memory/test_patch.py
import threading

import numpy as np
import pytest

from mosaicmem.model.models import Intrinsics, Pose, Camera
from mosaicmem.memory.patch import MemoryPatch, lift_frame
from mosaicmem.memory.store import MosaicMemory
from mosaicmem.memory.index import VoxelIndex, estimate_voxel_size
from mosaicmem.memory.analysis import index_stats

K = Intrinsics(fx=32.0, fy=32.0, cx=31.5, cy=31.5, width=64, height=64)
CAM = Camera(K, Pose.identity())


def _frame(depth=5.0, c=4, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(size=(8, 8, c)).astype(np.float32), np.full((8, 8), depth)


def test_lift_back_projects_token_centres():
    latent, depth = _frame()
    patches = lift_frame(latent, depth, CAM, time=0, patch_size=2)
    assert len(patches) == 16
    p = patches[5]                       # パッチグリッド (1,1)
    assert p.rope_origin == (0, 2, 2)
    assert p.grid_position() == (1, 1)
    np.testing.assert_array_equal(p.latent, latent[2:4, 2:4])
    # トークン (2,2) の中心画素 = 2·8 + 3.5 = 19.5
    x = (19.5 - 31.5) / 32.0 * 5.0
    np.testing.assert_allclose(p.world_points[0, 0], [x, x, 5.0], atol=1e-12)
    np.testing.assert_allclose(p.world_points[..., 2], 5.0)


def test_lift_assigns_consecutive_ids_and_skips_background():
    latent, depth = _frame()
    depth[0:2, 0:2] = np.inf
    patches = lift_frame(latent, depth, CAM, time=3, patch_size=2, first_id=10)
    assert [p.id for p in patches] == list(range(10, 25))
    assert all(p.source_time == 3 and p.rope_origin[0] == 3 for p in patches)
    assert patches[0].rope_origin == (3, 0, 2)


def test_lift_rejects_bad_inputs():
    latent, depth = _frame()
    with pytest.raises(ValueError):
        lift_frame(latent, depth, CAM, 0, patch_size=3)
    with pytest.raises(ValueError):
        lift_frame(latent, -depth, CAM, 0, patch_size=2)
    with pytest.raises(ValueError):
        lift_frame(latent, depth[:4], CAM, 0, patch_size=2)
    depth[0, 0] = np.inf
    with pytest.raises(ValueError):
        lift_frame(latent, depth, CAM, 0, patch_size=2, skip_nonfinite=False)


def test_patch_is_immutable():
    latent, depth = _frame()
    p = lift_frame(latent, depth, CAM, 0, 2)[0]
    with pytest.raises(ValueError):
        p.latent[0, 0, 0] = 1.0
    latent[0, 0, 0] = 42.0
    assert p.latent[0, 0, 0] != 42.0


def test_patch_validation():
    with pytest.raises(ValueError):
        MemoryPatch(0, np.zeros((2, 3, 1)), np.ones((2, 3)), CAM, 0, (0, 0, 0))
    with pytest.raises(ValueError):
        MemoryPatch(0, np.zeros((2, 2, 1)), np.zeros((2, 2)), CAM, 0, (0, 0, 0))
    with pytest.raises(ValueError):
        MemoryPatch(0, np.zeros((2, 2, 1)), np.ones((2, 2)), CAM, 0, (0, 0))


# --- store / index -----------------------------------------------------------

def test_insert_remove_and_duplicate_ids():
    mem = MosaicMemory()
    latent, depth = _frame()
    added = mem.lift_and_insert(latent, depth, CAM, 0, 2)
    assert len(mem) == 16 and mem.next_id == 16
    with pytest.raises(KeyError):
        mem.insert([added[0]])
    mem.remove([0, 1, 99])
    assert 0 not in mem and 1 not in mem and len(mem) == 14
    assert 0 not in mem.index and 2 in mem.index
    more = mem.lift_and_insert(latent, depth, CAM, 1, 2)
    assert more[0].id == 16


def test_copy_is_independent():
    mem = MosaicMemory()
    mem.lift_and_insert(*_frame(), CAM, 0, 2)
    dup = mem.copy()
    dup.remove([3])
    assert 3 in mem and 3 not in dup
    assert dup.next_id == mem.next_id


def test_voxel_size_fixed_at_first_insert():
    mem = MosaicMemory()
    mem.lift_and_insert(*_frame(depth=5.0), CAM, 0, 2)
    size = mem.voxel_size
    # 隣接トークン間隔 = 8 px · 5 / 32
    assert size == pytest.approx(8 * 5.0 / 32.0)
    mem.lift_and_insert(*_frame(depth=20.0), CAM, 1, 2)
    assert mem.voxel_size == size


def test_estimate_voxel_size_fallbacks():
    assert estimate_voxel_size(np.zeros((1, 3))) == 1.0
    assert estimate_voxel_size(np.zeros((5, 3))) == 1.0


def test_index_keys_follow_points():
    idx = VoxelIndex(1.0)
    idx.add(7, np.array([[0.5, 0.5, 0.5], [1.5, 0.5, 0.5]]))
    assert idx.keys_of(7) == {(0, 0, 0), (1, 0, 0)}
    with pytest.raises(KeyError):
        idx.add(7, np.zeros((1, 3)))
    idx.remove(7)
    assert not idx.cells


def test_index_culls_cells_behind_camera():
    idx = VoxelIndex(1.0)
    idx.add(1, np.array([[0.1, 0.1, 5.0]]))
    idx.add(2, np.array([[0.1, 0.1, -5.0]]))
    idx.add(3, np.array([[50.0, 0.1, 5.0]]))
    assert idx.candidates(CAM) == {1}


def test_index_stats():
    mem = MosaicMemory()
    assert index_stats(mem)["cells"] == 0
    mem.lift_and_insert(*_frame(), CAM, 0, 2)
    stats = index_stats(mem)
    assert stats["patches"] == 16 and stats["cells"] > 0
    assert stats["max_ids_per_cell"] >= 1


def test_concurrent_readers_see_consistent_snapshots():
    mem = MosaicMemory()
    latent, depth = _frame()
    errors = []

    def reader():
        for _ in range(50):
            snap = mem.snapshot()
            ids = [p.id for p in snap]
            if ids != sorted(ids):
                errors.append(ids)

    threads = [threading.Thread(target=reader) for _ in range(4)]
    for t in threads:
        t.start()
    for f in range(5):
        mem.lift_and_insert(latent, depth, CAM, f, 2)
    for t in threads:
        t.join()
    assert not errors and len(mem) == 80
