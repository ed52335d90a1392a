# memory/test_store.py
import numpy as np
from scipy.spatial.transform import Rotation

from mosaicmem.model.models import Intrinsics, Pose, Camera
from mosaicmem.geometry.camera import project_points
from mosaicmem.memory.patch import lift_frame
from mosaicmem.memory.store import MosaicMemory
from mosaicmem.memory.retrieval import RetrievalConfig, candidate_patches, retrieve

K = Intrinsics(fx=32.0, fy=32.0, cx=31.5, cy=31.5, width=64, height=64)
CAM = Camera(K, Pose.identity())


def _random_camera(rng, spread=1.0, tilt=0.3):
    rot = Rotation.from_rotvec(rng.normal(scale=tilt, size=3)).as_matrix()
    return Camera(K, Pose(rot, -rot @ rng.uniform(-spread, spread, size=3)))


def _random_frame(rng):
    depth = rng.uniform(2.0, 8.0, size=(8, 8))
    depth[rng.random((8, 8)) < 0.1] = np.inf
    latent = rng.uniform(size=(8, 8, 2)).astype(np.float32)
    return latent, depth, _random_camera(rng), int(rng.choice([1, 2, 4]))


def _lift(frame, t, first_id):
    latent, depth, cam, p = frame
    return lift_frame(latent, depth, cam, t, p, first_id=first_id)


def _assert_same_retrieval(a, b):
    assert [r.patch_id for r in a] == [r.patch_id for r in b]
    for x, y in zip(a, b):
        assert x.occlusion_score == y.occlusion_score
        np.testing.assert_array_equal(x.valid, y.valid)
        np.testing.assert_array_equal(x.warped_coords, y.warped_coords)
        np.testing.assert_array_equal(x.query_depth, y.query_depth)


# --- 挿入・削除 ----------------------------------------------------------------

def test_insert_then_remove_restores_retrieval():
    rng = np.random.default_rng(21)
    for _ in range(20):
        mem = MosaicMemory()
        mem.insert(_lift(_random_frame(rng), 0, 0))
        before = mem.copy()
        queries = [_random_camera(rng, 1.5, 0.6) for _ in range(3)]
        baseline = [retrieve(mem, q, 1) for q in queries]

        latent, depth, cam, p = _random_frame(rng)
        added = mem.lift_and_insert(latent, depth, cam, 1, p)
        mem.remove([a.id for a in added])

        assert mem.same_contents(before)
        for q, base in zip(queries, baseline):
            _assert_same_retrieval(retrieve(mem, q, 1), base)
            _assert_same_retrieval(retrieve(mem, q, 1, use_index=False), base)


def test_successive_inserts_equal_one_combined_insert():
    rng = np.random.default_rng(22)
    for _ in range(20):
        first = _lift(_random_frame(rng), 0, 0)
        second = _lift(_random_frame(rng), 1, len(first))
        split = MosaicMemory().insert(first).insert(second)
        joined = MosaicMemory().insert(first + second)
        assert split.ids() == joined.ids()
        for _ in range(3):
            q = _random_camera(rng, 1.5, 0.6)
            cfg = RetrievalConfig(occlusion_threshold=float(rng.uniform(0.0, 0.5)))
            _assert_same_retrieval(retrieve(split, q, 2, cfg), retrieve(joined, q, 2, cfg))


# --- 候補 ----------------------------------------------------------------------

def _visible(mem, camera):
    return {p.id for p in mem.snapshot() if project_points(camera, p.world_points)[2].any()}


def test_candidates_cover_every_visible_patch():
    rng = np.random.default_rng(23)
    for _ in range(50):
        mem = MosaicMemory()
        for t in range(int(rng.integers(1, 4))):
            latent, depth, cam, p = _random_frame(rng)
            mem.lift_and_insert(latent, depth, cam, t, p)
        q = _random_camera(rng, 1.5, 0.6)
        assert _visible(mem, q) <= set(candidate_patches(mem, q))


def test_candidates_of_empty_memory_and_full_view():
    assert candidate_patches(MosaicMemory(), CAM) == []
    assert _visible(MosaicMemory(), CAM) == set()

    mem = MosaicMemory()
    mem.lift_and_insert(np.zeros((8, 8, 3), dtype=np.float32), np.full((8, 8), 5.0), CAM, 0, 2)
    assert _visible(mem, CAM) == set(range(16))
    assert candidate_patches(mem, CAM) == list(range(16))
