# manipulation/test_edit.py
import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from mosaicmem.model.models import Intrinsics, Pose, Camera, RigidTransform
from mosaicmem.memory.store import MosaicMemory
from mosaicmem.memory.retrieval import retrieve
from mosaicmem.manipulation.edit import (
    Selection, transform_patch, delete, duplicate, relocate, stitch, copy_ids,
)

K = Intrinsics(fx=32.0, fy=32.0, cx=31.5, cy=31.5, width=64, height=64)
CAM = Camera(K, Pose.identity())


def _wall(mem=None, depth=5.0, cam=CAM, t=0, seed=0):
    mem = mem or MosaicMemory()
    rng = np.random.default_rng(seed)
    mem.lift_and_insert(rng.uniform(size=(8, 8, 3)), np.full((8, 8), depth), cam, t, 2)
    return mem


def _random_transform(rng, scale=True):
    rot = Rotation.from_rotvec(rng.normal(size=3)).as_matrix()
    return RigidTransform(rot, rng.uniform(-3, 3, size=3), rng.uniform(0.5, 2.0) if scale else 1.0)


def test_delete_returns_new_memory():
    mem = _wall()
    out = delete(mem, Selection.by_ids([0, 5]))
    assert len(out) == 14 and 5 not in out
    assert len(mem) == 16 and 5 in mem


def test_unknown_ids_warn():
    with pytest.warns(UserWarning):
        assert Selection.by_ids([3, 99]).resolve(_wall()) == [3]


def test_box_selection_uses_centroid():
    mem = _wall()
    # 左上パッチの重心は x,y < 0
    sel = Selection.in_box((-10, -10, 0), (0, 0, 10))
    ids = sel.resolve(mem)
    assert ids == [0, 1, 4, 5]
    assert all(np.all(mem.get(i).centroid()[:2] < 0) for i in ids)


def test_region_selection():
    mask = np.zeros((64, 64), dtype=bool)
    mask[:, 48:] = True
    assert Selection.in_region(CAM, mask).resolve(_wall()) == [3, 7, 11, 15]


def test_selection_needs_exactly_one_criterion():
    with pytest.raises(ValueError):
        Selection()
    with pytest.raises(ValueError):
        Selection(ids=(1,), everything=True)
    with pytest.raises(ValueError):
        Selection(region=np.ones((2, 2), dtype=bool))


def test_transform_patch_keeps_lift_consistency():
    rng = np.random.default_rng(0)
    patch = _wall().get(6)
    xf = _random_transform(rng)
    moved = transform_patch(patch, xf, 100)
    assert moved.id == 100
    np.testing.assert_array_equal(moved.latent, patch.latent)
    np.testing.assert_allclose(moved.depth, patch.depth * xf.scale)
    np.testing.assert_allclose(moved.world_points, xf.apply(patch.world_points), atol=1e-9)


def test_duplicate_adds_translated_copies():
    mem = _wall()
    xf = RigidTransform.translation_only((2.0, 0.0, 0.0))
    out = duplicate(mem, Selection.by_ids([1, 2]), xf)
    new = copy_ids(out, mem)
    assert new == [16, 17] and len(out) == 18
    np.testing.assert_allclose(out.get(16).world_points, mem.get(1).world_points + [2, 0, 0], atol=1e-12)
    assert len(mem) == 16


def test_relocate_moves_selected_patches():
    mem = _wall()
    xf = RigidTransform.translation_only((0.0, 0.0, 1.0))
    out = relocate(mem, Selection.all(), xf)
    assert len(out) == 16 and not set(out.ids()) & set(mem.ids())
    np.testing.assert_allclose(out.get(16).world_points[..., 2], 6.0)


def test_delete_undoes_duplicate():
    mem = _wall()
    xf = RigidTransform.translation_only((1.0, 1.0, 0.0))
    dup = duplicate(mem, Selection.by_ids([2, 3, 9]), xf)
    back = delete(dup, Selection.by_ids(copy_ids(dup, mem)))
    assert back.same_contents(mem)


def test_relocate_then_retrieve_is_equivariant():
    rng = np.random.default_rng(11)
    mem = _wall()
    side = Camera(K, Pose(Rotation.from_euler("y", 10, degrees=True).as_matrix(), [0.3, 0.0, 0.5]))
    mem = _wall(mem, depth=6.0, cam=side, t=1, seed=1)
    query = Camera(K, Pose(Rotation.from_euler("y", -5, degrees=True).as_matrix(), [-0.2, 0.1, 0.0]))
    base = retrieve(mem, query, 2)
    assert base
    for _ in range(10):
        xf = _random_transform(rng)
        moved = relocate(mem, Selection.all(), xf)
        again = retrieve(moved, xf.apply_camera(query), 2)
        assert [r.patch_id - mem.next_id for r in again] == [r.patch_id for r in base]
        for a, b in zip(base, again):
            np.testing.assert_array_equal(a.valid, b.valid)
            np.testing.assert_allclose(b.warped_coords, a.warped_coords, atol=1e-6)
            np.testing.assert_allclose(b.query_depth, a.query_depth * xf.scale, rtol=1e-9)


def _footprint(found, shape=(8, 8)):
    cells = np.zeros(shape, dtype=bool)
    for r in found:
        c = np.rint(r.warped_coords[..., 1:][r.valid]).astype(int)
        ok = (c[:, 0] >= 0) & (c[:, 0] < shape[1]) & (c[:, 1] >= 0) & (c[:, 1] < shape[0])
        cells[c[ok, 1], c[ok, 0]] = True
    return cells


def test_stitch_seam_covers_both_footprints():
    a = MosaicMemory()
    rng = np.random.default_rng(0)
    depth = np.full((8, 8), 5.0)
    depth[:, 4:] = np.inf
    a.lift_and_insert(rng.uniform(size=(8, 8, 3)), depth, CAM, 0, 2)
    b = MosaicMemory()
    b.lift_and_insert(rng.uniform(size=(8, 8, 3)), depth, CAM, 0, 2)
    # 深度 5 で x+5 は 32 px（latent 4 セル）右
    xf = RigidTransform.translation_only((5.0, 0.0, 0.0))
    joint = stitch(a, b, xf)
    assert len(joint) == 16 and copy_ids(joint, a) == list(range(8, 16))

    query = CAM
    fa = _footprint(retrieve(a, query, 0))
    fb = _footprint(retrieve(relocate(b, Selection.all(), xf), query, 0))
    fj = _footprint(retrieve(joint, query, 0))
    np.testing.assert_array_equal(fj, fa | fb)
    assert fj.all()


def test_stitch_with_empty_memory_is_identity():
    mem = _wall()
    out = stitch(mem, MosaicMemory(), _random_transform(np.random.default_rng(1)))
    assert out.same_contents(mem) and out.next_id == mem.next_id
    assert [r.patch_id for r in retrieve(out, CAM, 0)] == [r.patch_id for r in retrieve(mem, CAM, 0)]


def test_stitch_is_associative():
    rng = np.random.default_rng(2)
    a, b, c = _wall(seed=0), _wall(depth=4.0, seed=1), _wall(depth=6.0, seed=2)
    x, y = _random_transform(rng), _random_transform(rng)
    left = stitch(stitch(a, b, x), c, y)
    right = stitch(a, stitch(b, c, x.inverse().compose(y)), x)
    assert left.ids() == right.ids() == list(range(48))
    for p, q in zip(left.snapshot(), right.snapshot()):
        np.testing.assert_array_equal(p.latent, q.latent)
        np.testing.assert_allclose(p.world_points, q.world_points, atol=1e-9)


def _sources(found, n_a):
    return {"A" if r.patch_id < n_a else "B" for r in found}


def test_panning_across_the_seam():
    a = _wall(seed=0)
    b = _wall(seed=1)
    # A は x ∈ [-4.4, 4.4]、B は +10 で [5.6, 14.4]（深度 5）
    joint = stitch(a, b, RigidTransform.translation_only((10.0, 0.0, 0.0)))
    seen = []
    for cx in np.linspace(0.0, 10.0, 11):
        found = retrieve(joint, Camera(K, Pose(np.eye(3), [-cx, 0.0, 0.0])), 0)
        assert found
        kinds = _sources(found, 16)
        seen.append("mixed" if len(kinds) == 2 else kinds.pop())
    assert seen[0] == "A" and seen[-1] == "B" and "mixed" in seen
    order = {"A": 0, "mixed": 1, "B": 2}
    assert [order[s] for s in seen] == sorted(order[s] for s in seen)


def test_sky_stitch_flips_memory_overhead():
    # 真下を向くカメラ（y 下向き）で y=5 の地面を持ち上げる
    down = Camera(K, Pose(np.array([[1.0, 0, 0], [0, 0, -1.0], [0, 1.0, 0]]), np.zeros(3)))
    up = Camera(K, Pose(np.array([[1.0, 0, 0], [0, 0, 1.0], [0, -1.0, 0]]), np.zeros(3)))
    a = _wall(cam=down, seed=0)
    b = _wall(cam=down, seed=1)
    # x 軸まわりに π、さらに上（-y）へ 10
    flip = RigidTransform(np.diag([1.0, -1.0, -1.0]), np.array([0.0, -10.0, 0.0]), 1.0)
    joint = stitch(a, b, flip)

    assert _sources(retrieve(joint, down, 0), 16) == {"A"}
    overhead = retrieve(joint, up, 0)
    assert sorted(r.patch_id for r in overhead) == list(range(16, 32))
    for r in overhead:
        patch = joint.get(r.patch_id)
        x, y, z = np.moveaxis(patch.world_points, -1, 0)
        np.testing.assert_allclose(y, -15.0, atol=1e-9)
        assert r.valid.all()
        np.testing.assert_allclose(r.query_depth, 15.0, atol=1e-9)
        np.testing.assert_allclose(r.warped_coords[..., 1], (K.fx * x / 15.0 + K.cx - 3.5) / 8, atol=1e-9)
        np.testing.assert_allclose(r.warped_coords[..., 2], (K.fy * z / 15.0 + K.cy - 3.5) / 8, atol=1e-9)

    # 上下反転: 元の行が下るほど A は z が減り、空の B は z が増える
    rows_a = np.array([a.get(i).world_points[..., 2].mean() for i in (0, 4, 8, 12)])
    rows_b = np.array([joint.get(16 + i).world_points[..., 2].mean() for i in (0, 4, 8, 12)])
    assert np.all(np.diff(rows_a) < 0) and np.all(np.diff(rows_b) > 0)


def test_duplicate_is_seen_from_a_shifted_camera_like_the_original():
    mem = _wall()
    dup = duplicate(mem, Selection.all(), RigidTransform.translation_only((10.0, 0.0, 0.0)))
    base = retrieve(dup, CAM, 0)
    shifted = retrieve(dup, Camera(K, Pose(np.eye(3), [-10.0, 0.0, 0.0])), 0)
    assert [r.patch_id for r in base] == list(range(16))
    assert [r.patch_id for r in shifted] == [r.patch_id + 16 for r in base]
    for a, b in zip(base, shifted):
        np.testing.assert_array_equal(a.valid, b.valid)
        np.testing.assert_allclose(b.warped_coords, a.warped_coords, atol=1e-6)
        np.testing.assert_allclose(b.query_depth, a.query_depth, atol=1e-9)
