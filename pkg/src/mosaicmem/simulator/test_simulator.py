# simulator/test_simulator.py
import filecmp
import warnings

import numpy as np
import pytest

from mosaicmem.model.models import Intrinsics, Pose, Camera
from mosaicmem.geometry.camera import back_project_pixels, project_points
from mosaicmem.simulator.scene import SceneBuilder, SyntheticScene, build_scene, textured_wall, scene_preset
from mosaicmem.simulator.render import MAX_SPLAT_PX, render, pool_latent, splat_cap
from mosaicmem.simulator.trajectory import (
    Trajectory, generate_trajectory, make_intrinsics, frustum_overlap, revisit_frequency,
)
from mosaicmem.simulator.dataset import correspondences, ground_truth_flow, make_dataset
from mosaicmem.simulator.plot import plot_trajectory
from mosaicmem.storage.dataset import read_dataset, write_dataset

K = Intrinsics(fx=32.0, fy=32.0, cx=32.0, cy=32.0, width=64, height=64)
CAM = Camera(K, Pose.identity())


def _points(*pts, radius=0.1):
    n = len(pts)
    return SyntheticScene(np.array(pts, dtype=float), np.linspace(0.1, 0.9, 3 * n).reshape(n, 3),
                          np.full(n, radius))


# --- scene ---------------------------------------------------------------------

def test_builder_is_seeded():
    a = SceneBuilder(3).add_cloud((0, 0, 5), count=50).build()
    b = SceneBuilder(3).add_cloud((0, 0, 5), count=50).build()
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.colors, b.colors)


def test_plane_points_are_cell_centred():
    s = SceneBuilder().add_plane((0, 0, 2), (2.0, 1.0), (4, 2), "z").build()
    assert len(s) == 8
    np.testing.assert_allclose(sorted(set(s.points[:, 0])), [-0.75, -0.25, 0.25, 0.75])
    np.testing.assert_allclose(s.points[:, 2], 2.0)
    assert s.radii[0] == pytest.approx(0.375)


def test_box_has_six_faces():
    s = SceneBuilder().add_box((0, 0, 0), (1, 1, 1), (2, 2)).build()
    assert len(s) == 24
    assert np.abs(s.points).max() == pytest.approx(0.5)


def test_build_scene_from_spec():
    spec = {"seed": 4, "primitives": [
        {"type": "plane", "center": [0, 0, 6], "size": [4, 4], "resolution": [10, 10]},
        {"type": "cloud", "center": [0, 0, 3], "count": 5, "velocity": [0.1, 0, 0]},
    ]}
    s = build_scene(spec)
    assert len(s) == 105 and s.seed == 4 and not s.is_static
    np.testing.assert_allclose(s.positions_at(2.0)[-1], s.points[-1] + [0.2, 0, 0])
    with pytest.raises(ValueError):
        build_scene([{"type": "torus", "center": [0, 0, 0]}])
    with pytest.raises(ValueError):
        build_scene([{"type": "plane", "center": [0, 0, 0], "wobble": 1}])


def test_presets():
    assert scene_preset("wall").is_static
    assert not scene_preset("moving").is_static
    with pytest.raises(ValueError):
        scene_preset("forest")


# --- render ----------------------------------------------------------------------

def test_single_splat_covers_its_pixel():
    frame = render(_points((0.0, 0.0, 5.0)), CAM)
    assert frame.point_ids[32, 32] == 0 and frame.depth[32, 32] == 5.0
    assert frame.covered.sum() == 1
    assert np.isinf(frame.depth[0, 0]) and frame.point_ids[0, 0] == -1
    np.testing.assert_array_equal(frame.image[0, 0], 0.0)


def test_nearest_splat_wins_and_ties_go_to_lower_index():
    frame = render(_points((0.0, 0.0, 6.0), (0.0, 0.0, 4.0), (0.0, 0.0, 4.0), radius=0.5), CAM)
    assert frame.point_ids[32, 32] == 1
    assert frame.depth[32, 32] == 4.0


def test_points_behind_camera_are_not_drawn():
    assert not render(_points((0.0, 0.0, -5.0)), CAM).covered.any()
    assert not render(SyntheticScene(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0)), CAM).covered.any()


def test_pool_latent():
    image = np.zeros((4, 4, 3))
    image[:2, :2] = 1.0
    depth = np.full((4, 4), 2.0)
    depth[0, 0] = 4.0
    depth[3, 3] = np.inf
    latent, ldepth = pool_latent(image, depth, 2)
    np.testing.assert_allclose(latent[..., 0], [[1.0, 0.0], [0.0, 0.0]])
    # 調和平均: 4 / (1/4 + 3/2)
    assert ldepth[0, 0] == pytest.approx(4.0 / 1.75)
    assert ldepth[0, 1] == 2.0 and np.isinf(ldepth[1, 1])
    with pytest.raises(ValueError):
        pool_latent(image, depth, 3)


# --- trajectories ------------------------------------------------------------------

def test_make_intrinsics():
    k = make_intrinsics(256, 256, 90.0)
    assert k.fx == pytest.approx(128.0) and k.cx == 127.5


def test_forward_and_orbit():
    scene = textured_wall(resolution=50)
    fwd = generate_trajectory("forward", {"n_frames": 5, "step": 0.5}, scene, K)
    np.testing.assert_allclose(np.diff(fwd.centers()[:, 2]), 0.5)
    orbit = generate_trajectory("orbit", {"n_frames": 6, "radius": 3.0}, scene, K)
    for cam in orbit.cameras:
        uv, _, ok = project_points(cam, scene.centroid()[None])
        assert ok[0]
        np.testing.assert_allclose(uv[0], [K.cx, K.cy], atol=1e-9)


def test_revisit_loop_pairs():
    scene = textured_wall(resolution=50)
    traj = generate_trajectory("revisit_loop", {"n_frames": 10}, scene, K)
    assert len(traj) == 10 and traj.revisit_pairs
    for (i, j), ov in zip(traj.revisit_pairs, traj.overlaps):
        assert i < 5 <= j and j - i >= 2 and ov >= 0.3
        assert ov == pytest.approx(frustum_overlap(scene, traj.cameras[i], traj.cameras[j]))
    assert 0 < revisit_frequency(traj) <= 1


def test_revisit_loop_without_overlap_fails():
    scene = textured_wall(resolution=20)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValueError):
            generate_trajectory("revisit_loop", {"n_frames": 8, "min_overlap": 1.5}, scene, K)


def test_trajectory_errors():
    scene = textured_wall(resolution=20)
    with pytest.raises(ValueError):
        generate_trajectory("spiral", {}, scene, K)
    with pytest.raises(ValueError):
        generate_trajectory("forward", {"speed": 2}, scene, K)


# --- dataset ------------------------------------------------------------------------

def test_correspondences_link_the_same_points():
    scene = textured_wall(resolution=100)
    a = render(scene, Camera(K, Pose(np.eye(3), [0.0, 0.0, -1.0])))
    # 0.3125 m は深度 5 でちょうど 2 px
    b = render(scene, Camera(K, Pose(np.eye(3), [-0.3125, 0.0, -1.0])))
    m = correspondences(a, b)
    assert len(m) > 1000
    ua, va = m[:, 0].astype(int), m[:, 1].astype(int)
    ub, vb = np.rint(m[:, 2]).astype(int), np.rint(m[:, 3]).astype(int)
    np.testing.assert_array_equal(a.point_ids[va, ua], b.point_ids[vb, ub])
    np.testing.assert_array_equal(a.image[va, ua], b.image[vb, ub])


def test_flow_of_moving_plane():
    scene = SceneBuilder().add_plane((0, 0, 4), (6, 6), (120, 120), "z", velocity=(0.5, 0, 0)).build()
    fa, fb = render(scene, CAM, 0.0), render(scene, CAM, 1.0)
    flow, mask = ground_truth_flow(scene, fa, fb, 0.0, 1.0)
    assert mask.sum() == fa.covered.sum()
    np.testing.assert_allclose(flow[mask, 0], K.fx * 0.5 / 4.0)
    np.testing.assert_allclose(flow[mask, 1], 0.0, atol=1e-12)


def test_dataset_write_read_write_is_byte_identical(tmp_path):
    scene = textured_wall(resolution=100)
    traj = generate_trajectory("revisit_loop", {"n_frames": 6}, scene, K)
    ds = make_dataset(scene, traj, latent_downsample=8, temporal=4, out_dir=tmp_path / "a")
    assert len(ds.frames) == 6 and len(ds.flows) == 5
    assert ds.frames[0].latent.shape == (8, 8, 3)
    back = read_dataset(tmp_path / "a")
    assert back.revisit_pairs == ds.revisit_pairs and back.temporal == 4
    write_dataset(back, tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    assert mismatch == [] and errors == []


def test_dataset_requires_divisible_image():
    scene = textured_wall(resolution=20)
    traj = generate_trajectory("forward", {"n_frames": 2}, scene, K)
    with pytest.raises(ValueError):
        make_dataset(scene, traj, latent_downsample=7)


def test_plot_trajectory(tmp_path):
    scene = textured_wall(resolution=30)
    traj = generate_trajectory("revisit_loop", {"n_frames": 8}, scene, K)
    out = plot_trajectory(scene, traj, tmp_path / "traj.png")
    assert out.exists() and out.stat().st_size > 0


# --- 幾何の整合 ---------------------------------------------------------------------

def test_render_of_back_projected_pixels_reproduces_the_frame():
    frame = render(textured_wall(resolution=100), CAM)
    v, u = np.nonzero(frame.covered)
    uv = np.stack([u, v], axis=-1).astype(np.float64)
    z = frame.depth[v, u]
    # 半径 0.4 px のスプラットは自分の画素だけを塗る
    points = SyntheticScene(back_project_pixels(CAM, uv, z), frame.image[v, u], 0.4 * z / K.fx)
    again = render(points, CAM)
    np.testing.assert_array_equal(again.covered, frame.covered)
    np.testing.assert_array_equal(again.image, frame.image)
    np.testing.assert_allclose(again.depth[v, u], z, rtol=1e-12)


def test_revisit_views_agree_on_shared_points():
    scene = textured_wall(resolution=100)
    traj = generate_trajectory("revisit_loop", {"n_frames": 8, "lane_offset": 0.2}, scene, K)
    ds = make_dataset(scene, traj, latent_downsample=8, temporal=4)
    assert ds.correspondences
    for corr in ds.correspondences:
        m = corr.matches
        assert len(m) > 0
        ua, va = m[:, 0].astype(int), m[:, 1].astype(int)
        ub, vb = np.rint(m[:, 2]).astype(int), np.rint(m[:, 3]).astype(int)
        diff = np.abs(ds.frames[corr.a].image[va, ua] - ds.frames[corr.b].image[vb, ub])
        assert diff.max() <= 1.0 / 255.0


def test_build_scene_seed_controls_the_random_parts():
    spec = {"seed": 1, "primitives": [{"type": "cloud", "center": [0, 0, 4], "count": 30}]}
    a, b = build_scene(spec), build_scene(spec)
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.colors, b.colors)
    c = build_scene(spec, seed=2)
    assert c.seed == 2
    assert not np.array_equal(a.points, c.points)
    assert not np.array_equal(a.colors, c.colors)


def test_identical_cameras_give_identity_correspondences():
    scene = textured_wall(resolution=100)
    ds = make_dataset(scene, Trajectory([CAM, CAM], "forward", [(0, 1)]), latent_downsample=8)
    m = ds.correspondences[0].matches
    assert len(m) == (ds.frames[0].point_ids >= 0).sum()
    np.testing.assert_allclose(m[:, 2:], m[:, :2], atol=1e-9)
    flow = ds.flows[0]
    np.testing.assert_allclose(flow.flow[flow.mask], 0.0, atol=1e-9)


def test_known_translation_gives_the_expected_pixel_offset():
    scene = textured_wall(distance=6.0, resolution=100)
    shifted = Camera(K, Pose(np.eye(3), [-0.5, 0.0, 0.0]))     # 中心 x=+0.5
    ds = make_dataset(scene, Trajectory([CAM, shifted], "forward", [(0, 1)]), latent_downsample=8)
    m = ds.correspondences[0].matches
    assert len(m) > 1000
    expected = -K.fx * 0.5 / 6.0
    np.testing.assert_allclose(m[:, 2] - m[:, 0], expected, atol=1e-9)
    np.testing.assert_allclose(m[:, 3], m[:, 1], atol=1e-9)
    flow = ds.flows[0]
    np.testing.assert_allclose(flow.flow[flow.mask, 0], expected, atol=1e-9)


def test_near_splats_are_capped():
    assert splat_cap(64, 64) == MAX_SPLAT_PX
    assert splat_cap(512, 256) == 128
    big = Intrinsics(fx=256.0, fy=256.0, cx=256.0, cy=256.0, width=512, height=512)
    # 投影半径 256 px > 上限 128 px：±128 の正方形に切り詰め
    frame = render(_points((0.0, 0.0, 1.0), radius=1.0), Camera(big, Pose.identity()))
    assert frame.covered.sum() == 257 * 257
    assert frame.covered[256 - 128, 256 - 128] and not frame.covered[256 - 129, 256]
