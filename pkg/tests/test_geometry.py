import numpy as np
import pytest

from agileplan.geometry import (
    CollisionModel,
    GeometryError,
    PointCloud,
    collision_cost,
    collision_cost_array,
    in_collision,
)
from agileplan.trajectory import DiscreteTrajectory


def linear_scan_nearest(points, p):
    return float(np.min(np.linalg.norm(points - np.asarray(p)[None, :], axis=1)))


def test_nearest_single_point():
    cloud = PointCloud([[1.0, 0.0, 0.0]])
    assert cloud.nearest_distance([0.0, 0.0, 0.0]) == pytest.approx(1.0)


def test_nearest_min_of_two():
    cloud = PointCloud([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    assert cloud.nearest_distance([0.0, 0.0, 0.0]) == pytest.approx(1.0)


def test_nearest_matches_linear_scan():
    # the index is an implementation detail; exactness is the contract
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = rng.integers(1, 10_000)
        pts = rng.uniform(-50, 50, (n, 3))
        cloud = PointCloud(pts)
        queries = rng.uniform(-60, 60, (30, 3))
        got = cloud.nearest_distances(queries)
        want = [linear_scan_nearest(pts, q) for q in queries]
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_capped_clearance_exact_below_cap():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-10, 10, (2000, 3))
    cloud = PointCloud(pts)
    queries = rng.uniform(-12, 12, (200, 3))
    exact = cloud.nearest_distances(queries)
    capped = cloud.clearances_capped(queries, 1.0)
    near = exact <= 1.0
    np.testing.assert_allclose(capped[near], exact[near])
    assert np.all(np.isinf(capped[exact > 1.0]))


def test_empty_cloud_is_no_obstacles():
    cloud = PointCloud(np.empty((0, 3)))
    assert np.isinf(cloud.nearest_distance([1.0, 2.0, 3.0]))
    traj = DiscreteTrajectory([0.1], [[0.0, 0.0, 0.0]])
    assert not in_collision(cloud, CollisionModel(), traj)


def test_cloud_rejects_nonfinite():
    with pytest.raises(GeometryError):
        PointCloud([[np.nan, 0, 0]])


def test_collision_cost_known_values():
    m = CollisionModel(r_q=0.2)
    assert collision_cost(m, 0.0) == pytest.approx(4.0)
    assert collision_cost(m, 0.4) == pytest.approx(0.0)  # boundary, -4 + 4
    assert collision_cost(m, 0.2) == pytest.approx(3.0)  # -0.04/0.04 + 4
    assert collision_cost(m, 1.0) == 0.0


def test_collision_cost_contact_is_four_for_any_radius():
    for r_q in (0.05, 0.2, 1.3):
        assert collision_cost(CollisionModel(r_q=r_q), 0.0) == pytest.approx(4.0)


def test_collision_cost_monotone_and_continuous():
    m = CollisionModel(r_q=0.2)
    d = np.linspace(0.0, 0.8, 10_001)
    c = collision_cost_array(m, d)
    inside = d <= 2 * m.r_q
    assert np.all(np.diff(c[inside]) <= 1e-12)
    assert np.all(c[~inside] == 0.0)
    # continuity across the truncation boundary
    eps = 1e-9
    assert abs(collision_cost(m, 2 * m.r_q - eps) - collision_cost(m, 2 * m.r_q + eps)) < 1e-7


def test_collision_cost_negative_distance_rejected():
    with pytest.raises(GeometryError):
        collision_cost(CollisionModel(), -0.1)
    with pytest.raises(GeometryError):
        collision_cost_array(CollisionModel(), np.array([0.1, -0.2]))


def test_in_collision_sample_on_point():
    cloud = PointCloud([[1.0, 0.0, 0.0]])
    traj = DiscreteTrajectory([0.1, 0.2], [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    assert in_collision(cloud, CollisionModel(), traj)


def test_in_collision_near_miss_geometry():
    # straight trajectory passing 0.19 m from a point: closer than r_q = 0.2
    # (verified analytically: min over samples of point-to-line offsets)
    ts = np.arange(1, 11) * 0.1
    positions = np.stack([ts * 2.0, np.zeros(10), np.zeros(10)], axis=1)
    traj = DiscreteTrajectory(ts, positions)
    cloud = PointCloud([[1.0, 0.19, 0.0]])  # 0.19 off the x-axis, at a sample x
    assert in_collision(cloud, CollisionModel(r_q=0.2), traj)
    cloud_far = PointCloud([[1.0, 0.21, 0.0]])
    assert not in_collision(cloud_far, CollisionModel(r_q=0.2), traj)


def test_xyz_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(57, 3))
    cloud = PointCloud(pts)
    path = tmp_path / "c.xyz"
    cloud.save_xyz(path)
    # comments and blank lines are tolerated
    text = "# header comment\n\n" + path.read_text()
    path.write_text(text)
    back = PointCloud.load_xyz(path)
    np.testing.assert_array_equal(back.points, pts)


def test_json_roundtrip(tmp_path):
    pts = np.array([[0.5, -1.25, 3.0], [2.0, 0.0, -7.5]])
    path = tmp_path / "c.json"
    PointCloud(pts).save_json(path)
    np.testing.assert_array_equal(PointCloud.load_json(path).points, pts)


def test_xyz_malformed_line(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("1 2\n")
    with pytest.raises(GeometryError):
        PointCloud.load_xyz(path)


def test_vehicle_radius_positive():
    with pytest.raises(GeometryError):
        CollisionModel(r_q=0.0)
