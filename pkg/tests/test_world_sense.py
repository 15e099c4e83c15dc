import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaitguide.errors import DegenerateScan, PoseOutOfBounds
from gaitguide.gait_sense import GaitEstimate, StepRecord
from gaitguide.harness import builtin, run_scenario
from gaitguide.world_sense import (
    Mode,
    NavEstimate,
    OccupancyGrid,
    ScanFrame,
    WorldModel,
    beam_angles,
    box,
    dead_reckon,
    distance_to_segments,
    export_pgm,
    fuse_gps,
    localize,
    mode_switch,
    rasterize_segments,
    raycast,
    read_pgm,
    simulate_gps,
    simulate_imu,
    simulate_lidar,
    update_occupancy,
)
from gaitguide.world_sense.grid import L_CLAMP, L_FREE, L_OCC
from oracles import march as _march

HALL = builtin("hallway").world


# ----------------------------------------------------------------------
# lidar


def test_empty_world_all_no_return():
    scan = simulate_lidar((0.0, 0.0, 0.3), WorldModel())
    assert scan.n_beams == 360
    assert np.all(np.isinf(scan.ranges))


def test_wall_straight_ahead():
    w = WorldModel([(5.0, -10.0, 5.0, 10.0)])
    assert raycast(0.0, 0.0, np.array([0.0]), w.segments)[0] == pytest.approx(5.0, abs=1e-12)
    scan = simulate_lidar((0.0, 0.0, 0.0), w, n_beams=361)
    assert scan.ranges[180] == pytest.approx(5.0, abs=1e-12)


def test_raycast_matches_ray_march_oracle():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        segs = []
        for _ in range(rng.integers(1, 4)):
            cx, cy = rng.uniform(-4, 4, 2)
            segs += box(cx, cy, *rng.uniform(0.3, 2.0, 2))
        segs += box(0.0, 0.0, 12.0, 12.0)  # every beam ends within 17 m
        segs = np.asarray(segs)
        for _ in range(20):
            while True:
                x, y = rng.uniform(-5.5, 5.5, 2)
                if distance_to_segments(x, y, segs) > 0.05:
                    break
            a = rng.uniform(-math.pi, math.pi)
            r = raycast(x, y, np.array([a]), segs)[0]
            m = _march(x, y, a, segs)
            worst = max(worst, abs(r - m))
    # half of the 0.10 m grid cell; the march itself is good to about 1 mm
    assert worst < 0.05


def test_scan_mirror_symmetry():
    w = WorldModel(box(1.0, 0.7, 1.5, 0.8) + box(3.0, -0.2, 0.5, 2.0) + box(0.0, 0.0, 14.0, 14.0))
    pose = (-1.0, 0.0, 0.0)
    a = simulate_lidar(pose, w).ranges
    b = simulate_lidar((pose[0], -pose[1], -pose[2]), w.mirrored()).ranges
    assert np.array_equal(a, b[::-1])
    rel = beam_angles(360)
    assert np.array_equal(rel, -rel[::-1])


def test_pose_out_of_bounds():
    w = WorldModel(bounds=(0.0, 0.0, 5.0, 5.0))
    with pytest.raises(PoseOutOfBounds):
        simulate_lidar((6.0, 1.0, 0.0), w)


def test_lidar_noise_seeded():
    a = simulate_lidar((1.0, 0.0, 0.0), HALL, rng=3, sigma=0.01, index=5)
    b = simulate_lidar((1.0, 0.0, 0.0), HALL, rng=3, sigma=0.01, index=5)
    assert np.array_equal(a.ranges, b.ranges)


# ----------------------------------------------------------------------
# gps and imu

GPS_WORLD = WorldModel(gps_regions=[np.array([(0, 0), (10, 0), (10, 10), (0, 10)])])


def test_gps_none_outside_region():
    assert simulate_gps((-1.0, 5.0, 0.0), GPS_WORLD, rng=0) is None


def test_gps_exact_without_noise():
    assert simulate_gps((3.25, 4.5, 0.0), GPS_WORLD, sigma=0.0) == (3.25, 4.5)


def test_gps_error_calibration():
    errs = [math.dist(simulate_gps((5, 5, 0), GPS_WORLD, rng=1, index=i), (5, 5)) for i in range(10_000)]
    assert np.mean(np.asarray(errs) <= 2.0) >= 0.95


def test_imu_identity():
    for h in (-3.0, -0.5, 0.0, 1.2, 3.1):
        assert simulate_imu(h, t=7.0, sigma_deg=0.0, bias_drift_deg_per_s=0.0) == pytest.approx(h, abs=1e-15)


def test_imu_bias_only():
    h = simulate_imu(0.0, t=10.0, sigma_deg=0.0, bias_drift_deg_per_s=0.1)
    assert math.degrees(h) == pytest.approx(1.0, abs=1e-12)


def test_imu_white_noise_variance():
    v = np.array([simulate_imu(0.0, rng=11, index=i, bias_drift_deg_per_s=0.0) for i in range(10_000)])
    ratio = np.var(v) / math.radians(1.0) ** 2
    assert 0.9 < ratio < 1.1


# ----------------------------------------------------------------------
# occupancy grid


def _single_beam(r, n_beams=11):
    ranges = np.full(n_beams, np.inf)
    ranges[n_beams // 2] = r  # straight ahead
    return ScanFrame.from_ranges(ranges)


def test_single_beam_update():
    g = OccupancyGrid.covering((0, 0, 5, 1), resolution=0.1)
    update_occupancy(g, (0.05, 0.55, 0.0), _single_beam(3.0))
    hit = np.argwhere(g.log_odds > 0)
    free = np.argwhere(g.log_odds < 0)
    assert hit.tolist() == [[5, 30]]
    assert g.log_odds[5, 30] == pytest.approx(L_OCC)
    # every cell from the sensor up to the hit is cleared once
    assert sorted(free[:, 1].tolist()) == list(range(30))
    assert np.all(free[:, 0] == 5)
    assert np.allclose(g.log_odds[g.log_odds < 0], -L_FREE)


def test_repeated_scans_saturate():
    g = OccupancyGrid.covering((0, 0, 5, 1), resolution=0.1)
    for _ in range(20):
        update_occupancy(g, (0.05, 0.55, 0.0), _single_beam(3.0))
    assert g.log_odds[5, 30] == L_CLAMP
    assert g.log_odds.min() == -L_CLAMP


def test_update_commutes_for_disjoint_beams():
    pose = (1.0, 0.0, 0.0)
    full = simulate_lidar(pose, HALL, n_beams=90)
    a = full.ranges.copy()
    b = full.ranges.copy()
    a[1::2] = np.inf
    b[0::2] = np.inf
    g1 = OccupancyGrid.covering(HALL.bounds)
    g2 = g1.copy()
    update_occupancy(update_occupancy(g1, pose, ScanFrame.from_ranges(a)), pose, ScanFrame.from_ranges(b))
    update_occupancy(update_occupancy(g2, pose, ScanFrame.from_ranges(b)), pose, ScanFrame.from_ranges(a))
    assert np.array_equal(g1.log_odds, g2.log_odds)


def test_hallway_traverse_maps_walls():
    """Mapping with the walked poses of a hallway run marks >= 90 % of wall cells."""
    cfg = builtin("hallway")
    _, tr = run_scenario(cfg)
    t = tr.column("t")
    x, y, h = tr.column("true_x"), tr.column("true_y"), tr.column("true_heading")
    grid = OccupancyGrid.covering(cfg.world.bounds, resolution=cfg.perception.resolution)
    every = max(1, int(round(1.0 / (cfg.perception.map_hz * (t[1] - t[0])))))
    for i in range(0, len(t), every):
        scan = simulate_lidar((x[i], y[i], h[i]), cfg.world, rng=cfg.seed, sigma=cfg.noise.lidar_sigma, index=i)
        update_occupancy(grid, (x[i], y[i], h[i]), scan)
    walls = rasterize_segments(grid, cfg.world.segments)
    assert (grid.log_odds[walls] > 0).mean() >= 0.90


# ----------------------------------------------------------------------
# localisation


def _hall_map():
    # 5 cm cells, matching the 5 cm translation step of the matcher
    g = OccupancyGrid.covering(HALL.bounds, resolution=0.05)
    for px in np.arange(1.0, 11.0, 0.5):
        for _ in range(3):
            update_occupancy(g, (px, 0.0, 0.0), simulate_lidar((px, 0.0, 0.0), HALL))
    return g


MAP = _hall_map()


def test_localize_prior_is_truth():
    pose = (5.0, 0.0, 0.0)
    got, conf = localize(MAP, pose, simulate_lidar(pose, HALL))
    assert got == pose
    assert conf > 0


@pytest.mark.parametrize("dx,dy", [(0.1, 0.0), (0.0, 0.1), (-0.1, 0.0)])
def test_localize_corrects_offset(dx, dy):
    rng = np.random.default_rng(5)
    for _ in range(30):
        truth = (rng.uniform(2.0, 9.0), rng.uniform(-0.4, 0.4), 0.0)
        got, _ = localize(MAP, (truth[0] + dx, truth[1] + dy, 0.0), simulate_lidar(truth, HALL))
        assert math.hypot(got[0] - truth[0], got[1] - truth[1]) <= 0.05 + 1e-9


def test_localize_empty_grid_no_confidence():
    g = OccupancyGrid.covering(HALL.bounds)
    pose = (4.0, 0.0, 0.0)
    got, conf = localize(g, pose, simulate_lidar(pose, HALL))
    assert conf == 0.0
    assert got == pose  # all scores tie, zero perturbation wins


@given(
    st.floats(2.0, 9.0), st.floats(-0.5, 0.5), st.floats(-0.3, 0.3),
)
def test_localize_stays_in_window(x, y, h):
    got, conf = localize(MAP, (x, y, h), simulate_lidar((x, y, h), HALL), beam_stride=4)
    assert abs(got[0] - x) <= 0.2 + 1e-9 and abs(got[1] - y) <= 0.2 + 1e-9
    assert abs(got[2] - h) <= math.radians(10) + 1e-9
    assert 0.0 <= conf <= 1.0


def test_localize_degenerate_scan():
    with pytest.raises(DegenerateScan):
        localize(MAP, (5.0, 0.0, 0.0), _single_beam(1.0, n_beams=360))


# ----------------------------------------------------------------------
# dead reckoning, mode switching, gps fusion


def _gait(count, stride=0.45):
    return GaitEstimate(stride_hat=stride, step_count=count)


def test_dead_reckon_no_new_steps():
    nav = NavEstimate(pose_hat=(1.0, 2.0, 0.0), step_count_used=4)
    out = dead_reckon(nav, _gait(4), 0.0)
    assert out.pose_hat == (1.0, 2.0, 0.0)


def test_dead_reckon_ten_steps():
    out = dead_reckon(NavEstimate(), _gait(10), 0.0)
    assert out.pose_hat[0] == pytest.approx(4.5, abs=1e-12)
    assert out.step_count_used == 10


def test_dead_reckon_uses_step_strides():
    steps = (StepRecord("left", 1.0, 0.40), StepRecord("right", 1.5, 0.50))
    out = dead_reckon(NavEstimate(), GaitEstimate(stride_hat=0.45, step_count=2, new_steps=steps), math.pi / 2)
    assert out.pose_hat[1] == pytest.approx(0.9, abs=1e-12)


def test_square_walk_closes():
    nav = NavEstimate()
    n = 0
    for side in range(4):
        for _ in range(10):
            n += 1
            nav = dead_reckon(nav, _gait(n), side * math.pi / 2)
    assert math.hypot(*nav.pose_hat[:2]) < 1e-6


def test_mode_switch_after_five_ticks():
    nav = NavEstimate()
    modes = []
    for _ in range(7):
        nav = mode_switch(nav, True)
        modes.append(nav.mode)
    assert modes.index(Mode.OUTDOOR_GPS) == 4
    for _ in range(4):
        nav = mode_switch(nav, False)
    assert nav.mode is Mode.OUTDOOR_GPS
    nav = mode_switch(nav, False)
    assert nav.mode is Mode.INDOOR_SLAM


def test_mode_switch_alternating_never_switches():
    nav = NavEstimate()
    for k in range(200):
        nav = mode_switch(nav, k % 2 == 0)
        assert nav.mode is Mode.INDOOR_SLAM


def test_hallway_exit_single_transition():
    _, tr = run_scenario(builtin("hallway_exit"))
    m = tr.column("mode")
    changes = [(a, b) for a, b in zip(m, m[1:]) if a != b]
    assert changes == [(Mode.INDOOR_SLAM.value, Mode.OUTDOOR_GPS.value)]


def test_fuse_gps():
    nav = NavEstimate(pose_hat=(0.0, 0.0, 0.5))
    assert fuse_gps(nav, None) is nav
    out = fuse_gps(nav, (10.0, -5.0), gain=0.2)
    assert out.pose_hat == pytest.approx((2.0, -1.0, 0.5))
    assert fuse_gps(nav, (10.0, -5.0), gain=1.0).pose_hat[:2] == (10.0, -5.0)


# ----------------------------------------------------------------------
# map export


def test_pgm_round_trip(tmp_path):
    g = OccupancyGrid.covering((0, 0, 1.0, 0.5), resolution=0.1)
    g.log_odds[0, 0] = 2.0  # occupied, bottom-left
    g.log_odds[4, 9] = -2.0  # free, top-right
    pgm, side = export_pgm(g, tmp_path / "map")
    img = read_pgm(pgm)
    assert img.shape == (5, 10)
    assert img[-1, 0] == 0 and img[0, 9] == 255 and img[2, 2] == 128
    text = side.read_text()
    assert "resolution: 0.1" in text and "origin: [0.0, 0.0, 0.0]" in text
