import math

import numpy as np
import pytest

from vtgrasp.nnet.detect import OracleDetector
from vtgrasp.strategy import (EpisodeRecord, StrategyConfig, boustrophedon, is_marked, mark_region,
                              run_touch_first, run_vision_first, run_vision_touch)
from vtgrasp.tactile import GripperSpec
from vtgrasp.worldsim import BackgroundSpec, Scene, SupportField, class_footprint, make_object
from vtgrasp.worldsim.scene import SceneSpec, generate_scene

G = GripperSpec()
ORACLE = OracleDetector(r_max=24.0)


def scene_with(*objs, kind="plane", seed=0):
    return Scene(kind, SupportField(), tuple(objs), BackgroundSpec("solid", 0), 1.0, seed=seed)


def disc(center=(10.0, -5.0), radius=16.0, top=50.0, base=0.0, oid=0):
    return make_object(oid, 0, class_footprint(0) * (radius / 16.0), center, base, top)


# --- vision first ----------------------------------------------------------

def test_empty_scene_makes_no_attempts():
    rec = run_vision_first(scene_with(), ORACLE, StrategyConfig())
    assert rec.attempts == [] and rec.status == "done" and rec.probe_count == 0


def test_exact_detection_grasps_with_at_most_one_move():
    rec = run_vision_first(scene_with(disc()), ORACLE, StrategyConfig(eta=0.0))
    assert rec.successes() == 1
    assert rec.calib_count <= 1
    assert rec.attempts[0]["final_offset"] <= 2.0


def test_jittered_detection_is_recentred():
    det = OracleDetector(r_max=24.0, jitter_mm=15.0, seed=3)
    off = det.offsets(scene_with(disc()))[0]
    assert np.hypot(*off) > 2.0  # the seed really displaces the detection
    rec = run_vision_first(scene_with(disc()), det, StrategyConfig(calib_tol=2.0))
    assert rec.successes() == 1
    assert rec.calib_count >= 1
    assert rec.attempts[0]["final_offset"] <= 2.0


def test_direct_grasp_skips_touch():
    rec = run_vision_first(scene_with(disc()), ORACLE, StrategyConfig(calibrate=False))
    assert rec.probe_count == 0 and rec.successes() == 1


def test_failures_are_marked_and_skipped():
    # a large jitter with calibration off makes the only candidate miss
    s = scene_with(disc())
    det = next(d for d in (OracleDetector(24.0, 40.0, seed=k) for k in range(50))
               if 30.0 < np.hypot(*d.offsets(s)[0]) < 70.0)  # off target, still in view
    rec = run_vision_first(scene_with(disc()), det, StrategyConfig(calibrate=False))
    failed = [a for a in rec.attempts if a["outcome"] != "success"]
    assert failed and len(rec.marks) == len(failed)
    assert all(is_marked(rec, a["p"]) for a in failed)
    assert rec.status == "done"


def test_vision_disabled_and_aborted():
    rec = run_vision_first(scene_with(disc()), None, StrategyConfig())
    assert rec.status == "vision_disabled" and rec.attempts == []

    class Broken:
        r_max = 24.0

        def detect(self, scene, cam, t=0.0):
            raise RuntimeError("camera unplugged")

    rec = run_vision_first(scene_with(disc()), Broken(), StrategyConfig())
    assert rec.status == "aborted"
    assert rec.events[-1]["event"] == "abort"


def test_sim_time_accounts_for_every_action():
    cfg = StrategyConfig(t_probe=4.0, t_move=1.0)
    rec = run_vision_first(scene_with(disc()), OracleDetector(24.0, 10.0, seed=2), cfg)
    assert math.isclose(rec.sim_time_s, 4.0 * rec.probe_count + 1.0 * rec.move_count)


# --- vision touch ----------------------------------------------------------

def test_descent_finds_top_within_one_step():
    s = scene_with(disc(center=(0.0, 0.0), top=40.0))
    rec = run_vision_touch(s, ORACLE, StrategyConfig(start_height=100.0, descent_step=5.0))
    contacts = [e for e in rec.events if e["event"] == "contact"]
    assert contacts
    assert 35.0 <= contacts[0]["h"] <= 40.0
    probes_before = next(i for i, e in enumerate(rec.events) if e["event"] == "contact")
    n_probe = sum(e["event"] == "probe" for e in rec.events[:probes_before])
    assert n_probe <= math.ceil((100.0 - 35.0) / 5.0)
    assert abs(contacts[0]["declared"] - 40.0) <= 5.0
    assert rec.successes() == 1


def test_stacked_objects_removed_top_down():
    for seed in range(5):
        scene = generate_scene(SceneSpec(kind="stacking", n_objects=2, background="checker",
                                         region=(-40.0, 40.0, -40.0, 40.0)), seed)
        lower, upper = sorted(scene.objects, key=lambda o: o.top_height)
        assert upper.base_height == pytest.approx(lower.top_height)
        rec = run_vision_touch(scene, ORACLE, StrategyConfig(noise_seed=seed))
        ids = [a["object_id"] for a in rec.attempts if a["outcome"] == "success"]
        assert ids[: 2] == [upper.id, lower.id]


# --- touch first -----------------------------------------------------------

def test_boustrophedon_lattice():
    nodes = boustrophedon((-200.0, 200.0, -200.0, 200.0), 100.0)
    assert len(nodes) == 16
    xs = sorted({x for x, _ in nodes})
    assert np.allclose(np.diff(xs), 100.0) and math.isclose(xs[0] + xs[-1], 0.0, abs_tol=1e-12)
    # rows alternate direction, so consecutive nodes are always one pitch apart
    steps = [np.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(nodes, nodes[1:])]
    assert np.allclose(steps, 100.0)
    assert boustrophedon((0.0, 10.0, 0.0, 10.0), 50.0) == [(5.0, 5.0)]


def test_empty_descent_probe_count():
    cfg = StrategyConfig(mode="touch_first", tpe_region=(-20.0, 20.0, -20.0, 20.0), tpe_step=40.0,
                         start_height=100.0, descent_step=5.0, floor_height=0.0)
    rec = run_touch_first(scene_with(), cfg)
    assert rec.status == "not_found"
    assert rec.probe_count == math.ceil((100.0 - 0.0) / 5.0)


def _tpe_scene(i, radius=30.0):
    rng = np.random.default_rng([41, i])
    c = rng.uniform(-200 + radius, 200 - radius, 2)
    return scene_with(disc(center=tuple(c), radius=radius, top=50.0), seed=i)


def test_tpe_fine_lattice_always_finds():
    # a pitch below the object width guarantees some node lands on the footprint
    for i in range(10):
        rec = run_touch_first(_tpe_scene(i), StrategyConfig(mode="touch_first", tpe_step=50.0,
                                                            start_height=60.0, noise_seed=i))
        assert rec.status == "found"
        assert rec.successes() == 1


def test_tpe_coarse_lattice_misses_some_and_probes_less():
    fine, coarse = [], []
    for i in range(20):
        s = _tpe_scene(i)
        fine.append(run_touch_first(s, StrategyConfig(mode="touch_first", tpe_step=50.0, start_height=60.0)))
        coarse.append(run_touch_first(s, StrategyConfig(mode="touch_first", tpe_step=150.0, start_height=60.0)))
    assert sum(r.successes() for r in coarse) < 20
    assert np.mean([r.probe_count for r in fine]) >= np.mean([r.probe_count for r in coarse])


# --- records ---------------------------------------------------------------

def test_mark_region():
    rec = EpisodeRecord("vision_first", 0)
    assert not is_marked(rec, (0.0, 0.0))
    mark_region(rec, (10.0, 0.0), 5.0)
    assert is_marked(rec, (14.0, 0.0)) and is_marked(rec, (15.0, 0.0))
    assert not is_marked(rec, (15.1, 0.0))
    assert rec.events[-1]["event"] == "mark"


def test_replay_is_deterministic():
    s = generate_scene(SceneSpec(kind="undulating", n_objects=3, background="checker",
                                 region=(-70.0, 70.0, -70.0, 70.0)), 12)
    det = OracleDetector(24.0, 5.0, seed=4)
    a = run_vision_touch(s, det, StrategyConfig(noise_seed=9))
    b = run_vision_touch(s, det, StrategyConfig(noise_seed=9))
    assert a.replay_key() == b.replay_key()


def test_jsonl_round_trip():
    rec = run_vision_first(scene_with(disc()), OracleDetector(24.0, 10.0, seed=2), StrategyConfig())
    back = EpisodeRecord.from_jsonl(rec.to_jsonl())
    assert back.replay_key() == rec.replay_key()
    assert back.wallclock_ms == rec.wallclock_ms


def test_strategy_config_validation():
    with pytest.raises(ValueError):
        StrategyConfig(mode="telepathy")
    with pytest.raises(ValueError):
        StrategyConfig(descent_step=0.0)
    with pytest.raises(ValueError):
        StrategyConfig(tpe_step=-1.0)
    with pytest.raises(ValueError):
        StrategyConfig(max_calib_iters=0)
    cfg = StrategyConfig(mode="touch_first", tpe_region=(-1.0, 1.0, -2.0, 2.0))
    assert StrategyConfig.from_dict(cfg.to_dict()) == cfg
