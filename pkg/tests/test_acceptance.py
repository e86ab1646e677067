"""End-to-end acceptance criteria, one test each.

Every test prints a single ``[criterion N] PASS|FAIL ...`` line with the
measured numbers; the lines are repeated in the terminal summary. Set
``VTGRASP_FULL_ABLATION=1`` to run the label ablation at the full detection
training scale instead of the reduced one.
"""

import os
import time

import numpy as np
import pytest

from vtgrasp.harness.config import load_config
from vtgrasp.harness.experiments import run_experiment, train_detector
from vtgrasp.nnet.gradcheck import gradient_suite
from vtgrasp.nnet.losses import huber_elementwise, huber_loss
from vtgrasp.tactile import brute_force_circle, min_enclosing_circle

pytestmark = pytest.mark.acceptance

RESULTS: dict[int, str] = {}


def report(capsys, n: int, ok: bool, detail: str) -> None:
    line = f"[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS[n] = line
    with capsys.disabled():
        print("\n" + line)


@pytest.fixture(scope="session")
def base_cfg():
    return load_config({"harness": {"seed": 0}})


@pytest.fixture(scope="session")
def detector(base_cfg):
    t0 = time.perf_counter()
    model, res = train_detector(base_cfg)
    return model, res, time.perf_counter() - t0


def test_gradient_suite(capsys):
    t0 = time.perf_counter()
    rows = gradient_suite(n_shapes=50, seed=0)
    dt = time.perf_counter() - t0
    worst = max(rows, key=lambda r: r["max_rel_error"])
    prims = {r["primitive"] for r in rows}
    ok = worst["max_rel_error"] < 1e-4 and dt < 60.0 and len(rows) == 50 * len(prims)
    report(capsys, 1, ok, f"{len(rows)} checks over {len(prims)} primitives, worst "
           f"{worst['max_rel_error']:.2e} ({worst['primitive']}), {dt:.1f}s")
    assert ok


def test_mec_oracle(capsys):
    rng = np.random.default_rng(2024)
    sets = [rng.uniform(-100, 100, (int(rng.integers(1, 51)), 2)) for _ in range(1000)]
    t0 = time.perf_counter()
    worst = 0.0
    for pts in sets:
        c, r = min_enclosing_circle(pts)
        bc, br = brute_force_circle(pts)
        worst = max(worst, abs(r - br), float(np.hypot(*(c - bc))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 10.0
    report(capsys, 2, ok, f"1000 sets, worst radius/center deviation {worst:.1e}, {dt:.1f}s")
    assert ok


def test_detection_generalizes(capsys, base_cfg, detector):
    model, res, train_s = detector
    e1 = run_experiment("E1", base_cfg, model)
    e1b = run_experiment("E1b", base_cfg, model)
    acc_bg = e1.metrics["test_backgrounds"]["god_accuracy"]
    acc_cls = e1b.metrics["test_classes"]["god_accuracy"]
    total = train_s + e1.seconds + e1b.seconds
    ok = acc_bg >= 0.85 and acc_cls >= 0.80 and total <= 15 * 60
    report(capsys, 3, ok, f"GOD@0.45 unseen backgrounds {acc_bg:.3f} (>=0.85), unseen classes "
           f"{acc_cls:.3f} (>=0.80), train+eval {total:.0f}s")
    assert ok


def test_label_ablation(capsys):
    if os.environ.get("VTGRASP_FULL_ABLATION") == "1":
        nnet = {}
    else:
        # both label types get the same (reduced) training; see the decisions log
        nnet = {"n_train": 200, "epochs": 10, "lr_decay_epochs": [7], "n_test": 100}
    cfg = load_config({"nnet": nnet, "harness": {"label_seeds": [0, 1, 2]}})
    rep = run_experiment("E1c", cfg)
    parts = []
    for s in cfg["harness"]["label_seeds"]:
        g, b = rep.metrics[f"seed{s}_gaussian"], rep.metrics[f"seed{s}_binary"]
        parts.append(f"s{s}: acc {g['god_accuracy']:.2f}/{b['god_accuracy']:.2f} "
                     f"dist {g['mean_center_dist_px']:.2f}/{b['mean_center_dist_px']:.2f}px")
    ok = rep.passed
    report(capsys, 4, ok, "gaussian/binary " + "; ".join(parts))
    assert ok


def test_calibration_gain(capsys, base_cfg):
    rep = run_experiment("E5", base_cfg)
    m = rep.metrics
    ok = rep.passed and m["calibrated"]["episodes"] == 200
    report(capsys, 5, ok, f"calibrated {m['calibrated']['success_rate']:.3f} vs direct "
           f"{m['direct']['success_rate']:.3f} (gap {m['gap']['percentage_points']:.1f}pp >= 25); "
           f"jitter 0: {m['calibrated_jitter0']['success_rate']:.3f}/{m['direct_jitter0']['success_rate']:.3f}"
           f" (>= 0.98)")
    assert ok


def test_fusion_gain(capsys):
    # only the classifier ablation matters here; keep the grasping episodes short
    cfg = load_config({"harness": {"plane_episodes": 2}, "fuse": {"seeds": [0, 1, 2]}})
    rep = run_experiment("E4", cfg)
    m = rep.metrics
    std = m["ablation_standard_fusion"]["per_seed"]
    fus_h = m["ablation_heavy_fusion"]["accuracy"]
    vis_h = m["ablation_heavy_visual_only"]["accuracy"]
    ok = rep.checks["fusion_standard>=0.95"] and rep.checks["fusion_minus_visual_heavy>=0.20"]
    report(capsys, 6, ok, f"heavy: fusion {fus_h:.3f} vs visual {vis_h:.3f} (+{100 * (fus_h - vis_h):.1f}pp"
           f" >= 20); standard fusion per seed {', '.join(f'{a:.3f}' for a in std)} (>= 0.95)")
    assert ok


def test_tactile_height_sensing(capsys):
    cfg = load_config({"harness": {"ths_episodes": {"undulating": 100, "stacking": 50}}})
    rep = run_experiment("E6", cfg)
    und, stk = rep.metrics["undulating"], rep.metrics["stacking"]
    ok = und["within_delta"] == 1.0 and stk["within_delta"] == 1.0 and stk["cleared_in_order"] == 1.0 \
        and und["contacts"] > 0 and stk["episodes"] == 50 and und["episodes"] == 100
    report(capsys, 7, ok, f"{und['contacts'] + stk['contacts']} contacts, max height error "
           f"{max(und['max_height_error'], stk['max_height_error']):.2f}mm (<= delta); stacked "
           f"top-down {stk['cleared_in_order']:.2f} of 50")
    assert ok


@pytest.fixture(scope="session")
def tpe_report(base_cfg):
    return run_experiment("E7", base_cfg)


def test_tpe_ordering(capsys, tpe_report):
    m = tpe_report.metrics
    rates = [m[k]["success_rate"] for k in ("L50", "L100", "L150")]
    times = [m[k]["mean_sim_time_s"] for k in ("L50", "L100", "L150")]
    ok = rates[0] >= rates[1] >= rates[2] and rates[0] >= 0.85 and times[0] > times[1] > times[2] \
        and all(m[k]["episodes"] == 100 for k in ("L50", "L100", "L150"))
    report(capsys, 8, ok, "success " + "/".join(f"{r:.2f}" for r in rates) + ", mean time "
           + "/".join(f"{t:.0f}" for t in times) + "s for L=50/100/150mm")
    assert ok


def test_determinism(capsys, base_cfg, detector, tpe_report):
    model, res, _ = detector
    # E1 end to end: retrain from the stored seed and re-evaluate
    again, res2 = train_detector(base_cfg)
    same_train = res.step_losses == res2.step_losses and all(
        np.array_equal(a.data, b.data) for a, b in zip(model.parameters(), again.parameters()))
    e1a = run_experiment("E1", base_cfg, model)
    e1b = run_experiment("E1", base_cfg, again)
    # E7 twice, the second time on two worker threads
    cfg2 = load_config({"harness": {"threads": 2}})
    e7b = run_experiment("E7", cfg2)
    same_e1 = e1a.metrics_json() == e1b.metrics_json()
    same_e7 = tpe_report.metrics_json() == e7b.metrics_json() and [r.replay_key() for r in tpe_report.episodes] \
        == [r.replay_key() for r in e7b.episodes]
    ok = same_train and same_e1 and same_e7
    report(capsys, 9, ok, f"retrained weights identical {same_train}, E1 metrics identical {same_e1}, "
           f"E7 metrics and replays identical {same_e7}")
    assert ok


def test_huber_identities(capsys):
    x = np.random.default_rng(0).standard_normal((2, 8, 8))
    e = np.array([0.5, 3.0])
    per_pixel = huber_elementwise(e)
    # a single nonzero pixel in an 8x8 map: its term enters the mean over the 64 pixels
    one = np.zeros((1, 8, 8))
    one[0, 3, 5] = 3.0
    z = np.zeros_like(one)
    checks = [
        huber_loss(x, x, x, x) == 0.0,
        per_pixel[0] == 0.125,
        per_pixel[1] == 2.5,
        huber_elementwise(-e)[1] == 2.5,
        huber_loss(one, z, z, z) == 2.5 / 64,
    ]
    ok = all(bool(c) for c in checks)
    report(capsys, 10, ok, f"loss(x,x)=0, terms at e=0.5 and e=3: {float(per_pixel[0])}, {float(per_pixel[1])}")
    assert ok
