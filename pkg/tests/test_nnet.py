import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vtgrasp.annotate import gaussian_mask_label
from vtgrasp.nnet.detect import OracleDetector, extract_grasps
from vtgrasp.nnet.gradcheck import check_layer, check_tgcnn, gradient_suite, rel_error
from vtgrasp.nnet.layers import BackwardBeforeForward, ReLU
from vtgrasp.nnet.losses import cross_entropy, huber_elementwise, huber_loss, softmax
from vtgrasp.nnet.model import MLP, TGCNN, ResidualBlock
from vtgrasp.nnet.train import GraspDataset, TrainConfig, train
from vtgrasp.worldsim import (BackgroundSpec, Scene, SupportField, class_footprint, make_object,
                              render_rgb, toy_camera)

CAM = toy_camera()


def one_sample(size=32, px_per_mm=0.25):
    cam = toy_camera(size, px_per_mm=px_per_mm)
    obj = make_object(0, 0, class_footprint(0), (5.0, -8.0), 0.0, 50.0)
    s = Scene("plane", SupportField(), (obj,), BackgroundSpec("checker", 1), 1.0)
    g, _ = gaussian_mask_label(s, cam, 8.0)
    img = render_rgb(s, cam).transpose(2, 0, 1)[None].astype(np.float32)
    return GraspDataset(img, g.q[None], g.r[None])


# --- gradients -------------------------------------------------------------

def test_gradient_suite_small():
    rows = gradient_suite(n_shapes=4, seed=1)
    assert {r["primitive"] for r in rows} >= {"conv2d", "conv_transpose2d", "batchnorm_train",
                                              "batchnorm_eval", "relu", "linear", "add", "huber",
                                              "cross_entropy"}
    assert max(r["max_rel_error"] for r in rows) < 1e-4


def test_residual_block_gradients():
    rng = np.random.default_rng(0)
    block = ResidualBlock(3, rng, np.float64)
    x = rng.standard_normal((2, 5, 5, 3))
    errs = check_layer(block, x, rng)
    assert max(errs.values()) < 1e-4


def test_full_network_gradients():
    rng = np.random.default_rng(3)
    model = TGCNN(seed=2, n_res=1, dtype=np.float64)
    for p in model.parameters():  # non-zero heads so every path carries gradient
        if p.name.startswith("head"):
            p.data[...] = rng.standard_normal(p.data.shape)
    errs = check_tgcnn(model, rng.standard_normal((1, 3, 12, 12)), rng, n_probe=6)
    assert max(errs.values()) < 1e-4


def test_relu_passes_positive_gradient():
    r = ReLU()
    x = np.array([[0.5, 2.0, 3.0]])
    r.forward(x)
    g = np.array([[1.0, -2.0, 7.0]])
    assert np.array_equal(r.backward(g), g)


def test_backward_before_forward():
    with pytest.raises(BackwardBeforeForward):
        ReLU().backward(np.ones(3))
    with pytest.raises(BackwardBeforeForward):
        TGCNN(n_res=1).backward(np.zeros((8, 8)), np.zeros((8, 8)))


def test_rel_error_floor():
    assert rel_error(np.zeros(3), np.full(3, 1e-9)) < 1e-3


# --- losses ----------------------------------------------------------------

def test_huber_identities():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 4, 4))
    assert huber_loss(x, x, x, x) == 0.0
    assert huber_elementwise(np.array(0.5)) == 0.125
    assert huber_elementwise(np.array(3.0)) == 2.5


def test_huber_single_pixel_contributions():
    n = 64
    z = np.zeros((8, 8))
    for e, want in ((0.5, 0.125), (3.0, 2.5), (-3.0, 2.5)):
        q = z.copy()
        q[2, 5] = e
        assert huber_loss(q, z, z, z) == want / n


def test_huber_zero_residual_gradient():
    x = np.ones((3, 3))
    _, (dq, dr) = huber_loss(x, x, x, x, return_grad=True)
    assert not dq.any() and not dr.any()


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30))
def test_huber_symmetric_and_nonnegative(vals):
    e = np.array(vals)
    z = np.zeros_like(e)
    assert huber_loss(e, z, z, z) >= 0
    assert huber_loss(e, z, z, z) == huber_loss(-e, z, z, z)


def test_huber_shape_mismatch():
    with pytest.raises(ValueError):
        huber_loss(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 3)))


def test_softmax_and_cross_entropy():
    logits = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]])
    p = softmax(logits)
    assert np.allclose(p.sum(1), 1.0, atol=1e-12)
    assert np.isclose(cross_entropy(logits[1:], np.array([2])), np.log(3))


# --- network ---------------------------------------------------------------

def test_zero_image_gives_zero_quality():
    q, r = TGCNN(seed=0).forward(np.zeros((3, 32, 32), np.float32))
    assert not q.any() and not r.any()


@pytest.mark.parametrize("hw", [(8, 8), (16, 24), (32, 32), (48, 20), (96, 96)])
def test_output_matches_input_size(hw):
    m = TGCNN(seed=1, n_res=1)
    for p in m.parameters():
        p.data[...] += 0.01
    q, r = m.eval().forward(np.random.default_rng(0).random((2, 3, *hw), dtype=np.float32))
    assert q.shape == r.shape == (2, *hw)
    assert np.isfinite(q).all() and np.isfinite(r).all()


def test_rejects_bad_sizes():
    with pytest.raises(ValueError):
        TGCNN(n_res=1).forward(np.zeros((3, 30, 32), np.float32))
    with pytest.raises(ValueError):
        TGCNN(n_res=1).forward(np.zeros((4, 32, 32), np.float32))


def test_forward_is_deterministic():
    x = np.random.default_rng(5).random((3, 32, 32), dtype=np.float32)
    a = TGCNN(seed=7).eval()
    b = TGCNN(seed=7).eval()
    for m in (a, b):
        m.head_q.weight.data[...] = 0.1
    qa, ra = a.forward(x)
    qb, rb = b.forward(x)
    assert np.array_equal(qa, qb) and np.array_equal(ra, rb)
    assert np.array_equal(a.forward(x)[0], qa)


def test_parameter_count_matches_architecture():
    enc = (9 * 9 * 3 * 16 + 16) + (5 * 5 * 16 * 32 + 32)
    block = 2 * (3 * 3 * 32 * 32 + 32) + 2 * (2 * 32)
    dec = (32 * 16 * 4 * 4 + 16) + (16 * 8 * 4 * 4 + 8)
    heads = 2 * (8 + 1)
    assert TGCNN(n_res=3).num_parameters() == enc + 3 * block + dec + heads


# --- training --------------------------------------------------------------

def test_overfit_single_sample():
    data = one_sample()
    res = train(TGCNN(seed=0, n_res=1), data,
                TrainConfig(lr=1e-2, steps=200, batch=1, augment=False, optimizer="adam"))
    assert res.final_loss <= 0.1 * res.initial_loss


def test_zero_learning_rate_keeps_parameters():
    data = one_sample()
    for opt in ("sgd", "adam"):
        m = TGCNN(seed=0, n_res=1)
        before = [p.data.copy() for p in m.parameters()]
        train(m, data, TrainConfig(lr=0.0, steps=5, batch=1, optimizer=opt))
        assert all(np.array_equal(a, p.data) for a, p in zip(before, m.parameters()))


def test_training_is_deterministic():
    data = one_sample()
    cfg = TrainConfig(lr=1e-2, steps=10, batch=1, seed=4)
    a = train(TGCNN(seed=1, n_res=1), data, cfg)
    b = train(TGCNN(seed=1, n_res=1), data, cfg)
    assert a.final_loss == b.final_loss and a.step_losses == b.step_losses
    assert a.final_loss <= a.initial_loss


def test_empty_dataset_rejected():
    empty = GraspDataset(np.zeros((0, 3, 8, 8), np.float32), np.zeros((0, 8, 8), np.float32),
                         np.zeros((0, 8, 8), np.float32))
    with pytest.raises(ValueError):
        train(TGCNN(n_res=1), empty, TrainConfig())


def test_mlp_shapes():
    m = MLP([5, 4, 3])
    assert m.forward(np.zeros((2, 5))).shape == (2, 3)


# --- grasp extraction ------------------------------------------------------

def test_single_spike():
    q = np.zeros((96, 96))
    q[30, 40] = 0.9
    (c, w), = extract_grasps(q, np.full_like(q, 0.5), 3, CAM, 50.0, 24.0)
    assert c.s == (40.0, 30.0) and c.q == 0.9


def test_equal_spikes_tie_break_row_major():
    q = np.zeros((96, 96))
    q[50, 10] = q[20, 70] = 1.0
    (c, _), = extract_grasps(q, np.zeros_like(q), 1, CAM, 0.0, 24.0)
    assert c.s == (70.0, 20.0)


def test_candidates_sorted_and_suppressed():
    q = np.zeros((96, 96))
    q[10, 10], q[12, 12], q[60, 60] = 0.5, 0.9, 0.7
    cands = extract_grasps(q, np.full_like(q, 0.2), 5, CAM, 0.0, 24.0)
    assert [c.q for c, _ in cands] == [0.9, 0.7]


def test_label_map_recovers_center():
    obj = make_object(0, 1, class_footprint(1, 0.3), (20.0, -15.0), 0.0, 50.0)
    s = Scene("plane", SupportField(), (obj,), BackgroundSpec("solid", 0), 1.0)
    g, meta = gaussian_mask_label(s, CAM, 24.0)
    (c, w), = extract_grasps(g.q, g.r, 1, CAM, 50.0, 24.0)
    assert np.hypot(*(np.array(c.s) - meta.objects[0].center)) <= 1.0
    assert np.hypot(*(np.array(w.p) - obj.centroid)) <= 3.0
    # radius converted through the ground scale at the hint height
    assert w.r == pytest.approx(c.r_i * (450.0 / (0.5 * 500.0)), rel=1e-6)


@given(st.floats(0.01, 1e3), st.integers(0, 1000))
def test_extraction_invariant_to_positive_scale(scale, seed):
    rng = np.random.default_rng(seed)
    q = rng.random((24, 24))
    r = rng.random((24, 24))
    cam = toy_camera(24)
    a = extract_grasps(q, r, 4, cam, 0.0, 6.0)
    b = extract_grasps(q * scale, r, 4, cam, 0.0, 6.0)
    assert [c.s for c, _ in a] == [c.s for c, _ in b]


def test_k_must_be_positive():
    with pytest.raises(ValueError):
        extract_grasps(np.zeros((4, 4)), np.zeros((4, 4)), 0, CAM)


# --- oracle detector -------------------------------------------------------

def _scene():
    objs = (make_object(0, 0, class_footprint(0), (-30.0, 0.0), 0.0, 50.0),
            make_object(1, 2, class_footprint(2), (35.0, 20.0), 0.0, 50.0))
    return Scene("plane", SupportField(), objs, BackgroundSpec("checker", 0), 1.0, seed=3)


def test_oracle_without_noise_is_the_label():
    s = _scene()
    q, r = OracleDetector(r_max=24.0).detect(s, CAM)
    g, _ = gaussian_mask_label(s, CAM, 24.0)
    assert np.array_equal(q, g.q) and np.array_equal(r, g.r)


def test_oracle_jitter_is_consistent_and_moves_peaks():
    s = _scene()
    det = OracleDetector(r_max=24.0, jitter_mm=15.0, seed=1)
    q1, _ = det.detect(s, CAM)
    q2, _ = det.detect(s, CAM)
    assert np.array_equal(q1, q2)
    g, _ = gaussian_mask_label(s, CAM, 24.0)
    assert not np.array_equal(q1, g.q)


def test_oracle_false_positives_add_maxima():
    s = _scene()
    clean = extract_grasps(*OracleDetector(r_max=24.0).detect(s, CAM), 10, CAM, 50.0, 24.0)
    noisy = extract_grasps(*OracleDetector(r_max=24.0, false_positives=2, seed=5).detect(s, CAM),
                           10, CAM, 50.0, 24.0)
    assert len(noisy) > len(clean)
