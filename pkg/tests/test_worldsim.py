import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vtgrasp.nnet.detect import WorldGrasp
from vtgrasp.tactile import GripperSpec
from vtgrasp.worldsim import (BackgroundSpec, NoIntersection, ObjectInstance, Outcome, Scene,
                              SceneSpec, SceneSpecError, SupportField, class_footprint,
                              default_camera, generate_scene, image_to_world, make_object,
                              object_mask, render_rgb, toy_camera, validate_scene, world_to_image)
from vtgrasp.worldsim.camera import MAX_TILT, CameraModel
from vtgrasp.worldsim.render import DEFAULT_RENDER

SOLID = BackgroundSpec("solid", 0, {"color_a": [0.2, 0.4, 0.6]})


def disc_scene(center=(0.0, 0.0), radius=16.0, bg=SOLID, gain=1.0, kind="plane"):
    obj = make_object(0, 0, class_footprint(0) * (radius / 16.0), center, 0.0, 50.0)
    return Scene(kind, SupportField(), (obj,), bg, gain)


# --- scenes ----------------------------------------------------------------

def test_empty_flat_scene():
    s = generate_scene(SceneSpec(kind="plane", n_objects=0, background="solid"), 7)
    assert s.objects == ()
    assert s.support.kind == "flat"


def test_generation_is_deterministic():
    spec = SceneSpec(kind="plane", n_objects=3, background="checker")
    a, b = generate_scene(spec, 1), generate_scene(spec, 1)
    assert a.to_dict() == b.to_dict()
    assert generate_scene(spec, 2).to_dict() != a.to_dict()


def test_undulating_object_sits_above_support():
    spec = SceneSpec(kind="undulating", n_objects=1, amplitude=20.0, wavelength=150.0)
    s = generate_scene(spec, 3)
    (o,) = s.objects
    c = o.centroid
    assert o.top_height > float(s.support.height(c[0], c[1]))
    validate_scene(s)


@pytest.mark.parametrize("kind", ["plane", "stacking", "overlap", "undulating", "sand", "water_dynamic"])
def test_generated_scenes_satisfy_invariants(kind):
    for seed in range(5):
        validate_scene(generate_scene(SceneSpec(kind=kind, n_objects=2), seed))


def test_overdense_spec_is_rejected():
    spec = SceneSpec(kind="plane", n_objects=8, region=(-40.0, 40.0, -40.0, 40.0))
    with pytest.raises(SceneSpecError):
        generate_scene(spec, 0)


def test_flat_support_is_constant():
    f = SupportField("flat", base_height=3.5)
    x = np.linspace(-200, 200, 17)
    assert np.all(f.height(x, -x) == 3.5)


@given(st.floats(-240, 240), st.floats(-240, 240), st.integers(0, 2**31 - 1))
def test_support_height_finite_and_repeatable(x, y, seed):
    f = SupportField("sand", amplitude=20.0, wavelength=150.0, noise_seed=seed)
    h = f.height(x, y)
    assert np.isfinite(h)
    assert h == SupportField("sand", amplitude=20.0, wavelength=150.0, noise_seed=seed).height(x, y)


def test_scene_json_round_trip():
    s = generate_scene(SceneSpec(kind="stacking", n_objects=2), 4)
    assert Scene.from_dict(s.to_dict()) == s


def test_lighting_gain_range_enforced():
    with pytest.raises(ValueError):
        disc_scene(gain=3.0)


# --- camera ----------------------------------------------------------------

def test_principal_point_maps_to_camera_xy():
    cam = CameraModel(300.0, 300.0, 47.5, 47.5, 96, 96, (12.0, -7.0, 500.0))
    p = image_to_world(cam, (47.5, 47.5), 0.0)
    assert np.allclose(p, (12.0, -7.0), atol=1e-9)


def test_pixel_round_trip_100_pixels():
    rng = np.random.default_rng(0)
    cam = default_camera(tilt=MAX_TILT)
    s = rng.uniform((0, 0), (640, 480), (100, 2))
    for z in (0.0, 35.0, 80.0):
        w = image_to_world(cam, s, z)
        back = world_to_image(cam, np.column_stack([w, np.full(100, z)]))
        assert np.abs(back - s).max() < 0.5
        assert np.abs(back - s).max() < 1e-6


def _rodrigues(axis, angle):
    k = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * kx @ kx


def test_tilted_camera_matches_homogeneous_oracle():
    """Projection through an independently assembled 3x4 camera matrix."""
    tilt, heading = MAX_TILT, 0.3
    pos = np.array([20.0, -15.0, 650.0])
    cam = CameraModel(615.0, 615.0, 319.5, 239.5, 480, 640, tuple(pos), tilt, heading)
    # camera axes in world: x right, y down the image, z along the view ray
    base = np.column_stack([[1, 0, 0], [0, -1, 0], [0, 0, -1]]).astype(float)
    r_cw = _rodrigues([0, 0, 1], heading) @ _rodrigues([1, 0, 0], tilt) @ base
    t = np.eye(4)
    t[:3, :3] = r_cw.T
    t[:3, 3] = -r_cw.T @ pos
    p = cam.K @ np.hstack([np.eye(3), np.zeros((3, 1))]) @ t
    rng = np.random.default_rng(1)
    pts = np.column_stack([rng.uniform(-200, 200, (50, 2)), rng.uniform(0, 80, 50)])
    hom = p @ np.column_stack([pts, np.ones(50)]).T
    expect = (hom[:2] / hom[2]).T
    assert np.allclose(world_to_image(cam, pts), expect, atol=1e-9)
    # inverse through the plane homography z = h
    h = 40.0
    hom_plane = p[:, [0, 1, 3]] + np.outer(p[:, 2], [0, 0, h])
    s = expect[:5]
    w = np.linalg.solve(hom_plane, np.column_stack([s, np.ones(5)]).T)
    assert np.allclose(image_to_world(cam, s, h), (w[:2] / w[2]).T, atol=1e-6)


def test_tilt_bounds():
    with pytest.raises(ValueError):
        toy_camera(tilt=MAX_TILT * 1.5)


def test_plane_above_camera_has_no_intersection():
    with pytest.raises(NoIntersection):
        image_to_world(toy_camera(), (10.0, 10.0), 900.0)


@given(st.floats(0, 95), st.floats(0, 95), st.floats(0, 100), st.floats(0, MAX_TILT))
def test_round_trip_property(u, v, z, tilt):
    cam = toy_camera(tilt=tilt)
    w = image_to_world(cam, (u, v), z)
    back = world_to_image(cam, [w[0], w[1], z])
    assert np.hypot(*(back - (u, v))) < 0.5


# --- rendering -------------------------------------------------------------

def test_empty_solid_scene_renders_constant():
    s = Scene("plane", SupportField(), (), SOLID, 1.0)
    img = render_rgb(s, toy_camera())
    assert np.allclose(img, np.array([0.2, 0.4, 0.6]), atol=0)


def test_gain_scales_background_linearly():
    bg = BackgroundSpec("checker", 5)
    cam = toy_camera()
    lo, hi = render_rgb(disc_scene(bg=bg, gain=0.1), cam), render_rgb(disc_scene(bg=bg, gain=1.0), cam)
    outside = ~object_mask(disc_scene().objects[0], cam)
    assert np.allclose(lo[outside], 0.1 * hi[outside], atol=1e-12)


def test_rim_differs_from_plain_and_interior():
    from scipy.ndimage import distance_transform_edt

    bg = BackgroundSpec("checker", 5)
    cam = toy_camera(px_per_mm=1.0)
    scene = disc_scene(radius=30.0, bg=bg)
    img = render_rgb(scene, cam)
    plain = render_rgb(Scene("plane", SupportField(), (), bg, 1.0), cam)
    mask = object_mask(scene.objects[0], cam)
    depth = distance_transform_edt(np.pad(mask, 1))[1:-1, 1:-1]
    rim = mask & (depth <= DEFAULT_RENDER.rim_width)
    core = mask & (depth > DEFAULT_RENDER.rim_width + 1)
    delta = DEFAULT_RENDER.rim_contrast
    # rim = max(plain, interior) + contrast, so it clears both by contrast unless clipped at 1
    unclipped = rim & (img < 1.0).all(-1)
    assert unclipped.sum() > 20
    assert np.all(img[unclipped] - plain[unclipped] >= delta - 1e-9)
    assert np.abs(img[unclipped].mean(0) - img[core].mean(0)).max() >= delta - 0.05


def test_interior_depends_on_background():
    cam = toy_camera()
    scene = disc_scene(bg=BackgroundSpec("checker", 1))
    other = disc_scene(bg=BackgroundSpec("noise", 2))
    mask = object_mask(scene.objects[0], cam)
    a, b = render_rgb(scene, cam), render_rgb(other, cam)
    assert np.all(np.abs(a[mask] - b[mask]).max(-1) > 0)


def test_rendering_is_deterministic():
    s = generate_scene(SceneSpec(kind="plane", n_objects=3, background="noise"), 9)
    cam = toy_camera()
    assert np.array_equal(render_rgb(s, cam), render_rgb(s, cam))


def test_image_stays_in_unit_range():
    s = generate_scene(SceneSpec(kind="water_dynamic", n_objects=2, lighting=(2.5, 2.5)), 1)
    img = render_rgb(s, toy_camera(), t=0.7)
    assert img.min() >= 0.0 and img.max() <= 1.0


# --- outcome rule ----------------------------------------------------------

def test_judge_examples():
    g = GripperSpec(capture_ratio=0.6)
    s = disc_scene()
    rho = g.radius
    assert judge_grasp_at(s, (0.0, 0.0), g) is Outcome.SUCCESS
    assert judge_grasp_at(s, (2 * rho, 0.0), g) is Outcome.MISS
    assert judge_grasp_at(s, (0.9 * rho, 0.0), g) is Outcome.SLIDE
    assert judge_grasp_at(s, (0.6 * rho, 0.0), g) is Outcome.SUCCESS


def judge_grasp_at(scene, p, gripper):
    from vtgrasp.worldsim import judge_grasp

    return judge_grasp(scene, WorldGrasp(p, 50.0, 10.0), gripper)


def test_oversized_object_is_not_captured():
    g = GripperSpec(aperture=20.0)
    assert judge_grasp_at(disc_scene(), (0.0, 0.0), g) is not Outcome.SUCCESS


@given(st.floats(0, 100), st.floats(0, 1), st.floats(0, 2 * math.pi))
def test_judge_monotone_in_distance(d, shrink, ang):
    g = GripperSpec()
    s = disc_scene()
    far = judge_grasp_at(s, (d * math.cos(ang), d * math.sin(ang)), g)
    near = judge_grasp_at(s, (shrink * d * math.cos(ang), shrink * d * math.sin(ang)), g)
    if far is Outcome.SUCCESS:
        assert near is Outcome.SUCCESS


def test_object_instance_round_trip():
    o = make_object(3, 2, class_footprint(2, 0.4), (10.0, -5.0), 0.0, 50.0)
    assert ObjectInstance.from_dict(o.to_dict()) == o
