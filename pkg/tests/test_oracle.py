import numpy as np
import pytest

from relightkit.oracle import (
    FIXTURE_KINDS,
    OracleScene,
    band_limited_coeffs,
    make_fixture,
    render_sphere_bruteforce,
    single_lobe_flux,
    sphere_normals,
)
from relightkit.shading import RenderCoeffs, SpecWeights, relight
from relightkit.sphere import sh_reconstruct, solid_angle_map


def test_constant_env_gives_albedo_times_c():
    scene = OracleScene(albedo=(0.8, 0.6, 0.5))
    image, gb = render_sphere_bruteforce(scene, np.full((32, 64, 3), 0.7), size=16)
    inside = gb.inside()
    np.testing.assert_allclose(image[inside], np.broadcast_to([0.56, 0.42, 0.35], image[inside].shape), rtol=1e-3)
    assert not image[~inside].any()


def test_doubling_env_doubles_image():
    env = make_fixture("single-lobe")
    scene = OracleScene(ks=(0.2, 0.2, 0.2))
    a, _ = render_sphere_bruteforce(scene, env, size=12)
    b, _ = render_sphere_bruteforce(scene, 2 * env, size=12)
    np.testing.assert_array_equal(b, 2 * a)


def test_gbuffer_geometry():
    _, gb = render_sphere_bruteforce(OracleScene(), np.ones((8, 16, 3)), size=20)
    n = gb.normals()[gb.inside()]
    np.testing.assert_allclose(np.linalg.norm(n, axis=-1), 1.0, atol=1e-12)
    assert (n[:, 2] >= 0).all()
    np.testing.assert_array_equal(gb.lens_normal, gb.normal)
    normals, disk = sphere_normals(20)
    # top of the canvas is the +y side of the ball
    assert normals[1, 10, 1] > 0.8 and normals[18, 10, 1] < -0.8


def test_scene_validation():
    for kwargs in ({"radius": 0.0}, {"albedo": (-1, 0, 0)}, {"phong_exponent": 0.5}):
        with pytest.raises(ValueError):
            OracleScene(**kwargs)


def test_fixtures():
    sky = make_fixture("gradient-sky")
    assert (sky[0] > sky[-1]).all()
    assert np.array_equal(make_fixture("band-limited-random", seed=7), make_fixture("band-limited-random", seed=7))
    assert not np.array_equal(make_fixture("band-limited-random", seed=7), make_fixture("band-limited-random", seed=8))
    big = make_fixture("single-lobe", 512, 256)
    flux = (big[..., 0] * solid_angle_map(512, 256)).sum()
    assert flux == pytest.approx(single_lobe_flux(), rel=0.02)
    for kind in FIXTURE_KINDS:
        assert make_fixture(kind).min() > 0
    np.testing.assert_allclose(make_fixture("band-limited-random", 32, 16, seed=1), sh_reconstruct(band_limited_coeffs(1), 32, 16))
    assert make_fixture("band-limited-random", 512, 256).min() >= 0.1 - 1e-12
    with pytest.raises(ValueError):
        make_fixture("sunset")
    with pytest.raises(ValueError):
        make_fixture("gradient-sky", 10, 10)


@pytest.mark.parametrize("kind", FIXTURE_KINDS)
@pytest.mark.parametrize("n", [16, 64])
def test_oracle_matches_relight_pipeline(kind, n):
    env = make_fixture(kind, seed=0)
    ks = np.array([0.3, 0.3, 0.3])
    scene = OracleScene(albedo=(0.8, 0.6, 0.5), ks=tuple(ks), phong_exponent=n)
    image, gb = render_sphere_bruteforce(scene, env, size=24)
    # fold ks into the specular coefficient: A * Cs = ks
    fast = relight(env, gb, SpecWeights({n: 1.0}), RenderCoeffs(1.0, ks / np.array(scene.albedo)))
    inside = gb.inside()
    rel = np.abs(fast[inside] - image[inside]) / image[inside]
    assert rel.max() <= 0.03
