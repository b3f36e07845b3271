"""End-to-end acceptance checks, one test per criterion.

Each test prints a single "criterion N: PASS|FAIL ..." line, also collected
in the terminal summary.
"""

import time

import numpy as np

from conftest import report, sphere_gbuffer
from relightkit import prefilter
from relightkit.imgio import load_flow, load_pfm, load_radiance_hdr, save_flow, save_pfm
from relightkit.metrics import mae, mse, ssim, temporal_warp_error
from relightkit.olat import OlatSpec, cap_map, generate_olat_set, olat_consistency, relative_consistency
from relightkit.oracle import FIXTURE_KINDS, OracleScene, band_limited_coeffs, make_fixture, render_sphere_bruteforce
from relightkit.prefilter import prefilter_diffuse_bruteforce, prefilter_diffuse_sh, prefilter_set
from relightkit.recovery import lighting_error, recover_sh
from relightkit.shading import RenderCoeffs, SpecWeights, relight
from relightkit.sphere import direction_to_pixel, pixel_to_direction, solid_angle_map


def _best_time(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def test_criterion_1_prefilter_identity():
    env = np.full((32, 64, 3), 0.7)
    prefilter._phong_tables.cache_clear()  # time the cold path
    start = time.perf_counter()
    maps = prefilter_set(env, 64, 32)
    elapsed = time.perf_counter() - start
    errors = {"diffuse": np.abs(maps.diffuse - 0.7).max()}
    errors.update({f"n={n}": np.abs(m - 0.7).max() for n, m in maps.specular.items()})
    within = all(err <= (1e-2 if key == "n=1024" else 1e-3) for key, err in errors.items())
    ok = within and elapsed < 5.0
    worst = ", ".join(f"{k} {v:.1e}" for k, v in errors.items())
    report(1, ok, f"max |out - 0.7|: {worst}; runtime {elapsed:.2f}s (< 5s)")
    assert ok


def test_criterion_2_fast_path_equivalence():
    sh_rel = {}
    for kind in FIXTURE_KINDS:
        env = make_fixture(kind)
        ref = prefilter_diffuse_bruteforce(env)
        sh_rel[kind] = float((np.abs(prefilter_diffuse_sh(env, 64, 32) - ref) / np.abs(ref)).max())

    oracle_rel = {}
    ks = np.array([0.3, 0.3, 0.3])
    albedo = np.array([0.8, 0.6, 0.5])
    for kind in FIXTURE_KINDS:
        env = make_fixture(kind, seed=0)
        for n in (16, 64):
            scene = OracleScene(albedo=tuple(albedo), ks=tuple(ks), phong_exponent=n)
            image, gb = render_sphere_bruteforce(scene, env, size=32)
            fast = relight(env, gb, SpecWeights({n: 1.0}), RenderCoeffs(1.0, ks / albedo))
            inside = gb.inside()
            oracle_rel[f"{kind}/n={n}"] = float((np.abs(fast[inside] - image[inside]) / image[inside]).max())

    env = make_fixture("band-limited-random")
    prefilter_diffuse_sh(env, 64, 32)  # fill the projection cache once
    slow = _best_time(lambda: prefilter_diffuse_bruteforce(env, 64, 32))
    fast = _best_time(lambda: prefilter_diffuse_sh(env, 64, 32), repeats=20)
    speedup = slow / fast

    ok = max(sh_rel.values()) <= 0.03 and max(oracle_rel.values()) <= 0.03 and speedup >= 50
    report(
        2, ok,
        f"SH vs brute max rel {max(sh_rel.values()):.2%}; oracle vs relight max rel "
        f"{max(oracle_rel.values()):.2%}; diffuse speedup {speedup:.0f}x (>= 50x)",
    )
    assert ok


def test_criterion_3_linearity_certificate():
    spec = OlatSpec()
    maps = generate_olat_set(spec)
    assert len(maps) == 168
    _, gb = render_sphere_bruteforce(OracleScene(), np.ones((8, 16, 3)), size=32)
    weights = SpecWeights({1: 0.1, 16: 0.4, 32: 0.3, 64: 0.2}, lens=0.5)
    coeffs = RenderCoeffs((1.0, 0.9, 0.8), (0.5, 0.5, 0.5))

    def fn(env):
        return relight(env, gb, weights, coeffs)

    rng = np.random.default_rng(0)
    errors = []
    for _ in range(50):
        i, j = rng.choice(len(maps), size=2, replace=False)
        errors.append(olat_consistency(fn, maps[i], maps[j], gb.mask))
    ok = np.mean(errors) <= 1e-5 and np.max(errors) <= 1e-4
    report(3, ok, f"50 OLAT pairs: mean {np.mean(errors):.2e} (<= 1e-5), max {np.max(errors):.2e} (<= 1e-4)")
    assert ok


def test_criterion_4_sh_recovery_round_trip():
    gb = sphere_gbuffer(64, albedo=(0.7, 0.6, 0.5))
    seed = 5
    env = make_fixture("band-limited-random", seed=seed)
    truth = band_limited_coeffs(seed)
    relit = relight(env, gb, SpecWeights({}, 0.0), RenderCoeffs(1.0, 0.0))
    clean = lighting_error(recover_sh(relit, gb.albedo, gb.normal, gb.mask), truth)

    inside = gb.inside()
    sigma = 0.01 * relit[inside].mean()
    noisy = []
    for s in range(10):
        noise = np.random.default_rng(s).normal(scale=sigma, size=relit.shape)
        est = recover_sh(relit + noise, gb.albedo, gb.normal, gb.mask)
        noisy.append(lighting_error(est, truth))
    median = float(np.median(noisy))
    ok = clean <= 1e-3 and median <= 1e-2
    report(4, ok, f"lighting error noise-free {clean:.2e} (<= 1e-3); 1% noise median of 10 {median:.2e} (<= 1e-2)")
    assert ok


def test_criterion_5_geometry_sanity():
    w, h = 256, 128
    total = solid_angle_map(w, h).sum()
    area_err = abs(total / (4 * np.pi) - 1)

    # random directions -> containing pixel -> pixel center: error at most half a pixel per axis
    rng = np.random.default_rng(0)
    d = rng.normal(size=(20000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    u, v = direction_to_pixel(d)
    col = np.minimum((u * w).astype(int), w - 1)
    row = np.minimum((v * h).astype(int), h - 1)
    center = pixel_to_direction((col + 0.5) / w, (row + 0.5) / h)
    cu, cv = direction_to_pixel(center)
    polar_err = np.abs(cv - v).max() * np.pi
    azimuth_err = (np.abs((cu - u + 0.5) % 1.0 - 0.5)).max() * 2 * np.pi
    exact = np.abs(np.stack(direction_to_pixel(pixel_to_direction(u, v))) - np.stack([u, v])).max()
    half = (np.pi / h / 2, np.pi / w)
    round_trip_ok = polar_err <= half[0] + 1e-12 and azimuth_err <= half[1] + 1e-12 and exact < 1e-12

    spec = OlatSpec()
    flux = {}
    for name, c in (("pole", [0, 1, 0]), ("equator", [1, 0, 0])):
        env = cap_map(c, spec.angular_radius, spec.intensity, spec.width, spec.height)
        flux[name] = (env[..., 0] * solid_angle_map(spec.width, spec.height)).sum()
    ratio = flux["pole"] / flux["equator"]

    ok = area_err <= 1e-3 and round_trip_ok and 0.98 <= ratio <= 1.02
    report(
        5, ok,
        f"sum dOmega / 4pi - 1 = {area_err:.1e}; pixel round trip polar {polar_err:.4f} / azimuth "
        f"{azimuth_err:.4f} rad (half pixel {half[0]:.4f} / {half[1]:.4f}); cap flux pole/equator {ratio:.5f}",
    )
    assert ok


def test_criterion_6_metric_axioms():
    rng = np.random.default_rng(0)
    x = rng.random((32, 32, 3))
    identical = mae(x, x) == 0 and mse(x, x) == 0 and ssim(x, x) == 1.0
    static = temporal_warp_error([x] * 5, [np.zeros((32, 32, 2))] * 4) == (0.0, 0.0)
    k = 0.1
    base = 0.5 * x
    flicker = [base + (k if t % 2 else 0.0) for t in range(8)]
    flicker_mae, _ = temporal_warp_error(flicker, [np.zeros((32, 32, 2))] * 7)
    ok = identical and static and abs(flicker_mae - k) <= 1e-6
    report(6, ok, f"identical inputs exact: {identical}; static sequence (0, 0): {static}; flicker MAE {flicker_mae:.9f} vs k={k}")
    assert ok


def _rgbe_reference(p):
    r, g, b, e = (int(c) for c in p)
    if e == 0:
        return np.zeros(3, np.float32)
    return np.array([m / 256.0 * 2.0 ** (e - 128) for m in (r, g, b)], np.float32)


def test_criterion_7_io(tmp_path):
    rng = np.random.default_rng(0)
    pfm_ok = flo_ok = True
    for k in range(100):
        hgt, wid = rng.integers(1, 40, size=2)
        img = (rng.standard_normal((hgt, wid, 3 if k % 2 else 1)) * 10.0 ** rng.integers(-30, 30)).astype(np.float32)
        save_pfm(img, tmp_path / "x.pfm")
        pfm_ok &= load_pfm(tmp_path / "x.pfm").tobytes() == img.tobytes()
        flow = (rng.standard_normal((hgt, wid, 2)) * 50).astype(np.float32)
        save_flow(flow, tmp_path / "x.flo")
        flo_ok &= load_flow(tmp_path / "x.flo").tobytes() == flow.tobytes()

    # flat pixels including the documented examples, and an RLE-encoded row
    pixels = np.array([[128, 128, 128, 129], [0, 0, 0, 0], [255, 1, 77, 200], [3, 9, 27, 60]], np.uint8)
    flat = tmp_path / "flat.hdr"
    flat.write_bytes(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 4\n" + pixels.tobytes())
    decoded = load_radiance_hdr(flat)[0]
    rgbe_ok = np.array_equal(decoded[0], [1.0, 1.0, 1.0]) and np.array_equal(decoded[1], [0, 0, 0])
    rgbe_ok &= all(np.array_equal(decoded[i], _rgbe_reference(p)) for i, p in enumerate(pixels))

    row = rng.integers(1, 256, size=(12, 4)).astype(np.uint8)
    body = bytes([2, 2, 0, 12])
    for c in range(4):
        body += bytes([12]) + row[:, c].tobytes()  # one literal chunk per channel
    rle = tmp_path / "rle.hdr"
    rle.write_bytes(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 12\n" + body)
    rgbe_ok &= np.array_equal(load_radiance_hdr(rle)[0], np.stack([_rgbe_reference(p) for p in row]))

    ok = bool(pfm_ok and flo_ok and rgbe_ok)
    report(7, ok, f"PFM bit-exact x100: {pfm_ok}; FLO bit-exact x100: {flo_ok}; RGBE matches formula: {rgbe_ok}")
    assert ok


def test_criterion_8_relative_consistency():
    rng = np.random.default_rng(0)
    ri, rj = rng.random((2, 24, 24, 3))
    k = rng.normal(scale=0.2, size=(24, 24, 3))
    shared = relative_consistency(ri, rj, ri + k, rj + k)
    one_sided = relative_consistency(ri, rj, ri + k, rj)
    expected = float(np.abs(k).mean())
    ok = shared <= 1e-12 and abs(one_sided - expected) <= 1e-12
    report(8, ok, f"shared constant change {shared:.1e} (0); one-sided {one_sided:.6f} vs mean|k| {expected:.6f}")
    assert ok
