"""Command-line entry point: ``relightkit <subcommand> [flags]``.

Numeric results go to stdout as ``key=value`` lines with 6 significant
digits. Exit status: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import glob
import json
import shlex
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .imgio import load_flow, load_pfm, load_radiance_hdr, save_pfm
from .metrics import mae, mse, ssim, temporal_warp_error
from .olat import OlatSpec, fibonacci_sphere, generate_olat_set, olat_consistency
from .oracle import FIXTURE_KINDS, OracleScene, make_fixture, render_sphere_bruteforce
from .prefilter import SPECULAR_EXPONENTS, prefilter_set
from .recovery import lighting_error, recover_sh, render_diffuse_sphere, sphere_error
from .shading import GBuffer, RenderCoeffs, SpecWeights, ViewModel, relight

EXIT_USAGE = 1
EXIT_DATA = 2

GBUFFER_FILES = {"albedo": "albedo.pfm", "normal": "normal.pfm", "mask": "mask.pfm", "lens_normal": "lens_normal.pfm"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def emit(**values) -> None:
    for key, value in values.items():
        if isinstance(value, (float, np.floating)):
            value = f"{value:.6g}"
        elif isinstance(value, (tuple, list, np.ndarray)):
            value = ",".join(f"{v:.6g}" for v in np.ravel(value))
        print(f"{key}={value}")


def read_key_values(path) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    entries = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            entries[key] = value
    return entries


def load_image(path) -> np.ndarray:
    if str(path).lower().endswith(".hdr"):
        return load_radiance_hdr(path)
    return load_pfm(path)


def parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 64x32, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError(f"size must be positive, got {text!r}")
    return w, h


def parse_rgb(text: str) -> tuple[float, float, float]:
    try:
        values = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected r,g,b or a scalar, got {text!r}") from None
    if len(values) == 1:
        values *= 3
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected r,g,b or a scalar, got {text!r}")
    return tuple(values)


def parse_view(text: str) -> ViewModel:
    try:
        return ViewModel.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def read_weights(path, base: Path | None = None) -> SpecWeights:
    """Weights file: keys w1, w16, w32, w64, w1024; values scalars or PFM paths."""
    weights, lens = {}, 0.0
    base = Path(path).parent if base is None else base
    for key, value in read_key_values(path).items():
        if not key.startswith("w") or not key[1:].isdigit() or int(key[1:]) not in SPECULAR_EXPONENTS:
            raise ValueError(f"{path}: unknown weight key {key!r}")
        try:
            w = float(value)
        except ValueError:
            w = load_pfm(base / value)
        exponent = int(key[1:])
        if exponent == 1024:
            lens = w
        else:
            weights[exponent] = w
    return SpecWeights(weights, lens)


def write_coeffs(coeffs, path) -> None:
    np.savetxt(path, np.asarray(coeffs), fmt="%.9g", header="9 SH coefficients (rows) x channels (columns)")


def read_coeffs(path) -> np.ndarray:
    coeffs = np.loadtxt(path, ndmin=2)
    if coeffs.shape[0] != 9:
        raise ValueError(f"{path}: expected 9 rows of coefficients, got {coeffs.shape[0]}")
    return coeffs


def load_gbuffer(directory) -> GBuffer:
    directory = Path(directory)
    lens = directory / GBUFFER_FILES["lens_normal"]
    return GBuffer(
        albedo=load_pfm(directory / GBUFFER_FILES["albedo"]),
        normal=load_pfm(directory / GBUFFER_FILES["normal"]),
        mask=load_pfm(directory / GBUFFER_FILES["mask"]),
        lens_normal=load_pfm(lens) if lens.exists() else None,
    )


def _prefilter_kwargs(args) -> dict:
    kwargs = {}
    if args.size is not None:
        kwargs["out_w"], kwargs["out_h"] = args.size
    if args.lens_size is not None:
        kwargs["lens_size"] = args.lens_size
    return kwargs


# --- subcommands -----------------------------------------------------------


def cmd_prefilter(args) -> int:
    env = load_image(args.env)
    start = time.perf_counter()
    maps = prefilter_set(env, lens_size=args.lens_size, diffuse_method=args.diffuse_method, **(
        {"out_w": args.size[0], "out_h": args.size[1]} if args.size else {}))
    elapsed = time.perf_counter() - start
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_pfm(maps.diffuse, f"{out}_diffuse.pfm")
    for n, m in maps.specular.items():
        save_pfm(m, f"{out}_spec{n}.pfm")
    emit(maps=1 + len(maps.specular), seconds=elapsed)
    return 0


def cmd_relight(args) -> int:
    env = load_image(args.env)
    gbuffer = GBuffer(
        albedo=load_pfm(args.albedo),
        normal=load_pfm(args.normal),
        mask=load_pfm(args.mask),
        lens_normal=load_pfm(args.lens_normal) if args.lens_normal else None,
    )
    weights = read_weights(args.weights) if args.weights else SpecWeights()
    residual = load_pfm(args.delta) if args.delta else None
    coeffs = RenderCoeffs(args.cd, args.cs)
    image = relight(env, gbuffer, weights, coeffs, residual, args.view, **_prefilter_kwargs(args))
    save_pfm(image, args.out)
    inside = gbuffer.inside()
    emit(
        mean=float(image[inside].mean()) if inside.any() else 0.0,
        residual_l1=float(np.abs(residual).sum()) if residual is not None else 0.0,
    )
    return 0


def cmd_olat_gen(args) -> int:
    spec = OlatSpec(args.count, args.radius, args.intensity, args.width, args.height)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, (direction, env) in enumerate(zip(fibonacci_sphere(spec.count), generate_olat_set(spec))):
        name = f"olat_{k:03d}.pfm"
        save_pfm(env, out / name)
        entries.append({"file": name, "direction": [float(v) for v in direction]})
    manifest = {
        "count": spec.count,
        "angular_radius": spec.angular_radius,
        "intensity": spec.intensity,
        "width": spec.width,
        "height": spec.height,
        "maps": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    emit(count=spec.count)
    return 0


def _olat_files(directory) -> list[Path]:
    directory = Path(directory)
    manifest = directory / "manifest.json"
    if manifest.exists():
        return [directory / e["file"] for e in json.loads(manifest.read_text())["maps"]]
    return sorted(directory.glob("*.pfm"))


def cmd_olat_check(args) -> int:
    files = _olat_files(args.env_dir)
    if len(files) < 2:
        raise ValueError(f"{args.env_dir}: need at least two OLAT maps, found {len(files)}")
    gbuffer = load_gbuffer(args.gbuffer)
    weights = read_weights(args.weights) if args.weights else SpecWeights()
    coeffs = RenderCoeffs(args.cd, args.cs)
    kwargs = _prefilter_kwargs(args)

    def render(env):
        return relight(env, gbuffer, weights, coeffs, view=args.view, **kwargs)

    rng = np.random.default_rng(args.seed)
    errors = []
    for _ in range(args.pairs):
        i, j = rng.choice(len(files), size=2, replace=False)
        errors.append(olat_consistency(render, load_pfm(files[i]), load_pfm(files[j]), gbuffer.mask))
    emit(pairs=len(errors), max_error=max(errors), mean_error=float(np.mean(errors)))
    return 0


def cmd_sh_recover(args) -> int:
    coeffs = recover_sh(load_pfm(args.relit), load_pfm(args.albedo), load_pfm(args.normal), load_pfm(args.mask))
    if args.out:
        write_coeffs(coeffs, args.out)
    if args.sphere:
        save_pfm(render_diffuse_sphere(coeffs, args.size), args.sphere)
    emit(**{f"c{i}": row for i, row in enumerate(coeffs)})
    return 0


def cmd_lighting_error(args) -> int:
    def sphere(path):
        if str(path).lower().endswith(".pfm"):
            return load_pfm(path)
        return render_diffuse_sphere(read_coeffs(path), args.size)

    if not str(args.est).lower().endswith(".pfm") and not str(args.target).lower().endswith(".pfm"):
        error = lighting_error(read_coeffs(args.est), read_coeffs(args.target), args.size)
    else:
        error = sphere_error(sphere(args.est), sphere(args.target))
    emit(lighting_error=error)
    return 0


def cmd_metrics(args) -> int:
    ref = load_image(args.ref)
    test = load_image(args.test)
    mask = load_pfm(args.mask) if args.mask else None
    emit(mae=mae(ref, test, mask), mse=mse(ref, test, mask), ssim=ssim(ref, test))
    return 0


def cmd_temporal(args) -> int:
    frame_files = sorted(glob.glob(args.frames))
    flow_files = sorted(glob.glob(args.flows))
    if not frame_files:
        raise ValueError(f"no frames match {args.frames!r}")
    frames = [load_image(f) for f in frame_files]
    flows = [load_flow(f) for f in flow_files]
    err_mae, err_mse = temporal_warp_error(frames, flows)
    emit(frames=len(frames), mae=err_mae, mse=err_mse)
    return 0


def cmd_oracle_render(args) -> int:
    if (args.fixture is None) == (args.env is None):
        raise UsageError("oracle-render: give exactly one of --fixture or --env")
    if args.fixture:
        env = make_fixture(args.fixture, *args.fixture_size, seed=args.seed)
    else:
        env = load_image(args.env)
    scene = OracleScene(args.radius, args.albedo, args.ks, args.exponent)
    image, gbuffer = render_sphere_bruteforce(scene, env, args.size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_pfm(image, out / "image.pfm")
    save_pfm(env, out / "env.pfm")
    for field, name in GBUFFER_FILES.items():
        save_pfm(getattr(gbuffer, field), out / name)
    emit(size=args.size, mean=float(image[gbuffer.inside()].mean()))
    return 0


def cmd_fixtures(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kinds = FIXTURE_KINDS if args.kind == "all" else (args.kind,)
    for kind in kinds:
        save_pfm(make_fixture(kind, args.width, args.height, args.seed), out / f"{kind}.pfm")
    emit(written=len(kinds))
    return 0


def cmd_batch(args) -> int:
    status = 0
    with open(args.manifest) as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            argv = shlex.split(line)
            if argv[0] == "batch":
                raise ValueError("batch manifests cannot nest batch jobs")
            if args.config and "--config" not in argv:
                argv = ["--config", args.config, *argv]
            print(f"# {line}")
            status = max(status, main(argv))
    return status


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="relightkit", description="Portrait relighting toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key = value file supplying defaults (keys are flag names)")
    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help)
        p.set_defaults(func=func)
        return p

    def prefilter_sizes(p):
        p.add_argument("--size", type=parse_size, help="prefiltered map size WxH (default 64x32)")
        p.add_argument("--lens-size", type=parse_size, help="n=1024 map size WxH (default 256x128)")

    def shading_flags(p):
        p.add_argument("--weights", help="specular weights file (w1, w16, w32, w64, w1024)")
        p.add_argument("--cd", type=parse_rgb, default=(1.0, 1.0, 1.0))
        p.add_argument("--cs", type=parse_rgb, default=(1.0, 1.0, 1.0))
        p.add_argument("--view", type=parse_view, default=ViewModel(), help="ortho | pinhole:<fov degrees>")
        prefilter_sizes(p)

    p = add("prefilter", cmd_prefilter, "write diffuse and Phong-prefiltered maps")
    p.add_argument("--env", required=True)
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--diffuse-method", choices=("bruteforce", "sh"), default="bruteforce")
    prefilter_sizes(p)

    p = add("relight", cmd_relight, "coarse relighting of a G-buffer")
    p.add_argument("--env", required=True)
    p.add_argument("--albedo", required=True)
    p.add_argument("--normal", required=True)
    p.add_argument("--lens-normal")
    p.add_argument("--mask", required=True)
    p.add_argument("--delta", help="residual image added to the coarse render")
    p.add_argument("--out", required=True)
    shading_flags(p)

    p = add("olat-gen", cmd_olat_gen, "write OLAT environment maps and a manifest")
    p.add_argument("--count", type=int, default=168)
    p.add_argument("--radius", type=float, default=0.1, help="cap radius in radians")
    p.add_argument("--intensity", type=float, default=100.0)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--out", required=True)

    p = add("olat-check", cmd_olat_check, "OLAT linearity certificate of the coarse relight")
    p.add_argument("--env-dir", required=True)
    p.add_argument("--gbuffer", required=True, help="directory with albedo/normal/mask PFMs")
    p.add_argument("--pairs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    shading_flags(p)

    p = add("sh-recover", cmd_sh_recover, "least-squares SH lighting from a relit image")
    p.add_argument("--relit", required=True)
    p.add_argument("--albedo", required=True)
    p.add_argument("--normal", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", help="coefficient table output")
    p.add_argument("--sphere", help="diffuse sphere PFM output")
    p.add_argument("--size", type=int, default=64)

    p = add("lighting-error", cmd_lighting_error, "sphere-rendering L1 between two lightings")
    p.add_argument("--est", required=True, help="coefficient table or sphere PFM")
    p.add_argument("--target", required=True, help="coefficient table or sphere PFM")
    p.add_argument("--size", type=int, default=64)

    p = add("metrics", cmd_metrics, "MAE, MSE and SSIM between two images")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--mask")

    p = add("temporal", cmd_temporal, "flow-warp error of a frame sequence")
    p.add_argument("--frames", required=True, help="glob, sorted by name")
    p.add_argument("--flows", required=True, help="glob of FLO1 files, sorted by name")

    p = add("oracle-render", cmd_oracle_render, "brute-force sphere render plus G-buffer")
    p.add_argument("--fixture", choices=FIXTURE_KINDS)
    p.add_argument("--fixture-size", type=parse_size, default=(64, 32))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--env")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--albedo", type=parse_rgb, default=(0.8, 0.6, 0.5))
    p.add_argument("--ks", type=parse_rgb, default=(0.0, 0.0, 0.0))
    p.add_argument("--exponent", type=float, default=16.0)
    p.add_argument("--out", required=True)

    p = add("fixtures", cmd_fixtures, "write procedural test environments")
    p.add_argument("--kind", choices=(*FIXTURE_KINDS, "all"), default="all")
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("batch", cmd_batch, "run one subcommand per manifest line")
    p.add_argument("manifest")
    return parser


def _apply_config(parser: argparse.ArgumentParser, command: str, path) -> None:
    """Install config values as defaults of `command`'s flags, parsed as on the command line."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in read_key_values(path).items():
        dest = key.lstrip("-").replace("-", "_")
        action = actions.get(dest)
        if action is None or dest in ("help", "func"):
            continue
        try:
            defaults[dest] = action.type(value) if action.type else value
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise ValueError(f"{path}: bad value for {key}: {exc}") from None
        if action.choices is not None and defaults[dest] not in action.choices:
            raise ValueError(f"{path}: {key} must be one of {sorted(action.choices)}, got {value!r}")
        action.required = False
    subparser.set_defaults(**defaults)


def _config_path(argv: list[str]) -> str | None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return known.config


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        config = _config_path(argv)
        if config:
            sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
            command = next((a for a in argv if a in sub.choices), None)
            if command is not None:
                _apply_config(parser, command, config)
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
