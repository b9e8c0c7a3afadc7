"""Command-line entry point: ``pcdm <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 reproduction ordering check failed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .admm import CODERS, MODES, AdmmConfig, DictionarySet, demosaic_variant, trace_csv
from .baselines import bicubic_demosaic, bilinear_demosaic
from .dictionary import (DictionaryFormatError, extract_signals, ksvd_train, load_dictionary,
                         save_dictionary)
from .experiments import DeskScale, reproduce, scale_dict
from .io import (GROUPS, DataError, DatasetLayout, read_mosaic, read_scene,
                 write_json, write_mosaic, write_scene)
from .metrics import evaluate, reports_csv
from .mosaic import SCENE_KINDS, SceneSpec, mosaic, synthesize_scene
from .patches import remove_mean
from .pattern import default_pattern

log = logging.getLogger("pcdm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_REPRO = 0, 1, 2, 3
PATTERNS = {"imx250myr": default_pattern}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    method: str = ""
    seed: int | None = None
    inputs: dict = field(default_factory=dict)
    output: str = ""
    admm: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    version: str = __version__

    def write(self, out_dir: Path) -> None:
        write_json(out_dir / "run_config.json", asdict(self))


def parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 128x128, got {text!r}")
    if h <= 0 or w <= 0 or h % 4 or w % 4:
        raise argparse.ArgumentTypeError(f"size {text} must be positive multiples of 4")
    return h, w


def parse_chroma(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("chroma must be three comma-separated numbers")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("chroma needs exactly three values")
    return vals


def cmd_synth(a) -> int:
    h, w = a.size
    spec = SceneSpec(a.scene, h, w, intensity=a.intensity, dolp=a.dolp, aop=a.aop,
                     chroma=a.chroma, seed=a.seed, clutter=a.clutter,
                     clutter_dolp=a.clutter_dolp, group=a.group or "")
    out = Path(a.out)
    write_scene(out, synthesize_scene(spec), {**spec.to_dict(), "group": a.group})
    print(f"wrote scene {out} ({h}x{w}, {a.scene})")
    return EXIT_OK


def cmd_mosaic(a) -> int:
    stack = read_scene(a.scene_dir)
    m = mosaic(stack, PATTERNS[a.pattern]())
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_mosaic(out, m)
    print(f"wrote mosaic {out} (pattern {m.pattern.name})")
    return EXIT_OK


def _scene_dirs(root: Path) -> list[Path]:
    root = Path(root)
    try:
        DatasetLayout.validate(root)
        return [root]
    except DataError:
        pass
    dirs = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()) if root.is_dir() else []:
        DatasetLayout.validate(d)
        dirs.append(d)
    if not dirs:
        raise DataError(f"no scene directories found under {root}")
    return dirs


def cmd_train(a) -> int:
    stacks = [read_scene(d) for d in _scene_dirs(a.data_dir)]
    for kind, path in (("pol", a.out_pol), ("rgb", a.out_rgb)):
        Y, _ = remove_mean(extract_signals(stacks, kind, a.samples, a.patch, seed=a.seed))
        if a.atoms > Y.shape[1]:
            raise DataError(f"{a.atoms} atoms need at least as many samples, got {Y.shape[1]}")
        d, trace = ksvd_train(Y, a.atoms, a.sparsity, a.sweeps, a.lam, a.seed, kind,
                              metadata={"patch": a.patch})
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        save_dictionary(d, path)
        final = trace[-1] if trace else float("nan")
        print(f"{kind}: {d.rows}x{d.n_atoms} -> {path}  final objective {final:.6g}")
    return EXIT_OK


def _admm_config(a) -> AdmmConfig:
    return AdmmConfig(rho_pol=a.rho_pol, rho_rgb=a.rho_rgb, lam=a.lam, max_iter=a.max_iter,
                      eps=a.eps, coder=a.coder, patch_stride=a.stride, dictionary_mode=a.mode,
                      sparsity=a.sparsity)


def cmd_demosaic(a) -> int:
    m = read_mosaic(a.mosaic)
    out = Path(a.out)
    cfg = None
    trace = ""
    if a.method in ("bilinear", "bicubic"):
        rec = (bilinear_demosaic if a.method == "bilinear" else bicubic_demosaic)(m)
        trace = trace_csv([])
    else:
        if a.mode == "per-channel-12-dics":
            if not a.dict_channel or len(a.dict_channel) != 12:
                raise UsageError("--mode per-channel-12-dics needs --dict-channel given 12 times")
            ds = DictionarySet(a.mode, channels=[load_dictionary(p) for p in a.dict_channel])
        else:
            if a.dict_rgb is None or (a.mode == "joint-two-dics" and a.dict_pol is None):
                raise UsageError("--method joint needs --dict-rgb (and --dict-pol for "
                                 "joint-two-dics)")
            pol = load_dictionary(a.dict_pol) if a.mode == "joint-two-dics" else None
            ds = DictionarySet(a.mode, rgb=load_dictionary(a.dict_rgb), pol=pol)
        cfg = _admm_config(a)
        res = demosaic_variant(m, ds, cfg)
        rec = res.RC
        trace = trace_csv(res.trace)
        print(f"joint ({a.mode}): {res.iterations} iterations, converged={res.converged}")
    write_scene(out, rec)
    (out / "trace.csv").write_text(trace)
    RunConfig("demosaic", a.method, None,
              {"mosaic": str(a.mosaic), "dict_pol": a.dict_pol, "dict_rgb": a.dict_rgb,
               "dict_channel": a.dict_channel},
              str(out), cfg.to_dict() if cfg else {}).write(out)
    print(f"wrote reconstruction {out}")
    return EXIT_OK


def cmd_metrics(a) -> int:
    ref, test = read_scene(a.ref_dir), read_scene(a.test_dir)
    if ref.data.shape != test.data.shape:
        raise DataError(f"scene sizes differ: {ref.data.shape} vs {test.data.shape}")
    rep = evaluate(ref, test, {"method": a.method, "scene": str(a.test_dir),
                               "reference": str(a.ref_dir)})
    Path(a.report).parent.mkdir(parents=True, exist_ok=True)
    Path(a.report).write_text(rep.to_json() + "\n")
    if a.csv:
        Path(a.csv).write_text(reports_csv([rep]))
    for k, v in rep.values.items():
        print(f"{k:>14}: {v:.4f}")
    return EXIT_OK


def cmd_reproduce(a) -> int:
    scale = DeskScale(scene_size=a.scene_size, train_scenes=a.train_scenes, samples=a.samples,
                      sweeps=a.sweeps, seed=a.seed)
    base = AdmmConfig(max_iter=a.max_iter)
    rep = reproduce(scale, base)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "table.csv").write_text(rep.to_csv())
    write_json(out / "checks.json", {"failures": rep.failures})
    write_json(out / "timings.json", rep.timings)
    RunConfig("reproduce", "all", a.seed, {}, str(out), base.to_dict(),
              {"scale": scale_dict(scale)}).write(out)
    sys.stdout.write(rep.to_csv())
    if rep.failures:
        for f in rep.failures:
            print(f"ORDERING FAILED: {f}", file=sys.stderr)
        return EXIT_REPRO
    print("all orderings hold")
    return EXIT_OK


def _add_admm_flags(p) -> None:
    d = AdmmConfig()
    p.add_argument("--max-iter", type=int, default=d.max_iter)
    p.add_argument("--eps", type=float, default=d.eps)
    p.add_argument("--rho-pol", type=float, default=d.rho_pol)
    p.add_argument("--rho-rgb", type=float, default=d.rho_rgb)
    p.add_argument("--lambda", dest="lam", type=float, default=d.lam)
    p.add_argument("--coder", choices=CODERS, default=d.coder)
    p.add_argument("--stride", type=int, choices=(1, 2, 4), default=d.patch_stride)
    p.add_argument("--sparsity", type=int, default=d.sparsity)
    p.add_argument("--mode", choices=MODES, default=d.dictionary_mode)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pcdm", description="Joint polarization/color demosaicing tools.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic scene directory")
    s.add_argument("--scene", choices=SCENE_KINDS, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--size", type=parse_size, default=(128, 128))
    s.add_argument("--intensity", type=float, default=0.8)
    s.add_argument("--dolp", type=float, default=0.0)
    s.add_argument("--aop", type=float, default=0.0)
    s.add_argument("--chroma", type=parse_chroma, default=(1.0, 1.0, 1.0))
    s.add_argument("--clutter", type=int, default=0)
    s.add_argument("--clutter-dolp", type=float, default=0.2)
    s.add_argument("--group", choices=GROUPS)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("mosaic", help="sample a scene through the filter array")
    s.add_argument("scene_dir")
    s.add_argument("--pattern", choices=sorted(PATTERNS), default="imx250myr")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mosaic)

    s = sub.add_parser("train", help="learn D_pol and D_rgb by K-SVD")
    s.add_argument("data_dir")
    s.add_argument("--atoms", type=int, default=256)
    s.add_argument("--patch", type=int, default=4)
    s.add_argument("--samples", type=int, default=60000)
    s.add_argument("--sweeps", type=int, default=40)
    s.add_argument("--sparsity", type=int, default=8)
    s.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-pol", required=True)
    s.add_argument("--out-rgb", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("demosaic", help="reconstruct the 12 channels of a mosaic")
    s.add_argument("mosaic")
    s.add_argument("--method", choices=("bilinear", "bicubic", "joint"), default="joint")
    s.add_argument("--dict-pol")
    s.add_argument("--dict-rgb")
    s.add_argument("--dict-channel", action="append")
    _add_admm_flags(s)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_demosaic)

    s = sub.add_parser("metrics", help="score a reconstruction against a reference scene")
    s.add_argument("ref_dir")
    s.add_argument("test_dir")
    s.add_argument("--report", required=True)
    s.add_argument("--csv")
    s.add_argument("--method", default="")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("reproduce", help="desk-scale method comparison and lambda sweep")
    d = DeskScale()
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=d.seed)
    s.add_argument("--scene-size", type=int, default=d.scene_size)
    s.add_argument("--train-scenes", type=int, default=d.train_scenes)
    s.add_argument("--samples", type=int, default=d.samples)
    s.add_argument("--sweeps", type=int, default=d.sweeps)
    s.add_argument("--max-iter", type=int, default=AdmmConfig().max_iter)
    s.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pcdm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DictionaryFormatError, FileNotFoundError, ValueError) as exc:
        print(f"pcdm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
