"""Desk-scale reproduction of the method comparison and the controlled experiments.

Everything is synthetic: an evaluation suite of unpolarized and polarized
scenes, a disjoint training suite, dictionaries trained per lambda, then every
method is scored with :func:`pcdm.metrics.evaluate` and averaged over scenes.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .admm import AdmmConfig, DictionarySet, demosaic_variant
from .baselines import bicubic_demosaic, bilinear_demosaic
from .dictionary import Dictionary, extract_signals, ksvd_train
from .metrics import METRIC_KEYS, MetricsReport, evaluate, mean_reports
from .mosaic import default_suite, mosaic, synthesize_scene, training_suite
from .patches import remove_mean
from .pattern import ImageStack

log = logging.getLogger(__name__)

LAMBDAS = (0.1, 0.01, 0.001, 0.0001, 0.0)
REFERENCE_LAMBDA = 1e-4
TABLE_HEADER = ("method", "dictionary_mode", "lambda") + METRIC_KEYS


@dataclass(frozen=True)
class DeskScale:
    """Sizes of the desk-scale runs (the full-scale default is 60000 samples)."""

    scene_size: int = 64
    train_scenes: int = 8
    samples: int = 12000
    channel_samples: int = 6000
    sweeps: int = 10
    atoms: int = 256
    channel_atoms: int = 64
    sparsity: int = 8
    seed: int = 0


def _signals(stacks, kind, samples, seed, channel=None):
    Y, _ = remove_mean(extract_signals(stacks, kind, samples, seed=seed, channel=channel))
    return Y


def train_pair(stacks: list[ImageStack], lam: float, scale: DeskScale
               ) -> tuple[Dictionary, Dictionary, dict]:
    """D_pol and D_rgb trained on mean-removed patches of ``stacks``."""
    out, traces = {}, {}
    for kind in ("pol", "rgb"):
        Y = _signals(stacks, kind, scale.samples, scale.seed)
        out[kind], traces[kind] = ksvd_train(Y, scale.atoms, scale.sparsity, scale.sweeps, lam,
                                             scale.seed, kind)
    return out["pol"], out["rgb"], traces


def train_channels(stacks: list[ImageStack], lam: float, scale: DeskScale) -> list[Dictionary]:
    """One 16-row dictionary per chromatic channel (the naive per-channel model)."""
    dicts = []
    for c in range(12):
        Y = _signals(stacks, "channel", scale.channel_samples, scale.seed + c, channel=c)
        d, _ = ksvd_train(Y, scale.channel_atoms, scale.sparsity, scale.sweeps, lam,
                          scale.seed, "channel", metadata={"channel": c})
        dicts.append(d)
    return dicts


def run_method(method: str, stacks, dicts: DictionarySet | None = None,
               cfg: AdmmConfig | None = None, names=None) -> tuple[MetricsReport, list]:
    reports = []
    for k, gt in enumerate(stacks):
        m = mosaic(gt)
        if method == "bilinear":
            rec = bilinear_demosaic(m)
        elif method == "bicubic":
            rec = bicubic_demosaic(m)
        else:
            rec = demosaic_variant(m, dicts, cfg).RC
        meta = {"method": method, "scene": names[k] if names else str(k)}
        reports.append(evaluate(gt, rec, meta))
    return mean_reports(reports, {"method": method}), reports


@dataclass
class TableRow:
    method: str
    dictionary_mode: str
    lam: float | None
    report: MetricsReport

    def cells(self) -> list[str]:
        lam = "" if self.lam is None else repr(float(self.lam))
        return [self.method, self.dictionary_mode, lam] + \
            [f"{self.report.values[k]:.6f}" for k in METRIC_KEYS]


@dataclass
class Reproduction:
    rows: list[TableRow]
    failures: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def row(self, method: str, mode: str = "", lam: float | None = None) -> TableRow:
        for r in self.rows:
            if r.method == method and r.dictionary_mode == mode and \
                    (lam is None or (r.lam is not None and np.isclose(r.lam, lam, rtol=0, atol=0))):
                return r
        raise KeyError((method, mode, lam))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()


def check_orderings(rep: Reproduction, lambdas=LAMBDAS) -> list[str]:
    """Orderings expected of the reproduction; returns the violated ones."""
    fails = []
    joint = rep.row("joint", "joint-two-dics", REFERENCE_LAMBDA).report.values
    single = rep.row("joint", "single-dic", REFERENCE_LAMBDA).report.values
    twelve = rep.row("joint", "per-channel-12-dics", REFERENCE_LAMBDA).report.values
    bic = rep.row("bicubic").report.values
    bil = rep.row("bilinear").report.values
    if not joint["psnr"] >= bic["psnr"] + 1.0:
        fails.append(f"joint PSNR {joint['psnr']:.3f} < bicubic {bic['psnr']:.3f} + 1 dB")
    if not joint["psnr"] >= bil["psnr"] + 1.0:
        fails.append(f"joint PSNR {joint['psnr']:.3f} < bilinear {bil['psnr']:.3f} + 1 dB")
    if not joint["s0_psnr"] >= bic["s0_psnr"]:
        fails.append(f"joint S0-PSNR {joint['s0_psnr']:.3f} < bicubic {bic['s0_psnr']:.3f}")
    if not joint["psnr"] > single["psnr"]:
        fails.append(f"joint PSNR {joint['psnr']:.3f} <= single-dic {single['psnr']:.3f}")
    if not twelve["psnr"] < min(joint["psnr"], single["psnr"]):
        fails.append(f"12-dics PSNR {twelve['psnr']:.3f} is not the worst dictionary mode")
    sweep = {lam: rep.row("joint", "joint-two-dics", lam).report.values["psnr"] for lam in lambdas}
    best = max(sweep.values())
    if not sweep[REFERENCE_LAMBDA] >= best - 0.2:
        fails.append(f"lambda=1e-4 PSNR {sweep[REFERENCE_LAMBDA]:.3f} more than 0.2 dB below "
                     f"best {best:.3f}")
    return fails


def reproduce(scale: DeskScale | None = None, base: AdmmConfig | None = None,
              lambdas=LAMBDAS) -> Reproduction:
    scale = scale or DeskScale()
    base = base or AdmmConfig()
    specs = default_suite(scale.scene_size, seed=scale.seed)
    names = [f"{i:02d}-{s.group}-{s.kind}" for i, s in enumerate(specs)]
    stacks = [synthesize_scene(s) for s in specs]
    train = [synthesize_scene(s) for s in training_suite(scale.train_scenes, scale.scene_size,
                                                         seed=scale.seed + 1)]
    rows, timings = [], {}
    for method in ("bilinear", "bicubic"):
        t = time.perf_counter()
        rows.append(TableRow(method, "", None, run_method(method, stacks, names=names)[0]))
        timings[method] = time.perf_counter() - t

    ref_pair = None
    for lam in lambdas:
        t = time.perf_counter()
        d_pol, d_rgb, _ = train_pair(train, lam, scale)
        if lam == REFERENCE_LAMBDA:
            ref_pair = (d_pol, d_rgb)
        cfg = replace(base, lam=lam, dictionary_mode="joint-two-dics")
        ds = DictionarySet("joint-two-dics", rgb=d_rgb, pol=d_pol)
        rows.append(TableRow("joint", "joint-two-dics", lam, run_method("joint", stacks, ds, cfg,
                                                                        names)[0]))
        timings[f"joint lambda={lam}"] = time.perf_counter() - t
        log.info("lambda %g: PSNR %.3f", lam, rows[-1].report.values["psnr"])

    if ref_pair is None:
        ref_pair = train_pair(train, REFERENCE_LAMBDA, scale)[:2]
    t = time.perf_counter()
    cfg = replace(base, lam=REFERENCE_LAMBDA, dictionary_mode="single-dic")
    ds = DictionarySet("single-dic", rgb=ref_pair[1])
    rows.append(TableRow("joint", "single-dic", REFERENCE_LAMBDA,
                         run_method("joint", stacks, ds, cfg, names)[0]))
    timings["single-dic"] = time.perf_counter() - t

    t = time.perf_counter()
    cfg = replace(base, lam=REFERENCE_LAMBDA, dictionary_mode="per-channel-12-dics")
    ds = DictionarySet("per-channel-12-dics", channels=train_channels(train, REFERENCE_LAMBDA, scale))
    rows.append(TableRow("joint", "per-channel-12-dics", REFERENCE_LAMBDA,
                         run_method("joint", stacks, ds, cfg, names)[0]))
    timings["per-channel-12-dics"] = time.perf_counter() - t

    rep = Reproduction(rows, timings=timings)
    rep.failures = check_orderings(rep, lambdas)
    return rep


def scale_dict(scale: DeskScale) -> dict:
    return asdict(scale)
