"""Image-quality and polarimetric metrics.

Per-stack numbers follow the usual protocol for polarization color cameras:
each of the four angle images (an RGB image) is scored separately and the
four scores are averaged. Polarimetric scores compare parameter maps derived
from the per-angle color average.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .pattern import ImageStack, to_polarimetric

INF = math.inf
EPS_DIV = 1e-8
STOKES_CONVENTION = "S0=(I0+I45+I90+I135)/2, S1=I0-I90, S2=I45-I135"
S0_PEAK = 2.0
AOP_PEAK = 180.0
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5
K1, K2 = 0.01, 0.03
METRIC_KEYS = ("psnr", "ssim", "ca_substitute", "s0_psnr", "dolp_psnr", "aop_psnr")


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def psnr_from_mse(mse: float, peak: float = 1.0) -> float:
    if mse == 0:
        return INF
    return float(10.0 * np.log10(peak * peak / mse))


def psnr(ref, test, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs give ``inf``."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    _check_shapes(ref, test)
    return psnr_from_mse(float(np.mean((ref - test) ** 2)), peak)


def ssim(ref, test, data_range: float = 1.0) -> float:
    """Mean SSIM over the valid region of an 11x11 Gaussian window (sigma 1.5).

    Multichannel input (H, W, C) is scored per channel and averaged.
    """
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    _check_shapes(ref, test)
    if ref.ndim == 3:
        return float(np.mean([ssim(ref[:, :, c], test[:, :, c], data_range)
                              for c in range(ref.shape[2])]))
    if min(ref.shape) < 2 * SSIM_RADIUS + 1:
        raise ValueError(f"image {ref.shape} smaller than the {2 * SSIM_RADIUS + 1}px window")
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2

    def blur(x):
        return ndimage.gaussian_filter(x, SSIM_SIGMA, truncate=SSIM_RADIUS / SSIM_SIGMA,
                                       mode="constant")

    mx, my = blur(ref), blur(test)
    sxx = blur(ref * ref) - mx * mx
    syy = blur(test * test) - my * my
    sxy = blur(ref * test) - mx * my
    s = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
    r = SSIM_RADIUS
    return float(s[r:-r, r:-r].mean())


@dataclass(frozen=True)
class StokesMap:
    S0: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    convention: str = STOKES_CONVENTION


def stokes(angles) -> StokesMap:
    """Linear Stokes parameters from angle planes ordered 0, 45, 90, 135 degrees
    on the last axis (an (..., 4) array or a 4-channel ImageStack)."""
    data = angles.data if isinstance(angles, ImageStack) else np.asarray(angles, dtype=np.float64)
    if data.shape[-1] != 4:
        raise ValueError(f"stokes needs 4 angle planes, got {data.shape[-1]}")
    i0, i45, i90, i135 = (data[..., k] for k in range(4))
    return StokesMap((i0 + i45 + i90 + i135) / 2.0, i0 - i90, i45 - i135)


def dolp(S: StokesMap) -> np.ndarray:
    lin = np.hypot(S.S1, S.S2)
    return np.clip(lin / np.maximum(S.S0, EPS_DIV), 0.0, 1.0)


def aop(S: StokesMap, return_degenerate: bool = False):
    """Angle of polarization in degrees, in [0, 180).

    Where the linear component vanishes the angle is undefined; it is reported
    as 0 and, with ``return_degenerate``, flagged in a boolean mask.
    """
    degenerate = np.hypot(S.S1, S.S2) <= EPS_DIV
    a = np.degrees(0.5 * np.arctan2(S.S2, S.S1)) % 180.0
    a = np.where(degenerate, 0.0, a)
    a = np.where(a >= 180.0, 0.0, a)  # guard the rounding edge of the modulo
    return (a, degenerate) if return_degenerate else a


def wrapped_aop_difference(a, b) -> np.ndarray:
    """Signed angular difference in degrees, wrapped to [-90, 90)."""
    return (np.asarray(a) - np.asarray(b) + 90.0) % 180.0 - 90.0


def aop_psnr(ref_aop, test_aop) -> float:
    d = wrapped_aop_difference(ref_aop, test_aop)
    return psnr_from_mse(float(np.mean(d * d)), AOP_PEAK)


def chromaticity(rgb: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """(r, g) = (R, G) / (R + G + B + eps) along the last axis."""
    total = rgb.sum(axis=-1, keepdims=True) + eps
    return rgb[..., :2] / total


def _stack_data(s) -> np.ndarray:
    return s.data if isinstance(s, ImageStack) else np.asarray(s, dtype=np.float64)


def _angle_images(data: np.ndarray) -> np.ndarray:
    h, w, _ = data.shape
    return data.reshape(h, w, 3, 4).transpose(3, 0, 1, 2)  # (4, H, W, 3)


def color_accuracy(ref, test) -> float:
    """CA-substitute: PSNR of (r, g) chromaticity, averaged over the four angle images."""
    a, b = _stack_data(ref), _stack_data(test)
    _check_shapes(a, b)
    ra, rb = _angle_images(a), _angle_images(b)
    return _mean_db([psnr(chromaticity(ra[k]), chromaticity(rb[k])) for k in range(4)])


def _mean_db(values) -> float:
    values = list(values)
    if any(math.isinf(v) for v in values):
        finite = [v for v in values if not math.isinf(v)]
        return INF if not finite else float(np.mean(finite))
    return float(np.mean(values))


@dataclass
class MetricsReport:
    values: dict[str, float]
    per_image: dict[str, list[float]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def to_dict(self) -> dict:
        return {"values": {k: _enc(v) for k, v in self.values.items()},
                "per_image": {k: [_enc(x) for x in v] for k, v in self.per_image.items()},
                "metadata": self.metadata}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls({k: _dec(v) for k, v in d["values"].items()},
                   {k: [_dec(x) for x in v] for k, v in d.get("per_image", {}).items()},
                   dict(d.get("metadata", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls.from_dict(json.loads(text))

    def csv_row(self) -> list:
        return [self.metadata.get("method", ""), self.metadata.get("scene", "")] + \
            [_enc(self.values[k]) for k in METRIC_KEYS]


CSV_HEADER = ("method", "scene") + METRIC_KEYS


def reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def _enc(v: float):
    # JSON has no infinity; PSNR of identical images uses a string sentinel
    return "inf" if isinstance(v, float) and math.isinf(v) else v


def _dec(v):
    return INF if v == "inf" else v


def evaluate(ref, test, metadata: dict | None = None) -> MetricsReport:
    """All metric families for a reconstructed 12-channel stack."""
    a, b = _stack_data(ref), _stack_data(test)
    _check_shapes(a, b)
    if a.ndim != 3 or a.shape[2] != 12:
        raise ValueError(f"evaluate needs (H, W, 12) stacks, got {a.shape}")
    ia, ib = _angle_images(a), _angle_images(b)
    per = {
        "psnr": [psnr(ia[k], ib[k]) for k in range(4)],
        "ssim": [ssim(ia[k], ib[k]) for k in range(4)],
        "ca_substitute": [psnr(chromaticity(ia[k]), chromaticity(ib[k])) for k in range(4)],
    }
    sa, sb = stokes(to_polarimetric(a)), stokes(to_polarimetric(b))
    values = {k: (_mean_db(v) if k != "ssim" else float(np.mean(v))) for k, v in per.items()}
    values["s0_psnr"] = psnr(sa.S0, sb.S0, S0_PEAK)
    values["dolp_psnr"] = psnr(dolp(sa), dolp(sb))
    values["aop_psnr"] = aop_psnr(aop(sa), aop(sb))
    meta = {"stokes_convention": STOKES_CONVENTION, "ca": "CA-substitute (rg chromaticity PSNR)"}
    meta.update(metadata or {})
    return MetricsReport(values, per, meta)


def mean_reports(reports, metadata: dict | None = None) -> MetricsReport:
    """Average of several reports, key by key."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to average")
    vals = {k: _mean_db(r.values[k] for r in reports) if k != "ssim"
            else float(np.mean([r.values[k] for r in reports])) for k in METRIC_KEYS}
    return MetricsReport(vals, {}, dict(metadata or {}))
