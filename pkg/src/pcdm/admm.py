"""Joint chromatic/polarimetric demosaicing by ADMM with dictionary priors.

Variables: RC (H, W, 12) chromatic reconstruction, RP (H, W, 4) polarimetric
reconstruction, their splitting copies C, P and scaled multipliers y = S / rho.
One iteration:

1. C = prox of the sparse prior at RC + y_rgb, P likewise at RP + y_pol. The
   prior's estimate is patch encode/decode against the dictionary; the prox
   blends it with the input, (rho V + 2 gamma D X) / (rho + 2 gamma).
2. (RC, RP) minimize, with C, P fixed,

       w/2 ||I - A_rgb(RC)||^2 + w_pol/2 ||I - A_pol(RP)||^2
         + rho_rgb/2 ||RC - (C - y_rgb)||^2 + rho_pol/2 ||RP - (P - y_pol)||^2
         + beta/2 ||Pi(RC) - RP||^2

   where A_rgb samples RC at each pixel's (color, angle) channel, A_pol
   samples RP at each pixel's angle and Pi averages the three colors per
   angle. Without the beta term RC would never see the polarimetric prior;
   with it the problem still separates per pixel and angle and is solved in
   closed form.
3. S += (RC - C, RP - P); stop once ||dS_pol|| + ||dS_rgb|| < eps.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import patches
from .coding import alm_encode, omp_encode, reconstruct
from .dictionary import Dictionary
from .mosaic import initialize
from .pattern import ANGLE_CHANNELS, ImageStack, MosaicImage, to_polarimetric

log = logging.getLogger(__name__)

MODES = ("joint-two-dics", "single-dic", "per-channel-12-dics")
CODERS = ("omp", "omp+alm")
PATCH = 4


@dataclass(frozen=True)
class AdmmConfig:
    rho_pol: float = 1.05
    rho_rgb: float = 1.05
    lam: float = 1e-4
    max_iter: int = 50
    eps: float = 1e-3
    coder: str = "omp"
    patch_stride: int = 2
    dictionary_mode: str = "joint-two-dics"
    sparsity: int = 8
    residual_tol: float = 1e-6
    prior_weight: float = 1.0
    fidelity_weight: float = 50.0
    pol_fidelity_weight: float = 0.0
    coupling: float = 5.0
    alm_lam: float = 0.5
    alm_max_iter: int = 100

    def __post_init__(self):
        if self.rho_pol <= 0 or self.rho_rgb <= 0:
            raise ValueError("penalties rho must be positive")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.patch_stride not in (1, 2, 4):
            raise ValueError("patch_stride must be 1, 2 or 4")
        if self.dictionary_mode not in MODES:
            raise ValueError(f"dictionary_mode must be one of {MODES}")
        if self.coder not in CODERS:
            raise ValueError(f"coder must be one of {CODERS}")
        if self.sparsity < 1 or self.prior_weight < 0 or self.fidelity_weight <= 0 \
                or self.pol_fidelity_weight < 0 or self.coupling < 0 or self.lam < 0:
            raise ValueError("invalid sparsity / weight settings")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TraceRow:
    iteration: int
    ds_pol: float
    ds_rgb: float
    energy: float

    @property
    def total(self) -> float:
        return self.ds_pol + self.ds_rgb


@dataclass
class AdmmState:
    RP: np.ndarray
    RC: np.ndarray
    P: np.ndarray
    C: np.ndarray
    S_pol: np.ndarray
    S_rgb: np.ndarray
    iteration: int = 0
    history: list[TraceRow] = field(default_factory=list)

    @property
    def y_pol(self) -> np.ndarray:
        return self._y_pol

    @property
    def y_rgb(self) -> np.ndarray:
        return self._y_rgb

    def set_scaled(self, rho_pol: float, rho_rgb: float) -> None:
        self._y_pol = self.S_pol / rho_pol
        self._y_rgb = self.S_rgb / rho_rgb


@dataclass
class DemosaicResult:
    RC: ImageStack
    RP: ImageStack
    converged: bool
    iterations: int
    config: AdmmConfig
    state: AdmmState

    @property
    def trace(self) -> list[TraceRow]:
        return self.state.history


class DictionarySet:
    """Dictionaries required by one dictionary_mode."""

    def __init__(self, mode: str, rgb: Dictionary | None = None, pol: Dictionary | None = None,
                 channels: Sequence[Dictionary] | None = None):
        self.mode = mode
        self.rgb, self.pol = rgb, pol
        self.channels = list(channels) if channels is not None else None
        if mode == "joint-two-dics":
            self._check(rgb, "rgb")
            self._check(pol, "pol")
        elif mode == "single-dic":
            self._check(rgb, "rgb")
        elif mode == "per-channel-12-dics":
            if self.channels is None or len(self.channels) != 12:
                raise ValueError("per-channel mode needs 12 channel dictionaries")
            for d in self.channels:
                self._check(d, "channel")
        else:
            raise ValueError(f"unknown dictionary mode {mode!r}")

    @staticmethod
    def _check(d: Dictionary | None, kind: str) -> None:
        if d is None:
            raise ValueError(f"missing {kind} dictionary")
        if d.kind != kind:
            raise ValueError(f"expected a {kind} dictionary, got kind {d.kind!r}")
        if d.patch != PATCH:
            raise ValueError(f"{kind} dictionary has patch size {d.patch}, expected {PATCH}")


def _encode_decode(V: np.ndarray, D: Dictionary, cfg: AdmmConfig) -> np.ndarray:
    """Patch-wise sparse approximation of V, overlaps averaged.

    Returned as V plus the averaged patch corrections, which equals averaging
    the reconstructed patches but leaves exactly representable inputs
    bit-for-bit unchanged.
    """
    Y = patches.extract(V, PATCH, cfg.patch_stride)
    code = omp_encode(Y, D, cfg.sparsity, cfg.residual_tol, l1=cfg.lam, center=True)
    if cfg.coder == "omp+alm":
        Yc = Y - code.means[None, :]
        sol = alm_encode(Yc, D, cfg.alm_lam, X0=code.coefficients, max_iter=cfg.alm_max_iter)
        sol.means = code.means
        rec = reconstruct(D, sol)
    else:
        rec = reconstruct(D, code)
    return V + patches.aggregate(rec - Y, V.shape, PATCH, cfg.patch_stride)


def prior_estimate(V: np.ndarray, dicts: DictionarySet, cfg: AdmmConfig, branch: str) -> np.ndarray:
    if branch == "pol":
        return _encode_decode(V, dicts.pol, cfg)
    if dicts.mode == "per-channel-12-dics":
        return np.concatenate([_encode_decode(V[:, :, c:c + 1], dicts.channels[c], cfg)
                               for c in range(12)], axis=2)
    return _encode_decode(V, dicts.rgb, cfg)


def _prox(V: np.ndarray, estimate: np.ndarray, rho: float, gamma: float) -> np.ndarray:
    # (rho V + 2 gamma E) / (rho + 2 gamma), written as a correction of V
    return V + (2.0 * gamma / (rho + 2.0 * gamma)) * (estimate - V)


def _observation(I: np.ndarray, idx: np.ndarray):
    """Per (pixel, color, angle) observation indicator and value, shaped (H, W, 3, 4)."""
    obs = (idx[:, :, None] == np.arange(12)[None, None, :]).astype(np.float64)
    return obs.reshape(*idx.shape, 3, 4), I[:, :, None, None]


def solve_fidelity(I: np.ndarray, idx: np.ndarray, t_rgb: np.ndarray, t_pol: np.ndarray,
                   w: float, rho_rgb: float, rho_pol: float, beta: float, w_pol: float = 0.0):
    """Exact minimizer (RC, RP) of the step-2 quadratic.

    Per pixel and angle the unknowns are three color values x_c and one
    polarimetric value z. The z terms collapse to a_z (z - s)^2 / 2 with
    a_z = rho_pol + w_pol m and s the weighted mean of its target and the
    sample; eliminating z leaves a rank-one update of a diagonal system in x,
    solved through the color mean of x.
    """
    h, wd = I.shape
    m, obs = _observation(I, idx)
    t = t_rgb.reshape(h, wd, 3, 4)
    # work with increments over the targets so an exact fixed point stays exact
    a = w * m + rho_rgb
    r = w * m * (obs - t)
    m_pol = m.sum(axis=2)  # (H, W, 4): 1 at the pixel's own angle
    a_z = rho_pol + w_pol * m_pol
    s = t_pol + (w_pol * m_pol / a_z) * (I[:, :, None] - t_pol)
    if beta == 0:
        x = t + r / a
        return x.reshape(h, wd, 12), s
    s4 = s[:, :, None, :]
    a_z = a_z[:, :, None, :]
    kappa = beta * a_z / (a_z + beta)
    d = (t - s4).mean(axis=2, keepdims=True)  # mean target minus the z target
    A = (1.0 / a).mean(axis=2, keepdims=True)
    R = (r / a).mean(axis=2, keepdims=True)
    dbar = (R - kappa * A * d / 3.0) / (1.0 + kappa * A / 3.0)
    x = t + (r - kappa / 3.0 * (d + dbar)) / a
    z = s4 + beta * (d + dbar) / (a_z + beta)
    return x.reshape(h, wd, 12), z[:, :, 0, :]


def fidelity_energy(I, idx, RC, RP, t_rgb, t_pol, w, rho_rgb, rho_pol, beta,
                    w_pol: float = 0.0) -> float:
    """Value of the step-2 quadratic."""
    sampled = np.take_along_axis(RC, idx[:, :, None], axis=2)[:, :, 0]
    e = 0.5 * w * np.sum((I - sampled) ** 2)
    e += 0.5 * rho_rgb * np.sum((RC - t_rgb) ** 2)
    pol_sampled = np.take_along_axis(RP, (idx % 4)[:, :, None], axis=2)[:, :, 0]
    e += 0.5 * w_pol * np.sum((I - pol_sampled) ** 2)
    e += 0.5 * rho_pol * np.sum((RP - t_pol) ** 2)
    e += 0.5 * beta * np.sum((to_polarimetric(RC) - RP) ** 2)
    return float(e)


def demosaic_variant(I: MosaicImage, dicts: DictionarySet, cfg: AdmmConfig | None = None
                     ) -> DemosaicResult:
    # BLAS blocking depends on the thread count; one thread keeps results identical
    with threadpool_limits(limits=1, user_api="blas"):
        return _run(I, dicts, cfg)


def _run(I: MosaicImage, dicts: DictionarySet, cfg: AdmmConfig | None) -> DemosaicResult:
    cfg = cfg or AdmmConfig(dictionary_mode=dicts.mode)
    if cfg.dictionary_mode != dicts.mode:
        raise ValueError(f"config mode {cfg.dictionary_mode!r} != dictionaries {dicts.mode!r}")
    use_pol = dicts.mode == "joint-two-dics"
    beta = cfg.coupling if use_pol else 0.0
    w_pol = cfg.pol_fidelity_weight if use_pol else 0.0
    idx = I.index_map()
    obs = I.data

    RC = initialize(I).data.copy()
    RP = to_polarimetric(RC)
    st = AdmmState(RP=RP, RC=RC, P=RP.copy(), C=RC.copy(),
                   S_pol=np.zeros_like(RP), S_rgb=np.zeros_like(RC))
    st.set_scaled(cfg.rho_pol, cfg.rho_rgb)
    converged = False
    for k in range(1, cfg.max_iter + 1):
        V = st.RC + st.y_rgb
        st.C = _prox(V, prior_estimate(V, dicts, cfg, "rgb"), cfg.rho_rgb, cfg.prior_weight)
        if use_pol:
            V = st.RP + st.y_pol
            st.P = _prox(V, prior_estimate(V, dicts, cfg, "pol"), cfg.rho_pol, cfg.prior_weight)

        t_rgb, t_pol = st.C - st.y_rgb, st.P - st.y_pol
        RC, RP = solve_fidelity(obs, idx, t_rgb, t_pol, cfg.fidelity_weight,
                                cfg.rho_rgb, cfg.rho_pol, beta, w_pol)
        if not use_pol:
            # RP is only reported in these modes: the color average of RC
            RP = to_polarimetric(RC)
            st.P = RP
        energy = fidelity_energy(obs, idx, RC, RP, t_rgb, t_pol, cfg.fidelity_weight,
                                 cfg.rho_rgb, cfg.rho_pol if use_pol else 0.0, beta, w_pol)
        st.RC, st.RP = RC, RP

        d_rgb = st.RC - st.C
        d_pol = st.RP - st.P
        st.S_rgb = st.S_rgb + d_rgb
        st.S_pol = st.S_pol + d_pol
        st.set_scaled(cfg.rho_pol, cfg.rho_rgb)
        if not (np.all(np.isfinite(st.RC)) and np.all(np.isfinite(st.RP))):
            raise FloatingPointError(f"non-finite iterate at ADMM iteration {k}")
        row = TraceRow(k, float(np.linalg.norm(d_pol)), float(np.linalg.norm(d_rgb)), energy)
        st.history.append(row)
        st.iteration = k
        log.debug("iter %d  dS_pol %.3e  dS_rgb %.3e  energy %.6g",
                  k, row.ds_pol, row.ds_rgb, energy)
        if row.total < cfg.eps:
            converged = True
            break

    rc = ImageStack(np.clip(st.RC, 0.0, 1.0))
    rp = ImageStack(np.clip(st.RP, 0.0, 1.0), ANGLE_CHANNELS)
    return DemosaicResult(rc, rp, converged, st.iteration, cfg, st)


def demosaic(I: MosaicImage, D_pol: Dictionary, D_rgb: Dictionary,
             cfg: AdmmConfig | None = None) -> DemosaicResult:
    cfg = cfg or AdmmConfig()
    if cfg.dictionary_mode != "joint-two-dics":
        cfg = replace(cfg, dictionary_mode="joint-two-dics")
    return demosaic_variant(I, DictionarySet("joint-two-dics", rgb=D_rgb, pol=D_pol), cfg)


def residual_trace(state: AdmmState | DemosaicResult) -> list[TraceRow]:
    if isinstance(state, DemosaicResult):
        state = state.state
    return list(state.history)


TRACE_HEADER = ("iteration", "ds_pol", "ds_rgb", "energy")


def trace_csv(rows: Sequence[TraceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in rows:
        w.writerow([r.iteration, repr(r.ds_pol), repr(r.ds_rgb), repr(r.energy)])
    return buf.getvalue()
