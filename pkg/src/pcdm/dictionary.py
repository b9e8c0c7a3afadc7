"""Training signals, K-SVD dictionary learning and the dictionary file format.

File layout (all little-endian)::

    b"PCDM"  u16 version  u8 kind  u32 rows  u32 cols
    rows*cols float64, row-major
    u32 n    n bytes of UTF-8 JSON metadata (sorted keys)
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import eigh
from threadpoolctl import threadpool_limits

from .coding import omp_encode
from .pattern import ImageStack, to_polarimetric

log = logging.getLogger(__name__)

MAGIC = b"PCDM"
VERSION = 1
KIND_CHANNELS = {"pol": 4, "rgb": 12, "channel": 1}
KIND_TAGS = {"pol": 0, "rgb": 1, "channel": 2}
_HEADER = struct.Struct("<4sHBII")
NORM_TOL = 1e-9


class DictionaryFormatError(ValueError):
    pass


class DegenerateDataWarning(UserWarning):
    pass


def rows_for(kind: str, patch: int = 4) -> int:
    return patch * patch * KIND_CHANNELS[kind]


@dataclass
class Dictionary:
    atoms: np.ndarray  # (rows, n_atoms), unit-norm columns
    kind: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KIND_CHANNELS:
            raise ValueError(f"unknown dictionary kind {self.kind!r}")
        self.atoms = np.asarray(self.atoms, dtype=np.float64)
        rows = self.atoms.shape[0]
        patch = int(round(np.sqrt(rows / KIND_CHANNELS[self.kind])))
        if rows_for(self.kind, patch) != rows:
            raise ValueError(f"{rows} rows do not fit a square patch of kind {self.kind!r}")

    @property
    def rows(self) -> int:
        return self.atoms.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[1]

    @property
    def patch(self) -> int:
        return int(round(np.sqrt(self.rows / KIND_CHANNELS[self.kind])))

    def __eq__(self, other):
        return (isinstance(other, Dictionary) and self.kind == other.kind
                and self.atoms.shape == other.atoms.shape
                and self.atoms.tobytes() == other.atoms.tobytes()
                and self.metadata == other.metadata)


def signal_planes(stack: ImageStack, kind: str, channel: int | None = None) -> np.ndarray:
    """The (H, W, C) array a kind of dictionary is trained on."""
    if kind == "rgb":
        return stack.data
    if kind == "pol":
        return to_polarimetric(stack.data) if stack.is_chromatic else stack.data
    if kind == "channel":
        if channel is None:
            raise ValueError("kind='channel' needs a channel index")
        return stack.data[:, :, channel:channel + 1]
    raise ValueError(f"unknown kind {kind!r}")


def extract_signals(stacks: Sequence[ImageStack], kind: str, samples: int, patch: int = 4,
                    seed: int = 0, channel: int | None = None) -> np.ndarray:
    """Random ``patch`` x ``patch`` training patches as columns.

    Positions are drawn uniformly over every patch location of every stack,
    without replacement while enough exist and with replacement beyond that.
    """
    if not stacks:
        raise ValueError("no stacks to sample from")
    planes = [signal_planes(s, kind, channel) for s in stacks]
    for p in planes:
        if patch > p.shape[0] or patch > p.shape[1]:
            raise ValueError(f"patch {patch} larger than image {p.shape[0]}x{p.shape[1]}")
    counts = [(p.shape[0] - patch + 1) * (p.shape[1] - patch + 1) for p in planes]
    total = sum(counts)
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=samples, replace=samples > total)
    offsets = np.cumsum([0] + counts)
    out = np.empty((rows_for(kind, patch), samples))
    for i, p in enumerate(planes):
        sel = np.flatnonzero((picks >= offsets[i]) & (picks < offsets[i + 1]))
        if sel.size == 0:
            continue
        local = picks[sel] - offsets[i]
        w = p.shape[1] - patch + 1
        r, c = np.divmod(local, w)
        for j, (rr, cc) in zip(sel, zip(r, c)):
            out[:, j] = p[rr:rr + patch, cc:cc + patch, :].ravel()
    return out


def objective(Y: np.ndarray, D: np.ndarray, X: np.ndarray, lam: float) -> float:
    R = Y - D @ X
    return float(np.sum(R * R) + lam * np.sum(np.abs(X)))


def _rank1(E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Leading singular pair of E as (unit left vector, scaled right vector).

    Computed from the top eigenvector of the smaller Gram matrix.
    """
    m, n = E.shape
    if m <= n:
        _, v = eigh(E @ E.T, subset_by_index=[m - 1, m - 1])
        d = v[:, 0]
    else:
        _, v = eigh(E.T @ E, subset_by_index=[n - 1, n - 1])
        d = E @ v[:, 0]
        nd = np.linalg.norm(d)
        if nd == 0:
            d = np.zeros(m)
            d[0] = 1.0
        else:
            d /= nd
    # fix the sign ambiguity so runs are reproducible
    if d[np.argmax(np.abs(d))] < 0:
        d = -d
    return d, E.T @ d


def ksvd_train(signals: np.ndarray, atoms: int = 256, sparsity: int = 8, sweeps: int = 40,
               lam: float = 1e-4, seed: int = 0, kind: str = "rgb",
               metadata: dict | None = None) -> tuple[Dictionary, list[float]]:
    """Learn a unit-norm dictionary minimizing ||Y - D X||_F^2 + lam ||X||_1.

    Codes come from OMP (``sparsity`` atoms, l1 shrink on the support); a
    column keeps its previous code when the new one scores worse. Atoms are
    updated one by one from the rank-1 SVD of their restricted residual and
    an update is kept only if it lowers the objective, so the per-sweep
    trace never increases. Unused atoms are replaced by the worst-represented
    signals.
    """
    with threadpool_limits(limits=1, user_api="blas"):  # thread-count independent results
        return _ksvd(signals, atoms, sparsity, sweeps, lam, seed, kind, metadata)


def _ksvd(signals, atoms, sparsity, sweeps, lam, seed, kind, metadata):
    Y = np.asarray(signals, dtype=np.float64)
    n, N = Y.shape
    if atoms > N:
        raise ValueError(f"{atoms} atoms need at least as many signals, got {N}")
    rng = np.random.default_rng(seed)

    sv = np.linalg.svd(Y @ Y.T, compute_uv=False) if N else np.zeros(1)
    if sv[0] == 0 or np.count_nonzero(sv > 1e-10 * sv[0]) <= 1:
        warnings.warn("training signals are rank-deficient (rank <= 1); the dictionary "
                      "will be dominated by a single atom", DegenerateDataWarning, stacklevel=3)

    D = Y[:, rng.choice(N, size=atoms, replace=False)].copy()
    norms = np.linalg.norm(D, axis=0)
    zero = norms < 1e-12
    if zero.any():
        D[:, zero] = rng.standard_normal((n, int(zero.sum())))
        norms[zero] = np.linalg.norm(D[:, zero], axis=0)
    D /= norms

    X = np.zeros((atoms, N))
    RT = Y.T.copy()  # residual, one row per signal
    col_obj = np.einsum("ij,ij->i", RT, RT)
    trace: list[float] = []
    for sweep in range(sweeps):
        code = omp_encode(Y, D, sparsity=sparsity, residual_tol=0.0, l1=lam)
        Xn = code.coefficients
        RnT = Y.T - Xn.T @ D.T
        new_obj = np.einsum("ij,ij->i", RnT, RnT) + lam * np.abs(Xn).sum(axis=0)
        better = new_obj <= col_obj
        X[:, better] = Xn[:, better]
        RT[better] = RnT[better]

        replaced: set[int] = set()
        err = np.einsum("ij,ij->i", RT, RT)
        for k in range(atoms):
            users = np.flatnonzero(X[k])
            if users.size == 0:
                order = np.argsort(-err, kind="stable")
                j = next(int(i) for i in order if int(i) not in replaced)
                replaced.add(j)
                v = Y[:, j]
                nv = np.linalg.norm(v)
                D[:, k] = v / nv if nv > 1e-12 else D[:, k]
                continue
            xk = X[k, users]
            Rk = RT[users]
            old = float(np.sum(Rk * Rk) + lam * np.abs(xk).sum())
            Ek = Rk + np.outer(xk, D[:, k])
            d, x = _rank1(Ek.T)
            if lam > 0:
                x = np.sign(x) * np.maximum(np.abs(x) - lam / 2, 0.0)
            Rk = Ek - np.outer(x, d)
            new = float(np.sum(Rk * Rk) + lam * np.abs(x).sum())
            if new <= old:
                D[:, k] = d
                X[k, users] = x
                RT[users] = Rk
                err[users] = np.einsum("ij,ij->i", Rk, Rk)
        RT = Y.T - X.T @ D.T
        col_obj = np.einsum("ij,ij->i", RT, RT) + lam * np.abs(X).sum(axis=0)
        trace.append(float(col_obj.sum()))
        log.debug("K-SVD sweep %d: objective %.6g", sweep + 1, trace[-1])

    meta = {
        "training_hash": hashlib.sha256(np.ascontiguousarray(Y).tobytes()).hexdigest(),
        "seed": seed, "sweeps": sweeps, "lambda": lam, "sparsity": sparsity,
        "signals": N, "objective": trace[-1] if trace else None,
    }
    meta.update(metadata or {})
    return Dictionary(D, kind, meta), trace


def save_dictionary(d: Dictionary, path) -> None:
    meta = json.dumps(d.metadata, sort_keys=True).encode("utf-8")
    header = _HEADER.pack(MAGIC, VERSION, KIND_TAGS[d.kind], d.rows, d.n_atoms)
    body = np.ascontiguousarray(d.atoms, dtype="<f8").tobytes()
    Path(path).write_bytes(header + body + struct.pack("<I", len(meta)) + meta)


def load_dictionary(path) -> Dictionary:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DictionaryFormatError("truncated dictionary header")
    magic, version, tag, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DictionaryFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DictionaryFormatError(f"unsupported format version {version}")
    kinds = {v: k for k, v in KIND_TAGS.items()}
    if tag not in kinds:
        raise DictionaryFormatError(f"unknown kind tag {tag}")
    kind = kinds[tag]
    n_body = rows * cols * 8
    end = _HEADER.size + n_body
    if len(raw) < end + 4:
        raise DictionaryFormatError("truncated dictionary body")
    atoms = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=_HEADER.size)
    atoms = atoms.reshape(rows, cols).astype(np.float64)
    (n_meta,) = struct.unpack_from("<I", raw, end)
    if len(raw) != end + 4 + n_meta:
        raise DictionaryFormatError("truncated or oversized metadata block")
    meta = json.loads(raw[end + 4:].decode("utf-8"))
    try:
        d = Dictionary(atoms, kind, meta)
    except ValueError as exc:
        raise DictionaryFormatError(str(exc)) from exc
    p = int(round(np.sqrt(rows / KIND_CHANNELS[kind])))
    if rows != rows_for(kind, p):
        raise DictionaryFormatError(f"rows={rows} inconsistent with kind {kind!r}")
    if np.any(np.abs(np.linalg.norm(atoms, axis=0) - 1.0) > NORM_TOL):
        raise DictionaryFormatError("dictionary atoms are not unit-norm")
    return d
