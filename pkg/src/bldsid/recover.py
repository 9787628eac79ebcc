"""Ground-truth coefficient construction and realization recovery.

``true_markov`` enumerates the exact coefficient matrix for a known system.
``ho_kalman`` goes the other way: from an (estimated) coefficient matrix it
factors a block-Hankel matrix by SVD into observability and controllability
factors and reads off a realization, unique up to similarity.  The default
recovers all p+1 transition matrices in ONE shared basis by also factoring
the mixed-chain Hankels (drift powers around a single bilinear term); the
literal per-index variant sits behind ``mode="per_k"`` and yields a
different similarity transform for every k.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RankDeficiencyError
from .estimate import MarkovParams
from .features import FeatureConfig, MultiIndex, column_of
from .model import Dims, SystemParams

SVD_GAP_WARN = 10.0  # warn when sigma_n / sigma_{n+1} falls below this


@dataclass(frozen=True)
class HankelMatrix:
    """Block-Hankel of m x p coefficient blocks: block (i, j) depends only
    on the total degree i + j (exact by construction)."""

    data: np.ndarray  # (n1*m) x (n2*p)
    n1: int
    n2: int
    m: int
    p: int

    def block(self, i: int, j: int) -> np.ndarray:
        return self.data[i * self.m : (i + 1) * self.m, j * self.p : (j + 1) * self.p]


def block_hankel(blocks: list[np.ndarray], n1: int, n2: int) -> HankelMatrix:
    """Assemble blocks[d] (degree d = i + j) into an n1 x n2 block-Hankel."""
    if len(blocks) < n1 + n2 - 1:
        raise ConfigError(
            f"need {n1 + n2 - 1} degree blocks for a {n1} x {n2} Hankel, got {len(blocks)}"
        )
    m, p = blocks[0].shape
    data = np.empty((n1 * m, n2 * p))
    for i in range(n1):
        for j in range(n2):
            data[i * m : (i + 1) * m, j * p : (j + 1) * p] = blocks[i + j]
    return HankelMatrix(data=data, n1=n1, n2=n2, m=m, p=p)


@dataclass(frozen=True)
class Realization:
    """Recovered state-space matrices, defined up to similarity."""

    A: tuple[np.ndarray, ...]
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def dims(self) -> Dims:
        return Dims(n=self.B.shape[0], p=self.B.shape[1], m=self.C.shape[0])

    def to_system(self) -> SystemParams:
        return SystemParams(A=self.A, B=self.B, C=self.C, D=self.D, dims=self.dims)

    def to_json(self) -> str:
        # same schema as SystemParams
        return self.to_system().to_json()

    @classmethod
    def from_json(cls, text: str) -> "Realization":
        sys = SystemParams.from_json(text)
        return cls(A=sys.A, B=sys.B, C=sys.C, D=sys.D)


def true_markov(sys: SystemParams, L: int) -> MarkovParams:
    """Exact coefficient matrix [D | G_1 | ... | G_L] for a known system.

    The column at (ell, chain = (i_1..i_{ell-1}), j) is
    C A_{i_1} ... A_{i_{ell-1}} B e_j; the first p columns are D.
    """
    n, p, m = sys.dims.n, sys.dims.p, sys.dims.m
    cfg = FeatureConfig(L=L, p=p)
    G = np.empty((m, cfg.d))
    G[:, :p] = sys.D
    prefixes = sys.C[None]  # (#chains, m, n), chains in lexicographic order
    for ell in range(1, L + 1):
        off = cfg.block_offset(ell)
        G[:, off : off + cfg.block_width(ell)] = (
            (prefixes @ sys.B).transpose(1, 0, 2).reshape(m, -1)
        )
        if ell < L:
            # extend every chain by one trailing index (0..p)
            prefixes = np.einsum("cmn,knr->ckmr", prefixes, sys.a_stack).reshape(
                -1, m, n
            )
    return MarkovParams(G=G, cfg=cfg)


def extract_powers(G: MarkovParams, k: int, L: int | None = None) -> list[np.ndarray]:
    """Pure-power coefficient blocks [CB, C A_k B, ..., C A_k^(L-1) B]."""
    cfg = G.cfg
    if L is None:
        L = cfg.L
    if not 0 <= k <= cfg.p:
        raise ConfigError(f"matrix index k={k} outside 0..{cfg.p}")
    if L > cfg.L:
        raise ConfigError(f"requested {L} degree blocks but only {cfg.L} are stored")
    out = []
    for ell in range(1, L + 1):
        cols = [
            column_of(MultiIndex(ell=ell, chain=(k,) * (ell - 1), j=j), cfg)
            for j in range(1, cfg.p + 1)
        ]
        out.append(G.G[:, cols])
    return out


def extract_mixed(G: MarkovParams, k: int, i: int, j: int) -> np.ndarray:
    """Coefficient block for the chain 0^i k 0^j, i.e. C A_0^i A_k A_0^j B."""
    cfg = G.cfg
    if not 0 <= k <= cfg.p:
        raise ConfigError(f"matrix index k={k} outside 0..{cfg.p}")
    if i < 0 or j < 0 or i + j + 1 > cfg.L - 1:
        raise ConfigError(
            f"chain degree {i}+1+{j} exceeds the stored budget L-1 = {cfg.L - 1}"
        )
    chain = (0,) * i + (k,) + (0,) * j
    cols = [
        column_of(MultiIndex(ell=i + j + 2, chain=chain, j=col), cfg)
        for col in range(1, cfg.p + 1)
    ]
    return G.G[:, cols]


def _rank_n_factors(H: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Rank-n truncated SVD H ~ O Q with O = U_n s_n^(1/2), Q = s_n^(1/2) V_n^T.

    Returns (O, Q, O_pinv, Q_pinv); raises when the numerical rank of H is
    below n, warns when the singular-value gap at n is thin.
    """
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    cutoff = max(H.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    observed = int(np.sum(s > cutoff))
    if observed < n:
        raise RankDeficiencyError(requested=n, observed=observed)
    if n < s.size and s[n] > 0 and s[n - 1] / s[n] < SVD_GAP_WARN:
        warnings.warn(
            f"thin singular-value gap at order {n}: sigma_n/sigma_(n+1) = "
            f"{s[n - 1] / s[n]:.2f}"
        )
    root = np.sqrt(s[:n])
    O = U[:, :n] * root
    Q = root[:, None] * Vh[:n]
    O_pinv = (U[:, :n] / root).T
    Q_pinv = Vh[:n].T / root
    return O, Q, O_pinv, Q_pinv


def ho_kalman(
    G: MarkovParams,
    n: int,
    L: int | None = None,
    n1: int | None = None,
    n2: int | None = None,
    mode: str = "shared",
) -> Realization:
    """Recover a realization of order ``n`` from the coefficient matrix.

    Needs L >= n1 + n2 degree blocks (defaults n1 = n2 = n).  In shared
    mode the drift is read from the shifted pure-power Hankel and every
    other transition matrix from its mixed-chain Hankel, all projected
    through the same rank-n factors, so the whole realization lives in one
    basis.  ``mode="per_k"`` instead factors each pure-power Hankel
    separately (each A_k then carries its own similarity transform).
    """
    cfg = G.cfg
    if L is None:
        L = cfg.L
    n1 = n if n1 is None else n1
    n2 = n if n2 is None else n2
    if mode not in ("shared", "per_k"):
        raise ConfigError(f"unknown recovery mode {mode!r}")
    if n1 < 1 or n2 < 1 or n < 1:
        raise ConfigError("block dimensions and order must be positive")
    if L < n1 + n2:
        raise ConfigError(
            f"need L >= n1 + n2 = {n1 + n2} degree blocks for the shifted Hankel, got L = {L}"
        )
    if n > min(n1 * G.m, n2 * cfg.p):
        raise ConfigError(
            f"order {n} exceeds the {n1 * G.m} x {n2 * cfg.p} Hankel rank budget"
        )

    powers0 = extract_powers(G, 0, L)
    H = block_hankel(powers0, n1, n2)
    H_shift = block_hankel(powers0[1:], n1, n2)
    O, Q, O_pinv, Q_pinv = _rank_n_factors(H.data, n)

    A0 = O_pinv @ H_shift.data @ Q_pinv
    C_hat = O[: G.m]
    B_hat = Q[:, : cfg.p]
    D_hat = G.G[:, : cfg.p].copy()

    A = [A0]
    for k in range(1, cfg.p + 1):
        if mode == "shared":
            Hk = np.empty((n1 * G.m, n2 * cfg.p))
            for i in range(n1):
                for j in range(n2):
                    Hk[i * G.m : (i + 1) * G.m, j * cfg.p : (j + 1) * cfg.p] = (
                        extract_mixed(G, k, i, j)
                    )
            A.append(O_pinv @ Hk @ Q_pinv)
        else:
            powers_k = extract_powers(G, k, L)
            Hk = block_hankel(powers_k, n1, n2)
            Hk_shift = block_hankel(powers_k[1:], n1, n2)
            _, _, Ok_pinv, Qk_pinv = _rank_n_factors(Hk.data, n)
            A.append(Ok_pinv @ Hk_shift.data @ Qk_pinv)
    return Realization(A=tuple(A), B=B_hat, C=C_hat, D=D_hat)


def markov_mismatch(G_ref: MarkovParams, realization: Realization, L: int) -> float:
    """Max relative coefficient error of the realization against a
    reference, over all chains representable with L blocks."""
    sys = realization.to_system()
    G_real = true_markov(sys, L)
    diff = float(np.max(np.abs(G_real.G - G_ref.G)))
    scale = float(np.max(np.abs(G_ref.G)))
    return diff / max(scale, 1e-300)
