"""Minimum-norm least squares, Gram-spectrum diagnostics, and the
three-term error decomposition."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .features import (
    FeatureConfig,
    MultiIndex,
    column_of,
    feature_matrix,
    noise_feature_matrix,
    truncation_bias_matrix,
    build_F,
)
from .model import SystemParams
from .simulate import Trajectory


@dataclass(frozen=True)
class MarkovParams:
    """Stacked input-output coefficients [D | G_1 | ... | G_L].

    Column block l has width p(p+1)^(l-1); its columns are addressed by
    MultiIndex and equal C A_{i_1} ... A_{i_{l-1}} B e_j for the true
    system.
    """

    G: np.ndarray  # m x d
    cfg: FeatureConfig

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        object.__setattr__(self, "G", G)
        if G.ndim != 2 or G.shape[1] != self.cfg.d:
            raise ConfigError(
                f"coefficient matrix has shape {G.shape}, expected (m, {self.cfg.d})"
            )

    @property
    def m(self) -> int:
        return self.G.shape[0]

    def block(self, ell: int) -> np.ndarray:
        """View of block ell (0 = direct feedthrough)."""
        off = self.cfg.block_offset(ell)
        return self.G[:, off : off + self.cfg.block_width(ell)]

    def column(self, mi: MultiIndex) -> np.ndarray:
        return self.G[:, column_of(mi, self.cfg)]

    def to_json(self) -> str:
        return json.dumps(
            {"L": self.cfg.L, "p": self.cfg.p, "m": self.m, "G": self.G.tolist()}
        )

    @classmethod
    def from_json(cls, text: str) -> "MarkovParams":
        doc = json.loads(text)
        return cls(
            G=np.asarray(doc["G"], dtype=float),
            cfg=FeatureConfig(L=int(doc["L"]), p=int(doc["p"])),
        )


@dataclass(frozen=True)
class GramReport:
    lambda_min: float
    threshold: float  # rows / 4
    satisfied: bool


@dataclass(frozen=True)
class ErrorDecomposition:
    excitation: float  # op norm of the Gram pseudoinverse
    multiplier: float  # op norm of sum_t u~_t (F w~_t)^T
    truncation: float  # op norm of sum_t u~_t eps_t^T
    bound: float  # excitation * (multiplier + truncation)
    actual: float  # op norm of (G_hat - G_true)
    gram_singular: bool

    @property
    def holds(self) -> bool:
        """actual <= bound + 1e-8 (vacuous when the Gram matrix is singular)."""
        return self.gram_singular or self.actual <= self.bound + 1e-8

    def csv_row(self, seed, T, L) -> list:
        return [
            seed,
            T,
            L,
            repr(self.excitation),
            repr(self.multiplier),
            repr(self.truncation),
            repr(self.bound),
            repr(self.actual),
        ]


def _svd_cutoff(s: np.ndarray, shape: tuple[int, int]) -> float:
    if s.size == 0:
        return 0.0
    return max(shape) * np.finfo(float).eps * float(s[0])


def lse_svd(U_tilde: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-Frobenius-norm solution of min_G ||Y - U G^T||_F^2.

    One thin SVD of the design matrix (never forming the Gram matrix, which
    would square the condition number); singular values below
    max(rows, d) * eps * s_max are treated as zero.  Returns (G, singular
    values of U_tilde).
    """
    U_tilde = np.asarray(U_tilde, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if U_tilde.ndim != 2 or Y.ndim != 2 or U_tilde.shape[0] != Y.shape[0]:
        raise ConfigError(
            f"design/output row counts differ: {U_tilde.shape} vs {Y.shape}"
        )
    Usv, s, Vh = np.linalg.svd(U_tilde, full_matrices=False)
    cutoff = _svd_cutoff(s, U_tilde.shape)
    rank = int(np.sum(s > cutoff))
    if rank == 0:
        warnings.warn("design matrix is numerically zero; returning a zero estimate")
        return np.zeros((Y.shape[1], U_tilde.shape[1])), s
    coeff = (Usv[:, :rank].T @ Y) / s[:rank, None]
    return (Vh[:rank].T @ coeff).T, s


def lse(U_tilde: np.ndarray, Y: np.ndarray, cfg: FeatureConfig) -> MarkovParams:
    """Least-squares estimate of the stacked coefficients from a design
    matrix and outputs (one row per time step)."""
    G, _ = lse_svd(U_tilde, Y)
    return MarkovParams(G=G, cfg=cfg)


def fit_markov(traj: Trajectory, cfg: FeatureConfig) -> MarkovParams:
    """Convenience: features + regression straight from a trajectory."""
    U = feature_matrix(traj, cfg)
    Y = traj.y[cfg.L :]
    return lse(U, Y, cfg)


def gram_min_eig(U_tilde: np.ndarray) -> GramReport:
    """Smallest Gram eigenvalue versus the rows/4 excitation threshold."""
    U_tilde = np.asarray(U_tilde, dtype=float)
    if U_tilde.ndim != 2 or U_tilde.shape[0] == 0:
        raise ConfigError("design matrix must be a nonempty 2-D array")
    lam = float(np.linalg.eigvalsh(U_tilde.T @ U_tilde)[0])
    threshold = U_tilde.shape[0] / 4.0
    return GramReport(lambda_min=lam, threshold=threshold, satisfied=lam >= threshold)


def estimation_error(G_hat: np.ndarray | MarkovParams, G_true: np.ndarray | MarkovParams) -> float:
    """Operator norm of the coefficient error."""
    A = G_hat.G if isinstance(G_hat, MarkovParams) else np.asarray(G_hat, dtype=float)
    B = G_true.G if isinstance(G_true, MarkovParams) else np.asarray(G_true, dtype=float)
    if A.shape != B.shape:
        raise ConfigError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A - B, 2))


def error_decomposition(
    sys: SystemParams,
    traj: Trajectory,
    cfg: FeatureConfig,
    G_true: MarkovParams,
    G_hat: MarkovParams,
) -> ErrorDecomposition:
    """Split the estimation error into excitation, multiplier-process, and
    truncation-bias terms, all from simulated ground truth.

    actual <= excitation * (multiplier + truncation) holds whenever the
    Gram matrix is nonsingular; a singular Gram is reported with an
    infinite excitation term.
    """
    L = cfg.L
    U = feature_matrix(traj, cfg)
    s = np.linalg.svd(U, compute_uv=False)
    cutoff = _svd_cutoff(s, U.shape)
    singular = U.shape[0] < U.shape[1] or float(s[-1]) <= cutoff
    excitation = math.inf if singular else 1.0 / float(s[-1]) ** 2

    wt = noise_feature_matrix(traj, L)
    fw = np.empty((U.shape[0], sys.dims.m))
    for i, t in enumerate(range(L, traj.T + 1)):
        fw[i] = build_F(sys, traj.u[t - L + 1 : t]) @ wt[i]
    eps = truncation_bias_matrix(sys, traj, L)

    multiplier = float(np.linalg.norm(U.T @ fw, 2))
    truncation = float(np.linalg.norm(U.T @ eps, 2))
    actual = estimation_error(G_hat, G_true)
    return ErrorDecomposition(
        excitation=excitation,
        multiplier=multiplier,
        truncation=truncation,
        bound=excitation * (multiplier + truncation),
        actual=actual,
        gram_singular=singular,
    )


def pe_sample_threshold(p: int, L: int, gamma: float, delta: float, constant: float = 1.0) -> float:
    """Trajectory length above which the rows/4 excitation bound is expected
    to hold with probability 1 - delta.

    Desk-scale form of the sample-size condition: the leading absolute
    constant defaults to 1; the covariate fourth-moment proxy is
    L (3 v gamma)^(L+1).
    """
    if not 0 < delta < 1:
        raise ConfigError("delta must lie in (0, 1)")
    moment = max(3.0, gamma) ** (L + 1)
    dim = (p + 1) ** (L + 1)
    return L + constant * L * (L + 1) * moment * (
        math.log((L + 1) / delta) + dim * math.log(dim / delta)
    )
