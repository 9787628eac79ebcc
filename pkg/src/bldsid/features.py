"""Kronecker input features, noise stacking, and the exact output
decomposition pieces.

For a history length L the covariate for time t is

    [ u_t | u_{t-1} | ubar_{t-1} (x) u_{t-2} | ... | ubar_{t-1} (x) ... (x) u_{t-L} ]

with ubar = [1; u], total length d = (p+1)^L + p - 1.  Kronecker convention:
(a (x) b)[i*len(b) + j] = a[i] * b[j]; inside ubar, index 0 is the constant 1
and indices 1..p are the input coordinates.  Block l (l = 1..L) therefore has
one column per (chain, j) with chain = (i_1, ..., i_{l-1}) in {0..p}^{l-1},
i_1 slowest-varying, and j in {1..p}; the matching output coefficient is
C A_{i_1} ... A_{i_{l-1}} B e_j.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError
from .model import SystemParams
from .simulate import Trajectory, input_matrix

DIM_GUARD = 2**31  # refuse configurations with (p+1)^(L+1) beyond this


@dataclass(frozen=True)
class FeatureConfig:
    L: int
    p: int

    def __post_init__(self):
        if self.L < 1:
            raise ConfigError("history length L must be >= 1")
        if self.p < 1:
            raise ConfigError("input dimension p must be >= 1")
        if (self.p + 1) ** (self.L + 1) > DIM_GUARD:
            raise ConfigError(
                f"feature dimension overflow: (p+1)^(L+1) = {(self.p + 1) ** (self.L + 1)} "
                f"exceeds the 2^31 guard; the blow-up in L is intrinsic, pick a smaller L"
            )

    @property
    def d(self) -> int:
        """Covariate length (p+1)^L + p - 1."""
        return (self.p + 1) ** self.L + self.p - 1

    def block_width(self, ell: int) -> int:
        if ell == 0:
            return self.p
        return self.p * (self.p + 1) ** (ell - 1)

    def block_offset(self, ell: int) -> int:
        if ell == 0:
            return 0
        return self.p + (self.p + 1) ** (ell - 1) - 1


@dataclass(frozen=True)
class MultiIndex:
    """Address of one covariate column in blocks 1..L.

    ``chain`` lists the transition-matrix indices i_1..i_{l-1} (empty for
    l = 1); ``j`` is the 1-based B-column index.
    """

    ell: int
    chain: tuple[int, ...]
    j: int

    def validate(self, cfg: FeatureConfig) -> None:
        if not 1 <= self.ell <= cfg.L:
            raise ConfigError(f"block index {self.ell} outside 1..{cfg.L}")
        if len(self.chain) != self.ell - 1:
            raise ConfigError(
                f"chain length {len(self.chain)} does not match block {self.ell}"
            )
        if any(not 0 <= i <= cfg.p for i in self.chain):
            raise ConfigError(f"chain entries must lie in 0..{cfg.p}: {self.chain}")
        if not 1 <= self.j <= cfg.p:
            raise ConfigError(f"column index j={self.j} outside 1..{cfg.p}")


def column_of(mi: MultiIndex, cfg: FeatureConfig) -> int:
    """Flat covariate column for a multi-index."""
    mi.validate(cfg)
    flat = 0
    for i in mi.chain:  # base p+1, i_1 most significant
        flat = flat * (cfg.p + 1) + i
    return cfg.block_offset(mi.ell) + flat * cfg.p + (mi.j - 1)


def multiindex_of(col: int, cfg: FeatureConfig) -> MultiIndex:
    """Inverse of ``column_of`` for columns in blocks 1..L (col >= p)."""
    if not cfg.p <= col < cfg.d:
        raise ConfigError(f"column {col} outside the multi-indexed range [{cfg.p}, {cfg.d})")
    ell = 1
    while ell < cfg.L and col >= cfg.block_offset(ell + 1):
        ell += 1
    rem = col - cfg.block_offset(ell)
    flat, j = divmod(rem, cfg.p)
    chain = []
    for _ in range(ell - 1):
        flat, digit = divmod(flat, cfg.p + 1)
        chain.append(digit)
    return MultiIndex(ell=ell, chain=tuple(reversed(chain)), j=j + 1)


def dump_index_map(cfg: FeatureConfig, path) -> None:
    """Write the flat-column -> (ell, chain, j) map as CSV (block 0 rows
    carry ell = 0 and the direct-feedthrough column index)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["flat_column", "ell", "chain", "j"])
        for col in range(cfg.p):
            writer.writerow([col, 0, "", col + 1])
        for col in range(cfg.p, cfg.d):
            mi = multiindex_of(col, cfg)
            writer.writerow([col, mi.ell, ";".join(str(i) for i in mi.chain), mi.j])


# ---------------------------------------------------------------------------
# covariate construction


def build_feature(window: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Covariate for one window of inputs [u_{t-L}, ..., u_t] (oldest first)."""
    window = np.asarray(window, dtype=float)
    if window.shape != (cfg.L + 1, cfg.p):
        raise ConfigError(
            f"window must have shape {(cfg.L + 1, cfg.p)}, got {window.shape}"
        )
    return kernels.features_from_windows_numpy(window[None])[0]


def features_from_windows(windows: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Covariates for independent windows, shape (N, L+1, p) -> (N, d)."""
    windows = np.asarray(windows, dtype=float)
    if windows.ndim != 3 or windows.shape[1:] != (cfg.L + 1, cfg.p):
        raise ConfigError(
            f"windows must have shape (N, {cfg.L + 1}, {cfg.p}), got {windows.shape}"
        )
    return kernels.features_from_windows_numpy(windows)


def feature_matrix(traj: Trajectory | np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Stacked covariates; row s corresponds to t = L + s, for t = L..T."""
    u = traj.u if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    if u.ndim != 2 or u.shape[1] != cfg.p:
        raise ConfigError(f"inputs must have shape (T+1, {cfg.p}), got {u.shape}")
    if u.shape[0] - 1 < cfg.L:
        raise ConfigError(f"need T >= L: T = {u.shape[0] - 1}, L = {cfg.L}")
    return kernels.feature_rows(u, cfg.L)


# ---------------------------------------------------------------------------
# noise stacking and the remaining decomposition pieces


def noise_feature(traj: Trajectory, t: int, L: int) -> np.ndarray:
    """Stacked noise vector [z_t; w_{t-1}; ...; w_{t-L}], length m + nL."""
    if t < L:
        raise ConfigError(f"need t >= L: t = {t}, L = {L}")
    if t > traj.T:
        raise ConfigError(f"t = {t} beyond trajectory horizon T = {traj.T}")
    back = traj.w[t - L : t][::-1]  # w_{t-1}, ..., w_{t-L}
    return np.concatenate([traj.z[t], back.ravel()])


def noise_feature_matrix(traj: Trajectory, L: int) -> np.ndarray:
    """All stacked noise vectors for t = L..T, one per row."""
    return np.stack([noise_feature(traj, t, L) for t in range(L, traj.T + 1)])


def build_F(sys: SystemParams, window: np.ndarray) -> np.ndarray:
    """Map from stacked noise to output contribution, shape m x (m + nL).

    ``window`` holds [u_{t-L+1}, ..., u_{t-1}] (oldest first, length L-1);
    blocks are [I_m | C | C(u_{t-1} o A) | C(u_{t-1} o A)(u_{t-2} o A) | ...],
    cumulative left products.
    """
    window = np.asarray(window, dtype=float)
    n, p, m = sys.dims.n, sys.dims.p, sys.dims.m
    if window.ndim != 2 or window.shape[1] != p:
        raise ConfigError(f"window must have shape (L-1, {p}), got {window.shape}")
    L = window.shape[0] + 1
    out = np.empty((m, m + n * L))
    out[:, :m] = np.eye(m)
    prod = sys.C.copy()
    out[:, m : m + n] = prod
    for ell in range(2, L + 1):
        prod = prod @ input_matrix(sys, window[L - ell])  # u_{t-(ell-1)}
        out[:, m + (ell - 1) * n : m + ell * n] = prod
    return out


def truncation_bias(sys: SystemParams, traj: Trajectory, t: int, L: int) -> np.ndarray:
    """Output contribution of the state L steps back:
    C (u_{t-1} o A)(u_{t-2} o A)...(u_{t-L} o A) x_{t-L}."""
    if t < L:
        raise ConfigError(f"need t >= L: t = {t}, L = {L}")
    if t > traj.T:
        raise ConfigError(f"t = {t} beyond trajectory horizon T = {traj.T}")
    vec = traj.x[t - L].copy()
    for ell in range(L, 0, -1):  # apply rightmost factor first
        vec = input_matrix(sys, traj.u[t - ell]) @ vec
    return sys.C @ vec


def truncation_bias_matrix(sys: SystemParams, traj: Trajectory, L: int) -> np.ndarray:
    """All truncation-bias vectors for t = L..T, one per row."""
    return np.stack([truncation_bias(sys, traj, t, L) for t in range(L, traj.T + 1)])
