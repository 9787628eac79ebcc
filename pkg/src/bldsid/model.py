"""System parameters and random test-system generation.

A system is
    x_{t+1} = A_0 x_t + sum_k (u_t)_k A_k x_t + B u_t + w_t
    y_t     = C x_t + D u_t + z_t
with p+1 square transition matrices A_0..A_p (A_0 the drift, the rest the
input-modulated terms).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, UnscalableMatrixError
from .rng import SeedLike, make_rng

RETRY_CAP = 8  # redraws allowed for (numerically) nilpotent matrices


@dataclass(frozen=True)
class Dims:
    n: int  # state dimension
    p: int  # input dimension
    m: int  # output dimension

    def __post_init__(self):
        for name in ("n", "p", "m"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v <= 0:
                raise ConfigError(f"dimension {name} must be a positive integer, got {v!r}")


@dataclass(frozen=True)
class SystemParams:
    A: tuple[np.ndarray, ...]  # p+1 matrices, each n x n
    B: np.ndarray  # n x p
    C: np.ndarray  # m x n
    D: np.ndarray  # m x p
    dims: Dims

    def __post_init__(self):
        n, p, m = self.dims.n, self.dims.p, self.dims.m
        if len(self.A) != p + 1:
            raise ConfigError(f"expected {p + 1} transition matrices, got {len(self.A)}")
        A = tuple(np.asarray(a, dtype=float) for a in self.A)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float))
        object.__setattr__(self, "C", np.asarray(self.C, dtype=float))
        object.__setattr__(self, "D", np.asarray(self.D, dtype=float))
        shapes = {"B": (n, p), "C": (m, n), "D": (m, p)}
        for name, want in shapes.items():
            got = getattr(self, name).shape
            if got != want:
                raise ConfigError(f"{name} has shape {got}, expected {want}")
        for k, a in enumerate(A):
            if a.shape != (n, n):
                raise ConfigError(f"A[{k}] has shape {a.shape}, expected {(n, n)}")
        arrays = list(A) + [self.B, self.C, self.D]
        if not all(np.isfinite(a).all() for a in arrays):
            raise ConfigError("system parameters contain non-finite entries")

    @property
    def a_stack(self) -> np.ndarray:
        """All transition matrices as one contiguous (p+1, n, n) array."""
        return np.ascontiguousarray(np.stack(self.A))

    def to_json(self) -> str:
        doc = {
            "n": self.dims.n,
            "p": self.dims.p,
            "m": self.dims.m,
            "A": [a.tolist() for a in self.A],
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SystemParams":
        doc = json.loads(text)
        dims = Dims(int(doc["n"]), int(doc["p"]), int(doc["m"]))
        return cls(
            A=tuple(np.asarray(a, dtype=float) for a in doc["A"]),
            B=np.asarray(doc["B"], dtype=float),
            C=np.asarray(doc["C"], dtype=float),
            D=np.asarray(doc["D"], dtype=float),
            dims=dims,
        )


def spectral_radius(M: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError(f"spectral radius needs a square matrix, got shape {M.shape}")
    if not np.isfinite(M).all():
        raise ConfigError("matrix contains non-finite entries")
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def scale_to_spectral_radius(M: np.ndarray, rho_target: float) -> np.ndarray:
    """Rescale ``M`` so its spectral radius equals ``rho_target``."""
    M = np.asarray(M, dtype=float)
    if rho_target < 0:
        raise ConfigError("target spectral radius must be nonnegative")
    if rho_target == 0:
        return np.zeros_like(M)
    sr = spectral_radius(M)
    # a numerically nilpotent matrix cannot be scaled to a positive radius
    scale = np.linalg.norm(M)
    if sr <= 1e-10 * max(1.0, scale):
        raise UnscalableMatrixError(
            f"spectral radius {sr:.3e} is numerically zero; cannot scale to {rho_target}"
        )
    return (rho_target / sr) * M


def random_system(
    dims: Dims,
    rho0: float,
    rhok: float,
    scale_b: bool = True,
    seed: SeedLike = 0,
) -> SystemParams:
    """Draw a random system with prescribed transition spectral radii.

    A_0..A_p get i.i.d. standard-normal entries, then A_0 is scaled to
    spectral radius ``rho0`` and each A_k (k >= 1) to ``rhok``.  With
    ``scale_b`` (default) B and C get i.i.d. N(0, 1/n) entries and D gets
    N(0, 1/m); otherwise all three keep unit variance.  Deterministic given
    the seed; a numerically nilpotent draw is retried with a fresh substream
    up to RETRY_CAP times.
    """
    if rho0 < 0 or rhok < 0:
        raise ConfigError("target spectral radii must be nonnegative")
    n, p, m = dims.n, dims.p, dims.m
    root = make_rng(seed).bit_generator.seed_seq
    streams = root.spawn(p + 2)  # one per transition matrix, one for B/C/D
    bcd_rng = np.random.Generator(np.random.Philox(streams[-1]))

    def draw_scaled(stream: np.random.SeedSequence, target: float) -> np.ndarray:
        # redraw nilpotent candidates from incremented sub-seeds
        for attempt_ss in stream.spawn(RETRY_CAP):
            cand = np.random.Generator(np.random.Philox(attempt_ss)).standard_normal((n, n))
            try:
                return scale_to_spectral_radius(cand, target)
            except UnscalableMatrixError:
                continue
        raise NumericalError(f"failed to draw a scalable matrix in {RETRY_CAP} attempts")

    A = tuple(
        draw_scaled(streams[k], rho0 if k == 0 else rhok) for k in range(p + 1)
    )
    B = bcd_rng.standard_normal((n, p))
    C = bcd_rng.standard_normal((m, n))
    D = bcd_rng.standard_normal((m, p))
    if scale_b:
        B = B / np.sqrt(n)
        C = C / np.sqrt(n)
        D = D / np.sqrt(m)
    return SystemParams(A=A, B=B, C=C, D=D, dims=dims)
