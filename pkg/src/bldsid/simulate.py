"""Input sampling and trajectory simulation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import ConfigError, InstabilityError
from .model import SystemParams
from .rng import SeedLike, make_rng

DEFAULT_OVERFLOW_GUARD = 1e12


class InputDistribution(str, Enum):
    """Open-loop i.i.d. input laws.

    SPHERE is uniform on the sphere of radius sqrt(p) (so each draw has
    Euclidean norm exactly sqrt(p)); GAUSSIAN is standard normal with
    identity covariance.  Both are isotropic with zero odd moments.
    """

    SPHERE = "sphere"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class NoiseConfig:
    """i.i.d. N(0, sigma^2) per coordinate for both process and measurement
    noise."""

    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("noise standard deviation must be nonnegative")


@dataclass
class Trajectory:
    x: np.ndarray  # (T+1, n) states, x[0] = 0
    u: np.ndarray  # (T+1, p) inputs
    y: np.ndarray  # (T+1, m) outputs
    w: np.ndarray  # (T+1, n) process noise
    z: np.ndarray  # (T+1, m) measurement noise

    def __post_init__(self):
        lengths = {a.shape[0] for a in (self.x, self.u, self.y, self.w, self.z)}
        if len(lengths) != 1:
            raise ConfigError(f"inconsistent trajectory lengths: {sorted(lengths)}")
        if not np.allclose(self.x[0], 0.0):
            raise ConfigError("trajectories must start at x_0 = 0")
        for name in ("x", "u", "y", "w", "z"):
            if not np.isfinite(getattr(self, name)).all():
                raise ConfigError(f"trajectory field {name} contains non-finite values")

    @property
    def T(self) -> int:
        return self.x.shape[0] - 1

    # -- serialization ------------------------------------------------------
    # CSV column order: t, u_0..u_{p-1}, y_0..y_{m-1}
    # and with include_state: x_0..x_{n-1}, w_0..w_{n-1}, z_0..z_{m-1}

    def to_csv(self, path, include_state: bool = False) -> None:
        p, m, n = self.u.shape[1], self.y.shape[1], self.x.shape[1]
        header = ["t"]
        header += [f"u_{i}" for i in range(p)]
        header += [f"y_{i}" for i in range(m)]
        if include_state:
            header += [f"x_{i}" for i in range(n)]
            header += [f"w_{i}" for i in range(n)]
            header += [f"z_{i}" for i in range(m)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(self.x.shape[0]):
                row = [t] + [repr(float(v)) for v in self.u[t]] + [repr(float(v)) for v in self.y[t]]
                if include_state:
                    row += [repr(float(v)) for v in self.x[t]]
                    row += [repr(float(v)) for v in self.w[t]]
                    row += [repr(float(v)) for v in self.z[t]]
                writer.writerow(row)

    def to_json(self) -> str:
        return json.dumps(
            {name: getattr(self, name).tolist() for name in ("x", "u", "y", "w", "z")}
        )

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        doc = json.loads(text)
        return cls(**{k: np.asarray(doc[k], dtype=float) for k in ("x", "u", "y", "w", "z")})


def sample_input(dist: InputDistribution, p: int, rng: SeedLike) -> np.ndarray:
    """One input draw; see ``draw_inputs`` for a batch."""
    return draw_inputs(dist, p, 1, rng)[0]


def draw_inputs(dist: InputDistribution, p: int, count: int, rng: SeedLike) -> np.ndarray:
    if p < 1:
        raise ConfigError("input dimension must be >= 1")
    rng = make_rng(rng)
    dist = InputDistribution(dist)
    if dist is InputDistribution.GAUSSIAN:
        return rng.standard_normal((count, p))
    draws = rng.standard_normal((count, p))
    norms = np.linalg.norm(draws, axis=1)
    while (degenerate := norms == 0.0).any():
        draws[degenerate] = rng.standard_normal((int(degenerate.sum()), p))
        norms = np.linalg.norm(draws, axis=1)
    return draws * (np.sqrt(p) / norms)[:, None]


def simulate(
    sys: SystemParams,
    inputs: np.ndarray,
    noise: NoiseConfig,
    rng: SeedLike,
    overflow_guard: float = DEFAULT_OVERFLOW_GUARD,
) -> Trajectory:
    """Run the state recursion from x_0 = 0 over the given input sequence.

    ``inputs`` has one row per step (length T+1); w and z are drawn i.i.d.
    N(0, sigma^2) per coordinate.  Raises InstabilityError with the
    offending time index when the state norm exceeds ``overflow_guard``.
    """
    n, p, m = sys.dims.n, sys.dims.p, sys.dims.m
    inputs = np.ascontiguousarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != p:
        raise ConfigError(f"inputs must have shape (T+1, {p}), got {inputs.shape}")
    steps = inputs.shape[0]
    rng = make_rng(rng)
    if noise.sigma > 0:
        w = noise.sigma * rng.standard_normal((steps, n))
        z = noise.sigma * rng.standard_normal((steps, m))
    else:
        w = np.zeros((steps, n))
        z = np.zeros((steps, m))
    x, y, overflow_t = kernels.simulate_path(
        sys.a_stack, sys.B, sys.C, sys.D, inputs, w, z, float(overflow_guard)
    )
    if overflow_t >= 0:
        raise InstabilityError(
            overflow_t, float(np.linalg.norm(x[overflow_t - 1])), overflow_guard
        )
    return Trajectory(x=x, u=inputs, y=y, w=w, z=z)


def input_matrix(sys: SystemParams, u: np.ndarray) -> np.ndarray:
    """The per-step transition matrix A_0 + sum_k u_k A_k."""
    M = sys.A[0].copy()
    for k in range(sys.dims.p):
        M += u[k] * sys.A[k + 1]
    return M


def unrolled_state(
    sys: SystemParams, inputs: np.ndarray, noises: np.ndarray, t: int
) -> np.ndarray:
    """Closed-form x_{t+1} from the unrolled recursion.

    x_{t+1} = sum_{l=0}^{t} (u_t o A)(u_{t-1} o A)...(u_{t-l+1} o A) (B u_{t-l} + w_{t-l})
    with the empty product (l = 0) equal to the identity.  Kept as a
    separate code path from ``simulate`` so the two can cross-check each
    other.
    """
    inputs = np.asarray(inputs, dtype=float)
    noises = np.asarray(noises, dtype=float)
    if t >= inputs.shape[0]:
        raise ConfigError(f"t={t} outside the input sequence of length {inputs.shape[0]}")
    n = sys.dims.n
    acc = np.zeros(n)
    prod = np.eye(n)
    for ell in range(t + 1):
        if ell > 0:
            prod = prod @ input_matrix(sys, inputs[t - ell + 1])
        acc += prod @ (sys.B @ inputs[t - ell] + noises[t - ell])
    return acc
