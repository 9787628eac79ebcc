"""Monte-Carlo stability certificates.

Uniform stability asks that every product of input-modulated transition
matrices (u o A) with inputs from the excitation set contracts like
kappa * rho^k.  Exact joint-spectral-radius computation is NP-hard, so the
estimates here are sampled: the spectral radius of any sampled product,
taken to the power 1/k, is a true lower bound on the joint spectral
radius, while sampled norm growth tracks the transient constant.  Both are
evidence over the sampled set, never a proof (the stability definition
quantifies over all input sequences).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, NumericalError
from .features import build_F
from .model import SystemParams
from .rng import SeedLike, spawn_rngs
from .simulate import InputDistribution, draw_inputs

DEFAULT_DEPTH = 64
DEFAULT_SAMPLES = 256


@dataclass(frozen=True)
class StabilityReport:
    rho_hat: float  # max over sampled products of rho(prod)^(1/k): JSR lower estimate
    kappa_hat: float  # max over sampled products of ||prod|| / rho^k  (>= 1, empty product included)
    rho: float
    kappa: float
    depth: int
    samples: int
    certified: bool  # rho_hat < rho and kappa_hat <= kappa on the sampled set

    def to_json(self) -> str:
        return json.dumps(
            {
                "rho_hat": self.rho_hat,
                "kappa_hat": self.kappa_hat,
                "rho": self.rho,
                "kappa": self.kappa,
                "depth": self.depth,
                "samples": self.samples,
                "certified": self.certified,
            }
        )


def _sampled_scan(
    sys: SystemParams,
    dist: InputDistribution,
    depth_max: int,
    samples: int,
    rng: SeedLike,
) -> tuple[np.ndarray, np.ndarray]:
    """(log norms, log spectral radii) of sampled prefix products, (S, K).

    Each sample draws its sequence from its own spawned substream, so for a
    fixed seed the sampled set only grows with ``samples`` and ``depth_max``
    and the running-maximum estimates are monotone in both.
    """
    if depth_max < 1 or samples < 1:
        raise ConfigError("depth_max and samples must be >= 1")
    streams = spawn_rngs(rng, samples)
    p = sys.dims.p
    useq = np.empty((samples, depth_max, p))
    for s, stream in enumerate(streams):
        useq[s] = draw_inputs(dist, p, depth_max, stream)
    lognorms, logradii = kernels.product_scan(sys.a_stack, useq)
    if np.isposinf(lognorms).any() or np.isnan(lognorms).any():
        k = int(np.argwhere(~(lognorms < np.inf))[0][1]) + 1
        raise NumericalError(f"matrix product overflowed at depth {k}")
    return lognorms, logradii


def jsr_estimate(
    sys: SystemParams,
    dist: InputDistribution,
    depth_max: int = DEFAULT_DEPTH,
    samples: int = DEFAULT_SAMPLES,
    rng: SeedLike = 0,
) -> float:
    """Sampled lower estimate of the joint spectral radius of {u o A}:
    the running maximum of rho(M_1 ... M_k)^(1/k) over all sampled
    sequences and depths k = 1..depth_max.  Nondecreasing in both
    depth_max and samples."""
    _, logradii = _sampled_scan(sys, dist, depth_max, samples, rng)
    k = np.arange(1, depth_max + 1)
    with np.errstate(invalid="ignore"):
        est = np.exp(logradii / k).max()
    return float(est)


def norm_growth(
    sys: SystemParams,
    dist: InputDistribution,
    depth_max: int = DEFAULT_DEPTH,
    samples: int = DEFAULT_SAMPLES,
    rng: SeedLike = 0,
) -> np.ndarray:
    """Per-depth sampled norm extremes max_sample ||M_1 ... M_k||^(1/k),
    the heuristic upper companion of ``jsr_estimate`` (entry k-1 is depth
    k)."""
    lognorms, _ = _sampled_scan(sys, dist, depth_max, samples, rng)
    k = np.arange(1, depth_max + 1)
    return np.asarray(np.exp(lognorms.max(axis=0) / k))


def phi_estimate(
    sys: SystemParams,
    dist: InputDistribution,
    rho: float,
    depth_max: int = DEFAULT_DEPTH,
    samples: int = DEFAULT_SAMPLES,
    rng: SeedLike = 0,
) -> float:
    """Sampled lower estimate of the transient constant
    sup_k ||M_1 ... M_k|| / rho^k over k = 1..depth_max."""
    if not 0 < rho < 1:
        raise ConfigError("rho must lie in (0, 1)")
    lognorms, _ = _sampled_scan(sys, dist, depth_max, samples, rng)
    k = np.arange(1, depth_max + 1)
    return float(np.exp(lognorms - k * math.log(rho)).max())


def certify_uniform_stability(
    sys: SystemParams,
    dist: InputDistribution,
    rho: float,
    kappa: float,
    depth_max: int = DEFAULT_DEPTH,
    samples: int = DEFAULT_SAMPLES,
    rng: SeedLike = 0,
) -> StabilityReport:
    """Monte-Carlo check of the (kappa, rho) contraction pair.

    kappa_hat includes the empty product, so it is always >= 1.  A True
    certificate only says no sampled sequence violated the bounds.
    """
    if not 0 < rho < 1:
        raise ConfigError("rho must lie in (0, 1)")
    if kappa < 1:
        raise ConfigError("kappa must be >= 1")
    lognorms, logradii = _sampled_scan(sys, dist, depth_max, samples, rng)
    k = np.arange(1, depth_max + 1)
    with np.errstate(invalid="ignore"):
        rho_hat = float(np.exp(logradii / k).max())
    kappa_hat = max(1.0, float(np.exp(lognorms - k * math.log(rho)).max()))
    return StabilityReport(
        rho_hat=rho_hat,
        kappa_hat=kappa_hat,
        rho=rho,
        kappa=kappa,
        depth=depth_max,
        samples=samples,
        certified=bool(rho_hat < rho and kappa_hat <= kappa),
    )


def f_norm_check(
    sys: SystemParams, window: np.ndarray, kappa: float, rho: float
) -> bool:
    """Check ||F||_op <= 1 + kappa ||C||_op / (1 - rho) for one input
    window (valid when (kappa, rho) certify the window's input set)."""
    if not 0 < rho < 1:
        raise ConfigError("rho must lie in (0, 1)")
    F = build_F(sys, window)
    bound = 1.0 + kappa * np.linalg.norm(sys.C, 2) / (1.0 - rho)
    return bool(np.linalg.norm(F, 2) <= bound)
