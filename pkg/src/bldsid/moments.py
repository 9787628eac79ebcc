"""Monte-Carlo checks of the input-distribution hypotheses: isotropy,
vanishing odd moments, and fourth-moment (hypercontractivity) constants."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .features import FeatureConfig, features_from_windows
from .rng import SeedLike, make_rng
from .simulate import InputDistribution, draw_inputs

MAX_FEATURE_DIM = 100  # feature moment checks stay at desk scale


def analytic_gamma(dist: InputDistribution, p: int) -> float:
    """Fourth-to-second-moment ratio bound: 3 for Gaussian, 3/(1+2/p) for
    the sphere of radius sqrt(p)."""
    dist = InputDistribution(dist)
    if dist is InputDistribution.GAUSSIAN:
        return 3.0
    return 3.0 / (1.0 + 2.0 / p)


@dataclass(frozen=True)
class MomentReport:
    gamma_hat: float  # sup over directions of E[(u.v)^4] / E[(u.v)^2]^2
    isotropy_dev: float  # max |E[u u^T] - I| entry
    third_moment_max: float  # max over directions of |E[(u.v)^3]|
    sample_count: int
    direction_count: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "gamma_hat": self.gamma_hat,
                "isotropy_dev": self.isotropy_dev,
                "third_moment_max": self.third_moment_max,
                "sample_count": self.sample_count,
                "direction_count": self.direction_count,
            }
        )


@dataclass(frozen=True)
class FourthMomentReport:
    empirical_max: float  # max over directions of E[(feature . v)^4]
    bound: float  # L (3 v gamma)^(L+1)
    gamma: float
    satisfied: bool
    sample_count: int
    direction_count: int


def _directions(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` uniform unit directions plus the d coordinate axes (axes
    catch axis-aligned worst cases cheaply)."""
    raw = rng.standard_normal((count, d))
    norms = np.linalg.norm(raw, axis=1)
    while (bad := norms == 0.0).any():
        raw[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(raw, axis=1)
    return np.vstack([raw / norms[:, None], np.eye(d)])


def _moment_scan(X: np.ndarray, dirs: np.ndarray) -> tuple[float, float]:
    """(max fourth/second^2 ratio, max |third moment|) over directions."""
    gamma_hat = 0.0
    third_max = 0.0
    for v in dirs:
        z = X @ v
        m2 = float(np.mean(z * z))
        if m2 == 0.0:
            raise ConfigError("degenerate distribution: zero second moment along a direction")
        z2 = z * z
        m4 = float(np.mean(z2 * z2))
        m3 = float(np.mean(z2 * z))
        gamma_hat = max(gamma_hat, m4 / (m2 * m2))
        third_max = max(third_max, abs(m3))
    return gamma_hat, third_max


def empirical_gamma(
    dist: InputDistribution, p: int, N: int, M: int, rng: SeedLike
) -> float:
    """Monte-Carlo hypercontractivity constant, maximized over M sampled
    directions plus the coordinate axes."""
    if N < 10**3:
        raise ConfigError("need at least 10^3 samples")
    if M < 10:
        raise ConfigError("need at least 10 directions")
    rng = make_rng(rng)
    X = draw_inputs(dist, p, N, rng)
    gamma_hat, _ = _moment_scan(X, _directions(p, M, rng))
    return gamma_hat


def isotropy_check(vectors: np.ndarray) -> float:
    """Max absolute entry of (empirical second-moment matrix - identity)."""
    V = np.asarray(vectors, dtype=float)
    if V.ndim != 2 or V.shape[0] == 0:
        raise ConfigError("need a nonempty 2-D sample array")
    second = V.T @ V / V.shape[0]
    return float(np.max(np.abs(second - np.eye(V.shape[1]))))


def moment_report(
    dist: InputDistribution, p: int, N: int, M: int, rng: SeedLike
) -> MomentReport:
    """Full distributional report used by the CLI and the acceptance run."""
    if N < 10**3:
        raise ConfigError("need at least 10^3 samples")
    if M < 10:
        raise ConfigError("need at least 10 directions")
    rng = make_rng(rng)
    X = draw_inputs(dist, p, N, rng)
    dirs = _directions(p, M, rng)
    gamma_hat, third_max = _moment_scan(X, dirs)
    return MomentReport(
        gamma_hat=gamma_hat,
        isotropy_dev=isotropy_check(X),
        third_moment_max=third_max,
        sample_count=N,
        direction_count=dirs.shape[0],
    )


def fourth_moment_feature_check(
    dist: InputDistribution, p: int, L: int, N: int, M: int, rng: SeedLike
) -> FourthMomentReport:
    """Check the covariate fourth-moment bound L (3 v gamma)^(L+1) on
    features built from independent input windows."""
    cfg = FeatureConfig(L=L, p=p)
    if cfg.d > MAX_FEATURE_DIM:
        raise ConfigError(
            f"feature dimension {cfg.d} exceeds the desk-scale cap {MAX_FEATURE_DIM}"
        )
    rng = make_rng(rng)
    windows = draw_inputs(dist, p, N * (L + 1), rng).reshape(N, L + 1, p)
    feats = features_from_windows(windows, cfg)
    dirs = _directions(cfg.d, M, rng)
    worst = 0.0
    for v in dirs:
        z = feats @ v
        z2 = z * z
        worst = max(worst, float(np.mean(z2 * z2)))
    gamma = analytic_gamma(dist, p)
    bound = L * max(3.0, gamma) ** (L + 1)
    return FourthMomentReport(
        empirical_max=worst,
        bound=bound,
        gamma=gamma,
        satisfied=worst <= bound,
        sample_count=N,
        direction_count=dirs.shape[0],
    )
