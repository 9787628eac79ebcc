import math

import numpy as np
import pytest

from bldsid import (
    ConfigError,
    Dims,
    FeatureConfig,
    InputDistribution,
    MarkovParams,
    NoiseConfig,
    SystemParams,
    draw_inputs,
    error_decomposition,
    estimation_error,
    feature_matrix,
    fit_markov,
    gram_min_eig,
    lse,
    lse_svd,
    make_rng,
    noise_feature_matrix,
    pe_sample_threshold,
    random_system,
    simulate,
    true_markov,
    truncation_bias_matrix,
)
from bldsid.features import build_F


def power_iteration_opnorm(M, iters=2000, seed=0):
    """Independent oracle: largest singular value via power iteration on
    M^T M (symmetric PSD, so plain power iteration converges)."""
    G = M.T @ M
    v = np.random.default_rng(seed).standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = G @ v
        lam = np.linalg.norm(w)
        if lam == 0.0:
            return 0.0
        v = w / lam
    return math.sqrt(lam)


class TestLSE:
    def test_exact_recovery_noiseless(self):
        rng = make_rng(0)
        cfg = FeatureConfig(L=2, p=2)
        U = rng.standard_normal((60, cfg.d))
        G = rng.standard_normal((2, cfg.d))
        est = lse(U, U @ G.T, cfg)
        assert np.max(np.abs(est.G - G)) < 1e-8

    def test_underdetermined_min_norm(self):
        rng = make_rng(1)
        cfg = FeatureConfig(L=2, p=2)  # d = 10
        U = rng.standard_normal((6, cfg.d))
        G = rng.standard_normal((2, cfg.d))
        Y = U @ G.T
        est = lse(U, Y, cfg).G
        # interpolates
        assert np.max(np.abs(est @ U.T - Y.T)) < 1e-8
        # minimum Frobenius norm among interpolants est + row-null-space shifts
        _, _, Vh = np.linalg.svd(U)
        null = Vh[6:]
        for i in range(null.shape[0]):
            delta = np.outer(rng.standard_normal(2), null[i])
            assert np.linalg.norm(est) <= np.linalg.norm(est + delta) + 1e-12
        # row-space projection leaves the estimate unchanged
        proj = np.linalg.pinv(U) @ U
        assert np.max(np.abs(est @ proj - est)) < 1e-8

    def test_scalar_normal_equations_oracle(self):
        # d = 2 design solved by explicit 2x2 inversion
        U = np.array([[1.0, 2.0], [0.5, -1.0], [2.0, 0.25]])
        Y = np.array([[1.0], [2.0], [3.0]])
        gram = U.T @ U
        inv = np.array([[gram[1, 1], -gram[0, 1]], [-gram[1, 0], gram[0, 0]]]) / (
            gram[0, 0] * gram[1, 1] - gram[0, 1] * gram[1, 0]
        )
        oracle = (Y.T @ U) @ inv
        est = lse(U, Y, FeatureConfig(L=1, p=1))
        assert np.allclose(est.G, oracle, atol=1e-12)

    def test_zero_design_warns_and_zeros(self):
        cfg = FeatureConfig(L=1, p=1)
        with pytest.warns(UserWarning):
            est = lse(np.zeros((5, 2)), np.ones((5, 1)), cfg)
        assert np.array_equal(est.G, np.zeros((1, 2)))

    def test_row_count_mismatch(self):
        with pytest.raises(ConfigError):
            lse_svd(np.zeros((5, 2)), np.zeros((4, 1)))

    def test_matches_paper_form_when_nonsingular(self):
        # (sum y u^T)(sum u u^T)^+ equals the thin-SVD route
        rng = make_rng(2)
        U = rng.standard_normal((40, 6))
        Y = rng.standard_normal((40, 2))
        direct = (Y.T @ U) @ np.linalg.pinv(U.T @ U)
        G, _ = lse_svd(U, Y)
        assert np.allclose(G, direct, atol=1e-10)


class TestGramMinEig:
    def test_single_row_rank_deficient(self):
        report = gram_min_eig(np.ones((1, 3)))
        assert report.lambda_min == pytest.approx(0.0, abs=1e-8)
        assert not report.satisfied

    def test_scaled_orthonormal_rows(self):
        report = gram_min_eig(2.0 * np.eye(4))
        assert report.lambda_min == pytest.approx(4.0, rel=1e-12)
        assert report.threshold == 1.0
        assert report.satisfied

    def test_threshold_is_quarter_rows(self):
        U = make_rng(3).standard_normal((20, 3))
        assert gram_min_eig(U).threshold == 5.0

    def test_sphere_inputs_satisfy_at_scaled_threshold(self):
        # excitation at 4x the desk-scale sample threshold, delta = 0.1
        p, L = 1, 2
        cfg = FeatureConfig(L=L, p=p)
        T = int(4 * pe_sample_threshold(p, L, gamma=1.0, delta=0.1))
        hits = 0
        for seed in range(10):
            u = draw_inputs(InputDistribution.SPHERE, p, T + 1, make_rng((30, seed)))
            if gram_min_eig(feature_matrix(u, cfg)).satisfied:
                hits += 1
        assert hits >= 9


class TestEstimationError:
    def test_identical(self):
        M = make_rng(4).standard_normal((3, 5))
        assert estimation_error(M, M) == 0.0

    def test_rank_one(self):
        a = np.array([3.0, 4.0])
        b = np.array([1.0, 2.0, 2.0])
        assert estimation_error(np.outer(a, b), np.zeros((2, 3))) == pytest.approx(
            np.linalg.norm(a) * np.linalg.norm(b), rel=1e-12
        )

    def test_matches_power_iteration_oracle(self):
        A = make_rng(5).standard_normal((4, 7))
        B = make_rng(6).standard_normal((4, 7))
        assert estimation_error(A, B) == pytest.approx(
            power_iteration_opnorm(A - B), abs=1e-8
        )

    def test_shape_mismatch(self):
        with pytest.raises(ConfigError):
            estimation_error(np.zeros((2, 3)), np.zeros((3, 2)))


def _run(seed, n=2, p=2, m=2, L=2, T=60, sigma=0.01, rho0=0.5, rhok=0.3):
    sys_ = random_system(Dims(n, p, m), rho0, rhok, seed=(40, seed))
    inputs = draw_inputs(InputDistribution.SPHERE, p, T + 1, make_rng((41, seed)))
    traj = simulate(sys_, inputs, NoiseConfig(sigma), make_rng((42, seed)))
    cfg = FeatureConfig(L=L, p=p)
    return sys_, traj, cfg, true_markov(sys_, L), fit_markov(traj, cfg)


class TestErrorDecomposition:
    def test_zero_b_recovers_exactly(self):
        # with B = 0 the state stays at zero: no multiplier dependence on x,
        # no truncation bias, exact recovery from a nonsingular Gram
        sys_ = random_system(Dims(2, 2, 2), 0.5, 0.3, seed=50)
        sys_ = SystemParams(
            A=sys_.A, B=np.zeros((2, 2)), C=sys_.C, D=sys_.D, dims=sys_.dims
        )
        inputs = draw_inputs(InputDistribution.SPHERE, 2, 61, make_rng(51))
        traj = simulate(sys_, inputs, NoiseConfig(0.0), make_rng(52))
        cfg = FeatureConfig(L=2, p=2)
        G_true = true_markov(sys_, 2)
        G_hat = fit_markov(traj, cfg)
        dec = error_decomposition(sys_, traj, cfg, G_true, G_hat)
        assert not dec.gram_singular
        assert dec.multiplier == pytest.approx(0.0, abs=1e-12)
        assert dec.truncation == pytest.approx(0.0, abs=1e-12)
        assert dec.actual < 1e-8

    def test_truncation_triangle_sanity(self):
        sys_, traj, cfg, G_true, G_hat = _run(0)
        dec = error_decomposition(sys_, traj, cfg, G_true, G_hat)
        U = feature_matrix(traj, cfg)
        eps = truncation_bias_matrix(sys_, traj, cfg.L)
        loose = sum(
            np.linalg.norm(U[i]) * np.linalg.norm(eps[i]) for i in range(U.shape[0])
        )
        assert dec.truncation <= loose + 1e-9

    def test_inequality_over_seeds(self):
        for seed in range(30):
            sys_, traj, cfg, G_true, G_hat = _run(seed)
            dec = error_decomposition(sys_, traj, cfg, G_true, G_hat)
            if dec.gram_singular:
                continue
            assert dec.actual <= dec.bound + 1e-8

    def test_singular_gram_flagged(self):
        sys_, traj, cfg, G_true, G_hat = _run(1, T=3, L=2)  # 2 rows < d
        dec = error_decomposition(sys_, traj, cfg, G_true, G_hat)
        assert dec.gram_singular
        assert dec.excitation == math.inf

    def test_error_identity_nonsingular(self):
        # G_hat - G equals (sum (F w~ + eps) u~^T)(sum u~ u~^T)^{-1}
        sys_, traj, cfg, G_true, G_hat = _run(2, T=120)
        L = cfg.L
        U = feature_matrix(traj, cfg)
        wt = noise_feature_matrix(traj, L)
        fw = np.stack(
            [
                build_F(sys_, traj.u[t - L + 1 : t]) @ wt[i]
                for i, t in enumerate(range(L, traj.T + 1))
            ]
        )
        eps = truncation_bias_matrix(sys_, traj, L)
        expected = (fw + eps).T @ U @ np.linalg.inv(U.T @ U)
        assert np.max(np.abs((G_hat.G - G_true.G) - expected)) < 1e-8

    def test_csv_row_format(self):
        sys_, traj, cfg, G_true, G_hat = _run(3)
        dec = error_decomposition(sys_, traj, cfg, G_true, G_hat)
        row = dec.csv_row(seed=3, T=traj.T, L=cfg.L)
        assert row[0] == 3 and row[1] == traj.T and row[2] == cfg.L
        assert all(isinstance(v, str) for v in row[3:])


class TestErrorDecay:
    def test_median_error_nonincreasing_in_T(self):
        cfg = FeatureConfig(L=2, p=2)
        sys_ = random_system(Dims(3, 2, 2), 0.4, 0.2, seed=60)
        G_true = true_markov(sys_, 2)
        medians = []
        for T in (250, 1000, 4000):
            errs = []
            for seed in range(6):
                u = draw_inputs(InputDistribution.SPHERE, 2, T + 1, make_rng((61, T, seed)))
                traj = simulate(sys_, u, NoiseConfig(0.01), make_rng((62, T, seed)))
                errs.append(estimation_error(fit_markov(traj, cfg), G_true))
            medians.append(float(np.median(errs)))
        assert medians[1] <= medians[0] * 1.2
        assert medians[2] <= medians[1] * 1.2


class TestMarkovParams:
    def test_json_round_trip(self):
        sys_ = random_system(Dims(2, 2, 2), 0.5, 0.3, seed=70)
        G = true_markov(sys_, 3)
        back = MarkovParams.from_json(G.to_json())
        assert np.array_equal(back.G, G.G)
        assert back.cfg == G.cfg

    def test_block_views(self):
        sys_ = random_system(Dims(2, 2, 2), 0.5, 0.3, seed=71)
        G = true_markov(sys_, 2)
        assert np.array_equal(G.block(0), sys_.D)
        assert np.allclose(G.block(1), sys_.C @ sys_.B, rtol=1e-14)

    def test_dimension_validation(self):
        with pytest.raises(ConfigError):
            MarkovParams(G=np.zeros((2, 5)), cfg=FeatureConfig(L=2, p=2))


class TestPESampleThreshold:
    def test_hand_value(self):
        # p=1, L=2, gamma=1, delta=0.1:
        # 2 + 2*3*27*(log(30) + 8*log(80))
        expected = 2 + 162 * (math.log(30.0) + 8 * math.log(80.0))
        assert pe_sample_threshold(1, 2, 1.0, 0.1) == pytest.approx(expected, rel=1e-12)

    def test_monotone(self):
        assert pe_sample_threshold(2, 3, 3.0, 0.1) > pe_sample_threshold(2, 2, 3.0, 0.1)
        assert pe_sample_threshold(1, 2, 1.0, 0.01) > pe_sample_threshold(1, 2, 1.0, 0.1)

    def test_delta_range(self):
        with pytest.raises(ConfigError):
            pe_sample_threshold(1, 2, 1.0, 0.0)
