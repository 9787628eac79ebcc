import numpy as np
import pytest

from bldsid import (
    ConfigError,
    Dims,
    FeatureConfig,
    MarkovParams,
    RankDeficiencyError,
    Realization,
    SystemParams,
    block_hankel,
    extract_mixed,
    extract_powers,
    ho_kalman,
    make_rng,
    markov_mismatch,
    random_system,
    true_markov,
)


def scalar_system(a0, a1, b, c, d):
    return SystemParams(
        A=(np.array([[a0]]), np.array([[a1]])),
        B=np.array([[b]]),
        C=np.array([[c]]),
        D=np.array([[d]]),
        dims=Dims(1, 1, 1),
    )


class TestTrueMarkov:
    def test_base_case_L1(self):
        sys_ = random_system(Dims(3, 2, 2), 0.5, 0.3, seed=0)
        G = true_markov(sys_, 1)
        assert np.array_equal(G.block(0), sys_.D)
        assert np.allclose(G.block(1), sys_.C @ sys_.B, rtol=1e-14)

    def test_zero_b(self):
        sys_ = random_system(Dims(3, 2, 2), 0.5, 0.3, seed=1)
        sys_ = SystemParams(A=sys_.A, B=np.zeros((3, 2)), C=sys_.C, D=sys_.D, dims=sys_.dims)
        G = true_markov(sys_, 3)
        assert np.array_equal(G.block(0), sys_.D)
        assert np.array_equal(G.G[:, 2:], np.zeros_like(G.G[:, 2:]))

    def test_scalar_hand_enumeration(self):
        a0, a1, b, c, d = 0.5, 0.25, 2.0, 3.0, 0.125
        G = true_markov(scalar_system(a0, a1, b, c, d), 3)
        expected = [
            d,
            c * b,
            c * a0 * b,
            c * a1 * b,
            c * a0 * a0 * b,
            c * a0 * a1 * b,
            c * a1 * a0 * b,
            c * a1 * a1 * b,
        ]
        assert np.allclose(G.G[0], expected, rtol=1e-14)

    def test_overflow_guard(self):
        sys_ = random_system(Dims(2, 2, 2), 0.5, 0.3, seed=2)
        with pytest.raises(ConfigError):
            true_markov(sys_, 40)


class TestExtractPowers:
    def test_matches_direct_products(self):
        sys_ = random_system(Dims(3, 2, 2), 0.5, 0.3, seed=3)
        G = true_markov(sys_, 4)
        for k in range(3):
            blocks = extract_powers(G, k)
            assert np.allclose(blocks[0], sys_.C @ sys_.B, rtol=1e-13)
            acc = sys_.C
            for ell in range(1, 4):
                acc = acc @ sys_.A[k]
                assert np.allclose(blocks[ell], acc @ sys_.B, rtol=1e-13)

    def test_scalar_drift_powers(self):
        a0, a1, b, c, d = 0.5, 0.25, 2.0, 3.0, 0.125
        G = true_markov(scalar_system(a0, a1, b, c, d), 3)
        blocks = extract_powers(G, 0)
        assert np.allclose(
            [blk[0, 0] for blk in blocks], [c * b, c * a0 * b, c * a0**2 * b], rtol=1e-14
        )

    def test_zero_b(self):
        sys_ = random_system(Dims(2, 1, 1), 0.5, 0.3, seed=4)
        sys_ = SystemParams(A=sys_.A, B=np.zeros((2, 1)), C=sys_.C, D=sys_.D, dims=sys_.dims)
        for blk in extract_powers(true_markov(sys_, 3), 1):
            assert np.array_equal(blk, np.zeros((1, 1)))

    def test_k_out_of_range(self):
        sys_ = random_system(Dims(2, 1, 1), 0.5, 0.3, seed=5)
        with pytest.raises(ConfigError):
            extract_powers(true_markov(sys_, 3), 2)


class TestExtractMixed:
    def test_degenerate_equals_power_entry(self):
        sys_ = random_system(Dims(3, 2, 2), 0.5, 0.3, seed=6)
        G = true_markov(sys_, 4)
        for k in range(3):
            assert np.array_equal(extract_mixed(G, k, 0, 0), extract_powers(G, k)[1])

    def test_matches_direct_product(self):
        sys_ = random_system(Dims(3, 2, 2), 0.5, 0.3, seed=7)
        G = true_markov(sys_, 4)
        expected = sys_.C @ sys_.A[0] @ sys_.A[2] @ sys_.A[0] @ sys_.B
        assert np.allclose(extract_mixed(G, 2, 1, 1), expected, rtol=1e-13)

    def test_scalar_value(self):
        a0, a1, b, c, d = 0.5, 0.25, 2.0, 3.0, 0.125
        G = true_markov(scalar_system(a0, a1, b, c, d), 4)
        assert extract_mixed(G, 1, 1, 1)[0, 0] == pytest.approx(
            c * a0 * a1 * a0 * b, rel=1e-14
        )

    def test_degree_budget(self):
        sys_ = random_system(Dims(2, 1, 1), 0.5, 0.3, seed=8)
        with pytest.raises(ConfigError):
            extract_mixed(true_markov(sys_, 3), 1, 1, 1)  # needs L-1 >= 3


class TestBlockHankel:
    def test_antidiagonal_structure(self):
        blocks = [np.full((2, 2), float(d)) for d in range(5)]
        H = block_hankel(blocks, 3, 3)
        for i in range(3):
            for j in range(3):
                assert np.array_equal(H.block(i, j), blocks[i + j])

    def test_needs_enough_degrees(self):
        with pytest.raises(ConfigError):
            block_hankel([np.zeros((1, 1))], 2, 2)


class TestHoKalman:
    def test_round_trip_exact(self):
        for seed, n, p in [(0, 2, 1), (1, 2, 2), (2, 3, 2)]:
            sys_ = random_system(Dims(n, p, 2), 0.6, 0.3, seed=(200, seed))
            L = 2 * n + 2
            G = true_markov(sys_, L)
            realization = ho_kalman(G, n=n)
            assert markov_mismatch(G, realization, L) <= 1e-6

    def test_scalar_closed_form(self):
        # for n = 1 a similarity transform is scalar conjugation, so the
        # transition entries themselves are invariant
        a0, a1, b, c, d = 0.5, -0.25, 2.0, 3.0, 0.125
        sys_ = scalar_system(a0, a1, b, c, d)
        realization = ho_kalman(true_markov(sys_, 4), n=1)
        assert realization.A[0][0, 0] == pytest.approx(a0, rel=1e-10)
        assert realization.A[1][0, 0] == pytest.approx(a1, rel=1e-10)
        assert realization.C[0, 0] * realization.B[0, 0] == pytest.approx(c * b, rel=1e-10)

    def test_d_copied_exactly(self):
        sys_ = random_system(Dims(2, 2, 2), 0.5, 0.3, seed=9)
        G = true_markov(sys_, 6)
        assert np.array_equal(ho_kalman(G, n=2).D, sys_.D)

    def test_eigenvalues_similarity_invariant(self):
        sys_ = random_system(Dims(3, 2, 2), 0.6, 0.3, seed=10)
        realization = ho_kalman(true_markov(sys_, 8), n=3)
        for k in range(3):
            got = np.sort_complex(np.linalg.eigvals(realization.A[k]))
            want = np.sort_complex(np.linalg.eigvals(sys_.A[k]))
            assert np.allclose(got, want, atol=1e-8)

    def test_per_k_mode_eigenvalues(self):
        sys_ = random_system(Dims(2, 2, 2), 0.6, 0.3, seed=11)
        realization = ho_kalman(true_markov(sys_, 6), n=2, mode="per_k")
        for k in range(3):
            got = np.sort_complex(np.linalg.eigvals(realization.A[k]))
            want = np.sort_complex(np.linalg.eigvals(sys_.A[k]))
            assert np.allclose(got, want, atol=1e-8)

    def test_rank_deficiency_reports_observed_rank(self):
        sys_ = random_system(Dims(2, 1, 1), 0.5, 0.3, seed=12)
        G = true_markov(sys_, 8)
        with pytest.raises(RankDeficiencyError) as err:
            ho_kalman(G, n=3)
        assert err.value.observed == 2 and err.value.requested == 3

    def test_thin_gap_warns(self):
        sys_ = random_system(Dims(2, 1, 1), 0.5, 0.3, seed=13)
        G = true_markov(sys_, 8)
        noisy = MarkovParams(
            G=G.G + 0.3 * make_rng(14).standard_normal(G.G.shape), cfg=G.cfg
        )
        with pytest.warns(UserWarning, match="singular-value gap"):
            ho_kalman(noisy, n=2, n1=3, n2=3)

    def test_degree_budget_enforced(self):
        sys_ = random_system(Dims(3, 1, 1), 0.5, 0.3, seed=15)
        with pytest.raises(ConfigError):
            ho_kalman(true_markov(sys_, 5), n=3)  # needs L >= 6

    def test_perturbation_slope(self):
        # O(eta) sensitivity: log-log slope of mismatch vs perturbation size
        sys_ = random_system(Dims(2, 2, 2), 0.6, 0.3, seed=16)
        L = 6
        G = true_markov(sys_, L)
        etas = [1e-8, 1e-7, 1e-6]
        mismatches = []
        for eta in etas:
            noise = make_rng(17).standard_normal(G.G.shape)
            noise *= eta / np.linalg.norm(noise, 2)
            realization = ho_kalman(MarkovParams(G=G.G + noise, cfg=G.cfg), n=2)
            mismatches.append(markov_mismatch(G, realization, L))
        slope = np.polyfit(np.log(etas), np.log(mismatches), 1)[0]
        assert slope <= 10.0
        assert mismatches[-1] > mismatches[0]

    def test_realization_json_schema(self):
        sys_ = random_system(Dims(2, 2, 2), 0.5, 0.3, seed=18)
        realization = ho_kalman(true_markov(sys_, 6), n=2)
        back = Realization.from_json(realization.to_json())
        for got, want in zip(back.A, realization.A):
            assert np.allclose(got, want)
        # interoperable with the system schema
        assert SystemParams.from_json(realization.to_json()).dims == sys_.dims
