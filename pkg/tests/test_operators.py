import numpy as np
import pytest

from gppa.operators import (
    AffineOperatorSpec,
    RotationOperatorSpec,
    check_firm_nonexpansive,
    make_affine_operator,
    make_rotation_operator,
    representation_decompose,
    resolvent,
)


def rotation_forward_matrix(a):
    return np.array([[0.0, 1.0 / a], [-1.0 / a, 0.0]])


def dense_resolvent(G, h, c, z):
    # independent oracle: explicit dense inverse of I + cG
    n = G.shape[0]
    return np.linalg.inv(np.eye(n) + c * G) @ (np.asarray(z, float) - c * h)


class TestRotationOperator:
    def test_resolvent_matches_dense_inverse_oracle(self):
        op = make_rotation_operator(RotationOperatorSpec(a=1.0))
        got = resolvent(op, 1.0, [1.0, 0.0])
        oracle = np.linalg.inv(np.eye(2) + rotation_forward_matrix(1.0)) @ [1.0, 0.0]
        assert np.allclose(got, [0.5, 0.5], atol=1e-15)
        assert np.allclose(got, oracle, atol=1e-15)

    def test_zero_is_fixed_point(self):
        for a in (0.3, 1.0, 7.5):
            op = make_rotation_operator(RotationOperatorSpec(a=a))
            for c in (0.1, 1.0, 10.0):
                assert np.array_equal(resolvent(op, c, [0.0, 0.0]), [0.0, 0.0])

    def test_contraction_coefficient_attained(self):
        # ||J(z)|| / ||z|| equals a / sqrt(a^2 + c^2) exactly on this operator
        op = make_rotation_operator(RotationOperatorSpec(a=1.0))
        jz = resolvent(op, 1.0, [1.0, 0.0])
        assert abs(np.linalg.norm(jz) - 1.0 / np.sqrt(2.0)) < 1e-15

    def test_tightness_on_random_points(self):
        rng = np.random.default_rng(0)
        for a, c in ((1.0, 1.0), (0.4, 2.0), (5.0, 0.7)):
            op = make_rotation_operator(RotationOperatorSpec(a=a))
            coeff = a / np.sqrt(a * a + c * c)
            for _ in range(1000):
                z = rng.standard_normal(2) * 10.0
                ratio = np.linalg.norm(resolvent(op, c, z)) / np.linalg.norm(z)
                assert abs(ratio - coeff) <= 1e-12 * coeff

    def test_skew_inner_product_is_exactly_zero(self):
        # division by a power-of-two a is exact, so the cancellation is too
        rng = np.random.default_rng(1)
        for a in (0.5, 1.0, 2.0):
            op = make_rotation_operator(RotationOperatorSpec(a=a))
            for _ in range(200):
                z, zp = rng.standard_normal(2), rng.standard_normal(2)
                d = z - zp
                td = op.forward(z) - op.forward(zp)
                # plain scalar sum: BLAS dot may fuse multiplies and spoil
                # the exact cancellation
                assert td[0] * d[0] + td[1] * d[1] == 0.0

    def test_skew_inner_product_vanishes_for_general_a(self):
        rng = np.random.default_rng(21)
        op = make_rotation_operator(RotationOperatorSpec(a=2.7))
        for _ in range(200):
            z, zp = rng.standard_normal(2) * 10, rng.standard_normal(2) * 10
            d = z - zp
            td = op.forward(z) - op.forward(zp)
            assert abs(td @ d) <= 1e-14 * (np.linalg.norm(td) * np.linalg.norm(d) + 1)

    def test_not_strongly_monotone_but_modulus_declared(self):
        op = make_rotation_operator(RotationOperatorSpec(a=3.0))
        assert op.inverse_lipschitz_modulus == 3.0
        assert np.array_equal(op.known_zero, [0.0, 0.0])

    def test_invalid_parameter_rejected(self):
        with pytest.raises(ValueError):
            RotationOperatorSpec(a=0.0)
        with pytest.raises(ValueError):
            RotationOperatorSpec(a=-1.0)
        with pytest.raises(ValueError):
            RotationOperatorSpec(a=1.0, dim=3)


class TestAffineOperator:
    def test_identity_halves_input(self):
        op = make_affine_operator(AffineOperatorSpec(G=np.eye(3), h=np.zeros(3)))
        z = np.array([2.0, -4.0, 6.0])
        assert np.allclose(resolvent(op, 1.0, z), z / 2.0, atol=1e-15)

    def test_reproduces_rotation_resolvent(self):
        a = 1.7
        rot = make_rotation_operator(RotationOperatorSpec(a=a))
        aff = make_affine_operator(
            AffineOperatorSpec(G=rotation_forward_matrix(a), h=np.zeros(2))
        )
        rng = np.random.default_rng(2)
        for _ in range(100):
            z = rng.standard_normal(2) * 5.0
            c = rng.uniform(0.1, 4.0)
            assert np.allclose(
                resolvent(rot, c, z), resolvent(aff, c, z), atol=1e-12, rtol=0
            )

    def test_known_zero_and_fixed_point(self):
        # G z = -h solved by hand: 2 z = 2  =>  z = 1
        op = make_affine_operator(
            AffineOperatorSpec(G=np.array([[2.0]]), h=np.array([-2.0]))
        )
        assert np.allclose(op.known_zero, [1.0], atol=1e-15)
        assert np.allclose(resolvent(op, 0.5, [1.0]), [1.0], atol=1e-15)

    def test_inverse_lipschitz_modulus_from_smallest_singular_value(self):
        op = make_affine_operator(
            AffineOperatorSpec(G=np.diag([2.0, 4.0]), h=np.zeros(2))
        )
        assert abs(op.inverse_lipschitz_modulus - 0.5) < 1e-15

    def test_singular_monotone_operator_has_no_zero(self):
        op = make_affine_operator(
            AffineOperatorSpec(G=np.diag([1.0, 0.0]), h=np.array([1.0, 0.0]))
        )
        assert op.known_zero is None
        assert op.inverse_lipschitz_modulus is None

    def test_matches_dense_inverse_oracle_up_to_dim_8(self):
        rng = np.random.default_rng(3)
        for n in range(1, 9):
            B = rng.standard_normal((n, n))
            skew = rng.standard_normal((n, n))
            G = B.T @ B / n + (skew - skew.T)  # PSD symmetric part plus skew
            h = rng.standard_normal(n)
            op = make_affine_operator(AffineOperatorSpec(G=G, h=h))
            for c in (0.3, 1.0, 2.5):
                z = rng.standard_normal(n)
                assert np.allclose(
                    resolvent(op, c, z), dense_resolvent(G, h, c, z),
                    atol=1e-10, rtol=0,
                )

    def test_non_monotone_matrix_rejected_eagerly(self):
        with pytest.raises(ValueError, match="monotone"):
            AffineOperatorSpec(G=np.diag([-1e-6, 1.0]), h=np.zeros(2))

    def test_nonsquare_and_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            AffineOperatorSpec(G=np.ones((2, 3)), h=np.zeros(2))
        with pytest.raises(ValueError):
            AffineOperatorSpec(G=np.array([[np.nan]]), h=np.zeros(1))


class TestResolventValidation:
    def test_dimension_mismatch(self):
        op = make_rotation_operator(RotationOperatorSpec(a=1.0))
        with pytest.raises(ValueError):
            resolvent(op, 1.0, [1.0, 0.0, 0.0])

    def test_nonpositive_c(self):
        op = make_rotation_operator(RotationOperatorSpec(a=1.0))
        with pytest.raises(ValueError):
            resolvent(op, 0.0, [1.0, 0.0])
        with pytest.raises(ValueError):
            resolvent(op, -1.0, [1.0, 0.0])

    def test_nan_input_rejected(self):
        op = make_rotation_operator(RotationOperatorSpec(a=1.0))
        with pytest.raises(ValueError):
            resolvent(op, 1.0, [np.nan, 0.0])

    def test_known_zero_is_fixed_by_every_resolvent(self):
        ops = [
            make_rotation_operator(RotationOperatorSpec(a=0.8)),
            make_affine_operator(
                AffineOperatorSpec(G=np.array([[2.0]]), h=np.array([-2.0]))
            ),
        ]
        for op in ops:
            for c in (0.01, 1.0, 50.0):
                fixed = resolvent(op, c, op.known_zero)
                assert np.allclose(fixed, op.known_zero, atol=1e-12)


class TestRepresentationDecompose:
    def test_rotation_decomposition_by_hand(self):
        op = make_rotation_operator(RotationOperatorSpec(a=1.0))
        x, y = representation_decompose(op, 1.0, [1.0, 0.0])
        assert np.allclose(x, [0.5, 0.5], atol=1e-15)
        assert np.allclose(y, [0.5, -0.5], atol=1e-15)
        # y must be T(x) = (x2, -x1)
        assert np.allclose(y, op.forward(x), atol=1e-15)

    def test_zero_decomposes_trivially(self):
        op = make_rotation_operator(RotationOperatorSpec(a=1.0))
        x, y = representation_decompose(op, 2.0, op.known_zero)
        assert np.allclose(x, 0.0, atol=1e-15)
        assert np.allclose(y, 0.0, atol=1e-15)

    def test_affine_decomposition_by_hand(self):
        # (I + G) x = z with G = diag(2): 3x = 3 => x = 1, y = (3-1)/1 = 2 = Gx
        op = make_affine_operator(
            AffineOperatorSpec(G=np.array([[2.0]]), h=np.array([0.0]))
        )
        x, y = representation_decompose(op, 1.0, [3.0])
        assert np.allclose(x, [1.0], atol=1e-14)
        assert np.allclose(y, [2.0], atol=1e-14)

    def test_reconstruction_identity(self):
        rng = np.random.default_rng(4)
        ops = [
            make_rotation_operator(RotationOperatorSpec(a=2.0)),
            make_affine_operator(
                AffineOperatorSpec(G=np.diag([1.0, 3.0]), h=np.array([0.5, -1.0]))
            ),
        ]
        for op in ops:
            for _ in range(250):
                z = rng.standard_normal(op.dim) * 10.0
                c = rng.uniform(0.05, 5.0)
                x, y = representation_decompose(op, c, z)
                assert np.linalg.norm(x + c * y - z) <= 1e-12 * (1.0 + np.linalg.norm(z))
                if op.forward is not None:
                    assert np.linalg.norm(y - op.forward(x)) <= 1e-9 * (
                        1.0 + np.linalg.norm(y)
                    )


class TestFirmNonexpansiveness:
    def test_rotation_passes_at_many_c(self):
        op = make_rotation_operator(RotationOperatorSpec(a=1.3))
        for c in (0.2, 1.0, 8.0):
            report = check_firm_nonexpansive(op, c, sample_count=500, seed=10)
            assert report.passed
            assert report.worst_inner_margin >= -1e-10
            assert report.worst_norm_margin >= -1e-10

    def test_affine_psd_operator_passes_thousand_samples(self):
        rng = np.random.default_rng(11)
        B = rng.standard_normal((4, 4))
        op = make_affine_operator(
            AffineOperatorSpec(G=B.T @ B / 4 + np.eye(4), h=rng.standard_normal(4))
        )
        report = check_firm_nonexpansive(op, 1.0, sample_count=1000, seed=12)
        assert report.passed

    def test_equal_points_give_exact_zeros(self):
        op = make_rotation_operator(RotationOperatorSpec(a=1.0))
        z = np.array([3.0, -2.0])
        jz = resolvent(op, 1.0, z)
        dj = jz - jz
        dr = (z - jz) - (z - jz)
        assert dj @ dr == 0.0
        assert (z - z) @ (z - z) - dj @ dj - dr @ dr == 0.0

    def test_nonexpansiveness_of_sampled_pairs(self):
        rng = np.random.default_rng(13)
        op = make_rotation_operator(RotationOperatorSpec(a=0.6))
        for _ in range(1000):
            z, zp = rng.standard_normal(2) * 10, rng.standard_normal(2) * 10
            dj = np.linalg.norm(resolvent(op, 1.5, z) - resolvent(op, 1.5, zp))
            assert dj <= np.linalg.norm(z - zp) + 1e-10

    def test_report_records_seed_and_sample_count(self):
        op = make_rotation_operator(RotationOperatorSpec(a=1.0))
        report = check_firm_nonexpansive(op, 1.0, sample_count=37, seed=99)
        assert report.samples == 37
        assert report.seed == 99

    def test_invalid_sample_count(self):
        op = make_rotation_operator(RotationOperatorSpec(a=1.0))
        with pytest.raises(ValueError):
            check_firm_nonexpansive(op, 1.0, sample_count=0, seed=0)
