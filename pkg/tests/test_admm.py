import numpy as np
import pytest

from gppa.admm import (
    SeparableQP,
    dr_multiplier_projection,
    extract_primal_dual,
    make_dr_splitting_operator,
    random_separable_qp,
    run_generalized_admm,
    solve_separable_kkt,
    verify_admm_dr_correspondence,
)
from gppa.operators import check_firm_nonexpansive, resolvent


class TestProblemValidation:
    def test_rejects_indefinite_blocks(self):
        with pytest.raises(ValueError, match="positive definite"):
            SeparableQP(
                Q_f=np.diag([1.0, -0.1]), q_f=np.zeros(2),
                Q_g=np.eye(2), q_g=np.zeros(2),
                M=np.eye(2), lam=1.0,
            )

    def test_rejects_nonpositive_penalty(self):
        with pytest.raises(ValueError, match="lam"):
            SeparableQP(
                Q_f=np.eye(2), q_f=np.zeros(2),
                Q_g=np.eye(2), q_g=np.zeros(2),
                M=np.eye(2), lam=0.0,
            )

    def test_spectrum_constants(self):
        problem = SeparableQP(
            Q_f=np.eye(2), q_f=np.zeros(2),
            Q_g=np.diag([2.0, 5.0]), q_g=np.zeros(2),
            M=np.eye(2), lam=1.0,
        )
        assert abs(problem.alpha - 0.2) < 1e-15
        assert abs(problem.beta - 0.5) < 1e-15


class TestKktReference:
    def test_kkt_satisfies_stationarity_and_feasibility(self):
        problem = random_separable_qp(5, 4, lam=1.0, seed=1)
        x, w, p = solve_separable_kkt(problem)
        assert np.linalg.norm(problem.Q_f @ x + problem.q_f + problem.M.T @ p) <= 1e-10
        assert np.linalg.norm(problem.Q_g @ w + problem.q_g - p) <= 1e-10
        assert np.linalg.norm(problem.M @ x - w) <= 1e-10


class TestRunGeneralizedAdmm:
    def test_stationary_at_kkt_point(self):
        problem = random_separable_qp(5, 4, lam=1.0, seed=2)
        x_star, w_star, p_star = solve_separable_kkt(problem)
        trace = run_generalized_admm(problem, 1.3, (w_star, p_star), max_iter=10)
        scale = 1.0 + np.linalg.norm(p_star)
        for rec in trace.records:
            assert np.linalg.norm(rec.x - x_star) <= 1e-10 * scale
            assert np.linalg.norm(rec.w - w_star) <= 1e-10 * scale
            assert np.linalg.norm(rec.p - p_star) <= 1e-10 * scale

    def test_constraint_residual_converges(self):
        problem = random_separable_qp(5, 4, lam=1.0, seed=3)
        trace = run_generalized_admm(
            problem, 1.0, (np.zeros(4), np.zeros(4)), max_iter=300
        )
        assert trace.records[-1].constraint_residual < 1e-8

    def test_w_step_first_order_condition(self):
        problem = random_separable_qp(5, 4, lam=1.3, seed=4)
        for gamma in (0.5, 1.0, 1.5):
            trace = run_generalized_admm(
                problem, gamma, (np.zeros(4), np.zeros(4)), max_iter=50
            )
            for rec in trace.records:
                target = gamma * (problem.M @ rec.x) + (1.0 - gamma) * rec.w_prev
                grad = (
                    problem.Q_g @ rec.w + problem.q_g
                    - rec.p_prev
                    + problem.lam * (rec.w - target)
                )
                assert np.linalg.norm(grad) <= 1e-10

    def test_gamma_one_reduces_to_classical_admm_bitwise(self):
        problem = random_separable_qp(4, 3, lam=2.0, seed=5)
        w0, p0 = np.zeros(3), np.zeros(3)
        trace = run_generalized_admm(problem, 1.0, (w0, p0), max_iter=30)
        # classical scheme written out independently with the same algebra
        lam, M = problem.lam, problem.M
        K_x = problem.Q_f + lam * (M.T @ M)
        K_w = problem.Q_g + lam * np.eye(3)
        w, p = w0.copy(), p0.copy()
        for rec in trace.records:
            x = np.linalg.solve(K_x, -problem.q_f - M.T @ p + lam * (M.T @ w))
            w_next = np.linalg.solve(K_w, -problem.q_g + p + lam * (M @ x))
            p_next = p + lam * (M @ x - w_next)
            assert np.array_equal(rec.x, x)
            assert np.array_equal(rec.w, w_next)
            assert np.array_equal(rec.p, p_next)
            w, p = w_next, p_next

    def test_early_stop_with_tolerance(self):
        problem = random_separable_qp(5, 4, lam=1.0, seed=6)
        trace = run_generalized_admm(
            problem, 1.0, (np.zeros(4), np.zeros(4)), max_iter=500, tol=1e-9
        )
        assert trace.termination == "converged"
        assert trace.records[-1].constraint_residual <= 1e-9

    def test_gamma_validation(self):
        problem = random_separable_qp(3, 2, lam=1.0, seed=7)
        with pytest.raises(ValueError):
            run_generalized_admm(problem, 2.0, (np.zeros(2), np.zeros(2)))


class TestDrSplittingOperator:
    def test_kkt_state_is_fixed_point(self):
        problem = random_separable_qp(5, 4, lam=1.0, seed=8)
        op = make_dr_splitting_operator(problem)
        z_star = op.known_zero
        assert np.linalg.norm(resolvent(op, 1.0, z_star) - z_star) <= 1e-10 * (
            1.0 + np.linalg.norm(z_star)
        )

    def test_firmly_nonexpansive_thousand_pairs(self):
        problem = random_separable_qp(4, 3, lam=0.7, seed=9)
        op = make_dr_splitting_operator(problem)
        report = check_firm_nonexpansive(op, 1.0, sample_count=1000, seed=10)
        assert report.passed

    def test_contraction_bound_from_g_spectrum(self):
        rng = np.random.default_rng(11)
        for lam in (0.5, 1.0, 2.0):
            problem = random_separable_qp(5, 4, lam=lam, seed=12)
            op = make_dr_splitting_operator(problem)
            bound = problem.g_contraction_bound()
            for _ in range(1000):
                z, zp = rng.standard_normal(4) * 10, rng.standard_normal(4) * 10
                gz = resolvent(op, 1.0, z)
                gzp = resolvent(op, 1.0, zp)
                ratio = np.linalg.norm(gz - gzp) / np.linalg.norm(z - zp)
                assert ratio <= bound + 1e-8

    def test_rejects_nonunit_proximal_parameter(self):
        problem = random_separable_qp(3, 2, lam=1.0, seed=13)
        op = make_dr_splitting_operator(problem)
        with pytest.raises(ValueError, match="c = 1"):
            resolvent(op, 2.0, np.zeros(2))

    def test_multiplier_projection_fixed_at_kkt(self):
        problem = random_separable_qp(5, 4, lam=1.5, seed=14)
        _, w_star, p_star = solve_separable_kkt(problem)
        z_star = p_star + problem.lam * w_star
        proj = dr_multiplier_projection(problem, z_star)
        assert np.linalg.norm(proj - p_star) <= 1e-10 * (1 + np.linalg.norm(p_star))


class TestCorrespondence:
    def test_identities_hold_along_runs(self):
        problem = random_separable_qp(5, 4, lam=1.0, seed=15)
        report = verify_admm_dr_correspondence(problem, 1.0, np.ones(4), iters=100)
        assert report.max_deviation <= 1e-9
        assert report.iterations == 100

    def test_identities_across_relaxation_grid(self):
        problem = random_separable_qp(5, 4, lam=2.0, seed=16)
        for gamma in (0.5, 1.5, 1.9):
            report = verify_admm_dr_correspondence(
                problem, gamma, np.ones(4), iters=100
            )
            assert report.max_deviation <= 1e-9

    def test_kkt_init_stays_put(self):
        problem = random_separable_qp(4, 3, lam=1.0, seed=17)
        op = make_dr_splitting_operator(problem)
        report = verify_admm_dr_correspondence(
            problem, 1.0, op.known_zero, iters=20
        )
        assert report.max_deviation <= 1e-11

    def test_dr_iteration_converges_linearly(self):
        from gppa.ppa import GppaConfig, ProximalSchedule, run_exact_gppa

        problem = random_separable_qp(5, 4, lam=1.0, seed=18)
        op = make_dr_splitting_operator(problem)
        config = GppaConfig(
            gamma=1.0,
            c_schedule=ProximalSchedule.constant(1.0),
            max_iter=150,
            residual_tol=1e-300,
        )
        trace = run_exact_gppa(op, config, np.ones(4))
        ratios = [r.step_ratio for r in trace.records if r.step_ratio is not None]
        tail = ratios[len(ratios) // 2:]
        assert max(tail) < 1.0


class TestExtractPrimalDual:
    def test_stationary_trace_has_empty_ratios(self):
        problem = random_separable_qp(4, 3, lam=1.0, seed=19)
        _, w_star, p_star = solve_separable_kkt(problem)
        trace = run_generalized_admm(problem, 1.0, (w_star, p_star), max_iter=5)
        est = extract_primal_dual(trace, problem)
        for name in ("p", "w", "Mx"):
            assert len(est.ratios[name]) == 0
            assert np.isnan(est.tail_ratio_max[name])

    def test_seeded_run_all_tail_ratios_below_one(self):
        problem = random_separable_qp(5, 4, lam=1.0, seed=20)
        trace = run_generalized_admm(
            problem, 1.0, (np.zeros(4), np.zeros(4)), max_iter=200
        )
        est = extract_primal_dual(trace, problem)
        for name in ("p", "w", "Mx"):
            assert est.tail_ratio_max[name] < 1.0
        # m < n here, so the x-sequence cannot be recovered
        assert "x" not in est.ratios
        assert est.x_recovery_notice is not None

    def test_full_column_rank_reports_x_ratios(self):
        problem = random_separable_qp(3, 4, lam=1.0, seed=21)  # m > n, tall M
        trace = run_generalized_admm(
            problem, 1.0, (np.zeros(4), np.zeros(4)), max_iter=150
        )
        est = extract_primal_dual(trace, problem)
        assert est.x_recovery_notice is None
        assert "x" in est.ratios
        assert est.tail_ratio_max["x"] < 1.0

    def test_zero_column_in_m_skips_x_recovery(self):
        base = random_separable_qp(3, 4, lam=1.0, seed=22)
        M = base.M.copy()
        M[:, -1] = 0.0
        problem = SeparableQP(
            Q_f=base.Q_f, q_f=base.q_f, Q_g=base.Q_g, q_g=base.q_g, M=M, lam=1.0
        )
        trace = run_generalized_admm(
            problem, 1.0, (np.zeros(4), np.zeros(4)), max_iter=30
        )
        est = extract_primal_dual(trace, problem)
        assert est.x_recovery_notice is not None
        assert "x" not in est.ratios

    def test_last_iterates_approach_kkt(self):
        problem = random_separable_qp(5, 4, lam=1.0, seed=23)
        x_star, w_star, p_star = solve_separable_kkt(problem)
        trace = run_generalized_admm(
            problem, 1.0, (np.zeros(4), np.zeros(4)), max_iter=300
        )
        est = extract_primal_dual(trace, problem)
        assert np.linalg.norm(est.x - x_star) <= 1e-8
        assert np.linalg.norm(est.w - w_star) <= 1e-8
        assert np.linalg.norm(est.p - p_star) <= 1e-8
