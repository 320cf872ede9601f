import numpy as np
import pytest

from mdmest import (
    InitialCondition,
    LtvModel,
    NoiseStructure,
    NotPositiveSemidefinite,
    assemble_qr,
    defining_replication,
    kron,
    preset,
    simulate,
    validate,
    vec,
)
import scipy.linalg


def ncv_structure(ts=2.0):
    """Nearly-constant-velocity structure: one Q shape, three R elements."""
    zero = np.zeros((2, 2))
    bq1 = np.array([[ts ** 3 / 3, ts ** 2 / 2], [ts ** 2 / 2, ts]])
    return NoiseStructure.from_pairs([
        (bq1, zero),
        (np.zeros((2, 2)), np.array([[1.0, 0.0], [0.0, 0.0]])),
        (np.zeros((2, 2)), np.array([[0.0, 1.0], [1.0, 0.0]])),
        (np.zeros((2, 2)), np.array([[0.0, 0.0], [0.0, 1.0]])),
    ])


class TestAssembleQr:
    def test_ncv_weights(self):
        ts = 2.0
        s = ncv_structure(ts)
        sigma2, r1, r12, r2 = 3.0, 1.0, 0.25, 2.0
        q, r = assemble_qr(s, [sigma2, r1, r12, r2])
        assert np.allclose(q, sigma2 * np.array(
            [[ts ** 3 / 3, ts ** 2 / 2], [ts ** 2 / 2, ts]]))
        assert np.allclose(r, [[r1, r12], [r12, r2]])

    def test_zero_alpha(self):
        s = ncv_structure()
        q, r = assemble_qr(s, np.zeros(4))
        assert np.array_equal(q, np.zeros((2, 2)))
        assert np.array_equal(r, np.zeros((2, 2)))

    def test_unknown_input_benchmark_values(self):
        spec = preset("unobs-unknown-input", tau=10)
        q, r = assemble_qr(spec.structure, [1.0, 1.0, -1.0, 2.0, 2.0, 1.0])
        assert np.array_equal(q, [[1.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]])
        assert np.array_equal(r, [[2.0, 0.0, 1.0], [0.0, 4.0, 1.0], [1.0, 1.0, 2.0]])

    def test_length_mismatch(self):
        with pytest.raises(Exception):
            assemble_qr(ncv_structure(), [1.0, 2.0])

    def test_linear_in_alpha(self):
        s = ncv_structure()
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal(4), rng.standard_normal(4)
        qa, ra = assemble_qr(s, a)
        qb, rb = assemble_qr(s, b)
        qs, rs = assemble_qr(s, a + b)
        assert np.array_equal(qs, qa + qb)
        assert np.array_equal(rs, ra + rb)


class TestDefiningReplication:
    def test_window_one_has_only_r_blocks(self, scalar_structure):
        ups = defining_replication(scalar_structure, 1)
        # n_eps = n_v = 1; columns are vec(BR_i)
        assert ups.shape == (1, 2)
        assert np.array_equal(ups, [[0.0, 1.0]])

    def test_scalar_window_two(self, scalar_structure):
        ups = defining_replication(scalar_structure, 2)
        assert ups.shape == (9, 2)
        # 3x3 blkdiag(Q, R, R): Q at vec index 0, R at indices 4 and 8
        assert np.array_equal(ups[:, 0], np.eye(9)[:, 0] * 0 + np.array(
            [1, 0, 0, 0, 0, 0, 0, 0, 0.0]))
        assert np.array_equal(ups[:, 1], np.array([0, 0, 0, 0, 1, 0, 0, 0, 1.0]))

    def test_matches_blkdiag_assembly(self):
        spec = preset("unobs-unknown-input", tau=10)
        alpha = np.array([1.0, 1.0, -1.0, 2.0, 2.0, 1.0])
        l_win = 2
        ups = defining_replication(spec.structure, l_win)
        q, r = assemble_qr(spec.structure, alpha)
        direct = vec(scipy.linalg.block_diag(
            kron(np.eye(l_win - 1), q), kron(np.eye(l_win), r)))
        assert np.allclose(ups @ alpha, direct)

    def test_linear_in_alpha(self, scalar_structure, rng):
        ups = defining_replication(scalar_structure, 3)
        a = rng.standard_normal(2)
        b = rng.standard_normal(2)
        assert np.allclose(ups @ (a + b), ups @ a + ups @ b)


class TestValidate:
    def test_benchmark_model_is_clean(self):
        spec = preset("obs-ltv", tau=20)
        assert validate(spec.model, spec.structure).ok

    def test_wrong_h_shape_names_step(self):
        model = LtvModel.create(
            n_x=2, n_w=2, n_v=1, tau=1,
            F=np.eye(2), G=None, E=np.eye(2),
            H=[np.ones((1, 2)), np.ones((1, 3))],
            D=np.ones((1, 1)))
        report = validate(model, NoiseStructure.from_pairs(
            [(np.eye(2), np.zeros((1, 1))), (np.zeros((2, 2)), np.ones((1, 1)))]))
        assert any("H_1" in f for f in report.findings)

    def test_asymmetric_basis_flagged(self):
        s = NoiseStructure.from_pairs(
            [(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((1, 1)))])
        model = LtvModel.create(n_x=1, n_w=2, n_v=1, tau=1,
                                F=np.eye(1), G=None, E=np.ones((1, 2)),
                                H=np.eye(1), D=np.eye(1))
        report = validate(model, s)
        assert any("symmetric" in f for f in report.findings)


class TestSimulate:
    def test_noise_free_is_deterministic(self, scalar_lti_model, scalar_structure):
        init = InitialCondition(mean=np.array([2.0]), cov=np.zeros((1, 1)))
        traj = simulate(scalar_lti_model, scalar_structure, np.zeros(2), init,
                        seed=4)
        ks = np.arange(scalar_lti_model.tau + 1)
        assert np.allclose(traj.xs[:, 0], 2.0 * 0.9 ** ks)
        assert np.allclose(np.array(traj.zs)[:, 0], 2.0 * 0.9 ** ks)

    def test_fixed_seed_reproducible(self, scalar_lti_model, scalar_structure):
        t1 = simulate(scalar_lti_model, scalar_structure, [2.0, 1.0], seed=7)
        t2 = simulate(scalar_lti_model, scalar_structure, [2.0, 1.0], seed=7)
        assert np.array_equal(t1.xs, t2.xs)
        assert np.array_equal(np.array(t1.zs), np.array(t2.zs))

    def test_state_noise_sample_variance(self):
        spec = preset("obs-ltv", tau=100000)
        traj = simulate(spec.model, spec.structure, spec.alpha_true, spec.init,
                        seed=11)
        n = traj.ws.shape[0]
        var = traj.ws.var(ddof=1)
        se = 2.0 * np.sqrt(2.0 / (n - 1))  # std of a chi-square variance estimate
        assert abs(var - 2.0) < 3.0 * se

    def test_recursion_replay(self):
        spec = preset("unobs-unknown-input", tau=100)
        from mdmest.benchmarks import benchmark_input_signal
        u = benchmark_input_signal(spec)
        traj = simulate(spec.model, spec.structure, spec.alpha_true, spec.init,
                        input_signal=u, seed=3)
        model = spec.model
        scale = np.max(np.abs(traj.xs))
        for k in range(model.tau):
            x_next = (model.F[k] @ traj.xs[k] + model.G[k] @ traj.us[k]
                      + model.E[k] @ traj.ws[k])
            assert np.max(np.abs(traj.xs[k + 1] - x_next)) <= 1e-12 * scale
        for k in range(model.tau + 1):
            z = model.H[k] @ traj.xs[k] + model.D[k] @ traj.vs[k]
            assert np.max(np.abs(traj.zs[k] - z)) <= 1e-12 * scale

    def test_indefinite_q_rejected(self, scalar_lti_model, scalar_structure):
        with pytest.raises(NotPositiveSemidefinite):
            simulate(scalar_lti_model, scalar_structure, [-1.0, 1.0], seed=0)
