import numpy as np
import pytest

from srifkit import linalg
from srifkit.models import (
    BehindCamera,
    GRAVITY,
    ImuNoise,
    ImuSample,
    NonPositiveDepth,
    RankDeficientFeature,
    bearing_angles,
    bearing_vector,
    camera_pose,
    feature_point_global,
    imu_transition,
    msckf_nullspace_project,
    project_feature,
    reanchor_feature,
    triangulate_inverse_depth,
    whiten,
)
from srifkit.state import (
    InverseDepthFeature,
    Pose,
    VinsStateVector,
    boxplus,
    layout_of,
    quat_from_rotvec,
    quat_to_mat,
    rotvec_from_quat,
    quat_conj,
    quat_mul,
)


def make_scene(seed=0, tsync=0.0):
    rng = np.random.default_rng(seed)
    st = VinsStateVector.identity()
    st.tsync = tsync
    st.p_ic = np.array([0.05, -0.02, 0.01])
    st.q_ic = quat_from_rotvec(rng.normal(size=3) * 0.05)
    for i in range(3):
        q = quat_from_rotvec(rng.normal(size=3) * 0.2)
        st.poses.append(Pose(rng.normal(size=3) * 0.5, q, t=0.5 * i, id=i))
    f = InverseDepthFeature(anchor_pose_id=0,
                            params=np.array([0.08, -0.06, 0.4]), id=0)
    st.features.append(f)
    return st, f


class TestImuTransition:
    def test_ballistic_limit(self):
        # zero rate, specific force = -R^T g, zero biases: pure translation
        q = quat_from_rotvec([0.2, -0.1, 0.3])
        R = quat_to_mat(q)
        pose = Pose(np.array([1.0, 2.0, 3.0]), q, t=0.0)
        v = np.array([0.5, -0.2, 0.1])
        samples = [ImuSample(np.zeros(3), -R.T @ GRAVITY, 0.01) for _ in range(10)]
        tb = imu_transition(np.zeros(3), np.zeros(3), v, pose, samples, ImuNoise())
        assert np.allclose(tb.new_pose.p, pose.p + v * 0.1, atol=1e-12)
        assert np.allclose(tb.new_pose.q, q, atol=1e-12)
        assert np.allclose(tb.new_v, v, atol=1e-12)

    def test_constant_yaw_rate(self):
        pose = Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]), t=0.0)
        w = np.array([0.0, 0.0, np.pi / 2])
        samples = [ImuSample(w, np.array([0.0, 0.0, -GRAVITY[2]]), 0.01)
                   for _ in range(100)]
        tb = imu_transition(np.zeros(3), np.zeros(3), np.zeros(3), pose,
                            samples, ImuNoise())
        yaw = rotvec_from_quat(tb.new_pose.q)
        assert np.allclose(yaw, [0.0, 0.0, np.pi / 2], atol=1e-6)

    def test_phi_finite_difference(self):
        rng = np.random.default_rng(1)
        bg = rng.normal(size=3) * 0.01
        ba = rng.normal(size=3) * 0.05
        v = rng.normal(size=3)
        pose = Pose(rng.normal(size=3), quat_from_rotvec(rng.normal(size=3) * 0.4), 0.0)
        samples = [ImuSample(rng.normal(size=3) * 0.5,
                             rng.normal(size=3) * 2.0 - GRAVITY, 0.01)
                   for _ in range(5)]
        noise = ImuNoise()
        tb = imu_transition(bg, ba, v, pose, samples, noise)

        def integrate(d):
            bg2, ba2, v2 = bg + d[0:3], ba + d[3:6], v + d[6:9]
            p2 = Pose(pose.p + d[9:12],
                      quat_mul(quat_from_rotvec(d[12:15]), pose.q), 0.0)
            t2 = imu_transition(bg2, ba2, v2, p2, samples, noise)
            out = np.concatenate([
                bg2 - bg, ba2 - ba, t2.new_v - tb.new_v,
                t2.new_pose.p - tb.new_pose.p,
                rotvec_from_quat(quat_mul(t2.new_pose.q, quat_conj(tb.new_pose.q))),
            ])
            return out

        h = 1e-6
        Phi_fd = np.zeros((15, 15))
        for k in range(15):
            d = np.zeros(15)
            d[k] = h
            Phi_fd[:, k] = (integrate(d) - integrate(-d)) / (2 * h)
        err = np.abs(Phi_fd - tb.phi).max() / max(np.abs(tb.phi).max(), 1.0)
        assert err <= 1e-4

    def test_process_noise_matches_monte_carlo(self):
        # sample covariance of integration errors under white gyro/accel
        # noise must match the covariance encoded by sqrt_info
        rng = np.random.default_rng(42)
        noise = ImuNoise(gyro_density=1e-3, accel_density=1e-2)
        dt, n, rate = 0.01, 10, 100.0
        pose = Pose(np.zeros(3), quat_from_rotvec([0.1, -0.2, 0.05]), 0.0)
        v0 = np.array([0.3, -0.1, 0.2])
        clean = [(np.array([0.1, 0.2, -0.3]),
                  np.array([0.5, -0.4, 9.9]) + 0.1 * k * np.ones(3))
                 for k in range(n)]
        samples = [ImuSample(w, a, dt) for w, a in clean]
        tb = imu_transition(np.zeros(3), np.zeros(3), v0, pose, samples, noise)
        Q = np.linalg.inv(tb.sqrt_info.T @ tb.sqrt_info)
        sg = noise.gyro_density * np.sqrt(rate)
        sa = noise.accel_density * np.sqrt(rate)
        errs = []
        for _ in range(4000):
            noisy = [ImuSample(w + rng.normal(size=3) * sg,
                               a + rng.normal(size=3) * sa, dt)
                     for w, a in clean]
            t2 = imu_transition(np.zeros(3), np.zeros(3), v0, pose, noisy, noise)
            errs.append(np.concatenate([
                t2.new_v - tb.new_v,
                t2.new_pose.p - tb.new_pose.p,
                rotvec_from_quat(quat_mul(t2.new_pose.q,
                                          quat_conj(tb.new_pose.q))),
            ]))
        E = np.array(errs)
        C = E.T @ E / len(E)
        model = np.diag(Q)[6:15]
        assert np.allclose(np.diag(C), model, rtol=0.15)
        # white sensor noise must not masquerade as bias random walk
        # (only the tiny regularization floor remains on those entries)
        assert np.all(np.diag(Q)[0:6] <= 1e-8)

    def test_sqrt_info_upper_triangular(self):
        pose = Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]), 0.0)
        tb = imu_transition(np.zeros(3), np.zeros(3), np.zeros(3), pose,
                            [ImuSample(np.ones(3) * 0.1, np.ones(3), 0.01)] * 3,
                            ImuNoise())
        assert np.allclose(np.tril(tb.sqrt_info, -1), 0.0)
        assert np.all(np.diag(tb.sqrt_info) > 0)


class TestProjectFeature:
    def test_axis_case(self):
        st = VinsStateVector.identity()
        st.poses.append(Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]), 0.0, id=0))
        st.features.append(InverseDepthFeature(0, np.array([0.0, 0.0, 0.5]), id=0))
        px, _ = project_feature(st, st.features[0], 0)
        assert np.allclose(px, st.intrinsics[2:], atol=1e-12)

    def test_parallax_first_order(self):
        st = VinsStateVector.identity()
        st.poses.append(Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]), 0.0, id=0))
        st.poses.append(Pose(np.array([0.1, 0.0, 0.0]),
                             np.array([0.0, 0.0, 0.0, 1.0]), 0.1, id=1))
        st.features.append(InverseDepthFeature(0, np.array([0.0, 0.0, 0.5]), id=0))
        px0, _ = project_feature(st, st.features[0], 0)
        px1, _ = project_feature(st, st.features[0], 1)
        shift = px1[0] - px0[0]
        expected = -st.intrinsics[0] * 0.1 / 2.0
        assert abs(shift - expected) <= 0.05 * abs(expected)

    def test_behind_camera(self):
        st = VinsStateVector.identity()
        st.poses.append(Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]), 0.0, id=0))
        st.poses.append(Pose(np.array([0.0, 0.0, 5.0]),
                             np.array([0.0, 0.0, 0.0, 1.0]), 0.1, id=1))
        st.features.append(InverseDepthFeature(0, np.array([0.0, 0.0, 0.5]), id=0))
        with pytest.raises(BehindCamera):
            project_feature(st, st.features[0], 1)

    @pytest.mark.parametrize("seed", range(20))
    def test_jacobians_finite_difference(self, seed):
        st, f = make_scene(seed=seed, tsync=0.001)
        fm = {i: (np.array([0.3, 0.1, -0.2]), np.array([0.1, -0.2, 0.3]))
              for i in range(3)}
        lay = layout_of(st)
        try:
            px, blocks = project_feature(st, f, 2, frame_motion=fm)
        except BehindCamera:
            pytest.skip("random scene placed feature behind camera")
        h = 1e-6
        for name, J in blocks.items():
            off, dim = lay.index[name]
            for k in range(dim):
                d = np.zeros(lay.n)
                d[off + k] = h
                stp = boxplus(st, d, lay)
                stm = boxplus(st, -d, lay)
                pp, _ = project_feature(stp, stp.features[0], 2,
                                        frame_motion=fm, with_jacobians=False)
                pm, _ = project_feature(stm, stm.features[0], 2,
                                        frame_motion=fm, with_jacobians=False)
                fd = (pp - pm) / (2 * h)
                scale = max(np.abs(J).max(), 1.0)
                assert np.abs(fd - J[:, k]).max() <= 1e-4 * scale, (name, k)

    def test_bias_velocity_columns_absent(self):
        st, f = make_scene(seed=3)
        _, blocks = project_feature(st, f, 1)
        assert not any(b in blocks for b in ("bg", "ba", "v"))


class TestNullspaceProjection:
    def test_block_case(self):
        Hf = np.vstack([np.eye(3), np.zeros((3, 3))])
        Hx = {"a": np.arange(18.0).reshape(6, 3)}
        r = np.arange(6.0)
        out, rp = msckf_nullspace_project(Hf, Hx, r)
        assert rp.shape == (3,)
        assert out["a"].shape == (3, 3)
        # the surviving rows depend only on the zero block of Hf
        assert np.allclose(np.abs(rp), np.abs(r[3:]))

    def test_matches_qr_oracle(self):
        rng = np.random.default_rng(5)
        Hf = rng.normal(size=(10, 3))
        Hx = {"a": rng.normal(size=(10, 4))}
        r = rng.normal(size=10)
        out, rp = msckf_nullspace_project(Hf, Hx, r)
        # oracle: full Q from numpy, left null space rows
        Q, _ = np.linalg.qr(Hf, mode="complete")
        N = Q[:, 3:]
        # same subspace: compare Gram matrices of the projected system
        S1 = np.hstack([out["a"], rp[:, None]])
        S2 = np.hstack([N.T @ Hx["a"], (N.T @ r)[:, None]])
        assert np.allclose(S1.T @ S1, S2.T @ S2, atol=1e-10)
        # orthogonality to Hf
        assert np.abs(S1.T @ S1 - S2.T @ S2).max() <= 1e-10 * np.abs(Hf).max()

    def test_joint_ls_equivalence(self):
        # eliminating the feature must not change the state-block solution
        rng = np.random.default_rng(6)
        Hf = rng.normal(size=(12, 3))
        Hx = rng.normal(size=(12, 5))
        r = rng.normal(size=12)
        out, rp = msckf_nullspace_project(Hf, {"x": Hx}, r)
        # joint solve over [x, f] with a weak prior on x to fix the gauge
        J = np.hstack([Hx, Hf])
        prior = np.hstack([np.eye(5) * 1e-3, np.zeros((5, 3))])
        Afull = np.vstack([J, prior])
        bfull = np.concatenate([r, np.zeros(5)])
        xj = np.linalg.lstsq(Afull, bfull, rcond=None)[0][:5]
        Ap = np.vstack([out["x"], np.eye(5) * 1e-3])
        bp = np.concatenate([rp, np.zeros(5)])
        xp = np.linalg.lstsq(Ap, bp, rcond=None)[0]
        assert np.allclose(xj, xp, atol=1e-8)

    def test_too_few_rows(self):
        with pytest.raises(RankDeficientFeature):
            msckf_nullspace_project(np.ones((2, 3)), {"a": np.ones((2, 2))},
                                    np.ones(2))

    def test_rank_deficient(self):
        Hf = np.zeros((6, 3))
        Hf[:, 0] = 1.0
        with pytest.raises(RankDeficientFeature):
            msckf_nullspace_project(Hf, {"a": np.ones((6, 2))}, np.ones(6))


class TestWhiten:
    def test_unit_sigma_noop(self):
        m = whiten(np.array([2.0]), {"a": np.array([[1.0]])}, 1.0)
        assert m.residual[0] == 2.0

    def test_scaling(self):
        m = whiten(np.array([2.0]), {"a": np.array([[4.0]])}, 2.0)
        assert m.residual[0] == 1.0 and m.blocks["a"][0, 0] == 2.0

    def test_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            whiten(np.zeros(1), {}, 0.0)

    def test_chi_square_statistics(self):
        rng = np.random.default_rng(7)
        sigma = 1.7
        dof = 50
        chis = []
        for _ in range(100):
            noise = rng.normal(scale=sigma, size=dof)
            m = whiten(noise, {}, sigma)
            chis.append(m.residual @ m.residual)
        mean_chi = np.mean(chis)
        assert abs(mean_chi - dof) <= 3 * np.sqrt(2 * dof / 100) * 10


class TestReanchor:
    def _extr(self):
        return np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0])

    def test_identity(self):
        p_ic, q_ic = self._extr()
        pose = Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]), 0.0, id=0)
        f = InverseDepthFeature(0, np.array([0.1, 0.05, 0.5]), id=0)
        g = reanchor_feature(f, pose, pose, p_ic, q_ic)
        assert np.allclose(g.params, f.params, atol=1e-12)

    def test_axial_translation(self):
        p_ic, q_ic = self._extr()
        old = Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]), 0.0, id=0)
        new = Pose(np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, 0.0, 1.0]),
                   0.1, id=1)
        f = InverseDepthFeature(0, np.array([0.0, 0.0, 1.0 / 3.0]), id=0)
        g = reanchor_feature(f, old, new, p_ic, q_ic)
        assert np.isclose(g.params[2], 0.5, atol=1e-12)

    def test_global_point_roundtrip(self):
        rng = np.random.default_rng(8)
        p_ic = np.array([0.03, 0.01, -0.02])
        q_ic = quat_from_rotvec(rng.normal(size=3) * 0.1)
        for _ in range(20):
            old = Pose(rng.normal(size=3), quat_from_rotvec(rng.normal(size=3) * 0.3),
                       0.0, id=0)
            new = Pose(old.p + rng.normal(size=3) * 0.3,
                       quat_from_rotvec(rng.normal(size=3) * 0.3), 0.1, id=1)
            f = InverseDepthFeature(0, np.array([rng.uniform(-0.3, 0.3),
                                                 rng.uniform(-0.3, 0.3),
                                                 rng.uniform(0.2, 1.0)]), id=0)
            X0 = feature_point_global(f, old, p_ic, q_ic)
            try:
                g = reanchor_feature(f, old, new, p_ic, q_ic)
            except NonPositiveDepth:
                continue
            X1 = feature_point_global(g, new, p_ic, q_ic)
            assert np.linalg.norm(X0 - X1) <= 1e-9

    def test_nonpositive_depth(self):
        p_ic, q_ic = self._extr()
        old = Pose(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]), 0.0, id=0)
        new = Pose(np.array([0.0, 0.0, 10.0]), np.array([0.0, 0.0, 0.0, 1.0]),
                   0.1, id=1)
        f = InverseDepthFeature(0, np.array([0.0, 0.0, 0.5]), id=0)
        with pytest.raises(NonPositiveDepth):
            reanchor_feature(f, old, new, p_ic, q_ic)


class TestTriangulation:
    def test_recovers_synthetic_point(self):
        rng = np.random.default_rng(9)
        intr = np.array([400.0, 400.0, 320.0, 240.0])
        X = np.array([0.5, -0.3, 4.0])
        rots, centers, pixels = [], [], []
        for i in range(5):
            c = np.array([0.4 * i, 0.05 * i, 0.0])
            R = quat_to_mat(quat_from_rotvec(rng.normal(size=3) * 0.05))
            y = R.T @ (X - c)
            px = np.array([intr[0] * y[0] / y[2] + intr[2],
                           intr[1] * y[1] / y[2] + intr[3]])
            rots.append(R)
            centers.append(c)
            pixels.append(px)
        theta = triangulate_inverse_depth(pixels, rots, centers, intr)
        y0 = rots[0].T @ (X - centers[0])
        assert np.isclose(theta[2], 1.0 / np.linalg.norm(y0), atol=1e-8)
        a, b = bearing_angles(y0)
        assert np.allclose(theta[:2], [a, b], atol=1e-8)
