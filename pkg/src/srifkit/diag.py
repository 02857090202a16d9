"""Run diagnostics: conditioning instrumentation and trajectory metrics.

Condition numbers are always evaluated in float64 via SVD regardless of
the filter's working precision; they are diagnostics, never part of the
estimator path, and run at a configurable stride since each costs O(n^3).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import cond_spectral
from .state import quat_to_mat


@dataclass
class ConditioningRecord:
    t: float
    kappa2_r22_post: float           # squared cond. of posterior R22 factor
    kappa2_r22_post_scaled: float    # after diagonal (Jacobi) column scaling
    kappa2_r22_post_precond: float   # after the full preconditioner
    kappa2_r22_precond: float        # prior-side factor, preconditioned
    sigma_max_p: float               # extremal singular values of the
    sigma_min_p: float               # scale-normalized covariance block


@dataclass
class TrajectoryMetrics:
    ate_translation: float   # m, RMS
    ate_rotation: float      # deg, RMS
    rte_translation: float   # m, RMS over 1 s relative motions
    rte_rotation: float      # deg


def _kappa2(A):
    k, _, _ = cond_spectral(np.asarray(A, dtype=np.float64))
    return k * k


def record_conditioning(t, R22_post, precond, R22_prior=None, P_scaled=None):
    """Snapshot the conditioning of one update step.

    `precond` applies to both the prior and posterior factor (it is built
    from the prior, so the posterior numbers show how well it transfers).
    `P_scaled` is the scale-normalized covariance block tracked by the
    runner; its extremal singular values land in sigma_max/min.
    """
    from .filters import apply_preconditioner_inverse

    R22_post = np.asarray(R22_post, dtype=np.float64)
    d = np.sqrt(np.einsum("ij,ij->j", R22_post, R22_post))
    d[d == 0.0] = 1.0
    k_post = _kappa2(R22_post)
    k_scaled = _kappa2(R22_post / d[None, :])
    k_pre = _kappa2(apply_preconditioner_inverse(precond, R22_post))
    k_prior = (np.nan if R22_prior is None else
               _kappa2(apply_preconditioner_inverse(
                   precond, np.asarray(R22_prior, dtype=np.float64))))
    if P_scaled is None:
        smax = smin = np.nan
    else:
        sv = np.linalg.svd(np.asarray(P_scaled, dtype=np.float64),
                           compute_uv=False)
        smax, smin = float(sv[0]), float(sv[-1])
    return ConditioningRecord(float(t), k_post, k_scaled, k_pre, k_prior,
                              smax, smin)


class ConditioningLog:
    """Append-only record list, sampled every `stride` update steps."""

    def __init__(self, stride=10):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.stride = stride
        self.records = []
        self._step = 0

    def due(self):
        return self._step % self.stride == 0

    def tick(self, record=None):
        if record is not None:
            self.records.append(record)
        self._step += 1


# --------------------------------------------------------------------------
# trajectory metrics
# --------------------------------------------------------------------------


def _associate(est_times, gt_times, max_dt):
    """Nearest-timestamp pairing; raises if nothing overlaps."""
    gt_times = np.asarray(gt_times)
    idx = np.searchsorted(gt_times, est_times)
    idx = np.clip(idx, 1, len(gt_times) - 1)
    left = gt_times[idx - 1]
    right = gt_times[idx]
    pick = np.where(np.abs(est_times - left) <= np.abs(est_times - right),
                    idx - 1, idx)
    ok = np.abs(gt_times[pick] - est_times) <= max_dt
    if not ok.any():
        raise ValueError("no overlapping timestamps")
    return np.flatnonzero(ok), pick[ok]

def _yaw_translation_align(est_pos, gt_pos):
    """Closed-form 4-DOF (yaw about gravity + translation) alignment."""
    ec = est_pos - est_pos.mean(axis=0)
    gc = gt_pos - gt_pos.mean(axis=0)
    num = np.sum(ec[:, 0] * gc[:, 1] - ec[:, 1] * gc[:, 0])
    den = np.sum(ec[:, 0] * gc[:, 0] + ec[:, 1] * gc[:, 1])
    yaw = np.arctan2(num, den)
    c, s = np.cos(yaw), np.sin(yaw)
    Rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    shift = gt_pos.mean(axis=0) - est_pos.mean(axis=0) @ Rz.T
    return Rz, shift


def _geodesic_deg(Ra, Rb):
    tr = np.trace(Ra.T @ Rb)
    ang = np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0))
    return np.degrees(ang)


def compute_ate(est_times, est_pos, est_quat, gt_times, gt_pos, gt_quat,
                max_dt=0.01):
    """RMS translation (m) and rotation (deg) error after removing the
    four unobservable degrees of freedom (yaw + translation)."""
    ei, gi = _associate(np.asarray(est_times), gt_times, max_dt)
    ep, gp = np.asarray(est_pos)[ei], np.asarray(gt_pos)[gi]
    if len(ei) < 2:
        raise ValueError("need at least two associated poses")
    Rz, shift = _yaw_translation_align(ep, gp)
    resid = ep @ Rz.T + shift - gp
    ate_t = float(np.sqrt(np.mean(np.sum(resid ** 2, axis=1))))
    angs = [_geodesic_deg(Rz @ quat_to_mat(np.asarray(est_quat)[i]),
                          quat_to_mat(np.asarray(gt_quat)[j]))
            for i, j in zip(ei, gi)]
    ate_r = float(np.sqrt(np.mean(np.square(angs))))
    return ate_t, ate_r


def compute_rte(est_times, est_pos, est_quat, gt_times, gt_pos, gt_quat,
                interval=1.0, max_dt=0.01):
    """RMS error of relative motions over `interval`, no alignment."""
    est_times = np.asarray(est_times)
    ei, gi = _associate(est_times, gt_times, max_dt)
    times = est_times[ei]
    jmatch = np.searchsorted(times, times + interval)
    terrs, rerrs = [], []
    for a, j in enumerate(jmatch):
        if j >= len(times) or abs(times[j] - times[a] - interval) > max_dt:
            continue
        ia, ib = ei[a], ei[j]
        ja, jb = gi[a], gi[j]
        Rea = quat_to_mat(np.asarray(est_quat)[ia])
        Rga = quat_to_mat(np.asarray(gt_quat)[ja])
        d_est = Rea.T @ (np.asarray(est_pos)[ib] - np.asarray(est_pos)[ia])
        d_gt = Rga.T @ (np.asarray(gt_pos)[jb] - np.asarray(gt_pos)[ja])
        terrs.append(np.linalg.norm(d_est - d_gt))
        rerrs.append(_geodesic_deg(
            Rea.T @ quat_to_mat(np.asarray(est_quat)[ib]),
            Rga.T @ quat_to_mat(np.asarray(gt_quat)[jb])))
    if not terrs:
        raise ValueError(f"no pose pairs {interval} s apart")
    return (float(np.sqrt(np.mean(np.square(terrs)))),
            float(np.sqrt(np.mean(np.square(rerrs)))))


def compute_metrics(est_times, est_pos, est_quat, gt_times, gt_pos, gt_quat,
                    interval=1.0):
    ate_t, ate_r = compute_ate(est_times, est_pos, est_quat,
                               gt_times, gt_pos, gt_quat)
    rte_t, rte_r = compute_rte(est_times, est_pos, est_quat,
                               gt_times, gt_pos, gt_quat, interval=interval)
    return TrajectoryMetrics(ate_t, ate_r, rte_t, rte_r)
