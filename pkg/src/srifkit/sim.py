"""Synthetic visual-inertial scenarios with analytic ground truth.

Trajectories are closed-form (position, orientation, and their derivatives
are evaluated exactly, never integrated numerically), so downstream
consistency oracles see no integration error. IMU streams add seeded bias
random walks and white noise on top of the analytic rates; feature tracks
are projected through the true camera model, shifted by the true time
offset, and capped at 15 SLAM / 35 short (multi-state-constraint) tracks
per frame.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np

from .models import GRAVITY, ImuNoise, ImuSample
from .state import quat_from_rotvec, quat_mul, quat_to_mat

SCENARIO_FORMAT = "srifkit-scenario/1"
CACHE_MAGIC = b"SRIM"
CACHE_VERSION = 1

SLAM_CAP = 15
MSCKF_CAP = 35

_EX = np.array([1.0, 0.0, 0.0])
_EZ = np.array([0.0, 0.0, 1.0])


@dataclass
class ScenarioSpec:
    duration: float = 60.0
    imu_rate: float = 200.0
    cam_rate: float = 5.0
    trajectory: str = "circle"      # circle | sinusoid-3d | figure-eight
    amplitude: float = 2.0          # m (circle radius / sinusoid amplitude)
    period: float = 10.0            # s
    pitch_amplitude: float = 0.15   # rad, superimposed rocking
    noise: ImuNoise = field(default_factory=ImuNoise)
    sigma_px: float = 1.0
    n_features: int = 120
    feature_lo: tuple = (-8.0, -8.0, -2.5)
    feature_hi: tuple = (8.0, 8.0, 2.5)
    true_tsync: float = 0.002       # s
    intrinsics: tuple = (400.0, 400.0, 320.0, 240.0)
    p_ic: tuple = (0.05, 0.0, 0.02)
    # xyzw, IMU-from-camera: optical axis forward (+x IMU), image y down
    q_ic: tuple = (0.5, -0.5, 0.5, -0.5)
    min_depth: float = 0.3
    max_depth: float = 30.0
    seed: int = 0

    def __post_init__(self):
        # JSON round-trips tuples as lists; normalize so specs compare equal
        for name in ("feature_lo", "feature_hi", "intrinsics", "p_ic", "q_ic"):
            setattr(self, name, tuple(getattr(self, name)))
        if self.duration <= 0 or self.imu_rate <= 0 or self.cam_rate <= 0:
            raise ValueError("duration and rates must be positive")
        ratio = self.imu_rate / self.cam_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("cam_rate must divide imu_rate")
        if self.trajectory not in ("circle", "sinusoid-3d", "figure-eight"):
            raise ValueError(f"unknown trajectory kind {self.trajectory!r}")

    def to_json(self):
        d = asdict(self)
        d["format"] = SCENARIO_FORMAT
        return json.dumps(d, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text):
        d = json.loads(text)
        fmt = d.pop("format", SCENARIO_FORMAT)
        if fmt != SCENARIO_FORMAT:
            raise ValueError(f"unsupported scenario format {fmt!r}")
        noise = d.pop("noise", None)
        spec = ScenarioSpec(**d)
        if noise is not None:
            spec.noise = ImuNoise(**noise)
        return spec


@dataclass
class GroundTruth:
    times: np.ndarray        # (N,) IMU-rate timestamps
    positions: np.ndarray    # (N, 3)
    quats: np.ndarray        # (N, 4) xyzw, global-from-IMU
    velocities: np.ndarray   # (N, 3) global
    omegas: np.ndarray       # (N, 3) body rates
    gyro_bias: np.ndarray    # (N, 3)
    accel_bias: np.ndarray   # (N, 3)
    features: np.ndarray     # (F, 3) global points


@dataclass
class Frame:
    index: int
    t: float                 # nominal frame timestamp
    feature_ids: np.ndarray  # (k,) int
    kinds: np.ndarray        # (k,) 0 = slam, 1 = msckf
    pixels: np.ndarray       # (k, 2)


@dataclass
class Dataset:
    spec: ScenarioSpec
    truth: GroundTruth
    imu_omega: np.ndarray    # (M, 3) measured body rates
    imu_accel: np.ndarray    # (M, 3) measured specific force
    imu_dt: np.ndarray       # (M,)
    frames: list             # of Frame

    def imu_samples(self, i0, i1):
        return [ImuSample(self.imu_omega[i], self.imu_accel[i], self.imu_dt[i])
                for i in range(i0, i1)]


# --------------------------------------------------------------------------
# analytic trajectory
# --------------------------------------------------------------------------


def _translation(spec, t):
    """Closed-form position and its first two derivatives."""
    A, w = spec.amplitude, 2.0 * np.pi / spec.period
    t = np.asarray(t, dtype=float)
    if spec.trajectory == "circle":
        c, s = np.cos(w * t), np.sin(w * t)
        p = np.stack([A * c, A * s, np.zeros_like(t)], axis=-1)
        v = np.stack([-A * w * s, A * w * c, np.zeros_like(t)], axis=-1)
        a = np.stack([-A * w * w * c, -A * w * w * s, np.zeros_like(t)], axis=-1)
    elif spec.trajectory == "figure-eight":
        c, s = np.cos(w * t), np.sin(w * t)
        c2, s2 = np.cos(2 * w * t), np.sin(2 * w * t)
        z = 0.15 * A
        p = np.stack([A * s, 0.5 * A * s2, z * s2], axis=-1)
        v = np.stack([A * w * c, A * w * c2, 2 * z * w * c2], axis=-1)
        a = np.stack([-A * w * w * s, -2 * A * w * w * s2,
                      -4 * z * w * w * s2], axis=-1)
    else:  # sinusoid-3d
        w2, w3 = 2.0 * w, 3.0 * w
        s1, s2, s3 = np.sin(w * t), np.sin(w2 * t), np.sin(w3 * t)
        c1, c2, c3 = np.cos(w * t), np.cos(w2 * t), np.cos(w3 * t)
        p = np.stack([A * s1, A * s2, 0.3 * A * s3], axis=-1)
        v = np.stack([A * w * c1, A * w2 * c2, 0.3 * A * w3 * c3], axis=-1)
        a = np.stack([-A * w * w * s1, -A * w2 * w2 * s2,
                      -0.3 * A * w3 * w3 * s3], axis=-1)
    return p, v, a


def _heading(spec, t):
    """Yaw/pitch angles and rates; orientation = Rz(yaw) Rx(pitch)."""
    w = 2.0 * np.pi / spec.period
    if spec.trajectory == "circle":
        yaw, dyaw = w * t + np.pi / 2.0, w
    else:
        yaw = 0.8 * np.sin(w * t)
        dyaw = 0.8 * w * np.cos(w * t)
    pitch = spec.pitch_amplitude * np.sin(2.0 * w * t)
    dpitch = 2.0 * spec.pitch_amplitude * w * np.cos(2.0 * w * t)
    return yaw, dyaw, pitch, dpitch


def gen_trajectory(spec, t):
    """True (position, quat, velocity, body rate, body specific force) at t.

    The specific force is what an ideal accelerometer reads:
    R^T (a_world - gravity).
    """
    p, v, a = _translation(spec, t)
    yaw, dyaw, pitch, dpitch = _heading(spec, t)
    qz = quat_from_rotvec(_EZ * yaw)
    qx = quat_from_rotvec(_EX * pitch)
    q = quat_mul(qz, qx)
    # body rate of Rz(yaw) Rx(pitch): pitch-frame pullback of the yaw rate
    Rx = quat_to_mat(qx)
    omega = Rx.T @ (_EZ * dyaw) + _EX * dpitch
    R = quat_to_mat(q)
    accel_body = R.T @ (a - np.asarray(GRAVITY))
    return p, q, v, omega, accel_body


def gen_ground_truth(spec):
    n = int(round(spec.duration * spec.imu_rate)) + 1
    times = np.arange(n) / spec.imu_rate
    positions = np.empty((n, 3))
    quats = np.empty((n, 4))
    velocities = np.empty((n, 3))
    omegas = np.empty((n, 3))
    for i, t in enumerate(times):
        p, q, v, om, _ = gen_trajectory(spec, t)
        positions[i], quats[i], velocities[i], omegas[i] = p, q, v, om

    ss = np.random.SeedSequence(spec.seed)
    rng_bias, rng_feat = [np.random.default_rng(s) for s in ss.spawn(2)]
    dt = 1.0 / spec.imu_rate
    gyro_bias = np.zeros((n, 3))
    accel_bias = np.zeros((n, 3))
    if spec.noise.gyro_bias_rw > 0 or spec.noise.accel_bias_rw > 0:
        steps_g = rng_bias.normal(size=(n - 1, 3)) * (
            spec.noise.gyro_bias_rw * np.sqrt(dt))
        steps_a = rng_bias.normal(size=(n - 1, 3)) * (
            spec.noise.accel_bias_rw * np.sqrt(dt))
        gyro_bias[1:] = np.cumsum(steps_g, axis=0)
        accel_bias[1:] = np.cumsum(steps_a, axis=0)

    lo = np.asarray(spec.feature_lo)
    hi = np.asarray(spec.feature_hi)
    features = rng_feat.uniform(lo, hi, size=(spec.n_features, 3))
    return GroundTruth(times, positions, quats, velocities, omegas,
                       gyro_bias, accel_bias, features)


def gen_imu(spec, truth):
    """Measured IMU stream: one sample per inter-timestamp interval.

    Sample i reads the true rates at the interval midpoint plus the bias
    at t_i plus seeded white noise at the per-sample variance density^2 * rate.
    """
    ss = np.random.SeedSequence(spec.seed)
    rng = np.random.default_rng(ss.spawn(3)[2])
    m = len(truth.times) - 1
    dt = np.diff(truth.times)
    omega = np.empty((m, 3))
    accel = np.empty((m, 3))
    mid = truth.times[:-1] + 0.5 * dt
    for i, t in enumerate(mid):
        _, _, _, om, acc = gen_trajectory(spec, t)
        omega[i], accel[i] = om, acc
    omega += truth.gyro_bias[:-1]
    accel += truth.accel_bias[:-1]
    if spec.noise.gyro_density > 0:
        omega += rng.normal(size=(m, 3)) * (
            spec.noise.gyro_density * np.sqrt(spec.imu_rate))
    if spec.noise.accel_density > 0:
        accel += rng.normal(size=(m, 3)) * (
            spec.noise.accel_density * np.sqrt(spec.imu_rate))
    return omega, accel, dt


def _project_all(spec, points, t):
    """Pixels + visibility mask for all points at true exposure time t."""
    p, q, _, _, _ = gen_trajectory(spec, t)
    R_wc = quat_to_mat(q) @ quat_to_mat(np.asarray(spec.q_ic))
    t_wc = p + quat_to_mat(q) @ np.asarray(spec.p_ic)
    y = (points - t_wc) @ R_wc
    fx, fy, cx, cy = spec.intrinsics
    z = y[:, 2]
    safe = np.where(z > 1e-9, z, 1.0)
    px = np.stack([fx * y[:, 0] / safe + cx, fy * y[:, 1] / safe + cy], axis=-1)
    depth = np.linalg.norm(y, axis=1)
    vis = ((z > spec.min_depth) & (depth < spec.max_depth)
           & (px[:, 0] >= 0) & (px[:, 0] <= 2 * cx)
           & (px[:, 1] >= 0) & (px[:, 1] <= 2 * cy))
    return px, vis


def gen_tracks(spec, truth):
    """Per-frame feature observations with persistent SLAM/MSCKF labels.

    A feature keeps its label while continuously visible; its slot frees
    when the track breaks. At most 15 SLAM and 35 MSCKF observations are
    emitted per frame.
    """
    ss = np.random.SeedSequence(spec.seed)
    rng = np.random.default_rng(ss.spawn(4)[3])
    n_frames = int(round(spec.duration * spec.cam_rate)) + 1
    active = {}  # fid -> 0 (slam) | 1 (msckf)
    frames = []
    for k in range(n_frames):
        t = k / spec.cam_rate
        px, vis = _project_all(spec, truth.features, t + spec.true_tsync)
        visible = set(np.flatnonzero(vis).tolist())
        active = {f: kind for f, kind in active.items() if f in visible}
        n_slam = sum(1 for kd in active.values() if kd == 0)
        n_msckf = len(active) - n_slam
        for f in sorted(visible - set(active)):
            if n_slam < SLAM_CAP:
                active[f] = 0
                n_slam += 1
            elif n_msckf < MSCKF_CAP:
                active[f] = 1
                n_msckf += 1
        fids = np.array(sorted(active), dtype=np.int64)
        kinds = np.array([active[f] for f in fids], dtype=np.int64)
        obs = px[fids]
        if spec.sigma_px > 0 and len(fids):
            obs = obs + rng.normal(size=obs.shape) * spec.sigma_px
        frames.append(Frame(k, t, fids, kinds, obs))
    return frames


def gen_dataset(spec):
    truth = gen_ground_truth(spec)
    omega, accel, dt = gen_imu(spec, truth)
    frames = gen_tracks(spec, truth)
    return Dataset(spec, truth, omega, accel, dt, frames)


# --------------------------------------------------------------------------
# binary cache (magic + version, little-endian f8/i8 throughout)
# --------------------------------------------------------------------------


def _write_arr(fh, arr, dtype):
    arr = np.ascontiguousarray(arr, dtype=dtype)
    fh.write(struct.pack("<B", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
    fh.write(arr.tobytes())


def _read_arr(fh, dtype):
    (ndim,) = struct.unpack("<B", fh.read(1))
    shape = struct.unpack(f"<{ndim}q", fh.read(8 * ndim))
    count = int(np.prod(shape)) if shape else 1
    arr = np.frombuffer(fh.read(count * np.dtype(dtype).itemsize), dtype=dtype)
    return arr.reshape(shape).copy()


def save_cache(path, ds):
    spec_blob = ds.spec.to_json().encode()
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<H", CACHE_VERSION))
        fh.write(struct.pack("<q", len(spec_blob)))
        fh.write(spec_blob)
        tr = ds.truth
        for arr in (tr.times, tr.positions, tr.quats, tr.velocities,
                    tr.omegas, tr.gyro_bias, tr.accel_bias, tr.features,
                    ds.imu_omega, ds.imu_accel, ds.imu_dt):
            _write_arr(fh, arr, "<f8")
        fh.write(struct.pack("<q", len(ds.frames)))
        for fr in ds.frames:
            fh.write(struct.pack("<qd", fr.index, fr.t))
            _write_arr(fh, fr.feature_ids, "<i8")
            _write_arr(fh, fr.kinds, "<i8")
            _write_arr(fh, fr.pixels, "<f8")


def load_cache(path):
    with open(path, "rb") as fh:
        if fh.read(4) != CACHE_MAGIC:
            raise ValueError("not a scenario cache (bad magic)")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != CACHE_VERSION:
            raise ValueError(f"unsupported cache version {version}")
        (blob_len,) = struct.unpack("<q", fh.read(8))
        spec = ScenarioSpec.from_json(fh.read(blob_len).decode())
        arrs = [_read_arr(fh, "<f8") for _ in range(11)]
        truth = GroundTruth(*arrs[:8])
        (n_frames,) = struct.unpack("<q", fh.read(8))
        frames = []
        for _ in range(n_frames):
            index, t = struct.unpack("<qd", fh.read(16))
            fids = _read_arr(fh, "<i8")
            kinds = _read_arr(fh, "<i8")
            pixels = _read_arr(fh, "<f8")
            frames.append(Frame(index, t, fids, kinds, pixels))
    return Dataset(spec, truth, arrs[8], arrs[9], arrs[10], frames)


# --------------------------------------------------------------------------
# pinned scenarios
# --------------------------------------------------------------------------


def default_scenario(seed=0):
    """60 s circle at moderate rates; the cross-estimator benchmark."""
    return ScenarioSpec(duration=60.0, imu_rate=100.0, cam_rate=4.0, seed=seed)


def conditioning_scenario(seed=0):
    """Long run whose growing unobservable-direction variance drives the
    square-root information factor past single-precision conditioning."""
    return ScenarioSpec(duration=360.0, imu_rate=100.0, cam_rate=4.0,
                        trajectory="circle", seed=seed)
