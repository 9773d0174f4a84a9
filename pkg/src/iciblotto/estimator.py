"""Steady-state Kalman filter, residues and chi-square detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import EstimatorError
from .model import StateSpaceModel


def _diag(v, n, name):
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        v = np.full(n, float(v))
    elif v.ndim == 2:
        if np.count_nonzero(v - np.diag(np.diag(v))):
            raise EstimatorError(f"{name} must be diagonal")
        v = np.diag(v).copy()
    if v.shape != (n,):
        raise EstimatorError(f"{name} has {v.shape[0]} entries, expected {n}")
    return v


@dataclass(frozen=True)
class NoiseSpec:
    """Diagonal covariances stored as vectors.

    psi: initial state, phi: process, omega: measurement, cost: diagonal of
    the state-error cost E. ``threshold=None`` means the chi-square 0.95
    quantile with m degrees of freedom.
    """

    psi: np.ndarray
    phi: np.ndarray
    omega: np.ndarray
    cost: np.ndarray
    threshold: float | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("psi", "phi", "omega", "cost"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise EstimatorError(f"{name} diagonal must be finite and >= 0")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if np.any(self.omega <= 0):
            raise EstimatorError("measurement covariance diagonal must be > 0")
        if self.threshold is not None and not self.threshold > 0:
            raise EstimatorError("detector threshold must be > 0")

    @classmethod
    def build(cls, model: StateSpaceModel, psi=0.0, phi=0.0, omega=1.0, cost=1.0,
              threshold=None, seed=0) -> "NoiseSpec":
        n, m = model.n_states, model.n_outputs
        return cls(_diag(psi, n, "psi"), _diag(phi, n, "phi"), _diag(omega, m, "omega"),
                   _diag(cost, n, "cost"), threshold, seed)

    @property
    def E(self) -> np.ndarray:
        return np.diag(self.cost)

    def check(self, model: StateSpaceModel) -> None:
        n, m = model.n_states, model.n_outputs
        if self.psi.size != n or self.phi.size != n or self.cost.size != n:
            raise EstimatorError(f"state covariances must have {n} entries")
        if self.omega.size != m:
            raise EstimatorError(f"measurement covariance must have {m} entries")

    def detector_threshold(self, m: int) -> float:
        if self.threshold is not None:
            return float(self.threshold)
        return float(stats.chi2.ppf(0.95, m))


@dataclass(frozen=True)
class EstimatorBundle:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    P: np.ndarray
    K: np.ndarray
    Q: np.ndarray
    Z: np.ndarray            # diagonal of the residue covariance
    E: np.ndarray
    threshold: float

    def __post_init__(self):
        for name in ("A", "B", "C", "P", "K", "Q", "Z", "E"):
            getattr(self, name).setflags(write=False)

    @property
    def S(self) -> np.ndarray:
        """KL weight: half the inverse residue covariance."""
        return np.diag(0.5 / self.Z)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.C.shape[0]


def riccati_residual(P, A, C, Phi, Omega) -> float:
    APCt = A @ P @ C.T
    rhs = A @ P @ A.T + Phi - APCt @ np.linalg.solve(C @ P @ C.T + Omega, APCt.T)
    return float(np.abs(P - rhs).max())


def solve_riccati(model: StateSpaceModel, noise: NoiseSpec, tol: float = 1e-10,
                  max_iter: int = 100_000) -> np.ndarray:
    """Fixed-point iteration of the filtering Riccati recursion, started at Psi."""
    if not model.is_discrete:
        raise EstimatorError("estimator needs a discrete-time model")
    noise.check(model)
    A, C = model.A, model.C
    Phi, Omega = np.diag(noise.phi), np.diag(noise.omega)
    rho = np.abs(np.linalg.eigvals(A)).max() if A.size else 0.0
    if rho >= 1:
        raise EstimatorError(f"discrete model not stable, spectral radius {rho:.6g}")
    P = np.diag(noise.psi).astype(float)
    for _ in range(max_iter):
        APCt = A @ P @ C.T
        G = C @ P @ C.T + Omega
        P_next = A @ P @ A.T + Phi - APCt @ np.linalg.solve(G, APCt.T)
        P_next = 0.5 * (P_next + P_next.T)
        if np.abs(P_next - P).max() < tol:
            return P_next
        P = P_next
    raise EstimatorError(f"Riccati iteration did not converge in {max_iter} iterations")


def kalman_gain(P: np.ndarray, model: StateSpaceModel, noise: NoiseSpec) -> EstimatorBundle:
    A, C = np.asarray(model.A), np.asarray(model.C)
    G = C @ P @ C.T + np.diag(noise.omega)
    K = np.linalg.solve(G, C @ P).T      # P C^T G^-1 with G symmetric
    Qm = A - K @ C @ A
    rho = np.abs(np.linalg.eigvals(Qm)).max() if Qm.size else 0.0
    if rho >= 1:
        raise EstimatorError(f"closed-loop Q = A - KCA is not stable (spectral radius {rho:.6g})")
    Z = np.diag(G).copy()
    return EstimatorBundle(A.copy(), np.asarray(model.B).copy(), C.copy(), P.copy(), K, Qm, Z,
                           noise.E, noise.detector_threshold(C.shape[0]))


def build_estimator(model: StateSpaceModel, noise: NoiseSpec) -> EstimatorBundle:
    return kalman_gain(solve_riccati(model, noise), model, noise)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def noise_rng(seed, *stream) -> np.random.Generator:
    """Counter-based generator keyed by (seed, *stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True)
class Trajectory:
    """Arrays indexed by step k = 0..H. Attacked arrays are None without an attack."""

    x: np.ndarray
    y: np.ndarray
    xhat: np.ndarray
    z: np.ndarray
    g: np.ndarray
    alarm: np.ndarray
    x_att: np.ndarray | None = None
    y_att: np.ndarray | None = None
    xhat_att: np.ndarray | None = None
    z_att: np.ndarray | None = None
    g_att: np.ndarray | None = None
    alarm_att: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.x.shape[0] - 1

    @property
    def error(self) -> np.ndarray:
        return self.x - self.xhat

    @property
    def error_att(self) -> np.ndarray | None:
        return None if self.xhat_att is None else self.x_att - self.xhat_att


def _input_sequence(inputs, horizon, p):
    if inputs is None:
        return np.zeros((horizon + 1, p))
    if callable(inputs):
        u = np.array([inputs(k) for k in range(horizon + 1)], dtype=float)
    else:
        u = np.asarray(inputs, dtype=float)
        if u.ndim == 1:
            u = np.broadcast_to(u, (horizon + 1, p))
    if u.shape != (horizon + 1, p):
        raise EstimatorError(f"inputs must have shape ({horizon + 1}, {p}), got {u.shape}")
    return u


def simulate(bundle: EstimatorBundle, noise: NoiseSpec, horizon: int, inputs=None,
             attack: np.ndarray | None = None, rng: np.random.Generator | None = None,
             record_states: bool = True) -> Trajectory:
    """Run truth and fixed-gain filter for k = 0..horizon.

    The attack is an impulse y^a added to the measurement at k = 1. Attacked
    and clean filters see the same truth and the same noise draws, so their
    difference is exactly the linear deviation response. The residue at step
    k is y(k) - C(A xhat(k-1|k-1) + B u(k-1)), u(-1) = u(0).
    """
    if horizon < 1:
        raise EstimatorError("horizon must be >= 1")
    A, B, C, K = bundle.A, bundle.B, bundle.C, bundle.K
    n, m = bundle.n_states, bundle.n_sensors
    u = _input_sequence(inputs, horizon, B.shape[1])
    if attack is not None:
        attack = np.asarray(attack, dtype=float)
        if attack.shape != (m,):
            raise EstimatorError(f"attack vector must have length {m}")
    if rng is None:
        rng = noise_rng(noise.seed)
    sq_phi, sq_omega = np.sqrt(noise.phi), np.sqrt(noise.omega)
    Zinv = 1.0 / bundle.Z

    H = horizon + 1
    X = np.zeros((H, n))
    Y = np.zeros((H, m))
    XH = np.zeros((H, n))
    Zs = np.zeros((H, m))
    G = np.zeros(H)
    x = np.sqrt(noise.psi) * rng.standard_normal(n)
    X[0] = x
    Y[0] = C @ x + sq_omega * rng.standard_normal(m)
    XH[0] = x
    with_att = attack is not None
    if with_att:
        XHa, Za, Ga = XH.copy(), np.zeros((H, m)), np.zeros(H)
        Ya = Y.copy()

    xh = x.copy()
    xha = x.copy()
    u_prev = u[0]
    for k in range(1, H):
        x = A @ x + B @ u_prev + sq_phi * rng.standard_normal(n)
        y = C @ x + sq_omega * rng.standard_normal(m)
        pred = A @ xh + B @ u_prev
        z = y - C @ pred
        xh = pred + K @ z
        X[k], Y[k], XH[k], Zs[k] = x, y, xh, z
        G[k] = z @ (Zinv * z)
        if with_att:
            ya = y + attack if k == 1 else y
            pred_a = A @ xha + B @ u_prev
            za = ya - C @ pred_a
            xha = pred_a + K @ za
            Ya[k], XHa[k], Za[k] = ya, xha, za
            Ga[k] = za @ (Zinv * za)
        u_prev = u[k]

    thr = bundle.threshold
    if not with_att:
        return Trajectory(X, Y, XH, Zs, G, G > thr)
    return Trajectory(X, Y, XH, Zs, G, G > thr, X, Ya, XHa, Za, Ga, Ga > thr)


def empirical_alarm_rates(trajectories) -> tuple[np.ndarray, np.ndarray]:
    """Per-step alarm frequencies (clean, attacked) across replicas."""
    trajectories = list(trajectories)
    if not trajectories:
        raise EstimatorError("no replicas")
    clean = np.mean([t.alarm for t in trajectories], axis=0)
    att = [t.alarm_att if t.alarm_att is not None else t.alarm for t in trajectories]
    return clean, np.mean(att, axis=0)


def write_trajectory_csv(path, traj: Trajectory, labels=None) -> None:
    """step, x_*, xhat_*, z_*, g, alarm (plus attacked columns when present), 17 digits."""
    n, m = traj.x.shape[1], traj.z.shape[1]
    labels = labels or [f"s{i}" for i in range(n)]
    cols = ["step"] + [f"x[{s}]" for s in labels] + [f"xhat[{s}]" for s in labels]
    cols += [f"z[{i}]" for i in range(m)] + ["g", "alarm"]
    blocks = [traj.x, traj.xhat, traj.z, traj.g[:, None], traj.alarm[:, None].astype(float)]
    if traj.xhat_att is not None:
        cols += [f"xhat_att[{s}]" for s in labels] + [f"z_att[{i}]" for i in range(m)]
        cols += ["g_att", "alarm_att"]
        blocks += [traj.xhat_att, traj.z_att, traj.g_att[:, None], traj.alarm_att[:, None].astype(float)]
    data = np.hstack(blocks)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for k, row in enumerate(data):
            fh.write(f"{k}," + ",".join(f"{v:.17g}" for v in row) + "\n")
