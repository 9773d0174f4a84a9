"""Worst-case impulse attacks on the steady-state Kalman filter.

An impulse y^a injected at k = 1 shifts the estimation error by
de(1) = -K y^a, de(k+1) = Q de(k), and the residue by dz(1) = y^a,
dz(k) = -CAQ^(k-2)K y^a. Its cost is q(k) = de' E de and its detectability
is D(k) = sqrt(dz' S dz). The worst alpha-feasible attack on a sensor set
maximizes max(y'R1y, y'R2y) subject to max_i y'P_iy <= alpha^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .errors import AttackError
from .estimator import EstimatorBundle, noise_rng
from .model import ClusterIndex

EPS_RIDGE = 1e-12


@dataclass(frozen=True)
class AttackInjection:
    clusters: tuple[int, ...]
    vector: np.ndarray
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise AttackError("alpha must be > 0")


@dataclass(frozen=True)
class ImpactMatrices:
    R1: np.ndarray
    R2: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    P3: np.ndarray

    @classmethod
    def from_bundle(cls, b: EstimatorBundle) -> "ImpactMatrices":
        K, Q, E, S = b.K, b.Q, b.E, b.S
        CAK = b.C @ b.A @ K
        CAQK = b.C @ b.A @ Q @ K
        QK = Q @ K

        def sym(M):
            return 0.5 * (M + M.T)

        return cls(sym(K.T @ E @ K), sym(QK.T @ E @ QK), S.copy(),
                   sym(CAK.T @ S @ CAK), sym(CAQK.T @ S @ CAQK))

    @property
    def objectives(self):
        return (self.R1, self.R2)

    @property
    def constraints(self):
        return (self.P1, self.P2, self.P3)

    def restrict(self, idx) -> "ImpactMatrices":
        ix = np.ix_(idx, idx)
        return ImpactMatrices(self.R1[ix], self.R2[ix], self.P1[ix], self.P2[ix], self.P3[ix])


@dataclass(frozen=True)
class DeviationResponse:
    """Sequences indexed by step k = 0..H (k = 0 is before the attack)."""

    de: np.ndarray
    dz: np.ndarray
    q: np.ndarray
    D: np.ndarray


def deviation_response(bundle: EstimatorBundle, ya, horizon: int) -> DeviationResponse:
    ya = np.asarray(ya, dtype=float)
    n, m = bundle.n_states, bundle.n_sensors
    if ya.shape != (m,):
        raise AttackError(f"attack vector must have length {m}")
    if horizon < 1:
        raise AttackError("horizon must be >= 1")
    de = np.zeros((horizon + 1, n))
    dz = np.zeros((horizon + 1, m))
    CA = bundle.C @ bundle.A
    de[1] = -bundle.K @ ya
    dz[1] = ya
    for k in range(2, horizon + 1):
        dz[k] = CA @ de[k - 1]      # -CA Q^(k-2) K y^a
        de[k] = bundle.Q @ de[k - 1]
    q = np.einsum("ki,i,ki->k", de, np.diag(bundle.E), de)
    D = np.sqrt(np.einsum("ki,i,ki->k", dz, 0.5 / bundle.Z, dz))
    return DeviationResponse(de, dz, q, D)


def max_ced_impulse(bundle: EstimatorBundle, ya, impact: ImpactMatrices | None = None) -> float:
    impact = impact or ImpactMatrices.from_bundle(bundle)
    ya = np.asarray(ya, dtype=float)
    return float(max(ya @ impact.R1 @ ya, ya @ impact.R2 @ ya))


def max_kl_impulse(bundle: EstimatorBundle, ya, impact: ImpactMatrices | None = None) -> float:
    impact = impact or ImpactMatrices.from_bundle(bundle)
    ya = np.asarray(ya, dtype=float)
    return float(np.sqrt(max(max(ya @ P @ ya, 0.0) for P in impact.constraints)))


# ---------------------------------------------------------------------------
# QCQP: maximize max_j y'R_jy  s.t.  max_i y'P_iy <= alpha^2
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QcqpCertificate:
    vector: np.ndarray                 # full-length attack vector (m,)
    value: float
    objective_id: int                  # 1 or 2 (0 when degenerate)
    active_constraint: int             # 1, 2 or 3 (0 when degenerate)
    constraint_values: tuple[float, ...]
    upper_bound: float
    alpha: float

    @property
    def gap(self) -> float:
        if self.upper_bound == 0:
            return 0.0
        return (self.upper_bound - self.value) / self.upper_bound

    @property
    def degenerate(self) -> bool:
        return self.objective_id == 0

    def boundary_active(self, rtol: float = 1e-6) -> bool:
        a2 = self.alpha ** 2
        top = max(self.constraint_values)
        return a2 * (1 - rtol) <= top <= a2 * (1 + 1e-12)


def _ratio(y, R, Ps):
    den = max(y @ P @ y for P in Ps)
    return (y @ R @ y) / den if den > 0 else np.inf


def _gen_top(R, M):
    """Top generalized eigenpair of (R, M); M is ridged to stay definite."""
    d = R.shape[0]
    scale = max(np.abs(M).max(), 1.0)
    w, V = linalg.eigh(R, M + EPS_RIDGE * scale * np.eye(d))
    return w[-1], V[:, -1]


def _simplex_points(steps):
    """Regular grid on the 2-simplex."""
    return np.array([(i / steps, j / steps, (steps - i - j) / steps)
                     for i in range(steps + 1) for j in range(steps + 1 - i)])


def _dual_bound(R, Ps, grid_steps=12):
    """min over the simplex of lambda_max(R, sum lambda_i P_i).

    Any feasible y has sum lambda_i y'P_iy <= 1, so each value bounds the
    normalized objective from above; the function is convex in lambda.
    Returns (bound, lambda, eigenvectors seen on the grid).
    """
    def ceiling(lam):
        lam = np.clip(lam, 0, None)
        s = lam.sum()
        if s <= 0:
            return np.inf, None
        lam = lam / s
        if lam[0] < 1e-9:
            # P2/P3 can be singular; keep a sliver of the definite P1
            lam = lam * (1 - 1e-9) + np.array([1e-9, 0, 0])
        M = sum(l * P for l, P in zip(lam, Ps))
        return _gen_top(R, M)

    grid = _simplex_points(grid_steps)
    vals, vecs = [], []
    for lam in grid:
        v, vec = ceiling(lam)
        vals.append(v)
        vecs.append(vec)
    vals = np.array(vals)
    best = int(np.argmin(vals))

    def f(t):
        lam = np.array([t[0], t[1], 1 - t[0] - t[1]])
        if np.any(lam < -1e-12):
            return vals[best] * 10 + 1
        return ceiling(lam)[0]

    x0 = grid[best][:2]
    res = optimize.minimize(f, x0, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-14 * max(abs(vals[best]), 1e-300),
                                     "maxiter": 400})
    lam = np.array([res.x[0], res.x[1], 1 - res.x[0] - res.x[1]])
    ub = min(float(res.fun), float(vals[best]))
    if res.fun > vals[best]:
        lam = grid[best]
    _, vec = ceiling(lam)
    vecs.append(vec)
    return ub, lam, vecs


def _projected_ascent(y, R, Ps, iters=500):
    """Step along the gradient of the ratio w.r.t. the active constraint,
    renormalize to the boundary, halve the step on any non-improving move."""
    y = y / np.sqrt(max(y @ P @ y for P in Ps))
    f = _ratio(y, R, Ps)
    step = 1.0
    for _ in range(iters):
        cs = [y @ P @ y for P in Ps]
        i = int(np.argmax(cs))
        grad = 2 * (R @ y - f * (Ps[i] @ y))
        gn = np.linalg.norm(grad)
        if gn == 0:
            break
        cand = y + step * grad / gn * np.linalg.norm(y)
        den = max(cand @ P @ cand for P in Ps)
        if den <= 0:
            step *= 0.5
            continue
        cand = cand / np.sqrt(den)
        fc = _ratio(cand, R, Ps)
        if fc > f * (1 + 1e-15):
            y, f = cand, fc
            step = min(step * 1.5, 1.0)
        else:
            step *= 0.5
            if step < 1e-12:
                break
    return y, f


def _smooth_polish(y, R, Ps):
    """Maximize log(y'Ry) - log ||(y'P_iy)_i||_p for growing p (a smooth
    surrogate of the max that also walks along constraint ridges)."""
    def neg(yv, p):
        r = yv @ R @ yv
        cs = np.array([yv @ P @ yv for P in Ps])
        cmax = cs.max()
        if r <= 0 or cmax <= 0:
            return 0.0, np.zeros_like(yv)
        t = (cs / cmax) ** p
        w = t / t.sum()
        val = np.log(r) - np.log(cmax) - np.log(t.sum()) / p
        g = 2 * R @ yv / r - sum(wi * 2 * (P @ yv) / ci for wi, P, ci in zip(w, Ps, cs) if ci > 0)
        return -val, -g

    best_y, best_f = y, _ratio(y, R, Ps)
    cur = y
    for p in (4.0, 16.0, 64.0, 256.0, 1024.0):
        res = optimize.minimize(neg, cur, args=(p,), jac=True, method="L-BFGS-B",
                                options={"maxiter": 300, "gtol": 1e-12, "ftol": 1e-15})
        cur = res.x / np.linalg.norm(res.x)
        f = _ratio(cur, R, Ps)
        if f > best_f:
            best_y, best_f = cur, f
    return best_y, best_f


def _solve_direction(R, Ps, rng, n_random=32, n_refine=6):
    """Best ratio y'Ry / max_i y'P_iy found from structured and random starts."""
    d = R.shape[0]
    cands = []
    for P in Ps:
        cands.append(_gen_top(R, P)[1])
    ub, _, dual_vecs = _dual_bound(R, Ps)
    cands += [v for v in dual_vecs if v is not None]
    cands += list(np.eye(d))
    cands += list(rng.standard_normal((n_random, d)))

    scored = []
    for v in cands:
        if not np.all(np.isfinite(v)) or not np.any(v):
            continue
        scored.append((_ratio(v, R, Ps), v))
    scored.sort(key=lambda t: -t[0])

    best_y, best_f = scored[0][1], scored[0][0]
    picked = []
    for f, v in scored:
        vn = v / np.linalg.norm(v)
        if any(abs(vn @ u) > 1 - 1e-6 for u in picked):
            continue
        picked.append(vn)
        y, fy = _projected_ascent(vn, R, Ps)
        y, fy = _smooth_polish(y, R, Ps)
        if fy > best_f:
            best_y, best_f = y, fy
        if len(picked) >= n_refine:
            break
    return best_y, best_f, ub


def solve_max_ced(bundle: EstimatorBundle, sensors, alpha: float,
                  impact: ImpactMatrices | None = None, seed: int = 0) -> QcqpCertificate:
    """Worst alpha-feasible impulse attack on the given sensor rows.

    Only the direction is optimized; the vector is then scaled so the
    tightest constraint sits exactly at alpha^2, which makes the result
    exactly homogeneous in alpha.
    """
    if not alpha > 0:
        raise AttackError("alpha must be > 0")
    impact = impact or ImpactMatrices.from_bundle(bundle)
    m = bundle.n_sensors
    idx = np.unique(np.asarray(list(sensors), dtype=int))
    if idx.size and (idx.min() < 0 or idx.max() >= m):
        raise AttackError("sensor index out of range")
    a2 = alpha ** 2
    if idx.size == 0:
        return QcqpCertificate(np.zeros(m), 0.0, 0, 0, (0.0, 0.0, 0.0), 0.0, alpha)

    sub = impact.restrict(idx)
    Ps = sub.constraints
    rng = noise_rng(seed, *idx[:8].tolist(), idx.size)
    best_y, best_f, ub = None, -1.0, 0.0
    for R in sub.objectives:
        if not np.any(R):
            y, f, b = np.eye(idx.size)[0], 0.0, 0.0
        elif idx.size == 1:
            y = np.ones(1)
            f = b = _ratio(y, R, Ps)
        else:
            y, f, b = _solve_direction(R, Ps, rng)
        ub = max(ub, b, f)
        if f > best_f * (1 + 1e-12):
            best_y, best_f = y, f
    y, f = best_y, best_f
    if f <= 0:
        return QcqpCertificate(np.zeros(m), 0.0, 0, 0, (0.0, 0.0, 0.0), 0.0, alpha)

    # scale to the boundary, then re-evaluate the exact objective
    y = y * alpha / np.sqrt(max(y @ P @ y for P in Ps))
    full = np.zeros(m)
    full[idx] = y
    vals = tuple(float(full @ P @ full) for P in impact.constraints)
    objs = (float(full @ impact.R1 @ full), float(full @ impact.R2 @ full))
    value = max(objs)
    obj_id = 1 if objs[0] >= objs[1] * (1 - 1e-12) else 2
    active = int(np.argmax(vals)) + 1
    return QcqpCertificate(full, value, obj_id, active, vals, max(a2 * ub, value), alpha)


def dual_upper_bound(bundle: EstimatorBundle, sensors, alpha: float,
                     impact: ImpactMatrices | None = None) -> float:
    """Upper bound on the QCQP value over both objectives."""
    impact = impact or ImpactMatrices.from_bundle(bundle)
    idx = np.unique(np.asarray(list(sensors), dtype=int))
    if idx.size == 0:
        return 0.0
    sub = impact.restrict(idx)
    return alpha ** 2 * max(_dual_bound(R, sub.constraints)[0] for R in sub.objectives)


def boundary_samples(bundle: EstimatorBundle, sensors, alpha: float, n: int, seed: int = 0,
                     impact: ImpactMatrices | None = None, chunk: int = 100_000) -> float:
    """Best objective over n random directions scaled onto the constraint boundary."""
    impact = impact or ImpactMatrices.from_bundle(bundle)
    idx = np.unique(np.asarray(list(sensors), dtype=int))
    if idx.size == 0:
        return 0.0
    sub = impact.restrict(idx)
    rng = noise_rng(seed, 7919, idx.size)
    best = 0.0
    done = 0
    while done < n:
        b = min(chunk, n - done)
        Y = rng.standard_normal((b, idx.size))
        den = np.max([np.einsum("bi,ij,bj->b", Y, P, Y) for P in sub.constraints], axis=0)
        num = np.max([np.einsum("bi,ij,bj->b", Y, R, Y) for R in sub.objectives], axis=0)
        ok = den > 0
        if ok.any():
            best = max(best, float((num[ok] / den[ok]).max()))
        done += b
    return alpha ** 2 * best


# ---------------------------------------------------------------------------
# cluster valuation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterValuation:
    ids: tuple[str, ...]
    infrastructure: tuple[str, ...]
    phi_raw: np.ndarray
    phi_norm: np.ndarray
    certificates: tuple[QcqpCertificate, ...]
    alpha: float

    @property
    def total(self) -> float:
        return float(self.phi_raw.sum())

    @property
    def n_clusters(self) -> int:
        return len(self.ids)

    def kappa(self, subset) -> float:
        """Share of value held by clusters whose infrastructure is in subset."""
        mask = np.isin(np.array(self.infrastructure), list(subset))
        return float(self.phi_raw[mask].sum() / self.total)

    def mask(self, subset) -> np.ndarray:
        return np.isin(np.array(self.infrastructure), list(subset))


def value_clusters(bundle: EstimatorBundle, index: ClusterIndex, alpha: float,
                   impact: ImpactMatrices | None = None, seed: int = 0) -> ClusterValuation:
    impact = impact or ImpactMatrices.from_bundle(bundle)
    certs = []
    for c in range(index.n_clusters):
        if len(index.rows[c]) == 0:
            raise AttackError(f"cluster {index.ids[c]!r} is empty")
        certs.append(solve_max_ced(bundle, index.rows[c], alpha, impact, seed=seed))
    raw = np.array([c.value for c in certs])
    total = raw.sum()
    if not total > 0:
        raise AttackError("every cluster has zero value; scenario is degenerate")
    return ClusterValuation(index.ids, index.infrastructure, raw, raw / total, tuple(certs), alpha)
