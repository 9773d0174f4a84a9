"""General Lotto / Colonel Blotto equilibria over sensor clusters.

Each SC is an all-pay contest: the larger allocation wins its value, a tie
splits it. Under the Lotto relaxation budgets bind in expectation and the
equilibrium marginals are the two-player all-pay-auction laws with prize
values phi_i / zeta for Lagrange multipliers zeta^a, zeta^d.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import GameError

DELTA = 1e-9          # relative tick for "just outbid"
DP_TICKS = 10_000


@dataclass(frozen=True)
class MarginalDistribution:
    """Atom at 0 plus a uniform part on (0, support]."""

    atom: float
    support: float
    value: float
    owner: str

    def __post_init__(self):
        if not 0 <= self.atom <= 1:
            raise GameError(f"atom mass {self.atom} outside [0, 1]")
        if self.support < 0:
            raise GameError("support bound must be >= 0")
        if self.support == 0 and self.atom < 1:
            raise GameError("zero support requires a unit atom")

    @property
    def density(self) -> float:
        return (1 - self.atom) / self.support if self.support > 0 else 0.0

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.support == 0:
            return np.where(x >= 0, 1.0, 0.0)
        inside = self.atom + (1 - self.atom) * np.clip(x, 0, self.support) / self.support
        return np.where(x < 0, 0.0, inside)

    def mean(self) -> float:
        return (1 - self.atom) * self.support / 2

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        return _inverse_cdf(u, self.atom, self.support)


def _inverse_cdf(u, atom, support):
    atom = np.asarray(atom, dtype=float)
    support = np.asarray(support, dtype=float)
    cont = np.maximum(1 - atom, 1e-300)
    return np.where(u < atom, 0.0, support * (u - atom) / cont)


@dataclass(frozen=True)
class BlottoVerdict:
    valid: bool
    reason: str
    grid_exponent: int
    iota: np.ndarray
    max_iota: int

    @property
    def label(self) -> str:
        return "Blotto-valid" if self.valid else "Lotto-only"


@dataclass(frozen=True)
class EquilibriumProfile:
    kind: str                      # symmetric | lotto | single-ci
    R_a: float
    R_d: float
    values_a: np.ndarray
    values_d: np.ndarray
    zeta_a: float
    zeta_d: float
    attacker: tuple[MarginalDistribution, ...]
    defender: tuple[MarginalDistribution, ...]
    U_a: float
    U_d: float
    phi_total: float = 1.0
    verdict: BlottoVerdict | None = None

    @property
    def mu(self) -> float:
        return self.zeta_a / self.zeta_d

    @property
    def n(self) -> int:
        return len(self.attacker)

    @property
    def Pi(self) -> float:
        """Expected CED in raw units."""
        return self.U_a * self.phi_total

    def atoms(self, player: str) -> np.ndarray:
        return np.array([d.atom for d in self.marginals(player)])

    def supports(self, player: str) -> np.ndarray:
        return np.array([d.support for d in self.marginals(player)])

    def marginals(self, player: str):
        if player == "attacker":
            return self.attacker
        if player == "defender":
            return self.defender
        raise GameError(f"unknown player {player!r}")

    def expected_spend(self, player: str) -> float:
        return float(sum(d.mean() for d in self.marginals(player)))


def _check_budgets(R_a, R_d):
    if not (R_a > 0 and R_d > 0):
        raise GameError("budgets must be > 0")
    if R_a > R_d:
        raise GameError(f"attacker budget {R_a} exceeds defender budget {R_d}; only R^a <= R^d is solved")


def _values(phi, name="values"):
    phi = np.asarray(phi, dtype=float).ravel()
    if phi.size == 0:
        raise GameError(f"{name} must be nonempty")
    if np.any(phi < 0) or not np.all(np.isfinite(phi)):
        raise GameError(f"{name} must be finite and >= 0")
    return phi


def _contest(v_a, v_d, phi_a, phi_d):
    """All-pay marginals for prize values v_a, v_d; returns (Fa, Fd, P(a wins))."""
    if v_a > v_d:
        Fa = MarginalDistribution(0.0, v_d, phi_a, "attacker")
        Fd = MarginalDistribution((v_a - v_d) / v_a, v_d, phi_d, "defender")
        p_a = 1 - v_d / (2 * v_a)
    else:
        Fa = MarginalDistribution((v_d - v_a) / v_d, v_a, phi_a, "attacker")
        Fd = MarginalDistribution(0.0, v_a, phi_d, "defender")
        p_a = v_a / (2 * v_d)
    return Fa, Fd, p_a


def solve_symmetric_msne(phi, R_a: float, R_d: float, phi_total: float = 1.0) -> EquilibriumProfile:
    phi = _values(phi)
    _check_budgets(R_a, R_d)
    atom = 1 - R_a / R_d
    att = tuple(MarginalDistribution(atom, 2 * p * R_d, p, "attacker") if p > 0
                else MarginalDistribution(1.0, 0.0, p, "attacker") for p in phi)
    dfd = tuple(MarginalDistribution(0.0, 2 * p * R_d, p, "defender") if p > 0
                else MarginalDistribution(1.0, 0.0, p, "defender") for p in phi)
    if abs(phi.sum() - 1) > 1e-9:
        raise GameError(f"symmetric values must be normalized (sum {phi.sum():.12g})")
    U_a = R_a / (2 * R_d)
    return EquilibriumProfile("symmetric", R_a, R_d, phi, phi, 1 / (2 * R_d), R_a / (2 * R_d ** 2),
                              att, dfd, U_a, 1 - U_a, phi_total)


def _lotto_brackets(mu, ra, rd):
    """Budget brackets (attacker, defender) per unit 1/zeta^d."""
    ratio = ra / rd
    strong = ratio > mu
    Wa = np.sum(rd[strong]) / 2 + np.sum(ra[~strong] ** 2 / rd[~strong]) / (2 * mu ** 2)
    Wd = mu * np.sum(rd[strong] ** 2 / ra[strong]) / 2 + np.sum(ra[~strong]) / (2 * mu)
    return Wa, Wd


def _solve_mu(phi_a, phi_d, rho):
    """mu with Wa(mu) / Wd(mu) = rho, solved exactly per piece of Omega_a(mu)."""
    ratio = phi_a / phi_d
    breaks = np.unique(ratio)
    edges = np.concatenate([[0.0], breaks, [np.inf]])

    tried = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        probe = lo if lo > 0 else (hi / 2 if np.isfinite(hi) else 1.0)
        strong = ratio > probe
        a1 = phi_d[strong].sum() / 2
        d1 = (phi_d[strong] ** 2 / phi_a[strong]).sum() / 2
        a2 = (phi_a[~strong] ** 2 / phi_d[~strong]).sum() / 2
        d2 = phi_a[~strong].sum() / 2
        # rho d1 mu^3 - a1 mu^2 + rho d2 mu - a2 = 0
        coeffs = np.array([rho * d1, -a1, rho * d2, -a2])
        roots = np.roots(coeffs) if np.any(coeffs) else np.array([])
        tried.append((lo, hi))
        # with near-zero values the cubic can carry extra roots that diverge as
        # the values vanish; the smallest consistent one is the limiting solution
        for r in sorted(roots, key=lambda c: c.real):
            if abs(r.imag) > 1e-9 * max(1.0, abs(r.real)):
                continue
            mu = float(r.real)
            if not (mu > 0 and lo * (1 - 1e-12) <= mu <= hi * (1 + 1e-12)):
                continue
            for _ in range(3):
                f = ((rho * d1 * mu - a1) * mu + rho * d2) * mu - a2
                df = (3 * rho * d1 * mu - 2 * a1) * mu + rho * d2
                if df == 0:
                    break
                mu_new = mu - f / df
                if not mu_new > 0:
                    break
                mu = mu_new
            return mu
    raise GameError(f"no consistent multiplier piece found; pieces tried: {tried[:3]}...{tried[-2:]}")


def solve_general_lotto(phi_a, phi_d, R_a: float, R_d: float, phi_total: float = 1.0) -> EquilibriumProfile:
    phi_a = _values(phi_a, "attacker values")
    phi_d = _values(phi_d, "defender values")
    if phi_a.shape != phi_d.shape:
        raise GameError("value vectors differ in length")
    if np.any(phi_a <= 0) or np.any(phi_d <= 0):
        raise GameError("general Lotto needs strictly positive values")
    _check_budgets(R_a, R_d)
    mu = _solve_mu(phi_a, phi_d, R_a / R_d)
    Wa, _ = _lotto_brackets(mu, phi_a, phi_d)
    zeta_d = Wa / R_a
    zeta_a = mu * zeta_d
    att, dfd, win = [], [], []
    for pa, pd in zip(phi_a, phi_d):
        Fa, Fd, p = _contest(pa / zeta_a, pd / zeta_d, pa, pd)
        att.append(Fa)
        dfd.append(Fd)
        win.append(p)
    win = np.array(win)
    U_a = float(phi_a @ win)
    U_d = float(phi_d @ (1 - win))
    return EquilibriumProfile("lotto", R_a, R_d, phi_a, phi_d, zeta_a, zeta_d, tuple(att), tuple(dfd),
                              U_a, U_d, phi_total)


def single_ci_defense_ced(phi_raw, defended_mask, R_a: float, R_d: float):
    """Expected CED when the defender protects only the masked SCs.

    Returns (Pi_bar, kappa, profile). Inside the defended set both players
    play the symmetric equilibrium rescaled by 1/kappa; outside it both
    place a point mass at 0 and the tie splits each SC value.
    """
    phi_raw = _values(phi_raw)
    mask = np.asarray(defended_mask, dtype=bool)
    if mask.shape != phi_raw.shape:
        raise GameError("defended mask length differs from value vector")
    if not mask.any():
        raise GameError("defended subset must be nonempty")
    _check_budgets(R_a, R_d)
    total = phi_raw.sum()
    if not total > 0:
        raise GameError("total value is zero")
    phi = phi_raw / total
    kappa = float(phi[mask].sum())
    if not kappa > 0:
        raise GameError("defended subset holds zero value")
    rho = R_a / R_d
    att, dfd = [], []
    for p, inside in zip(phi, mask):
        if inside and p > 0:
            sup = 2 * p * R_d / kappa
            att.append(MarginalDistribution(1 - rho, sup, p, "attacker"))
            dfd.append(MarginalDistribution(0.0, sup, p, "defender"))
        else:
            att.append(MarginalDistribution(1.0, 0.0, p, "attacker"))
            dfd.append(MarginalDistribution(1.0, 0.0, p, "defender"))
    U_a = rho * kappa / 2 + (1 - kappa) / 2
    profile = EquilibriumProfile("single-ci", R_a, R_d, phi, np.where(mask, phi / kappa, 0.0),
                                 kappa / (2 * R_d), rho * kappa / (2 * R_d ** 2), tuple(att), tuple(dfd),
                                 U_a, 1 - U_a, total)
    return U_a * total, kappa, profile


def check_blotto_applicability(phi, R_a: float, R_d: float, rel_err: float = 1e-3,
                               max_exponent: int = 15) -> BlottoVerdict:
    """Value bound plus the integer-multiple condition on a decimal grid."""
    phi = _values(phi)
    N = phi.size
    bound = R_a / (2 * R_d)
    pos = phi[phi > 0]
    for q in range(1, max_exponent + 1):
        g = 10.0 ** -q
        iota = np.rint(phi / g).astype(np.int64)
        if pos.size == 0 or np.all(np.abs(iota[phi > 0] * g - pos) < rel_err * pos):
            break
    max_iota = int(iota.max())
    if np.any(phi >= bound):
        i = int(np.argmax(phi))
        return BlottoVerdict(False, f"value bound fails: phi[{i}]={phi[i]:.6g} >= R^a/(2R^d)={bound:.6g}",
                             q, iota, max_iota)
    if max_iota >= 2 ** N:
        return BlottoVerdict(False, f"integer-multiple bound fails: max iota {max_iota} >= 2^{N}",
                             q, iota, max_iota)
    return BlottoVerdict(True, f"phi_i < {bound:.6g} and max iota {max_iota} < 2^{N}", q, iota, max_iota)


def with_verdict(profile: EquilibriumProfile, verdict: BlottoVerdict) -> EquilibriumProfile:
    return replace(profile, verdict=verdict)


# ---------------------------------------------------------------------------
# play
# ---------------------------------------------------------------------------

def sample_allocation(profile: EquilibriumProfile, player: str, rng: np.random.Generator,
                      size=None, enforce_budget: bool = False) -> np.ndarray:
    """Independent draws from the marginals; shape (N,) or (size, N).

    With ``enforce_budget`` a draw whose total exceeds the budget is scaled
    down onto it; draws under budget are left alone.
    """
    atom = profile.atoms(player)
    sup = profile.supports(player)
    shape = (profile.n,) if size is None else (size, profile.n)
    r = _inverse_cdf(rng.random(shape), atom, sup)
    if enforce_budget:
        budget = profile.R_a if player == "attacker" else profile.R_d
        tot = r.sum(axis=-1, keepdims=True)
        scale = np.where(tot > budget, budget / np.where(tot > 0, tot, 1.0), 1.0)
        r = r * scale
    return r


@dataclass(frozen=True)
class MatchOutcome:
    u_a: np.ndarray | float
    u_d: np.ndarray | float
    winners: np.ndarray        # +1 attacker, -1 defender, 0 tie


def match_payoff(r_a, r_d, phi) -> MatchOutcome:
    """Per-SC contest; works on single allocations or stacked rows."""
    r_a = np.asarray(r_a, dtype=float)
    r_d = np.asarray(r_d, dtype=float)
    phi = np.asarray(phi, dtype=float)
    winners = np.sign(r_a - r_d).astype(int)
    u_a = ((winners > 0) * phi).sum(axis=-1) + 0.5 * ((winners == 0) * phi).sum(axis=-1)
    u_d = ((winners < 0) * phi).sum(axis=-1) + 0.5 * ((winners == 0) * phi).sum(axis=-1)
    if u_a.ndim == 0:
        u_a, u_d = float(u_a), float(u_d)
    return MatchOutcome(u_a, u_d, winners)


@dataclass(frozen=True)
class BestResponse:
    allocation: np.ndarray
    won: np.ndarray
    utility: float
    solver: str


def _better(v1, c1, v2, c2, tol=1e-15):
    return v1 > v2 + tol or (abs(v1 - v2) <= tol and c1 > c2)


def best_response(opponent, phi, budget: float, ticks: int = DP_TICKS) -> BestResponse:
    """Pure allocation maximizing value won against a fixed opponent.

    Winning SC i costs opponent_i + delta and nothing less earns credit, so
    this is a 0/1 knapsack. SCs the opponent leaves empty already yield a
    half-value tie at zero cost. The budget-grid DP (ceil weights, so always
    feasible) is the reference; greedy by value/cost runs alongside and the
    better of the two is returned, ties going to the one winning more SCs.
    """
    opp = np.asarray(opponent, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if opp.shape != phi.shape:
        raise GameError("opponent allocation and values differ in length")
    if budget < 0:
        raise GameError("budget must be >= 0")
    N = phi.size
    base = 0.5 * phi[opp == 0].sum()
    gain = np.where(opp == 0, 0.5 * phi, phi)
    delta = DELTA * max(budget, opp.max(initial=0.0), 1e-300)
    cost = opp + delta
    usable = (cost <= budget) & (gain > 0)

    def pack(sel):
        alloc = np.where(sel, cost, 0.0)
        return alloc, float(base + gain[sel].sum()), int(sel.sum())

    if budget == 0 or not usable.any():
        alloc = np.zeros(N)
        return BestResponse(alloc, np.zeros(N, bool), base, "trivial")

    # greedy
    order = sorted(np.flatnonzero(usable), key=lambda i: (-gain[i] / cost[i], cost[i], i))
    sel_g = np.zeros(N, bool)
    spent = 0.0
    for i in order:
        if spent + cost[i] <= budget:
            sel_g[i] = True
            spent += cost[i]
    # DP on the tick grid
    tick = budget / ticks
    w = np.ceil(cost / tick - 1e-12).astype(np.int64)
    val = np.zeros(ticks + 1)
    cnt = np.zeros(ticks + 1, dtype=np.int64)
    keep = np.zeros((N, ticks + 1), dtype=bool)
    for i in np.flatnonzero(usable & (w <= ticks)):
        wi = max(int(w[i]), 0)
        cand_v = np.full(ticks + 1, -np.inf)
        cand_c = np.zeros(ticks + 1, dtype=np.int64)
        cand_v[wi:] = val[:ticks + 1 - wi] + gain[i]
        cand_c[wi:] = cnt[:ticks + 1 - wi] + 1
        take = (cand_v > val + 1e-15) | ((np.abs(cand_v - val) <= 1e-15) & (cand_c > cnt))
        keep[i] = take
        val = np.where(take, cand_v, val)
        cnt = np.where(take, cand_c, cnt)
    sel_d = np.zeros(N, bool)
    t = ticks
    for i in range(N - 1, -1, -1):
        if keep[i, t]:
            sel_d[i] = True
            t -= max(int(w[i]), 0)

    ag, vg, cg = pack(sel_g)
    ad, vd, cd = pack(sel_d)
    if _better(vg, cg, vd, cd):
        return BestResponse(ag, sel_g, vg, "greedy")
    return BestResponse(ad, sel_d, vd, "dp")


def proportional_allocation(phi, budget: float) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return phi / phi.sum() * budget


def exact_ratio(Ra1, Rd1, Ra2, Rd2) -> float:
    """(Ra1/Rd1) / (Ra2/Rd2) computed as one quotient of products."""
    return (Ra1 * Rd2) / (Rd1 * Ra2)


__all__ = [
    "MarginalDistribution", "BlottoVerdict", "EquilibriumProfile", "MatchOutcome", "BestResponse",
    "solve_symmetric_msne", "solve_general_lotto", "single_ci_defense_ced",
    "check_blotto_applicability", "with_verdict", "sample_allocation", "match_payoff",
    "best_response", "proportional_allocation", "exact_ratio",
]
