"""End-to-end runs: scenario -> model -> estimator -> valuation -> game -> Monte Carlo."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import attack as atk
from . import blotto
from .errors import IciError, ScenarioError
from .estimator import EstimatorBundle, NoiseSpec, build_estimator, noise_rng, simulate
from .model import (ClusterIndex, CouplingMap, NetworkCI, PowerCI, StateSpaceModel, assemble_ici,
                    build_gas_ci, build_power_ci, build_sensor_matrix, build_water_ci, discretize,
                    state_infrastructure)
from .scenario import CI_NAMES, GameConfig, ScenarioConfig, noise_vector, parse_subset

# stream ids for derived generators
_ATTACKER, _DEFENDER, _KALMAN = 1, 2, 3


@dataclass(frozen=True)
class System:
    config: ScenarioConfig
    power: PowerCI
    gas: NetworkCI
    water: NetworkCI
    coupling: CouplingMap
    continuous: StateSpaceModel
    discrete: StateSpaceModel
    index: ClusterIndex
    noise: NoiseSpec
    bundle: EstimatorBundle
    impact: atk.ImpactMatrices

    def inputs(self, k: int) -> np.ndarray:
        """Exogenous input vector u(k) from the piecewise-constant profiles."""
        cfg = self.config
        u = np.zeros(self.continuous.n_inputs)
        labels = self.continuous.input_labels
        for gid, prof in cfg.power_demand.items():
            u[labels.index(f"Pe:{gid}")] = _at(prof, k)
        off = len(self.power.input_labels)
        for net, pipes in ((self.gas, cfg.gas_pipelines), (self.water, cfg.water_pipelines)):
            for p in pipes:
                j = next(j for j in cfg.junctions if j.id == p.to_junction)
                u[off + net.demand_ports[p.id]] = j.demand_at(k) * net.demand_fraction[p.id]
            off += len(net.input_labels)
        return u

    def input_sequence(self, horizon: int) -> np.ndarray:
        return np.array([self.inputs(k) for k in range(horizon + 1)])


def _at(prof, k):
    v = prof[0][1]
    for s, x in prof:
        if s <= k:
            v = x
    return v


def build_system(cfg: ScenarioConfig, coupled: bool = True) -> System:
    power = build_power_ci(cfg.generators, cfg.lines)
    gas = build_gas_ci(cfg.gas_pipelines, cfg.junctions)
    water = build_water_ci(cfg.water_pipelines, cfg.junctions)
    if coupled:
        c = cfg.coupling
        coupling = CouplingMap.from_links(power, gas, water, c["gas_to_generator"], c["water_to_generator"],
                                          c["compressor_to_bus"], c["pump_to_bus"])
    else:
        coupling = CouplingMap.zeros(power, gas, water)
    model = assemble_ici(power, gas, water, coupling)
    model, index = build_sensor_matrix(model, cfg.sensors)
    dmodel = discretize(model, cfg.dt)
    sensor_states = [lab.split("/", 1)[1] for lab in model.output_labels]
    nz = cfg.noise
    try:
        noise = NoiseSpec(
            psi=noise_vector(nz["psi"], model.state_labels, state_infrastructure),
            phi=noise_vector(nz["phi"], model.state_labels, state_infrastructure),
            omega=noise_vector(nz["omega"], sensor_states, state_infrastructure),
            cost=noise_vector(nz["cost"], model.state_labels, state_infrastructure),
            threshold=nz.get("threshold"), seed=cfg.game.seed)
    except IciError as exc:
        raise ScenarioError(f"noise section: {exc}") from None
    bundle = build_estimator(dmodel, noise)
    return System(cfg, power, gas, water, coupling, model, dmodel, index, noise, bundle,
                  atk.ImpactMatrices.from_bundle(bundle))


def value_system(system: System, alpha: float | None = None) -> atk.ClusterValuation:
    alpha = system.config.game.alpha if alpha is None else alpha
    return atk.value_clusters(system.bundle, system.index, alpha, system.impact)


def force_kappa(valuation: atk.ClusterValuation, subset, kappa: float) -> atk.ClusterValuation:
    """Rescale values inside ``subset`` so they hold exactly a kappa share."""
    if not 0 < kappa < 1:
        raise ScenarioError("forced kappa must lie in (0, 1)")
    mask = valuation.mask(subset)
    inside, outside = valuation.phi_raw[mask].sum(), valuation.phi_raw[~mask].sum()
    if not (inside > 0 and outside > 0):
        raise ScenarioError("subset must split the clusters into two nonempty valued parts")
    c = kappa * outside / ((1 - kappa) * inside)
    raw = np.where(mask, valuation.phi_raw * c, valuation.phi_raw)
    return replace(valuation, phi_raw=raw, phi_norm=raw / raw.sum())


# ---------------------------------------------------------------------------
# strategies and matches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Matchup:
    """Equilibrium profile plus one draw function per player."""

    profile: blotto.EquilibriumProfile
    attacker: str
    defender: str
    defended: tuple[str, ...] | None
    phi: np.ndarray
    R_a: float
    R_d: float
    enforce_budget: bool = False
    _fixed: dict = field(default_factory=dict, repr=False)

    def draw(self, player: str, rng: np.random.Generator) -> np.ndarray:
        name = self.attacker if player == "attacker" else self.defender
        if name in self._fixed.get(player, {}):
            return self._fixed[player][name]
        return blotto.sample_allocation(self.profile, player, rng, enforce_budget=self.enforce_budget)


def make_matchup(valuation: atk.ClusterValuation, R_a: float, R_d: float, attacker: str = "msne",
                 defender: str = "msne", enforce_budget: bool = False) -> Matchup:
    phi = valuation.phi_norm
    defended = None
    if defender.startswith("single-ci:"):
        defended = parse_subset(defender.split(":", 1)[1])
        mask = valuation.mask(defended)
        if mask.all():
            profile = blotto.solve_symmetric_msne(phi, R_a, R_d, valuation.total)
        else:
            _, _, profile = blotto.single_ci_defense_ced(valuation.phi_raw, mask, R_a, R_d)
    else:
        profile = blotto.solve_symmetric_msne(phi, R_a, R_d, valuation.total)
    if attacker == "best-response" and defender == "best-response":
        raise ScenarioError("at most one player can use best-response")

    def mean_alloc(name, player, budget):
        if name == "proportional":
            return blotto.proportional_allocation(phi, budget)
        return np.array([d.mean() for d in profile.marginals(player)])

    fixed = {"attacker": {}, "defender": {}}
    if attacker == "proportional":
        fixed["attacker"]["proportional"] = blotto.proportional_allocation(phi, R_a)
    if defender == "proportional":
        fixed["defender"]["proportional"] = blotto.proportional_allocation(phi, R_d)
    if attacker == "best-response":
        opp = mean_alloc(defender, "defender", R_d)
        fixed["attacker"]["best-response"] = blotto.best_response(opp, phi, R_a).allocation
    if defender == "best-response":
        opp = mean_alloc(attacker, "attacker", R_a)
        fixed["defender"]["best-response"] = blotto.best_response(opp, phi, R_d).allocation
    return Matchup(profile, attacker, defender, defended, phi, R_a, R_d, enforce_budget, fixed)


@dataclass(frozen=True)
class MatchReport:
    u_a: np.ndarray
    u_d: np.ndarray
    winners: np.ndarray            # (replicas, N): +1 attacker, -1 defender, 0 tie
    phi_total: float
    max_q: np.ndarray              # realized max_k q(k) per replica (nan when not simulated)
    q_joint: np.ndarray            # jointly solved value for the compromised set
    mean_abs_error: dict = field(default_factory=dict)      # tracked label -> (clean, attacked) per step

    @property
    def replicas(self) -> int:
        return self.u_a.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.winners.shape[1] if self.winners.ndim == 2 else 0

    @property
    def compromised(self) -> np.ndarray:
        if self.replicas == 0:
            return np.zeros(0)
        return ((self.winners > 0).sum(axis=1) + 0.5 * (self.winners == 0).sum(axis=1)) / self.n_clusters

    @property
    def ced(self) -> np.ndarray:
        return self.u_a * self.phi_total

    @property
    def win_counts(self) -> np.ndarray:
        return (self.winners > 0).sum(axis=0)

    @staticmethod
    def _mean_se(x):
        if x.size == 0:
            return float("nan"), float("nan")
        se = x.std(ddof=1) / np.sqrt(x.size) if x.size > 1 else float("nan")
        return float(x.mean()), float(se)

    def summary(self) -> dict:
        fm, fs = self._mean_se(self.compromised)
        cm, cs = self._mean_se(self.ced)
        um, us = self._mean_se(self.u_a)
        return {"replicas": self.replicas, "compromised_mean": fm, "compromised_se": fs,
                "u_a_mean": um, "u_a_se": us, "ced_mean": cm, "ced_se": cs}


def run_matches(system: System | None, valuation: atk.ClusterValuation, matchup: Matchup, replicas: int,
                seed: int, horizon: int = 200, kalman: bool = True, track=()) -> MatchReport:
    """Replicated matches; with ``kalman`` each replica also runs an attacked
    filter whose impulse is the joint worst-case attack on the SCs won."""
    if replicas < 0:
        raise ScenarioError("replicas must be >= 0")
    N = valuation.n_clusters
    u_a, u_d = np.zeros(replicas), np.zeros(replicas)
    winners = np.zeros((replicas, N), dtype=np.int8)
    max_q = np.full(replicas, np.nan)
    q_joint = np.full(replicas, np.nan)
    cache: dict[tuple, atk.QcqpCertificate] = {}
    track_idx = []
    if kalman and system is not None:
        track_idx = [system.discrete.state_index(s) for s in track]
        u_seq = system.input_sequence(horizon)
        E = system.noise.cost
    err_clean = np.zeros((horizon + 1, len(track_idx)))
    err_att = np.zeros((horizon + 1, len(track_idx)))

    for r in range(replicas):
        ra = matchup.draw("attacker", noise_rng(seed, r, _ATTACKER))
        rd = matchup.draw("defender", noise_rng(seed, r, _DEFENDER))
        out = blotto.match_payoff(ra, rd, valuation.phi_norm)
        u_a[r], u_d[r], winners[r] = out.u_a, out.u_d, out.winners
        if not kalman or system is None:
            continue
        won = tuple(int(i) for i in np.flatnonzero(out.winners > 0))
        if won not in cache:
            sensors = system.index.sensors(won)
            cache[won] = atk.solve_max_ced(system.bundle, sensors, valuation.alpha, system.impact)
        cert = cache[won]
        traj = simulate(system.bundle, system.noise, horizon, u_seq, attack=cert.vector,
                        rng=noise_rng(seed, r, _KALMAN))
        de = traj.error_att - traj.error
        max_q[r] = float(np.max(np.einsum("ki,i,ki->k", de, E, de)))
        q_joint[r] = cert.value
        if track_idx:
            err_clean += np.abs(traj.error[:, track_idx])
            err_att += np.abs(traj.error_att[:, track_idx])

    mae = {}
    if track_idx and replicas:
        for c, lab in enumerate(track):
            mae[lab] = (err_clean[:, c] / replicas, err_att[:, c] / replicas)
    return MatchReport(u_a, u_d, winners, valuation.total, max_q, q_joint, mae)


@dataclass(frozen=True)
class PipelineResult:
    system: System
    valuation: atk.ClusterValuation
    matchup: Matchup
    verdict: blotto.BlottoVerdict
    report: MatchReport
    game: GameConfig
    enforced: MatchReport | None = None     # same seeds, draws rescaled onto the budget


def run_pipeline(cfg: ScenarioConfig, replicas: int | None = None, seed: int | None = None,
                 kalman: bool = True, valuation: atk.ClusterValuation | None = None,
                 system: System | None = None) -> PipelineResult:
    game = cfg.game
    if replicas is not None:
        game = replace(game, replicas=replicas)
    if seed is not None:
        game = replace(game, seed=seed)
    system = system or build_system(cfg)
    valuation = valuation or value_system(system, game.alpha)
    matchup = make_matchup(valuation, game.R_a, game.R_d, game.attacker, game.defender)
    verdict = blotto.check_blotto_applicability(valuation.phi_norm, game.R_a, game.R_d)
    report = run_matches(system, valuation, matchup, game.replicas, game.seed, game.horizon, kalman,
                         game.track_states)
    enforced = None
    if verdict.valid:
        capped = replace(matchup, enforce_budget=True)
        enforced = run_matches(None, valuation, capped, game.replicas, game.seed, kalman=False)
    return PipelineResult(system, valuation, matchup, verdict, report, game, enforced)


# ---------------------------------------------------------------------------
# comparison tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioRow:
    R_a: float
    R_d: float
    Pi: float
    ced_mean: float
    ced_se: float
    compromised_mean: float


def compare_budget_ratios(valuation: atk.ClusterValuation, budgets, replicas: int, seed: int):
    """Closed-form and Monte Carlo expected CED per (R_a, R_d) pair.

    Returns (rows, pairs) where pairs[(i, j)] = (closed-form ratio, MC ratio)
    of entry i over entry j. Every entry reuses the same replica seeds.
    """
    rows = []
    for R_a, R_d in budgets:
        m = make_matchup(valuation, R_a, R_d)
        rep = run_matches(None, valuation, m, replicas, seed, kalman=False)
        s = rep.summary()
        rows.append(RatioRow(R_a, R_d, m.profile.Pi, s["ced_mean"], s["ced_se"], s["compromised_mean"]))
    pairs = {}
    for i, a in enumerate(rows):
        for j, b in enumerate(rows):
            if i != j:
                pairs[(i, j)] = (blotto.exact_ratio(a.R_a, a.R_d, b.R_a, b.R_d), a.ced_mean / b.ced_mean)
    return rows, pairs


@dataclass(frozen=True)
class DefenseRow:
    subset: tuple[str, ...]
    kappa: float
    Pi_bar: float
    Pi: float
    compromised_mean: float
    ced_mean: float
    ced_se: float
    mean_abs_error: dict

    @property
    def ratio(self) -> float:
        return self.Pi_bar / self.Pi


def interdependence_report(system: System | None, valuation: atk.ClusterValuation, subsets, R_a: float,
                           R_d: float, replicas: int, seed: int, kalman: bool = False, horizon: int = 200,
                           track=()):
    """One row per defended CI subset, starting with the defend-all baseline."""
    rows = []
    full = blotto.solve_symmetric_msne(valuation.phi_norm, R_a, R_d, valuation.total)
    for subset in [CI_NAMES, *subsets]:
        subset = tuple(subset)
        mask = valuation.mask(subset)
        if mask.all():
            Pi_bar, kappa = full.Pi, 1.0
            m = make_matchup(valuation, R_a, R_d)
        else:
            Pi_bar, kappa, _ = blotto.single_ci_defense_ced(valuation.phi_raw, mask, R_a, R_d)
            m = make_matchup(valuation, R_a, R_d, defender="single-ci:" + ",".join(subset))
        rep = run_matches(system, valuation, m, replicas, seed, horizon, kalman, track)
        s = rep.summary()
        rows.append(DefenseRow(subset, kappa, Pi_bar, full.Pi, s["compromised_mean"], s["ced_mean"],
                               s["ced_se"], rep.mean_abs_error))
    return rows
