"""Linear state-space model of an interdependent power / gas / water system.

Each infrastructure is built separately from a declarative topology:

* power: per generator the frequency deviation ``omega`` and mechanical
  power ``pm``, plus one flow state per transmission line;
* gas: four states per pipeline, junction flow balance and compressor
  pressure rules folded in by eliminating downstream pipeline outputs;
* water: one friction state per pipeline, same elimination scheme.

`assemble_ici` couples them through four 0/1 incidence matrices and
`discretize` maps the result to discrete time with the bilinear transform.
All variables are deviations around an operating point.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ModelError

FUELS = ("gas", "water", "external")


# ---------------------------------------------------------------------------
# topology specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorSpec:
    id: str
    inertia: float
    damping: float
    turbine_time: float
    power: float
    voltage: float = 1.0
    angle: float = 0.0
    fuel: str = "external"
    efficiency: float | None = None

    def __post_init__(self):
        if not self.inertia > 0:
            raise ModelError(f"generator {self.id}: inertia must be > 0, got {self.inertia}")
        if not self.turbine_time > 0:
            raise ModelError(f"generator {self.id}: turbine time constant must be > 0, got {self.turbine_time}")
        if self.damping < 0:
            raise ModelError(f"generator {self.id}: damping must be >= 0")
        if self.power == 0:
            raise ModelError(f"generator {self.id}: operating power must be nonzero")
        if self.fuel not in FUELS:
            raise ModelError(f"generator {self.id}: unknown fuel {self.fuel!r}")
        if self.fuel != "external" and not (self.efficiency and self.efficiency > 0):
            raise ModelError(f"generator {self.id}: {self.fuel}-fed generator needs efficiency > 0")


@dataclass(frozen=True)
class TransmissionLineSpec:
    from_gen: str
    to_gen: str
    reactance: float

    def __post_init__(self):
        if self.from_gen == self.to_gen:
            raise ModelError(f"line {self.from_gen}-{self.to_gen}: endpoints must differ")
        if not self.reactance > 0:
            raise ModelError(f"line {self.from_gen}-{self.to_gen}: reactance must be > 0")

    @property
    def label(self) -> str:
        return f"{self.from_gen}-{self.to_gen}"

    def flow_coefficient(self, a: GeneratorSpec, b: GeneratorSpec) -> float:
        """Linearized flow sensitivity E_i E_j cos(d_i - d_j) / x."""
        return a.voltage * b.voltage * np.cos(a.angle - b.angle) / self.reactance


@dataclass(frozen=True)
class GasPipelineSpec:
    id: str
    from_junction: str
    to_junction: str
    tau1: float
    tau2: float
    tau3: float
    tau1_hat: float
    tau2_hat: float
    rho1: float
    rho1_hat: float
    area: float = 1.0

    def __post_init__(self):
        for name in ("rho1", "rho1_hat", "tau3", "area"):
            if not getattr(self, name) > 0:
                raise ModelError(f"gas pipeline {self.id}: {name} must be > 0")
        if self.from_junction == self.to_junction:
            raise ModelError(f"gas pipeline {self.id}: self loop")


@dataclass(frozen=True)
class WaterPipelineSpec:
    id: str
    from_junction: str
    to_junction: str
    viscosity: float
    friction: float
    area: float = 1.0

    def __post_init__(self):
        for name in ("viscosity", "friction", "area"):
            if not getattr(self, name) > 0:
                raise ModelError(f"water pipeline {self.id}: {name} must be > 0")
        if self.from_junction == self.to_junction:
            raise ModelError(f"water pipeline {self.id}: self loop")


@dataclass(frozen=True)
class JunctionSpec:
    """Gas or water junction.

    ``efficiency`` is the compressor (gas) or pump (water) coefficient in
    W/Pa; ``demand`` is a piecewise-constant profile ``((step, value), ...)``
    that holds each value from its step onward.
    """

    id: str
    infrastructure: str
    setpoint: float
    efficiency: float = 0.0
    demand: tuple[tuple[int, float], ...] = ((0, 0.0),)

    def __post_init__(self):
        if self.infrastructure not in ("gas", "water"):
            raise ModelError(f"junction {self.id}: infrastructure must be gas or water")
        if not self.setpoint > 0:
            raise ModelError(f"junction {self.id}: setpoint must be > 0")
        if self.efficiency < 0:
            raise ModelError(f"junction {self.id}: efficiency must be >= 0")
        if not self.demand or self.demand[0][0] > 0:
            raise ModelError(f"junction {self.id}: demand profile must start at step 0")

    def demand_at(self, step: int) -> float:
        value = self.demand[0][1]
        for k, v in self.demand:
            if k <= step:
                value = v
        return value


# ---------------------------------------------------------------------------
# partial and full models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerCI:
    A: np.ndarray
    B: np.ndarray
    C_gas: np.ndarray      # gas demand of gas-fed generators
    C_water: np.ndarray    # water demand of water-fed generators
    state_labels: tuple[str, ...]
    input_labels: tuple[str, ...]
    gas_demand_labels: tuple[str, ...]
    water_demand_labels: tuple[str, ...]


@dataclass(frozen=True)
class NetworkCI:
    """Gas or water partial model; outputs are compressor/pump power demands."""

    infrastructure: str
    A: np.ndarray
    B: np.ndarray
    C_power: np.ndarray
    D_power: np.ndarray
    state_labels: tuple[str, ...]
    input_labels: tuple[str, ...]
    power_demand_labels: tuple[str, ...]
    demand_ports: dict[str, int] = field(default_factory=dict)
    pressure_ports: dict[str, int] = field(default_factory=dict)
    demand_fraction: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class CouplingMap:
    """Incidence matrices routing CI outputs into CI inputs.

    T_ge: compressor power -> power inputs, T_we: pump power -> power inputs,
    T_eg: generator gas demand -> gas inputs, T_ew: generator water demand ->
    water inputs. Shapes are (target inputs, source outputs).
    """

    T_ge: np.ndarray
    T_we: np.ndarray
    T_eg: np.ndarray
    T_ew: np.ndarray

    def __post_init__(self):
        for name in ("T_ge", "T_we", "T_eg", "T_ew"):
            T = np.asarray(getattr(self, name), dtype=float)
            if T.ndim != 2:
                raise ModelError(f"coupling {name} must be a matrix")
            if not np.all((T == 0) | (T == 1)):
                raise ModelError(f"coupling {name} entries must be 0 or 1")
            if T.size and T.sum(axis=0).max() > 1:
                raise ModelError(f"coupling {name}: an output feeds more than one input port")
            object.__setattr__(self, name, T)

    @classmethod
    def zeros(cls, power: PowerCI, gas: NetworkCI, water: NetworkCI) -> "CouplingMap":
        pe = power.B.shape[1]
        return cls(
            T_ge=np.zeros((pe, gas.C_power.shape[0])),
            T_we=np.zeros((pe, water.C_power.shape[0])),
            T_eg=np.zeros((gas.B.shape[1], power.C_gas.shape[0])),
            T_ew=np.zeros((water.B.shape[1], power.C_water.shape[0])),
        )

    @classmethod
    def from_links(cls, power: PowerCI, gas: NetworkCI, water: NetworkCI,
                   gas_supply=(), water_supply=(), compressor_bus=(), pump_bus=()) -> "CouplingMap":
        """Build incidence matrices from (source, target) id pairs.

        gas_supply / water_supply: (generator id, pipeline id) -- the
        generator draws its fuel/cooling flow from that pipeline's outlet.
        compressor_bus / pump_bus: (junction id, generator id) -- the
        compressor or pump is powered from that generator's bus.
        """
        T = cls.zeros(power, gas, water)
        T_ge, T_we, T_eg, T_ew = (m.copy() for m in (T.T_ge, T.T_we, T.T_eg, T.T_ew))

        def bus(gid):
            label = f"Pe:{gid}"
            if label not in power.input_labels:
                raise ModelError(f"coupling references unknown generator {gid!r}")
            return power.input_labels.index(label)

        for gid, pid in gas_supply:
            if gid not in power.gas_demand_labels:
                raise ModelError(f"coupling: generator {gid!r} is not gas-fed")
            if pid not in gas.demand_ports:
                raise ModelError(f"coupling references unknown gas pipeline {pid!r}")
            T_eg[gas.demand_ports[pid], power.gas_demand_labels.index(gid)] = 1
        for gid, pid in water_supply:
            if gid not in power.water_demand_labels:
                raise ModelError(f"coupling: generator {gid!r} is not water-fed")
            if pid not in water.demand_ports:
                raise ModelError(f"coupling references unknown water pipeline {pid!r}")
            T_ew[water.demand_ports[pid], power.water_demand_labels.index(gid)] = 1
        for jid, gid in compressor_bus:
            if jid not in gas.power_demand_labels:
                raise ModelError(f"coupling: gas junction {jid!r} has no compressor output")
            T_ge[bus(gid), gas.power_demand_labels.index(jid)] = 1
        for jid, gid in pump_bus:
            if jid not in water.power_demand_labels:
                raise ModelError(f"coupling: water junction {jid!r} has no pump output")
            T_we[bus(gid), water.power_demand_labels.index(jid)] = 1
        return cls(T_ge=T_ge, T_we=T_we, T_eg=T_eg, T_ew=T_ew)


@dataclass(frozen=True)
class StateSpaceModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    state_labels: tuple[str, ...]
    input_labels: tuple[str, ...]
    output_labels: tuple[str, ...] = ()
    dt: float | None = None   # None: continuous time

    def __post_init__(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ModelError("A must be square")
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise ModelError(f"inconsistent dimensions A{self.A.shape} B{self.B.shape} C{self.C.shape}")
        if len(self.state_labels) != n or len(self.input_labels) != self.B.shape[1]:
            raise ModelError("label counts do not match matrix dimensions")
        if len(self.output_labels) not in (0, self.C.shape[0]):
            raise ModelError("output label count does not match C")
        for M in (self.A, self.B, self.C):
            M.setflags(write=False)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def is_discrete(self) -> bool:
        return self.dt is not None

    def state_index(self, label: str) -> int:
        try:
            return self.state_labels.index(label)
        except ValueError:
            raise ModelError(f"unknown state {label!r}") from None

    def input_index(self, label: str) -> int:
        try:
            return self.input_labels.index(label)
        except ValueError:
            raise ModelError(f"unknown input {label!r}") from None

    def states_of(self, infrastructure: str) -> np.ndarray:
        """Indices of states belonging to 'power', 'gas' or 'water'."""
        return np.array([i for i, s in enumerate(self.state_labels)
                         if state_infrastructure(s) == infrastructure], dtype=int)

    def with_sensors(self, C: np.ndarray, labels: Sequence[str] = ()) -> "StateSpaceModel":
        return StateSpaceModel(self.A, self.B, np.asarray(C, dtype=float), self.state_labels,
                               self.input_labels, tuple(labels), self.dt)


def state_infrastructure(label: str) -> str:
    head = label.split(":", 1)[0]
    if head in ("omega", "pm", "line"):
        return "power"
    return head


# ---------------------------------------------------------------------------
# power
# ---------------------------------------------------------------------------

def build_power_ci(generators: Sequence[GeneratorSpec],
                   lines: Sequence[TransmissionLineSpec] = ()) -> PowerCI:
    if not generators:
        raise ModelError("power CI needs at least one generator")
    ids = [g.id for g in generators]
    if len(set(ids)) != len(ids):
        raise ModelError("duplicate generator ids")
    pos = {gid: i for i, gid in enumerate(ids)}
    ne, nl = len(generators), len(lines)
    n = 2 * ne + nl
    A = np.zeros((n, n))
    B = np.zeros((n, ne))

    for i, g in enumerate(generators):
        w, m = 2 * i, 2 * i + 1
        A[w, w] = -g.damping / g.inertia
        A[w, m] = 1.0 / g.inertia
        A[m, w] = -1.0 / (g.power * g.turbine_time)
        A[m, m] = -1.0 / g.turbine_time
        B[w, i] = -1.0 / g.inertia

    for k, line in enumerate(lines):
        for end in (line.from_gen, line.to_gen):
            if end not in pos:
                raise ModelError(f"line {line.label}: dangling endpoint {end!r}")
        i, j = pos[line.from_gen], pos[line.to_gen]
        row = 2 * ne + k
        coef = line.flow_coefficient(generators[i], generators[j])
        A[row, 2 * i] = coef
        A[row, 2 * j] = -coef
        # flow i -> j leaves i and enters j
        A[2 * i, row] -= 1.0 / generators[i].inertia
        A[2 * j, row] += 1.0 / generators[j].inertia

    gas_fed = [g for g in generators if g.fuel == "gas"]
    water_fed = [g for g in generators if g.fuel == "water"]
    C_gas = np.zeros((len(gas_fed), n))
    for r, g in enumerate(gas_fed):
        C_gas[r, 2 * pos[g.id] + 1] = 1.0 / g.efficiency
    C_water = np.zeros((len(water_fed), n))
    for r, g in enumerate(water_fed):
        C_water[r, 2 * pos[g.id] + 1] = 1.0 / g.efficiency

    states = []
    for g in generators:
        states += [f"omega:{g.id}", f"pm:{g.id}"]
    states += [f"line:{ln.label}" for ln in lines]
    return PowerCI(A, B, C_gas, C_water, tuple(states), tuple(f"Pe:{g}" for g in ids),
                   tuple(g.id for g in gas_fed), tuple(g.id for g in water_fed))


# ---------------------------------------------------------------------------
# pipeline networks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _PipeBlock:
    """Per-pipeline linear model with its port layout.

    Inputs are (inlet pressure, outlet flow) in slots ``pressure_in`` /
    ``flow_out``; outputs are (outlet pressure, inlet flow) in slots
    ``pressure_out`` / ``flow_in``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    states: tuple[str, ...]
    inputs: tuple[str, ...]
    pressure_in: int
    flow_out: int
    pressure_out: int = 0
    flow_in: int = 1


def _gas_block(p: GasPipelineSpec) -> _PipeBlock:
    A = np.array([
        [-1 / p.rho1, 1.0, 0.0, 0.0],
        [0.0, -1 / p.rho1_hat, 0.0, 0.0],
        [0.0, 0.0, -1 / p.rho1_hat, 0.0],
        [0.0, 0.0, 0.0, -1 / p.tau3],
    ])
    B = np.array([
        [p.tau1 / p.rho1, 0.0],
        [1 / p.rho1_hat, 0.0],
        [0.0, -p.tau2 / p.rho1_hat],
        [0.0, 1 / p.tau3],
    ])
    C = np.array([
        [1.0, 0.0, 1 - p.tau1_hat / p.rho1_hat, 0.0],
        [0.0, -p.tau2_hat / p.rho1_hat, 0.0, 1.0],
    ])
    D = np.array([
        [0.0, -p.tau1_hat * p.tau2 / p.rho1_hat],
        [-p.tau2_hat / p.rho1_hat, 0.0],
    ])
    states = tuple(f"gas:{p.id}:x{k}" for k in range(1, 5))
    return _PipeBlock(A, B, C, D, states, (f"gas:{p.id}:pin", f"gas:{p.id}:demand"),
                      pressure_in=0, flow_out=1)


def _water_block(p: WaterPipelineSpec) -> _PipeBlock:
    # ports ordered (flow, inlet pressure); flow is constant along the pipe,
    # so the second output passes it through to the upstream junction
    A = np.array([[-1.0]])
    B = np.array([[1 / p.viscosity, -1 / p.friction]])
    C = np.array([[-p.friction], [0.0]])
    D = np.array([[0.0, 1.0], [1.0, 0.0]])
    return _PipeBlock(A, B, C, D, (f"water:{p.id}:r",),
                      (f"water:{p.id}:demand", f"water:{p.id}:pin"),
                      pressure_in=1, flow_out=0)


def _build_network(infrastructure, pipelines, junctions, block_fn) -> NetworkCI:
    junctions = [j for j in junctions if j.infrastructure == infrastructure]
    jpos = {j.id: j for j in junctions}
    if len(jpos) != len(junctions):
        raise ModelError(f"duplicate {infrastructure} junction ids")
    pids = [p.id for p in pipelines]
    if len(set(pids)) != len(pids):
        raise ModelError(f"duplicate {infrastructure} pipeline ids")
    for p in pipelines:
        for end in (p.from_junction, p.to_junction):
            if end not in jpos:
                raise ModelError(f"{infrastructure} pipeline {p.id}: unknown junction {end!r}")

    blocks = [block_fn(p) for p in pipelines]
    state_off, input_off = [], []
    n = p_in = 0
    for b in blocks:
        state_off.append(n)
        input_off.append(p_in)
        n += b.A.shape[0]
        p_in += b.B.shape[1]

    inbound = {j.id: [] for j in junctions}
    outbound = {j.id: [] for j in junctions}
    for k, p in enumerate(pipelines):
        inbound[p.to_junction].append(k)
        outbound[p.from_junction].append(k)

    # junction DAG; predecessors of a junction are the junctions it feeds, so
    # static_order() yields leaves first (back-to-front elimination)
    sorter = graphlib.TopologicalSorter({j.id: set() for j in junctions})
    for p in pipelines:
        sorter.add(p.from_junction, p.to_junction)
    try:
        order = list(sorter.static_order())
    except graphlib.CycleError as exc:
        raise ModelError(f"{infrastructure} pipeline graph has a cycle: {exc.args[1]}") from None

    fraction = {}
    for jid, ks in inbound.items():
        total = sum(pipelines[k].area for k in ks)
        if ks and not total > 0:
            raise ModelError(f"{infrastructure} junction {jid}: zero inbound sector area")
        for k in ks:
            fraction[pipelines[k].id] = pipelines[k].area / total

    A = np.zeros((n, n))
    B = np.zeros((n, p_in))
    # outputs of every pipeline as linear maps of (x, u)
    Yx = [None] * len(blocks)
    Yu = [None] * len(blocks)
    for jid in order:
        for k in inbound[jid]:
            b = blocks[k]
            s0, u0 = state_off[k], input_off[k]
            ns, nu = b.A.shape[0], b.B.shape[1]
            # effective port values: pressure straight from the setpoint
            # input, outlet flow = own demand + share of downstream draws
            Ex = np.zeros((nu, n))
            Eu = np.zeros((nu, p_in))
            Eu[b.pressure_in, u0 + b.pressure_in] = 1.0
            Eu[b.flow_out, u0 + b.flow_out] = 1.0
            frac = fraction[pipelines[k].id]
            for q in outbound[jid]:
                if Yx[q] is None:
                    raise ModelError("internal: downstream pipeline not yet eliminated")
                Ex[b.flow_out] += frac * Yx[q][blocks[q].flow_in]
                Eu[b.flow_out] += frac * Yu[q][blocks[q].flow_in]
            A[s0:s0 + ns, s0:s0 + ns] += b.A
            A[s0:s0 + ns] += b.B @ Ex
            B[s0:s0 + ns] += b.B @ Eu
            yx = b.D @ Ex
            yx[:, s0:s0 + ns] += b.C
            Yx[k] = yx
            Yu[k] = b.D @ Eu

    # compressor / pump power: eta * (setpoint - mean inbound outlet pressure)
    out_labels, C_rows, D_rows = [], [], []
    for j in junctions:
        ks = inbound[j.id]
        if not ks:
            continue
        cx = np.zeros(n)
        du = np.zeros(p_in)
        for k in ks:
            cx -= Yx[k][blocks[k].pressure_out] / len(ks)
            du -= Yu[k][blocks[k].pressure_out] / len(ks)
        if outbound[j.id]:
            q = outbound[j.id][0]
            du[input_off[q] + blocks[q].pressure_in] += 1.0
        C_rows.append(j.efficiency * cx)
        D_rows.append(j.efficiency * du)
        out_labels.append(j.id)

    states = tuple(s for b in blocks for s in b.states)
    inputs = tuple(s for b in blocks for s in b.inputs)
    demand_ports = {p.id: input_off[k] + blocks[k].flow_out for k, p in enumerate(pipelines)}
    pressure_ports = {p.id: input_off[k] + blocks[k].pressure_in for k, p in enumerate(pipelines)}
    C_power = np.array(C_rows).reshape(len(C_rows), n)
    D_power = np.array(D_rows).reshape(len(D_rows), p_in)
    return NetworkCI(infrastructure, A, B, C_power, D_power, states, inputs, tuple(out_labels),
                     demand_ports, pressure_ports, fraction)


def build_gas_ci(pipelines: Sequence[GasPipelineSpec], junctions: Sequence[JunctionSpec]) -> NetworkCI:
    return _build_network("gas", pipelines, junctions, _gas_block)


def build_water_ci(pipelines: Sequence[WaterPipelineSpec], junctions: Sequence[JunctionSpec]) -> NetworkCI:
    return _build_network("water", pipelines, junctions, _water_block)


# ---------------------------------------------------------------------------
# assembly, sensors, discretization
# ---------------------------------------------------------------------------

def assemble_ici(power: PowerCI, gas: NetworkCI, water: NetworkCI,
                 coupling: CouplingMap | None = None, check_stability: bool = True) -> StateSpaceModel:
    """Couple the three partial models into one continuous-time model."""
    if coupling is None:
        coupling = CouplingMap.zeros(power, gas, water)
    Ae, Be, Ceg, Cew = power.A, power.B, power.C_gas, power.C_water
    Ag, Bg, Cge, Dg = gas.A, gas.B, gas.C_power, gas.D_power
    Aw, Bw, Cwe, Dw = water.A, water.B, water.C_power, water.D_power
    Tge, Twe, Teg, Tew = coupling.T_ge, coupling.T_we, coupling.T_eg, coupling.T_ew
    expected = {
        "T_ge": (Be.shape[1], Cge.shape[0]), "T_we": (Be.shape[1], Cwe.shape[0]),
        "T_eg": (Bg.shape[1], Ceg.shape[0]), "T_ew": (Bw.shape[1], Cew.shape[0]),
    }
    for name, shape in expected.items():
        if getattr(coupling, name).shape != shape:
            raise ModelError(f"coupling {name} has shape {getattr(coupling, name).shape}, expected {shape}")

    ne, ng, nw = Ae.shape[0], Ag.shape[0], Aw.shape[0]
    A = np.block([
        [Ae + Be @ (Tge @ Dg @ Teg @ Ceg + Twe @ Dw @ Tew @ Cew), Be @ Tge @ Cge, Be @ Twe @ Cwe],
        [Bg @ Teg @ Ceg, Ag, np.zeros((ng, nw))],
        [Bw @ Tew @ Cew, np.zeros((nw, ng)), Aw],
    ])
    pe, pg, pw = Be.shape[1], Bg.shape[1], Bw.shape[1]
    B = np.block([
        [Be, Be @ Tge @ Dg, Be @ Twe @ Dw],
        [np.zeros((ng, pe)), Bg, np.zeros((ng, pw))],
        [np.zeros((nw, pe)), np.zeros((nw, pg)), Bw],
    ])
    if check_stability:
        eig = np.linalg.eigvals(A)
        bad = eig[eig.real >= 0]
        if bad.size:
            listing = ", ".join(f"{z:.4g}" for z in bad[:10])
            raise ModelError(f"assembled A is not Hurwitz; {bad.size} unstable eigenvalue(s): {listing}")
    labels = power.state_labels + gas.state_labels + water.state_labels
    inputs = power.input_labels + gas.input_labels + water.input_labels
    return StateSpaceModel(A, B, np.zeros((0, A.shape[0])), labels, inputs)


@dataclass(frozen=True)
class ClusterSpec:
    id: str
    states: tuple[str, ...]
    infrastructure: str | None = None


@dataclass(frozen=True)
class ClusterIndex:
    """Sensor rows per cluster, in cluster order."""

    ids: tuple[str, ...]
    rows: tuple[np.ndarray, ...]
    infrastructure: tuple[str, ...]

    @property
    def n_clusters(self) -> int:
        return len(self.ids)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(r) for r in self.rows)

    def sensors(self, clusters) -> np.ndarray:
        """Sorted sensor rows covered by the given cluster positions."""
        clusters = list(clusters)
        if not clusters:
            return np.zeros(0, dtype=int)
        return np.unique(np.concatenate([self.rows[c] for c in clusters]))

    def positions(self, infrastructure: str) -> np.ndarray:
        return np.array([i for i, ci in enumerate(self.infrastructure) if ci == infrastructure], dtype=int)


def build_sensor_matrix(model: StateSpaceModel,
                        clusters: Sequence[ClusterSpec]) -> tuple[StateSpaceModel, ClusterIndex]:
    """One sensor per listed state; a cluster's sensors are consecutive rows."""
    rows, labels, cluster_rows, cis = [], [], [], []
    for c in clusters:
        if not c.states:
            raise ModelError(f"sensor cluster {c.id!r} is empty")
        idx = []
        for s in c.states:
            if s not in model.state_labels:
                raise ModelError(f"sensor cluster {c.id!r} references unknown state {s!r}")
            idx.append(len(rows))
            rows.append(model.state_labels.index(s))
            labels.append(f"{c.id}/{s}")
        cluster_rows.append(np.array(idx, dtype=int))
        if c.infrastructure is not None:
            cis.append(c.infrastructure)
        else:
            kinds = [state_infrastructure(s) for s in c.states]
            cis.append(max(set(kinds), key=kinds.count))
    C = np.zeros((len(rows), model.n_states))
    C[np.arange(len(rows)), rows] = 1.0
    index = ClusterIndex(tuple(c.id for c in clusters), tuple(cluster_rows), tuple(cis))
    return model.with_sensors(C, labels), index


def discretize(model: StateSpaceModel, dt: float) -> StateSpaceModel:
    """Bilinear (Tustin) transform; sensors are carried over unchanged."""
    if model.is_discrete:
        raise ModelError("model is already discrete")
    if not dt > 0:
        raise ModelError("dt must be > 0")
    eig = np.linalg.eigvals(model.A)
    fastest = float(np.abs(eig).max()) if eig.size else 0.0
    if fastest * dt > 2:
        raise ModelError(f"dt={dt} too coarse for fastest eigenvalue |lambda|={fastest:.4g} (need |lambda|*dt <= 2)")
    n = model.n_states
    I = np.eye(n)
    M = I - model.A * dt / 2
    if np.linalg.cond(M) > 1e14:
        raise ModelError("I - A*dt/2 is singular")
    Ad = np.linalg.solve(M, I + model.A * dt / 2)
    Bd = np.linalg.solve(M, model.B * dt)
    return StateSpaceModel(Ad, Bd, model.C.copy(), model.state_labels, model.input_labels,
                           model.output_labels, dt)


def write_matrix_csv(path, M: np.ndarray) -> None:
    """Row-major CSV with a ``# rows cols`` header line."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(Path(path), "w", newline="") as fh:
        fh.write(f"# {M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    with open(Path(path)) as fh:
        header = fh.readline()
        rows, cols = (int(t) for t in header.lstrip("#").split())
        data = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    M = np.array(data, dtype=float).reshape(rows, cols)
    return M
