"""Generator for the benchmark scenario family.

Ten generators (six gas-fed, four water-fed) on a tree of nine lines, and an
eleven-pipe tree for both gas and water. Parameters are drawn from fixed
ranges, so every seed gives a different member of the same stable family.
The bundled scenario is ``build_document(DEFAULT_SEED)``.
"""

import numpy as np

DEFAULT_SEED = 20240614

# tree edges (parent, child); the same shape is used for gas and water junctions
PIPE_TREE = [(0, 1), (1, 2), (2, 3), (2, 4), (1, 5), (5, 6), (5, 7), (3, 8), (4, 9), (6, 10), (7, 11)]
# power lines form a tree over the 10 generators: each child has one parent line
LINE_TREE = [(1, 2), (1, 3), (2, 4), (2, 5), (3, 6), (3, 7), (5, 8), (6, 9), (7, 10)]

GAS_SUPPLY = {"G1": "3-8", "G2": "4-9", "G3": "6-10", "G4": "7-11", "G5": "2-3", "G6": "5-6"}
WATER_SUPPLY = {"G7": "3-8", "G8": "4-9", "G9": "6-10", "G10": "7-11"}
COMPRESSOR_BUS = {"g2": "G7", "g5": "G8", "g3": "G9"}
PUMP_BUS = {"w2": "G1", "w5": "G2", "w3": "G3"}


def r(rng, lo, hi):
    return round(float(rng.uniform(lo, hi)), 4)


def build_document(seed=DEFAULT_SEED, scale_coupling=1.0):
    rng = np.random.default_rng(seed)
    gens = []
    for i in range(1, 11):
        fuel = "gas" if i <= 6 else "water"
        g = {"id": f"G{i}", "inertia": r(rng, 4, 8), "damping": r(rng, 1, 2),
             "turbine_time": r(rng, 0.5, 1.0), "power": r(rng, 0.8, 1.2),
             "voltage": r(rng, 0.98, 1.05), "angle": r(rng, -0.2, 0.2),
             "fuel": fuel, "efficiency": r(rng, 1.8, 2.2)}
        if i == 5:
            # load step on G5 at t = 20.5 s
            g["demand"] = [[0, 0.0], [205, 0.1]]
        gens.append(g)
    lines = [{"from": f"G{a}", "to": f"G{b}", "reactance": r(rng, 0.4, 0.6)} for a, b in LINE_TREE]

    junctions, gas, water = [], [], []
    for infra, prefix in (("gas", "g"), ("water", "w")):
        eff = {"gas": COMPRESSOR_BUS, "water": PUMP_BUS}[infra]
        for j in range(12):
            jid = f"{prefix}{j}"
            leaf = all(p != j for p, _ in PIPE_TREE)
            junctions.append({"id": jid, "infrastructure": infra, "setpoint": r(rng, 0.9, 1.1),
                              "efficiency": 0.05 * scale_coupling if jid in eff else 0.0,
                              "demand": [[0, r(rng, 0.0, 0.05) if leaf else 0.0]]})
    for a, b in PIPE_TREE:
        gas.append({"id": f"{a}-{b}", "from": f"g{a}", "to": f"g{b}",
                    "tau1": r(rng, 0.4, 0.6), "tau2": r(rng, 0.25, 0.35), "tau3": r(rng, 0.8, 1.2),
                    "tau1_hat": r(rng, 0.15, 0.25), "tau2_hat": r(rng, 0.15, 0.25),
                    "rho1": r(rng, 1.8, 2.2), "rho1_hat": r(rng, 1.3, 1.7), "area": r(rng, 0.8, 1.2)})
        water.append({"id": f"{a}-{b}", "from": f"w{a}", "to": f"w{b}",
                      "viscosity": r(rng, 1.0, 2.0), "friction": r(rng, 1.0, 2.0), "area": r(rng, 0.8, 1.2)})

    parent = {b: a for a, b in LINE_TREE}
    sensors = []
    for i in range(1, 11):
        states = [f"omega:G{i}", f"pm:G{i}"]
        if i in parent:
            states.append(f"line:G{parent[i]}-G{i}")
        sensors.append({"id": f"SC-P{i}", "ci": "power", "states": states})
    for a, b in PIPE_TREE:
        sensors.append({"id": f"SC-G{a}-{b}", "ci": "gas",
                        "states": [f"gas:{a}-{b}:x{k}" for k in range(1, 5)]})
    for a, b in PIPE_TREE:
        sensors.append({"id": f"SC-W{a}-{b}", "ci": "water", "states": [f"water:{a}-{b}:r"]})

    return {
        "name": "benchmark-10gen-11gas-11water",
        "dt": 0.1,
        "generators": gens,
        "lines": lines,
        "junctions": junctions,
        "gas_pipelines": gas,
        "water_pipelines": water,
        "coupling": {
            "gas_to_generator": sorted(GAS_SUPPLY.items()),
            "water_to_generator": sorted(WATER_SUPPLY.items()),
            "compressor_to_bus": sorted(COMPRESSOR_BUS.items()),
            "pump_to_bus": sorted(PUMP_BUS.items()),
        },
        "sensors": sensors,
        "noise": {"psi": 1e-2, "phi": 1e-4, "omega": 1e-2, "cost": 1.0, "threshold": None},
        "game": {"alpha": 0.5, "R_a": 1.0, "R_d": 5.0, "attacker": "msne", "defender": "msne",
                 "replicas": 50, "horizon": 200, "seed": 2024,
                 "track_states": ["omega:G6", "gas:2-3:x1", "water:2-3:r"]},
    }
