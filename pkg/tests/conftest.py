import numpy as np
import pytest

from iciblotto import pipeline
from iciblotto.estimator import NoiseSpec, build_estimator
from iciblotto.model import StateSpaceModel
from iciblotto.scenario import load_scenario


def random_stable(rng, n, radius=0.9):
    """Random dense matrix rescaled to the given spectral radius."""
    A = rng.standard_normal((n, n))
    return A * radius / np.abs(np.linalg.eigvals(A)).max()


def random_bundle(rng, n=4, m=4, phi=1e-2, omega=1.0, radius=None, C=None):
    """Estimator for a random stable discrete system with dense sensors."""
    radius = rng.uniform(0.3, 0.9) if radius is None else radius
    A = random_stable(rng, n, radius)
    B = rng.standard_normal((n, 1))
    C = rng.standard_normal((m, n)) if C is None else C
    labels = tuple(f"s{i}" for i in range(n))
    model = StateSpaceModel(A, B, C, labels, ("u",), tuple(f"y{i}" for i in range(C.shape[0])), dt=1.0)
    noise = NoiseSpec.build(model, psi=phi, phi=phi, omega=omega)
    return build_estimator(model, noise), noise, model


@pytest.fixture(scope="session")
def bench_cfg():
    return load_scenario()


@pytest.fixture(scope="session")
def bench_system(bench_cfg):
    return pipeline.build_system(bench_cfg)


@pytest.fixture(scope="session")
def bench_valuation(bench_system):
    return pipeline.value_system(bench_system)


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion
# ---------------------------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(number, title, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {title} | {detail}"
        ACCEPTANCE[number] = line
        print("\n" + line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
