import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from measureflow.measures import DiscreteMeasure, LiftedMeasure

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=30,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# Coordinates and weights are drawn from eighths so that hand computations
# stay exact and the LP instances avoid pathological near-ties.
grid_coords = st.integers(min_value=-40, max_value=40).map(lambda k: k / 8.0)
grid_weights = st.integers(min_value=1, max_value=16).map(lambda k: k / 8.0)


@st.composite
def measures_1d(draw, max_atoms=6, min_atoms=1):
    n = draw(st.integers(min_atoms, max_atoms))
    atoms = [
        ((draw(grid_coords),), draw(grid_weights))
        for _ in range(n)
    ]
    return DiscreteMeasure.from_atoms(atoms, dim=1)


@st.composite
def equal_mass_pairs_1d(draw, max_atoms=6):
    n1 = draw(st.integers(1, max_atoms))
    n2 = draw(st.integers(1, max_atoms))
    w = [draw(grid_weights) for _ in range(max(n1, n2))]
    m1 = DiscreteMeasure.from_atoms(
        [((draw(grid_coords),), w[i]) for i in range(n1)], dim=1
    )
    total1 = m1.mass()
    weights2 = np.full(n2, total1 / n2)
    m2 = DiscreteMeasure.from_atoms(
        [((draw(grid_coords),), float(weights2[i])) for i in range(n2)], dim=1
    )
    return m1, m2


def random_measure(rng, n_atoms, dim=1, span=5.0, unit=None):
    atoms = []
    for _ in range(n_atoms):
        pos = tuple(float(c) for c in rng.uniform(-span, span, dim))
        w = float(rng.uniform(0.05, 1.5))
        if unit is not None:
            w = unit * int(rng.integers(1, 4))
        atoms.append((pos, w))
    return DiscreteMeasure.from_atoms(atoms, dim=dim)


def random_lifted(rng, n_atoms, dim=1, span=3.0, vspan=2.0, weights=None):
    atoms = []
    for k in range(n_atoms):
        pos = tuple(float(c) for c in rng.uniform(-span, span, dim))
        vel = tuple(float(c) for c in rng.uniform(-vspan, vspan, dim))
        w = float(rng.uniform(0.1, 1.0)) if weights is None else weights[k]
        atoms.append((pos, vel, w))
    return LiftedMeasure.from_atoms(atoms, dim=dim)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
