import numpy as np
import pytest

from dosedesign import fitting, models

# Pooled first-dataset estimates (intercepts, shared slope).
POOLED_THETA = np.array([2.506, 7.800, -0.979])

# Nine day-wise nominal sets from the first dataset.
DAY_THETAS = np.array([
    [2.328, 9.845, -1.562],
    [2.077, 10.686, -1.303],
    [2.157, 9.342, -1.019],
    [2.516, 9.127, -1.086],
    [2.186, 8.029, -0.960],
    [2.380, 8.359, -1.040],
    [2.442, 8.331, -1.037],
    [2.449, 8.121, -1.021],
    [2.506, 7.800, -0.979],
])

# Fixed arms for the augmented two-stage designs: 22.5% control at dose 0
# and 22.5% at raw dose 10000.
ARMS = ((0.0, float(np.log1p(10000.0))), (0.225, 0.225))


@pytest.fixture(scope="session")
def po_spec():
    return models.get_spec("po_trinomial")


@pytest.fixture(scope="session")
def pooled(po_spec):
    return po_spec.params(POOLED_THETA)


@pytest.fixture(scope="session")
def day_nominals(po_spec):
    return tuple(po_spec.params(t) for t in DAY_THETAS)


@pytest.fixture(scope="session")
def fixed_arms():
    return ((0.0, 0.225), (float(np.log1p(10000.0)), 0.225))


def simulate_records(spec, theta, raw_doses, n_per_dose, rng, date="d0"):
    """Multinomial draws from the model at each raw dose."""
    recs = []
    tp = spec.params(theta) if not isinstance(theta, models.ParamVector) else theta
    for d in raw_doses:
        x = float(fitting.transform_dose(d))
        pi = models.category_probs(spec, tp, x).pi
        y = rng.multinomial(n_per_dose, pi)
        recs.append(fitting.CountRecord(
            date=date, dose=float(d), duration="1-24h", observed=int(n_per_dose),
            normal=int(y[0]), radial=int(y[1]), other_abnormal=int(y[2]),
        ))
    return recs


@pytest.fixture(scope="session")
def sim_records(po_spec):
    rng = np.random.default_rng(2024)
    return simulate_records(
        po_spec, np.array([2.5, 7.8, -1.0]),
        [0.0, 3.0, 30.0, 300.0, 3000.0, 10000.0], 2000, rng,
    )
