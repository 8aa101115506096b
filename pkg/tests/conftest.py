from __future__ import annotations

import csv

import numpy as np
import pytest

from late_bounds.model import dataset_from_arrays
from late_bounds.simulate import ScenarioSpec, gen_dataset

ITT_WORKED = -0.761
MU_WORKED = 0.814


def worked_arrays(n1: int = 400, n0: int = 400, seed: int = 1):
    """Arms built so the difference in means is -0.761 and mean treated a is 0.814."""
    rng = np.random.default_rng(seed)
    d = np.linspace(0.0, 1.0 - MU_WORKED, n1 // 2)
    a1 = np.concatenate([MU_WORKED + d, MU_WORKED - d])
    y1 = rng.normal(size=n1)
    y1 = y1 - y1.mean() + ITT_WORKED
    y0 = rng.normal(size=n0)
    y0 = y0 - y0.mean()
    z = np.r_[np.ones(n1), np.zeros(n0)]
    a = np.r_[a1, np.zeros(n0)]
    y = np.r_[y1, y0]
    l = rng.normal(size=n1 + n0)
    return z, a, y, l


def write_trial_csv(path, z, a, y, covariates: dict | None = None, blank_control_a: bool = False):
    covariates = covariates or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "a", "y", *covariates])
        for i in range(len(z)):
            av = "" if blank_control_a and z[i] == 0 and i % 2 else repr(float(a[i]))
            w.writerow([int(z[i]), av, repr(float(y[i])), *(repr(float(c[i])) for c in covariates.values())])
    return path


@pytest.fixture
def worked_data():
    z, a, y, l = worked_arrays()
    return dataset_from_arrays(z, a, y, l[:, None], ("l",))


@pytest.fixture
def worked_csv(tmp_path):
    z, a, y, l = worked_arrays()
    return write_trial_csv(tmp_path / "trial.csv", z, a, y, {"l": l}, blank_control_a=True)


@pytest.fixture
def sim_spec():
    return ScenarioSpec(n=400, alpha0=-0.05, beta1=-0.4, beta2=-0.4)


@pytest.fixture
def sim_data(sim_spec):
    data, _ = gen_dataset(sim_spec, seed=11)
    return data
