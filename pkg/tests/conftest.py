import numpy as np
import pytest

from grflow import algebra as alg
from grflow import metric as met


@pytest.fixture(scope="session")
def su2_double():
    return alg.cotangent_double(alg.su2_structure())


@pytest.fixture(scope="session")
def complex_double():
    return alg.complex_double_su2(1.0)


@pytest.fixture(scope="session")
def graph_metric_123(su2_double):
    return met.metric_from_graph(su2_double, np.diag([1.0, 2.0, 3.0]))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
