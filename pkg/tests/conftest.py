import importlib.resources
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from preopacity import QuantizationParams, build_abstraction, load_spec, load_system  # noqa: E402

DATA = importlib.resources.files("preopacity") / "data"
CASE_PARAMS = QuantizationParams(eta=1.0, mu=0.0, theta=2.3)
CASE_EPS = 0.4


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def case_spec():
    return load_spec(DATA / "cosine_case_study.json")


@pytest.fixture(scope="session")
def case_abs(case_spec):
    return build_abstraction(case_spec, CASE_PARAMS, CASE_EPS, "cell")


@pytest.fixture(scope="session")
def twin_chains():
    return load_system(DATA / "twin_chains.json")


@pytest.fixture(scope="session")
def related_pair():
    return load_system(DATA / "related_concrete.json"), load_system(DATA / "related_abstract.json")


@pytest.fixture(scope="session")
def random_corpus():
    from corpus import corpus

    return corpus()
