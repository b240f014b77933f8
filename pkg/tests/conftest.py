import pytest

from markovmouth.fixtures import (
    ABC_VOCAB,
    fixture_f1,
    fixture_f2,
    fixture_f2_corpus,
    fixture_loglinear,
)


@pytest.fixture
def vocab():
    return ABC_VOCAB


@pytest.fixture
def f1():
    return fixture_f1()


@pytest.fixture
def f2():
    return fixture_f2()


@pytest.fixture
def f2_corpus():
    return fixture_f2_corpus()


@pytest.fixture
def loglinear():
    return fixture_loglinear(seed=1)
