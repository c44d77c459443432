import pytest

from cvqss.harness import FIGURES, run_sweep

_cache: dict = {}


def figure_rows(name: str):
    if name not in _cache:
        _cache[name] = run_sweep(FIGURES[name])
    return _cache[name]


@pytest.fixture(scope="session")
def fig_rows():
    return figure_rows
