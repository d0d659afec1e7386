from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from reflow import build_lagrangian_pair, build_space_form_pair, geom
from reflow.zerocurv import integrate_frame, local_solution

FIXTURES = Path(__file__).parent / "fixtures"

SPECS = {
    "s21": lambda: build_space_form_pair(2, 1),
    "s22": lambda: build_space_form_pair(2, 2),
    "s32": lambda: build_space_form_pair(3, 2),
    "h21": lambda: build_space_form_pair(2, 1, hyperbolic=True),
    "l2": lambda: build_lagrangian_pair(2),
    "l3": lambda: build_lagrangian_pair(3),
}


@lru_cache(maxsize=None)
def spec_of(name):
    return SPECS[name]()


@lru_cache(maxsize=None)
def solution(name):
    """Regular MC-flat local data on the default chart (65^2 or 33^3, h = 0.05)."""
    return local_solution(spec_of(name), seed=0)


@lru_cache(maxsize=None)
def frame(name, lam):
    return integrate_frame(solution(name), lam)


@lru_cache(maxsize=None)
def calibrated(name):
    return geom.calibrate(spec_of(name), solution(name), frame=frame(name, 1.0))


@lru_cache(maxsize=None)
def report(name, lam):
    return geom.full_report(solution(name), spec_of(name), lam, calibrated(name))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda l: int(l.split("] ", 1)[1].split(".")[0])):
            terminalreporter.write_line(line)
