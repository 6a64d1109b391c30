import math
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from loewner_control.holomap import ConvexCombo, LinearRadial, SliceMoebius
from loewner_control.loewner import HerglotzField

settings.register_profile(
    "default", deadline=None, max_examples=15, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

angles = st.floats(0.0, 2 * math.pi, allow_nan=False)


@st.composite
def unit_vectors(draw, n):
    if n == 1:
        return (complex(np.exp(1j * draw(angles))),)
    x = np.array(draw(st.lists(st.floats(-1, 1), min_size=2 * n, max_size=2 * n)))
    if np.linalg.norm(x) < 1e-3:
        x = np.eye(2 * n)[0]
    v = (x[:n] + 1j * x[n:]) / np.linalg.norm(x)
    return tuple(complex(c) for c in v)


@st.composite
def moebius_maps(draw, n):
    return SliceMoebius(complex(np.exp(1j * draw(angles))), draw(unit_vectors(n)))


@st.composite
def interior_points(draw, n, radius=0.9, count=3):
    pts = []
    for _ in range(count):
        u = np.array(draw(unit_vectors(n)))
        pts.append(u * draw(st.floats(0.0, radius)))
    return np.array(pts)


def random_piece(rng, n):
    kind = rng.integers(3)
    if kind == 0:
        return LinearRadial(n)
    mob = SliceMoebius(np.exp(2j * np.pi * rng.random()), random_unit(rng, n))
    if kind == 1:
        return mob
    w = rng.random()
    return ConvexCombo((w, 1 - w), (LinearRadial(n), mob))


def random_unit(rng, n):
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    return tuple(x / np.linalg.norm(x))


def random_field(rng, n, pieces=None):
    k = pieces or int(rng.integers(1, 4))
    bps = (0.0,) + tuple(np.round(np.sort(rng.uniform(0.2, 2.5, size=k - 1)), 6))
    return HerglotzField(bps, tuple(random_piece(rng, n) for _ in range(k)))


@pytest.fixture
def linear_field():
    return HerglotzField.constant(LinearRadial())


@pytest.fixture
def koebe_field():
    return HerglotzField.constant(SliceMoebius(-1))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
