import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import interior_points, random_field
from loewner_control.errors import DomainError
from loewner_control.holomap import LinearRadial, PolyJet, SliceMoebius, eval_map
from loewner_control.loewner import HerglotzField, integrate_flow
from loewner_control.variation import (
    NeedleSpec,
    chain_variation,
    fundamental_solution,
    first_order_term,
    needle_field,
    scaled_first_order_term,
    verify_variation,
)

# independent high-precision values for the linear base and the needle SliceMoebius(1) at T=1, z=0.5
ALPHA_T1 = -0.0829199059496858363368585684163
ALPHA_T2 = -0.03050452866275898077971764186
SCALED_INF = -0.225399673560564078966191169289
# e^{t-T} phi_t'(z) / phi_T'(z) for the Koebe field, T=1, t=3, z=0.5
KOEBE_Y = 3.14270372739976478513349757104


def test_needle_field_unfolds(linear_field):
    h = SliceMoebius(1)
    Ge = needle_field(linear_field, NeedleSpec(1.0, h, 0.1))
    assert Ge.breakpoints == pytest.approx((0.0, 0.9, 1.0))
    assert Ge.pieces == (LinearRadial(), h, LinearRadial())


def test_needle_rejections(linear_field):
    with pytest.raises(DomainError):
        NeedleSpec(1.0, SliceMoebius(1), 1.5)
    G = HerglotzField((0.0, 0.95), (LinearRadial(), SliceMoebius(1)))
    with pytest.raises(DomainError):
        needle_field(G, NeedleSpec(1.0, SliceMoebius(-1), 0.1))
    with pytest.raises(DomainError):
        first_order_term(G, SliceMoebius(-1), 0, 0.95, 2, [0.3])


def test_idempotent_needle(koebe_field):
    assert needle_field(koebe_field, NeedleSpec(1.0, SliceMoebius(-1), 0.3)) is koebe_field
    assert np.all(first_order_term(koebe_field, SliceMoebius(-1), 0, 1, 2, [0.4]) == 0)
    assert np.all(scaled_first_order_term(koebe_field, SliceMoebius(-1), 0, 1, math.inf, [0.4]) == 0)
    assert np.all(chain_variation(koebe_field, SliceMoebius(-1), 1.0, 0.0, [0.4]) == 0)
    rep = verify_variation(koebe_field, 1.0, SliceMoebius(-1), 2.0, [[0.4]], ladder=(0.1, 0.05))
    assert max(rep.residuals) == 0 and rep.passed


def test_first_order_oracles(linear_field):
    h = SliceMoebius(1)
    assert first_order_term(linear_field, h, 0, 1, 1, [0.5])[0] == pytest.approx(ALPHA_T1, abs=1e-10)
    assert first_order_term(linear_field, h, 0, 1, 2, [0.5])[0] == pytest.approx(ALPHA_T2, abs=1e-10)
    assert scaled_first_order_term(linear_field, h, 0, 1, math.inf, [0.5])[0] == pytest.approx(SCALED_INF, abs=1e-9)
    assert chain_variation(linear_field, h, 1.0, 0.0, [0.5])[0] == pytest.approx(SCALED_INF, abs=1e-9)
    assert np.all(chain_variation(linear_field, h, 1.0, 1.5, [0.5]) == 0)


@given(st.integers(0, 10**6), interior_points(2, radius=0.8, count=2))
def test_scaled_term_at_T_is_the_jump(seed, Z):
    G = random_field(np.random.default_rng(seed), 2, pieces=2)
    T = G.breakpoints[-1] + 0.3
    h = SliceMoebius(1j, (0.6, 0.8))
    phi_T = integrate_flow(G, 0, T, Z).values
    jump = eval_map(h, phi_T) - eval_map(G.piece_at(T), phi_T)
    got = scaled_first_order_term(G, h, 0, T, T, Z)
    assert np.allclose(got, math.exp(T) * jump, atol=1e-9)


def test_jet_term_agrees_with_points(koebe_field):
    h = LinearRadial()
    for t in (1.0, 2.5, math.inf):
        pts = scaled_first_order_term(koebe_field, h, 0, 1, t, [[0.2], [0.1j]])
        jet = scaled_first_order_term(koebe_field, h, 0, 1, t, degree=14)
        assert np.allclose(eval_map(PolyJet(jet), [[0.2], [0.1j]]), pts, atol=1e-7)


def test_fundamental_solution(linear_field, koebe_field):
    assert np.allclose(fundamental_solution(linear_field, 0, 1, 4, [0.6]), np.eye(1), atol=1e-12)
    G = random_field(np.random.default_rng(5), 2)
    assert np.allclose(fundamental_solution(G, 0, 1, 3, np.zeros(2)), np.eye(2), atol=1e-9)
    assert fundamental_solution(koebe_field, 0, 1, 3, [0.5])[0, 0] == pytest.approx(KOEBE_Y, abs=1e-9)
    with pytest.raises(DomainError):
        fundamental_solution(koebe_field, 0, 2, 1, [0.5])


@pytest.mark.parametrize("seed", range(4))
def test_fundamental_solution_bounded(seed):
    G = random_field(np.random.default_rng(seed), 2)
    Z = np.array([[0.7, 0], [0, 0.7j], [0.4, -0.4]])
    norms = [np.max(np.linalg.norm(fundamental_solution(G, 0, 1.0, t, Z), axis=(1, 2), ord=2))
             for t in (1, 5, 10, 20, 40)]
    # for ||z|| <= r the scaled derivative is bounded by (1 + r)/(1 - r)^3 times the inverse bound
    assert max(norms) < 1e3


@given(st.integers(0, 10**6), st.floats(0.05, 0.5))
def test_needle_consistency(seed, eps):
    G = random_field(np.random.default_rng(seed), 1, pieces=2)
    T = G.breakpoints[-1] + 0.6
    Ge = needle_field(G, NeedleSpec(T, SliceMoebius(np.exp(1j * seed)), eps))
    Z = np.array([[0.5], [-0.3j]])
    before = T - eps
    assert np.array_equal(integrate_flow(Ge, 0, before, Z).values, integrate_flow(G, 0, before, Z).values)
    assert np.array_equal(integrate_flow(Ge, T, T + 1, Z).values, integrate_flow(G, T, T + 1, Z).values)


@pytest.mark.parametrize("seed", range(3))
def test_uniform_closeness(seed):
    G = random_field(np.random.default_rng(seed), 2, pieces=2)
    T = G.breakpoints[-1] + 0.5
    h = SliceMoebius(-1j, (0.0, 1.0))
    Z = np.array([[0.5, 0], [0.3j, 0.3], [-0.6, 0.2]])
    gammas = []
    for eps in (0.2, 0.1, 0.05, 0.02):
        Ge = needle_field(G, NeedleSpec(T, h, eps))
        for t in np.linspace(0, 10, 6):
            d = np.linalg.norm(integrate_flow(Ge, 0, t, Z).values - integrate_flow(G, 0, t, Z).values, axis=1)
            gammas.append(np.max(d) / eps)
    # a single constant gamma bounds the gap for every eps and t
    assert max(gammas) < 10.0


def test_linear_ladder_decays(linear_field):
    rep = verify_variation(linear_field, 1.0, SliceMoebius(1), 1.0, [[0.3], [0.5]])
    assert rep.passed and rep.normalized_terminal_residual <= 1e-3
    assert all(r <= 0.75 for r in rep.decay_ratios)


def test_ladder_validation(linear_field):
    with pytest.raises(DomainError):
        verify_variation(linear_field, 1.0, SliceMoebius(1), 1.0, [[0.3]], ladder=(0.01, 0.1))
    with pytest.raises(DomainError):
        verify_variation(linear_field, 1.0, SliceMoebius(1), 1.0, [[0.3]], ladder=(2.0, 0.1))


def test_threads_do_not_change_results(linear_field):
    a = verify_variation(linear_field, 1.0, SliceMoebius(1j), 2.0, [[0.4]], ladder=(0.1, 0.05, 0.02))
    b = verify_variation(linear_field, 1.0, SliceMoebius(1j), 2.0, [[0.4]], ladder=(0.1, 0.05, 0.02), threads=3)
    assert a == b
