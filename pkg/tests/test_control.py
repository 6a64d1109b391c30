import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import moebius_maps, random_field
from loewner_control.control import (
    CoeffAtom,
    ControlFamily,
    LinearFunctional,
    PointAtom,
    TransportCache,
    eval_functional,
    functional_from_dict,
    functional_to_dict,
    hamiltonian_scan,
    nonconstancy_probe,
    pommerenke_check,
    pontryagin_check,
    support_screen,
    transported_functional,
)
from loewner_control.errors import DomainError
from loewner_control.holomap import ConvexCombo, Jet, LinearRadial, PolyJet, SliceMoebius
from loewner_control.loewner import HerglotzField

A2 = LinearFunctional.coefficient((2,))
P05 = LinearFunctional.point([0.5])
# -0.5 (1 + w)/(1 - w) with w = 0.5/e, to 30 digits
MOEBIUS_LT = -0.725399673560564078966191169289


def koebe_jet(d=3):
    return Jet.from_terms(1, d, {(0, (m,)): m for m in range(1, d + 1)})


def test_eval_functional_examples():
    assert eval_functional(P05, LinearRadial()) == pytest.approx(-0.5)
    assert eval_functional(LinearFunctional.point([0.5], 0), lambda z: z) == pytest.approx(0.5)
    assert eval_functional(A2, koebe_jet()) == pytest.approx(2)
    assert eval_functional(A2, LinearRadial()) == 0
    with pytest.raises(DomainError):
        eval_functional(P05, koebe_jet())
    with pytest.raises(DomainError):
        eval_functional(LinearFunctional.coefficient((4,)), koebe_jet())


def test_functional_validation():
    with pytest.raises(DomainError):
        LinearFunctional(())
    with pytest.raises(DomainError):
        PointAtom((1.0,), 0)
    with pytest.raises(DomainError):
        CoeffAtom((0, 0), 0)
    with pytest.raises(DomainError):
        LinearFunctional((PointAtom((0.1,), 0), CoeffAtom((1, 1), 0)))


def test_functional_round_trip():
    L = LinearFunctional((PointAtom((0.1, 0.2j), 1, 2 - 1j), CoeffAtom((1, 2), 0, 0.5j)))
    assert functional_from_dict(functional_to_dict(L)) == L


@given(moebius_maps(2), moebius_maps(2), st.complex_numbers(max_magnitude=3, allow_nan=False))
def test_eval_functional_is_linear(a, b, c):
    L = LinearFunctional((PointAtom((0.3, 0.1j), 0, 1.5), CoeffAtom((1, 1), 1, -2j), CoeffAtom((0, 3), 0)))
    combo = ConvexCombo((0.5, 0.5), (a, b))
    assert eval_functional(L, combo) == pytest.approx(0.5 * (eval_functional(L, a) + eval_functional(L, b)), abs=1e-12)
    ja, jb = (PolyJet(m._jet(3)) for m in (a, b))
    lhs = eval_functional(L, PolyJet(ja.jet + jb.jet * c))
    assert lhs == pytest.approx(eval_functional(L, ja) + c * eval_functional(L, jb), abs=1e-12 * (1 + abs(c)) * 10)


def test_transport_examples(linear_field, koebe_field):
    for t in (0.0, 1.0, 3.0):
        assert transported_functional(P05, linear_field, t, LinearRadial()) == pytest.approx(-0.5, abs=1e-12)
    assert transported_functional(P05, linear_field, 1.0, SliceMoebius(1)) == pytest.approx(MOEBIUS_LT, abs=1e-10)
    cache = TransportCache(A2, koebe_field)
    for zeta in (1, -1, 1j, np.exp(2j)):
        got = transported_functional(A2, koebe_field, 0.0, SliceMoebius(zeta), cache=cache)
        assert got == pytest.approx(-2 * np.conj(zeta) - 4, abs=1e-8)


def test_transport_rejects_breakpoints():
    G = HerglotzField((0.0, 1.0), (LinearRadial(), SliceMoebius(1)))
    with pytest.raises(DomainError):
        transported_functional(P05, G, 1.0, LinearRadial())


def mixed_functional(n):
    z = np.zeros(n, dtype=complex)
    z[0], z[-1] = 0.4, 0.3j
    alpha = [0] * n
    alpha[-1] = 2
    return LinearFunctional((PointAtom(tuple(z), 0, 1 - 1j), CoeffAtom(tuple(alpha), n - 1, 2.0)))


@given(st.integers(0, 10**6), moebius_maps(2), moebius_maps(2), st.complex_numbers(max_magnitude=3, allow_nan=False))
def test_transport_is_linear(seed, a, b, c):
    G = random_field(np.random.default_rng(seed), 2)
    Lt = TransportCache(mixed_functional(2), G).at(0.7)
    ja, jb = PolyJet(a._jet(4)), PolyJet(b._jet(4))
    lhs = Lt(PolyJet(ja.jet + jb.jet * c))
    assert lhs == pytest.approx(Lt(ja) + c * Lt(jb), abs=1e-12 * (1 + abs(c)) * 100)


@given(st.integers(0, 10**6), st.integers(1, 2), st.floats(0.0, 3.0))
def test_moebius_fast_path_matches_generic(seed, n, t):
    G = random_field(np.random.default_rng(seed), n)
    if not G.is_regular(t):
        t += 1e-3
    Lt = TransportCache(mixed_functional(n), G).at(t)
    u = np.ones(n) / math.sqrt(n)
    zetas = np.exp(1j * np.linspace(0, 6, 7))
    fast = Lt.moebius_values(zetas, u)
    slow = [Lt(SliceMoebius(z, tuple(u))) for z in zetas]
    assert np.allclose(fast, slow, atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_transport_limit(seed):
    G = random_field(np.random.default_rng(seed), 2)
    cache = TransportCache(mixed_functional(2), G)
    Lt = cache.at(20.0)
    for h in (LinearRadial(2), SliceMoebius(1j, (0.6, 0.8)), SliceMoebius(-1, (0, 1))):
        assert abs(Lt(h) + cache.L_of_F) <= 1e-4


def test_scan_examples(koebe_field, linear_field):
    scan = hamiltonian_scan(A2, koebe_field, ControlFamily(), [0.0, 1.0, 2.0])
    assert scan.m_values[0] == pytest.approx(-2, abs=1e-8)
    assert scan.maximizers[0]["zeta"] == pytest.approx(-1)
    scan = hamiltonian_scan(P05, linear_field, ControlFamily.explicit(LinearRadial()), [0.0, 2.0])
    assert scan.m_values == pytest.approx((-0.5, -0.5))
    with pytest.raises(DomainError):
        hamiltonian_scan(A2, koebe_field, ControlFamily(), [])
    with pytest.raises(DomainError):
        ControlFamily(kind="explicit")


def test_singleton_family_value(koebe_field):
    h = SliceMoebius(1j)
    scan = hamiltonian_scan(A2, koebe_field, ControlFamily.explicit(h), [0.5, 1.5])
    for t, m in zip(scan.t_grid, scan.m_values):
        assert m == pytest.approx(transported_functional(A2, koebe_field, t, h).real)


def test_scan_threads_are_deterministic(koebe_field):
    grid = [0.0, 0.5, 1.0, 1.5]
    a = hamiltonian_scan(A2, koebe_field, ControlFamily(zeta_points=64), grid)
    b = hamiltonian_scan(A2, koebe_field, ControlFamily(zeta_points=64), grid, threads=4)
    assert a == b


def test_pontryagin_examples(koebe_field, linear_field):
    assert pontryagin_check(A2, koebe_field, ControlFamily(), [0.0, 1.0]).passed
    rep = pontryagin_check(A2, linear_field, ControlFamily(), [0.0, 1.0])
    assert not rep.passed and rep.worst_violation >= 2 - 1e-6 and rep.worst_t == 0.0
    assert pontryagin_check(A2, linear_field, ControlFamily.explicit(LinearRadial()), [0.0, 1.0]).passed


def test_pommerenke_examples(koebe_field, linear_field):
    rep = pommerenke_check(A2, koebe_field, ControlFamily(), certified=True)
    assert rep.passed and rep.minus_re_LF == pytest.approx(-2, abs=1e-8)
    rep = pommerenke_check(P05, linear_field, ControlFamily.explicit(LinearRadial()), certified=True)
    assert rep.passed and rep.m_initial == pytest.approx(-0.5)


def test_screen_examples(linear_field):
    res = support_screen(linear_field, 0.5)
    assert res.fires and res.sup_value == pytest.approx(-1, abs=1e-12)
    assert "fires" in res.verdict
    combo = ConvexCombo((0.5, 0.5), (LinearRadial(), SliceMoebius(1)))
    res = support_screen(HerglotzField.constant(combo), 0.5)
    assert res.fires and -1 < res.sup_value <= -0.5 + 1e-6
    with pytest.raises(DomainError):
        support_screen(HerglotzField((0.0, 0.5), (LinearRadial(), SliceMoebius(1))), 0.5)


@given(st.one_of(moebius_maps(1), moebius_maps(2)))
def test_screen_never_fires_on_moebius(m):
    res = support_screen(HerglotzField.constant(m), 0.3)
    assert not res.fires and res.sup_value <= 0


def test_probe_examples(koebe_field, linear_field):
    rep = nonconstancy_probe(A2, koebe_field, 0.0, degree=3)
    assert rep.values[(0, (2,))] == pytest.approx(1, abs=1e-8) and rep.witnessed
    rep = nonconstancy_probe(A2, linear_field, 0.0, degree=3)
    assert rep.values[(0, (3,))] == 0 and rep.values[(0, (2,))] == pytest.approx(1) and rep.witnessed
    rep = nonconstancy_probe(LinearFunctional.coefficient((2,), weight=0), linear_field, 0.0)
    assert not rep.witnessed and rep.max_modulus == 0
