"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from conftest import random_field, random_unit  # noqa: E402

from loewner_control.control import (  # noqa: E402
    ControlFamily,
    CoeffAtom,
    LinearFunctional,
    PointAtom,
    pommerenke_check,
    pontryagin_check,
    support_screen,
)
from loewner_control.holomap import (  # noqa: E402
    ConvexCombo,
    Jet,
    LinearRadial,
    PolyJet,
    SliceMoebius,
    check_class_membership,
    coefficient,
    membership_radius,
)
from loewner_control.loewner import (  # noqa: E402
    HerglotzField,
    evolution_map,
    flow_jet,
    integrate_flow,
    koebe_oracle,
    scaled_limit,
)
from loewner_control.variation import verify_variation  # noqa: E402

RESULTS: list[str] = []
KOEBE = HerglotzField.constant(SliceMoebius(-1))
LINEAR = HerglotzField.constant(LinearRadial())
A2 = LinearFunctional.coefficient((2,))
T_GRID = tuple(np.arange(0, 4.01, 0.5))


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def ball_points(n, rng, count=12, radius=0.9):
    Z = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    r = np.concatenate([[radius, radius], rng.uniform(0, radius, count - 2)])
    return Z * r[:, None]


def test_criterion_01_linear_exactness():
    rng = np.random.default_rng(1)
    err_v = err_j = 0.0
    for n in (1, 2, 3):
        G = HerglotzField.constant(LinearRadial(n))
        Z = ball_points(n, rng)
        for t in np.linspace(0, 10, 11):
            res = integrate_flow(G, 0, t, Z)
            err_v = max(err_v, np.max(np.abs(res.values - math.exp(-t) * Z)))
            err_j = max(err_j, np.max(np.abs(res.jacobians - math.exp(-t) * np.eye(n))))
    report(1, err_v <= 1e-9 and err_j <= 1e-9, f"max value error {err_v:.2e}, Jacobian error {err_j:.2e} (tol 1e-9)")


def test_criterion_02_koebe_oracle():
    Z = np.array([[0.1], [0.3], [0.5], [0.7]])
    err = 0.0
    for zeta in (-1, 1, 1j):
        G = HerglotzField.constant(SliceMoebius(zeta))
        for t in (0.5, 1, 2, 5):
            got = integrate_flow(G, 0, t, Z).values[:, 0]
            err = max(err, np.max(np.abs(got - koebe_oracle(zeta, 0, t, Z[:, 0]))))
    f = scaled_limit(KOEBE, points=[0.5]).values[0, 0]
    report(2, err <= 1e-8 and abs(f - 2) <= 1e-6, f"max oracle error {err:.2e} (tol 1e-8), |f(0.5) - 2| = {abs(f - 2):.2e} (tol 1e-6)")


def test_criterion_03_jet_transport():
    a2 = coefficient(flow_jet(KOEBE, 0, 1, 3), (2,), 0)
    target = 2 * math.exp(-1) * (1 - math.exp(-1))
    lim = coefficient(scaled_limit(KOEBE, degree=3).jet, (2,), 0)
    ok = abs(a2 - target) <= 1e-8 and abs(lim - 2) <= 1e-6
    report(3, ok, f"|a2(phi_01) - target| = {abs(a2 - target):.2e} (tol 1e-8), |a2(f) - 2| = {abs(lim - 2):.2e} (tol 1e-6)")


def variation_pairs():
    rng = np.random.default_rng(2024)
    G2 = random_field(rng, 2, pieces=2)
    T2 = G2.breakpoints[-1] + 0.5
    pts1 = np.array([[0.3], [0.5], [-0.4j]])
    pts2 = np.array([[0.3, 0.2j], [-0.2, 0.4], [0.5j, 0.0]])
    return [
        ("linear+moebius", LINEAR, SliceMoebius(1), 1.0, pts1),
        ("koebe+linear", KOEBE, LinearRadial(), 1.0, pts1),
        ("random2d+moebius", G2, SliceMoebius(np.exp(0.4j), random_unit(rng, 2)), T2, pts2),
    ]


def test_criterion_04_variational_formula():
    worst_ratio, worst_terminal, ok = 0.0, 0.0, True
    for name, G, h, T, Z in variation_pairs():
        for t in (T, T + 1, math.inf):
            rep = verify_variation(G, T, h, t, Z)
            worst_ratio = max(worst_ratio, max(rep.decay_ratios))
            worst_terminal = max(worst_terminal, rep.normalized_terminal_residual)
            ok = ok and rep.passed and rep.normalized_terminal_residual <= 1e-3
    report(4, ok, f"3 pairs x t in {{T, T+1, inf}}: max decay ratio {worst_ratio:.3f} (<= 0.75), "
                  f"max terminal residual {worst_terminal:.2e} (<= 1e-3)")


def test_criterion_05_semigroup():
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(10):
        n = 1 + i % 2
        G = random_field(rng, n)
        u, s, t = np.sort(rng.uniform(0, 4, 3))
        worst = max(worst, evolution_map(G, u, s, t, ball_points(n, rng, 6)).residual)
    report(5, worst <= 1e-8, f"max composition residual over 10 fields {worst:.2e} (tol 1e-8)")


def test_criterion_06_maximum_principle():
    pos = pontryagin_check(A2, KOEBE, ControlFamily(), T_GRID, slack=1e-3)
    step = 2 * math.pi / 256
    argmax_ok = all(abs(np.angle(-m["zeta"])) <= step for m in pos.scan.maximizers)
    neg = pontryagin_check(A2, LINEAR, ControlFamily(), T_GRID, slack=1e-3)
    ok = pos.passed and argmax_ok and not neg.passed and neg.worst_violation >= 1.9
    report(6, ok, f"Koebe/a2 worst violation {pos.worst_violation:.2e} (slack 1e-3), argmax zeta=-1: {argmax_ok}; "
                  f"linear/a2 violation {neg.worst_violation:.4f} (>= 1.9)")


def test_criterion_07_constancy():
    pos = pontryagin_check(A2, KOEBE, ControlFamily(), T_GRID)
    dev = max(abs(m + 2) for m in pos.scan.m_values)
    report(7, dev <= 1e-3, f"max |m(t) + 2| = {dev:.2e} over t in 0..4 (tol 1e-3)")


def random_functional(rng, n):
    z = 0.6 * np.array(random_unit(rng, n)) * rng.random()
    alpha = [0] * n
    alpha[int(rng.integers(n))] = 2
    w1, w2 = rng.normal(size=2) + 1j * rng.normal(size=2)
    return LinearFunctional((PointAtom(tuple(z), int(rng.integers(n)), w1), CoeffAtom(tuple(alpha), int(rng.integers(n)), w2)))


def test_criterion_08_pommerenke():
    rep = pommerenke_check(A2, KOEBE, ControlFamily(), certified=True)
    rng = np.random.default_rng(8)
    gaps = []
    for i in range(5):
        n = 1 + i % 2
        r = pommerenke_check(random_functional(rng, n), random_field(rng, n), ControlFamily(), t_limit=20.0, tol=1e-4)
        gaps.append(r.limit_gap)
    ok = rep.initial_gap <= 1e-3 and max(gaps) <= 1e-4
    report(8, ok, f"Koebe/a2 |m(0) + Re L(F)| = {rep.initial_gap:.2e} (tol 1e-3); "
                  f"random scenarios max |m(20) + Re L(F)| = {max(gaps):.2e} (tol 1e-4)")


def test_criterion_09_support_screen():
    lin = support_screen(LINEAR, 0.5)
    rng = np.random.default_rng(9)
    fired = []
    worst = -math.inf
    for i in range(12):
        n = 1 + i % 3
        m = SliceMoebius(np.exp(2j * math.pi * rng.random()), random_unit(rng, n))
        res = support_screen(HerglotzField.constant(m), 0.5)
        worst = max(worst, res.sup_value)
        fired.append(res.fires)
    ok = lin.fires and abs(lin.sup_value + 1) <= 1e-12 and not any(fired)
    report(9, ok, f"LinearRadial sup = {lin.sup_value:.15f}, fires {lin.fires}; "
                  f"12 SliceMoebius fields fired {sum(fired)} times (largest sup {worst:.2e})")


def test_criterion_10_membership():
    rng = np.random.default_rng(10)
    maps = []
    for i in range(12):
        n = 1 + i % 3
        a = SliceMoebius(np.exp(2j * math.pi * rng.random()), random_unit(rng, n))
        b = SliceMoebius(np.exp(2j * math.pi * rng.random()), random_unit(rng, n))
        w = rng.random()
        maps += [a, ConvexCombo((w, 1 - w), (a, b)), ConvexCombo((w, 1 - w), (LinearRadial(n), b))]
    all_pass = all(check_class_membership(m).passed for m in maps)
    bad = check_class_membership(PolyJet(Jet.from_terms(1, 2, {(0, (1,)): -1, (0, (2,)): 3})))
    delta = membership_radius(Jet.from_terms(1, 2, {(0, (2,)): 1}))
    ok = all_pass and not bad.passed and bad.worst_margin > 0 and abs(delta - 1) <= 1e-3
    report(10, ok, f"{len(maps)} Moebius/convex maps pass: {all_pass}; -z+3z^2 margin {bad.worst_margin:.3f} "
                   f"at {bad.worst_point}; radius(z^2) = {delta:.6f}")


if __name__ == "__main__":
    import subprocess

    sys.exit(subprocess.call([sys.executable, "-m", "pytest", __file__, "-q", "-s"]))
