"""Support-screen values for random single-piece fields of each kind."""
import argparse

import numpy as np

from loewner_control.control import support_screen
from loewner_control.holomap import ConvexCombo, LinearRadial, SliceMoebius
from loewner_control.loewner import HerglotzField


def unit(rng, n):
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    return tuple(x / np.linalg.norm(x))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=10)
    ap.add_argument("--dimension", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    n = args.dimension
    print(f"{'kind':10s} {'sup':>14s} fires")
    for _ in range(args.samples):
        mob = SliceMoebius(np.exp(2j * np.pi * rng.random()), unit(rng, n))
        w = rng.random()
        for kind, h in (("moebius", mob), ("combo", ConvexCombo((w, 1 - w), (LinearRadial(n), mob)))):
            res = support_screen(HerglotzField.constant(h), 0.0)
            print(f"{kind:10s} {res.sup_value:14.6e} {res.fires}")


if __name__ == "__main__":
    main()
