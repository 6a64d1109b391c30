"""Profile m(t) = max Re L_t over slice Moebius maps for a chosen field.

With the Koebe field and the second coefficient the profile is flat at -2;
for a switching field it generally is not, which signals non-extremality
of its parametric representation (relative to the family).
"""
import argparse
import csv
import sys

import numpy as np

from loewner_control.control import ControlFamily, LinearFunctional, TransportCache, hamiltonian_scan
from loewner_control.holomap import LinearRadial, SliceMoebius
from loewner_control.loewner import HerglotzField

FIELDS = {
    "koebe": HerglotzField.constant(SliceMoebius(-1)),
    "rotating": HerglotzField((0.0, 1.0, 2.0), (SliceMoebius(-1), SliceMoebius(1j), SliceMoebius(-1))),
    "linear": HerglotzField.constant(LinearRadial()),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--field", choices=sorted(FIELDS), default="koebe")
    ap.add_argument("--coefficient", type=int, default=2, help="use L = a_k")
    ap.add_argument("--t-max", type=float, default=4.0)
    ap.add_argument("--steps", type=int, default=41)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    G = FIELDS[args.field]
    L = LinearFunctional.coefficient((args.coefficient,))
    grid = [t for t in np.linspace(0, args.t_max, args.steps) if G.is_regular(t)]
    cache = TransportCache(L, G)
    scan = hamiltonian_scan(L, G, ControlFamily(), grid, threads=args.threads, cache=cache)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["t", "m", "active", "arg_zeta"])
    for t, m, a, arg in zip(scan.t_grid, scan.m_values, scan.active_values, scan.maximizers):
        w.writerow([f"{t:.4f}", f"{m:.10f}", f"{a:.10f}", f"{np.angle(arg['zeta']):.6f}"])
    print(f"-Re L(F) = {-cache.L_of_F.real:.10f}, constancy deviation {scan.constancy_deviation:.3e}",
          file=sys.stderr)


if __name__ == "__main__":
    main()
