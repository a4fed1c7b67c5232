"""Rate-distortion bounds for the uniform circle under squared error.

The Shannon lower bound is a family of lines in D indexed by s >= 0; their
upper envelope is a lower bound on R(D).  Arc quantizers with n cells give
achievable points (Dbar_n, log n).  The script prints both curves on a few
distortions and the gap between them.

    python demos/circle_rate_distortion.py
"""
import math

import numpy as np

from rectent import ratedistortion as rd

H = math.log(2 * math.pi)


def main():
    for s in (0.0, 1.0, 10.0, 100.0, 1000.0):
        g = rd.gamma_of_s(s)
        print(f"gamma({s:6g}) = {g.gamma:.6f}  y* = {g.y_star[0]:.6f}  D*(s) = {g.d_star:.3e}")

    s_best, r_best = rd.slb_maximize(H, 1e-2, 1.0, 94.0)
    print(f"\nbest single line at D = 0.01: s = {s_best:.2f}, R_SLB = {r_best:.6f} nats")

    D = np.array([1e-4, 1e-3, 1e-2, 1e-1, 0.5, 1.0])
    curve = rd.slb_envelope(H, 2 * math.pi, D, rd.log_grid(1e-2, 1e5, 241))
    rows = rd.gap_report(curve, rd.rd_upper_curve(1024))
    print(f"\n{'D':>8} {'lower':>9} {'upper':>9} {'gap':>7}")
    for d, lo, hi, gap in rows:
        # round before printing so that a -2e-16 tie does not show as -0.0000
        print(f"{d:8.0e} {lo:9.5f} {hi:9.5f} {round(gap, 4) + 0.0:7.4f}")
    print(f"\nsmall-D gap tends to 0.5 log(pi e / 6) = {0.5 * math.log(math.pi * math.e / 6):.4f}")


if __name__ == "__main__":
    main()
