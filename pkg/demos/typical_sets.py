"""How fast do von Mises blocks become typical?

For i.i.d. angles with kappa = 1 the per-symbol information -log f(phi)/n
concentrates around h, but slowly: its standard deviation is
kappa * sd(cos phi) / sqrt(n).  The table compares the empirical probability
of the epsilon-typical set with the normal approximation as n grows.

    python demos/typical_sets.py
"""
import math

from scipy import special, stats

from rectent import aep, sources as S


def main():
    src = S.from_catalog("circle:vonmises:1")
    i0, i1, i2 = special.iv([0, 1, 2], 1.0)
    sd = math.sqrt(0.5 * (1 + i2 / i0) - (i1 / i0) ** 2)
    eps = 0.1
    print(f"{'n':>5} {'empirical':>10} {'normal':>8}")
    for n in (1, 10, 50, 100, 200, 400):
        rep = aep.empirical_typicality(src, n, eps, 10_000, 2024)
        approx = 2 * stats.norm.cdf(eps * math.sqrt(n) / sd) - 1
        print(f"{n:5d} {rep.empirical_prob:10.4f} {approx:8.4f}")

    sw = aep.measure_sandwich(src, 1, eps)
    print(f"\nn = 1 typical-set length {sw.measure:.4f} in [{sw.lower:.4f}, {sw.upper:.4f}]")


if __name__ == "__main__":
    main()
