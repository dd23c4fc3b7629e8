"""Charts, metrics, connections and quadrature.

Builds the round spheres in torus coordinates and the Fubini-Study chart of
CP^n, then checks the classical volumes and a few hand-computed connection
coefficients.  Run:  python demos/01_charts_and_quadrature.py
"""

import math

import numpy as np

from phwc_lab.geometry import Box, ChartManifold, codifferential_two_form
from phwc_lab.scenarios import fs_chart, hopf_sphere_chart


def main():
    print("== volumes from tensor Gauss-Legendre quadrature ==")
    for n, order in ((1, 24), (2, 8), (3, 6)):
        chart = hopf_sphere_chart(n, order)
        exact = 2 * np.pi ** (n + 1) / math.factorial(n)
        got = chart.quadrature.total_measure
        print(f"Vol(S^{2 * n + 1}) = {got:.8f}   exact {exact:.8f}   rel {abs(got - exact) / exact:.1e}")
    for n, order in ((1, 24), (2, 12)):
        chart = fs_chart(n, order)
        exact = np.pi**n / math.factorial(n)
        got = chart.quadrature.total_measure
        print(f"Vol(CP^{n})  = {got:.8f}   exact {exact:.8f}   rel {abs(got - exact) / exact:.1e}")

    print("\n== unit two-sphere in spherical coordinates ==")
    s2 = ChartManifold(
        "S2",
        lambda x: [[1.0, 0.0], [0.0, np.sin(x[0]) ** 2]],
        Box((0.0, 0.0), (np.pi, 2 * np.pi), periodic=(1,)),
        quad_orders=24,
    )
    x = np.array([np.pi / 4, 0.0])
    print("metric at (pi/4, 0):", np.round(s2.metric_at(x), 12).tolist())
    gam = s2.christoffel_at(x)
    print(f"Christoffel G^th_phph = {gam[0, 1, 1]:+.6f}   (hand value -sin cos = -0.5)")
    print(f"Christoffel G^ph_thph = {gam[1, 0, 1]:+.6f}   (hand value cot(pi/4) = 1)")
    print(f"area = {s2.integrate(lambda p: np.ones(len(p))):.8f}   exact {4 * np.pi:.8f}")

    print("\n== codifferential of a 2-form, frame independence ==")

    def omega(p):
        out = np.zeros((len(p), 2, 2))
        val = np.sin(p[:, 0]) * np.cos(p[:, 1])
        out[:, 0, 1] = val
        out[:, 1, 0] = -val
        return out

    pts = s2.random_points(np.random.default_rng(0), 5)
    th = 0.83
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    a = codifferential_two_form(s2, omega, pts)
    b = codifferential_two_form(s2, omega, pts, rotation=rot)
    print("max difference between frames:", np.max(np.abs(a - b)))


if __name__ == "__main__":
    main()
