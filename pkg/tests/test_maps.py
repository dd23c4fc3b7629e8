"""Map calculus: jets, adjoint, tension, pullbacks, fibre geometry."""

import numpy as np
import pytest

from phwc_lab.autodiff import DiffConfig
from phwc_lab.errors import RankDeficient
from phwc_lab.geometry import Box, ChartManifold, TangentVector
from phwc_lab.maps import (
    SmoothMap,
    adjoint_differential,
    dilation_hwc,
    energy_density,
    fibre_splitting,
    horizontal_lift,
    horizontal_projector,
    mean_curvature_fibres,
    nabla_pullback_metric,
    pullback_metric,
    second_fundamental_form,
    second_fundamental_form_tensor,
    stress_energy_residual,
    tension_field_direct,
)
from phwc_lab.scenarios import build_scenario, flat_chart

from conftest import sphere2_chart


@pytest.fixture(scope="module")
def hopf():
    return build_scenario("hopf-s3", quad_order=8, validate=False)


@pytest.fixture(scope="module")
def hopf_pts(hopf):
    rng = np.random.default_rng(0)
    return hopf.domain.random_points(rng, 100, margin=0.03)


class TestAdjoint:
    def test_flat_isometry_inverse(self, rng):
        dom = flat_chart(2, name="dom2")
        cod = flat_chart(2, half=2.0, name="cod2")
        th = 0.6
        R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        phi = SmoothMap("rot", dom, cod, lambda x: [R[0, 0] * x[0] + R[0, 1] * x[1],
                                                    R[1, 0] * x[0] + R[1, 1] * x[1]])
        pts = dom.random_points(rng, 5)
        adj = adjoint_differential(phi, pts)
        assert np.allclose(adj, np.linalg.inv(R), atol=1e-12)

    def test_hopf_submersion_identity(self, hopf, hopf_pts):
        jet = hopf.map.jet(hopf_pts)
        adj = adjoint_differential(hopf.map, hopf_pts, jet=jet)
        q = jet.dphi @ adj
        assert np.max(np.abs(q - np.eye(2))) < 1e-9

    def test_constant_map_zero(self, rng):
        dom = flat_chart(2)
        cod = flat_chart(2, half=2.0)
        phi = SmoothMap("const", dom, cod, lambda x: [0.3, 0.1 + 0.0 * x[0]])
        adj = adjoint_differential(phi, dom.random_points(rng, 4))
        assert np.allclose(adj, 0.0)

    def test_algebraic_identity(self, hopf, hopf_pts, rng):
        # g(X, dphi^t E) = h(dphi X, E) exactly
        jet = hopf.map.jet(hopf_pts)
        adj = adjoint_differential(hopf.map, hopf_pts, jet=jet)
        X = rng.normal(size=(len(hopf_pts), 3))
        E = rng.normal(size=(len(hopf_pts), 2))
        g = hopf.domain.metric_at(hopf_pts, check=False)
        h = hopf.codomain.metric_at(jet.y, check=False)
        lhs = np.einsum("ni,nij,nja,na->n", X, g, adj, E)
        rhs = np.einsum("nai,ni,nab,nb->n", jet.dphi, X, h, E)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


class TestSecondFundamentalForm:
    def test_linear_map_flat(self, rng):
        dom = flat_chart(3)
        cod = flat_chart(2, half=3.0)
        phi = SmoothMap("lin", dom, cod, lambda x: [x[0] + 0.5 * x[1], x[2] - x[0]])
        nd = second_fundamental_form_tensor(phi, dom.random_points(rng, 5))
        assert np.max(np.abs(nd)) < 1e-9

    def test_identity_map(self, rng):
        s2 = sphere2_chart(quad_orders=6)
        phi = SmoothMap("id", s2, s2, lambda x: [x[0], x[1]])
        nd = second_fundamental_form_tensor(phi, s2.random_points(rng, 10))
        assert np.max(np.abs(nd)) < 1e-8

    def test_symmetry_in_xy(self, hopf, hopf_pts, rng):
        nd = second_fundamental_form_tensor(hopf.map, hopf_pts)
        assert np.max(np.abs(nd - np.swapaxes(nd, -1, -2))) < 1e-6

    def test_vector_contraction(self, hopf, rng):
        x = hopf.domain.random_points(rng, 1)[0]
        X = TangentVector(x, rng.normal(size=3))
        Y = TangentVector(x, rng.normal(size=3))
        out = second_fundamental_form(hopf.map, X, Y)
        nd = second_fundamental_form_tensor(hopf.map, x)
        expect = np.einsum("gij,i,j->g", nd, X.components, Y.components)
        assert np.allclose(out, expect)

    def test_richardson_step_halving(self, hopf, rng):
        # |nabla dphi(X, Y)|_h for horizontal unit X, Y agrees between FD at
        # step h and at h/2 (step-halving oracle)
        x = hopf.domain.random_points(rng, 20, margin=0.1)
        H = horizontal_projector(hopf.map, x)
        g = hopf.domain.metric_at(x, check=False)
        vecs = []
        for _ in range(2):
            v = np.einsum("nij,nj->ni", H, rng.normal(size=x.shape))
            v /= np.sqrt(np.einsum("ni,nij,nj->n", v, g, v))[:, None]
            vecs.append(v)
        X, Y = vecs
        y = hopf.map.value(x)
        h_cod = hopf.codomain.metric_at(y, check=False)
        norms = []
        for step in (1e-4, 5e-5):
            nd = second_fundamental_form_tensor(hopf.map_with(DiffConfig(fd_step=step)), x)
            w = np.einsum("ngij,ni,nj->ng", nd, X, Y)
            norms.append(np.sqrt(np.einsum("ng,ngh,nh->n", w, h_cod, w)))
        assert np.max(np.abs(norms[0] - norms[1])) < 1e-4


class TestTension:
    def test_identity_map_harmonic(self, rng):
        s2 = sphere2_chart(quad_orders=6)
        phi = SmoothMap("id", s2, s2, lambda x: [x[0], x[1]])
        tau = tension_field_direct(phi, s2.random_points(rng, 10))
        assert np.max(np.abs(tau)) < 1e-8

    def test_hopf_harmonic(self, hopf, hopf_pts):
        tau = tension_field_direct(hopf.map, hopf_pts)
        y = hopf.map.value(hopf_pts)
        h = hopf.codomain.metric_at(y, check=False)
        norms = np.sqrt(np.einsum("na,nab,nb->n", tau, h, tau))
        assert np.max(norms) < 1e-5

    def test_one_dimensional_second_derivative(self):
        dom = flat_chart(1)
        cod = flat_chart(1, half=2.0)
        phi = SmoothMap("sq", dom, cod, lambda x: [x[0] ** 2])
        tau = tension_field_direct(phi, np.array([[0.3]]))
        assert np.allclose(tau, 2.0, atol=1e-9)

    def test_stress_energy_identity(self, hopf, hopf_pts, rng):
        Z = rng.normal(size=hopf_pts.shape)
        resid = stress_energy_residual(hopf.map, hopf_pts, Z=Z)
        assert np.max(resid) < 1e-4


class TestPullbackMetric:
    def test_isometric_immersion(self, rng):
        s2 = sphere2_chart(quad_orders=6)
        phi = SmoothMap("id", s2, s2, lambda x: [x[0], x[1]])
        pts = s2.random_points(rng, 10)
        assert np.allclose(pullback_metric(phi, pts), s2.metric_at(pts, check=False), atol=1e-12)

    def test_constant_map(self, rng):
        dom = flat_chart(2)
        cod = flat_chart(2, half=2.0)
        phi = SmoothMap("const", dom, cod, lambda x: [0.2, 0.1 + 0.0 * x[0]])
        pts = dom.random_points(rng, 5)
        assert np.allclose(pullback_metric(phi, pts), 0.0)
        X = TangentVector(pts, rng.normal(size=pts.shape))
        assert np.allclose(nabla_pullback_metric(phi, X, X, X), 0.0, atol=1e-10)

    def test_lemma_two_sided(self, hopf, hopf_pts, rng):
        X, Y, Z = (TangentVector(hopf_pts, rng.normal(size=hopf_pts.shape)) for _ in range(3))
        lhs = nabla_pullback_metric(hopf.map, X, Y, Z, direct=True)
        rhs = nabla_pullback_metric(hopf.map, X, Y, Z, direct=False)
        assert np.max(np.abs(lhs - rhs)) < 1e-4


class TestFibreGeometry:
    def test_hopf_splitting(self, hopf, rng):
        x = hopf.domain.random_points(rng, 1)[0]
        split = fibre_splitting(hopf.map, x)
        assert split.rank == 2
        assert split.vertical.shape == (3, 1)
        jet = hopf.map.jet(x)
        assert np.max(np.abs(jet.dphi @ split.vertical)) < 1e-9
        # kernel is the Reeb direction
        xi = hopf.contact.xi_at(x)
        g = hopf.domain.metric_at(x, check=False)
        inner = split.vertical[:, 0] @ g @ xi
        assert abs(abs(inner) - 1.0) < 1e-9

    def test_identity_and_constant_ranks(self, rng):
        dom = flat_chart(2)
        phi_id = SmoothMap("id", dom, flat_chart(2, half=2.0), lambda x: [x[0], x[1]])
        split = fibre_splitting(phi_id, np.zeros(2))
        assert split.rank == 2 and split.vertical.shape[1] == 0
        phi_const = SmoothMap("const", dom, flat_chart(2, half=2.0), lambda x: [0.1, 0.2 + 0.0 * x[0]])
        split = fibre_splitting(phi_const, np.zeros(2))
        assert split.rank == 0 and split.vertical.shape[1] == 2

    def test_require_rank(self, rng):
        dom = flat_chart(2)
        phi_const = SmoothMap("const", dom, flat_chart(2, half=2.0), lambda x: [0.1, 0.2 + 0.0 * x[0]])
        with pytest.raises(RankDeficient):
            fibre_splitting(phi_const, np.zeros(2), require_rank=2)

    def test_projectors(self, hopf, hopf_pts):
        ph = horizontal_projector(hopf.map, hopf_pts)
        pv = np.eye(3) - ph
        xi = hopf.contact.xi_at(hopf_pts)
        assert np.max(np.abs(np.einsum("nij,nj->ni", pv, xi) - xi)) < 1e-9
        assert np.max(np.abs(ph @ ph - ph)) < 1e-9

    def test_horizontal_lift_inverts(self, hopf, hopf_pts, rng):
        E = rng.normal(size=(len(hopf_pts), 2))
        X = horizontal_lift(hopf.map, hopf_pts, E)
        jet = hopf.map.jet(hopf_pts)
        assert np.max(np.abs(np.einsum("nai,ni->na", jet.dphi, X) - E)) < 1e-9


class TestMeanCurvature:
    def test_product_projection(self, rng):
        sc = build_scenario("product-proj", validate=False)
        pts = sc.domain.random_points(rng, 20, margin=0.05)
        mu = mean_curvature_fibres(sc.map, pts)
        g = sc.domain.metric_at(pts, check=False)
        assert np.max(np.sqrt(np.einsum("ni,nij,nj->n", mu, g, mu))) < 1e-9

    def test_hopf_minimal_fibres(self, hopf, hopf_pts):
        mu = mean_curvature_fibres(hopf.map, hopf_pts)
        g = hopf.domain.metric_at(hopf_pts, check=False)
        assert np.max(np.sqrt(np.einsum("ni,nij,nj->n", mu, g, mu))) < 1e-6

    def test_radial_projection_vs_scaled_plane(self, rng):
        # polar (r, theta) -> S^1: rays are geodesics, mu = 0
        annulus = ChartManifold(
            "annulus",
            lambda x: [[1.0, 0.0], [0.0, x[0] ** 2]],
            Box((0.5, 0.0), (2.0, 2 * np.pi), periodic=(1,)),
            quad_orders=6,
        )
        circle = ChartManifold(
            "S1", lambda x: [[1.0]], Box((0.0,), (2 * np.pi,), periodic=(0,)), quad_orders=6
        )
        proj = SmoothMap("radial", annulus, circle, lambda x: [x[1]])
        pts = annulus.random_points(rng, 10)
        mu = mean_curvature_fibres(proj, pts)
        assert np.max(np.abs(mu)) < 1e-9
        # non-example: (x, y) -> x on e^(2x) delta; hand value |mu|_g = e^(-x)
        plane = ChartManifold(
            "scaled-plane",
            lambda x: [[np.exp(2 * x[0]), 0.0], [0.0, np.exp(2 * x[0])]],
            Box((-1.0, -1.0), (1.0, 1.0)),
            quad_orders=6,
        )
        line = ChartManifold("line", lambda x: [[1.0]], Box((-2.0,), (2.0,)), quad_orders=6)
        projx = SmoothMap("x-proj", plane, line, lambda x: [x[0]])
        pts = plane.random_points(rng, 10)
        mu = mean_curvature_fibres(projx, pts)
        g = plane.metric_at(pts, check=False)
        norms = np.sqrt(np.einsum("ni,nij,nj->n", mu, g, mu))
        assert np.max(np.abs(norms - np.exp(-pts[:, 0]))) < 1e-6


class TestDilationAndEnergy:
    def test_hopf(self, hopf, hopf_pts):
        lam2, resid = dilation_hwc(hopf.map, hopf_pts)
        assert np.max(np.abs(lam2 - 1.0)) < 1e-9
        assert np.max(resid) < 1e-9
        assert np.max(np.abs(energy_density(hopf.map, hopf_pts) - 2.0)) < 1e-9

    def test_constant_map(self, rng):
        dom = flat_chart(2)
        phi = SmoothMap("const", dom, flat_chart(2, half=2.0), lambda x: [0.1, 0.2 + 0.0 * x[0]])
        lam2, resid = dilation_hwc(phi, dom.random_points(rng, 4))
        assert np.allclose(lam2, 0.0) and np.allclose(resid, 0.0)
        assert np.allclose(energy_density(phi, dom.random_points(rng, 4)), 0.0)

    def test_identity_energy(self, rng):
        dom = flat_chart(3)
        phi = SmoothMap("id", dom, flat_chart(3, half=2.0), lambda x: [x[0], x[1], x[2]])
        assert np.allclose(energy_density(phi, dom.random_points(rng, 4)), 3.0)

    def test_generic_map_not_semiconformal(self, rng):
        dom = flat_chart(3)
        cod = flat_chart(2, half=30.0)

        def expr(x):
            return [x[0] ** 2 + 0.7 * x[1] - x[2], 0.3 * x[0] + x[1] * x[2]]

        phi = SmoothMap("poly", dom, cod, expr)
        _, resid = dilation_hwc(phi, dom.random_points(rng, 20))
        assert np.max(resid) > 0.1

    def test_rank_profile_constant(self, hopf):
        rank, _ = hopf.map.rank_profile()
        assert rank == 2
