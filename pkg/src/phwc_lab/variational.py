"""Energies, pullback 2-form calculus, criticality residuals, Weyl connections.

The strong-coupling functional is E_inf = (1/2) integral <phi*Omega, phi*Omega>;
a map is critical iff the sharp of the codifferential of phi*Omega is
vertical, which is what the eq-(7) residual measures pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionTooSmall, NotPHWC, NotSemiconformal
from .geometry import (
    TWO_FORM_CONVENTION,
    codifferential_two_form,
    endomorphism_divergence,
    two_form_norm2,
)
from .maps import (
    dilation_hwc,
    energy_density,
    horizontal_frame,
    horizontal_projector,
    mean_curvature_fibres,
    pullback_metric,
    second_fundamental_form_tensor,
)
from .structures import (
    PHWC_GATE_TOL,
    f_div_f,
    induced_f_structure,
    j_adapted_frame,
    phwc_residual,
)
from .autodiff import field_partials

__all__ = [
    "EnergyReport",
    "CriticalityReport",
    "criticality_report",
    "pullback_two_form",
    "pullback_two_form_field",
    "dirichlet_energy",
    "fh_energy",
    "fh_infinity_energy",
    "p_energy",
    "z_field",
    "criticality_residual",
    "criticality_equivalence",
    "semiconformal_criticality",
    "WeylConnection",
    "weyl_connection",
    "compatible_weyl_theta",
    "weyl_compat_residual",
    "tension_phwc",
    "cond_1_1_residual",
]


@dataclass
class EnergyReport:
    """Quadrature values of the energies of one map."""

    dirichlet: float
    fh_alpha: float
    alpha: float
    fh_infinity: float
    p_energy: float
    p: float
    conventions: dict = field(
        default_factory=lambda: {"two_form_inner_product": TWO_FORM_CONVENTION}
    )


@dataclass
class CriticalityReport:
    """Named residual maxima over a sample with verdicts at stated tolerances."""

    map_id: str
    phwc_max_residual: float
    tension_max_norm: float
    criticality_max_residual: float
    semiconformal_divergence_max_residual: float
    pullback_sum_max_residual: float
    semiconformal_4harmonic_max_residual: float
    weyl_compat_residual: float
    tolerances: dict
    verdicts: dict
    conventions: dict = field(
        default_factory=lambda: {"two_form_inner_product": TWO_FORM_CONVENTION}
    )


def criticality_report(phi, J, x, tolerances=None):
    """Assemble the named residual maxima of one map over sample points.

    Verdicts are the residuals compared against their tolerances, which are
    always carried along in the report.
    """
    from .maps import tension_field_direct
    from .structures import induced_f_structure

    tol = {
        "phwc": 1e-9,
        "tension": 1e-5,
        "criticality": 1e-4,
        "semiconformal_divergence": 1e-4,
        "pullback_sum": 1e-4,
        "semiconformal_4harmonic": 1e-4,
        "weyl_compat": 1e-4,
    }
    tol.update(tolerances or {})
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    F = induced_f_structure(phi, J)
    jet = phi.second_jet(xb)
    tau = tension_field_direct(phi, xb, jet=jet)
    h = phi.codomain.metric_at(jet.y, check=False)
    tau_n = float(np.max(np.sqrt(np.einsum("...a,...ab,...b->...", tau, h, tau))))
    trio = criticality_equivalence(phi, J, xb, F=F)
    crit, divergence_identity = semiconformal_criticality(phi, J, xb, F=F)
    values = {
        "phwc": float(np.max(phwc_residual(phi, J, xb, jet=jet))),
        "tension": tau_n,
        "criticality": float(np.max(trio["criticality"])),
        "semiconformal_divergence": float(np.max(divergence_identity)),
        "pullback_sum": float(np.max(trio["pullback_sum"])),
        "semiconformal_4harmonic": float(np.max(crit)),
        "weyl_compat": weyl_compat_residual(phi.domain, F, xb),
    }
    verdicts = {k: bool(values[k] < tol[k]) for k in values}
    return CriticalityReport(
        map_id=phi.name,
        phwc_max_residual=values["phwc"],
        tension_max_norm=values["tension"],
        criticality_max_residual=values["criticality"],
        semiconformal_divergence_max_residual=values["semiconformal_divergence"],
        pullback_sum_max_residual=values["pullback_sum"],
        semiconformal_4harmonic_max_residual=values["semiconformal_4harmonic"],
        weyl_compat_residual=values["weyl_compat"],
        tolerances=tol,
        verdicts=verdicts,
    )


def pullback_two_form(phi, J, x, jet=None):
    """(phi*Omega)(X, Y) = h(J dphi X, dphi Y) as an antisymmetric matrix."""
    jet = jet or phi.jet(x)
    om = J.omega_at(jet.y)
    return np.swapaxes(jet.dphi, -1, -2) @ om @ jet.dphi


def pullback_two_form_field(phi, J):
    return lambda p: pullback_two_form(phi, J, p)


def dirichlet_energy(phi):
    return 0.5 * phi.domain.integrate(lambda p: energy_density(phi, p))


def fh_infinity_energy(phi, J):
    M = phi.domain

    def dens(p):
        return two_form_norm2(M, p, pullback_two_form(phi, J, p))

    return 0.5 * M.integrate(dens)


def p_energy(phi, p_exponent):
    return (1.0 / p_exponent) * phi.domain.integrate(
        lambda q: energy_density(phi, q) ** (p_exponent / 2.0)
    )


def fh_energy(phi, J, alpha, p_exponent=4.0):
    """Full Faddeev-Hopf energy and companions at coupling alpha >= 0."""
    dir_e = dirichlet_energy(phi)
    inf_e = fh_infinity_energy(phi, J)
    return EnergyReport(
        dirichlet=dir_e,
        fh_alpha=dir_e + alpha * inf_e,
        alpha=alpha,
        fh_infinity=inf_e,
        p_energy=p_energy(phi, p_exponent),
        p=p_exponent,
    )


# ---------------------------------------------------------------------------
# criticality


def z_field(phi, J, x):
    """Z = sharp of the codifferential of the pullback 2-form."""
    delta = codifferential_two_form(phi.domain, pullback_two_form_field(phi, J), x)
    return phi.domain.sharp(x, delta)


def criticality_residual(phi, J, x, jet=None):
    """Norm of the horizontal part of Z; zero everywhere iff critical."""
    z = z_field(phi, J, x)
    ph = horizontal_projector(phi, x, jet=jet)
    zh = np.einsum("...ij,...j->...i", ph, z)
    g = phi.domain.metric_at(x, check=False)
    return np.sqrt(np.einsum("...i,...ij,...j->...", zh, g, zh))


def _nabla_pullback_tensor(phi, x, jet=None):
    """(nabla_i phi*h)_jk through the second fundamental form (product rule)."""
    jet = jet if (jet is not None and jet.d2phi is not None) else phi.second_jet(x)
    nd = second_fundamental_form_tensor(phi, x, jet=jet)
    h = phi.codomain.metric_at(jet.y, check=False)
    t1 = np.einsum("...aij,...ab,...bk->...ijk", nd, h, jet.dphi)
    return t1 + np.swapaxes(t1, -1, -2)


def _max_over_horizontal(phi, x, covector, jet=None):
    """max over unit horizontal Z of |covector(Z)| = g-norm of its horizontal sharp."""
    ph = horizontal_projector(phi, x, jet=jet)
    v = np.einsum("...ij,...j->...i", ph, phi.domain.sharp(x, covector))
    g = phi.domain.metric_at(x, check=False)
    return np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))


def criticality_equivalence(phi, J, x, F=None):
    """Residual fields of the three equivalent conditions and the proof identity.

    Returns a dict with pointwise arrays:
      cosymplectic  |F div F|_g
      criticality   |horizontal part of Z|_g
      pullback_sum  max over unit horizontal Z of |sum_j [...](Z)|
      proof_identity  max over unit horizontal Z of
                      | -delta(phi*Omega)(Z) - phi*h(div F, Z) - sum_j [...](Z) |
    """
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    squeeze = np.asarray(x).ndim == 1
    F = F or induced_f_structure(phi, J)
    jet = phi.second_jet(xb)
    res = phwc_residual(phi, J, xb, jet=jet)
    if np.max(res) > PHWC_GATE_TOL:
        raise NotPHWC(f"map {phi.name!r} is not PHWC (residual {np.max(res):.2e})")

    g = phi.domain.metric_at(xb, check=False)
    Fv = F.F_at(xb)
    divF = endomorphism_divergence(phi.domain, lambda p: F.F_at(p), xb)
    FdivF = np.einsum("...ij,...j->...i", Fv, divF)
    r_cosym = np.sqrt(np.einsum("...i,...ij,...j->...", FdivF, g, FdivF))

    r_crit = criticality_residual(phi, J, xb, jet=jet)

    # adapted horizontal frame {E_j, F E_j}
    n_pairs = phi.codomain.dim // 2
    H = horizontal_frame(phi, xb, jet=jet)
    seeds = H[..., :, 0::2] if H.shape[-1] >= n_pairs else H
    frame = j_adapted_frame(g, Fv, n_pairs, seeds=seeds[..., :, :n_pairs])
    E = frame[..., :, 0::2]
    FE = frame[..., :, 1::2]
    nabT = _nabla_pullback_tensor(phi, xb, jet=jet)
    s_cov = np.einsum("...ia,...ja,...ijk->...k", E, FE, nabT) - np.einsum(
        "...ia,...ja,...ijk->...k", FE, E, nabT
    )
    r_sum = _max_over_horizontal(phi, xb, s_cov, jet=jet)

    delta = codifferential_two_form(phi.domain, pullback_two_form_field(phi, J), xb)
    T = pullback_metric(phi, xb, jet=jet)
    pb_div = np.einsum("...kj,...j->...k", T, divF)
    ident = -delta - pb_div - s_cov
    r_ident = _max_over_horizontal(phi, xb, ident, jet=jet)

    out = {
        "cosymplectic": r_cosym,
        "criticality": r_crit,
        "pullback_sum": r_sum,
        "proof_identity": r_ident,
    }
    if squeeze:
        out = {k: v[0] for k, v in out.items()}
    return out


def semiconformal_criticality(phi, J, x, F=None, gate_tol=1e-6):
    """Residuals of the 4-harmonicity criticality condition and its identity.

    Returns (criticality, identity):
      criticality = |(2n-4) grad_H ln(lambda) + (m-2n) mu|_g
      identity    = |F div F - (2n-2) grad_H ln(lambda) - (m-2n) mu|_g
    """
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    squeeze = np.asarray(x).ndim == 1
    lam2, resid = dilation_hwc(phi, xb)
    if np.max(resid) > gate_tol:
        raise NotSemiconformal(
            f"map {phi.name!r}: dilation residual {np.max(resid):.2e} exceeds {gate_tol:g}"
        )
    m = phi.domain.dim
    two_n = phi.codomain.dim
    h = phi.diff.fd_step

    def loglam2(p):
        return np.log(dilation_hwc(phi, p)[0])

    dll = field_partials(loglam2, xb, h)
    grad = 0.5 * phi.domain.sharp(xb, dll)
    ph = horizontal_projector(phi, xb)
    grad_h = np.einsum("...ij,...j->...i", ph, grad)
    mu = mean_curvature_fibres(phi, xb)
    g = phi.domain.metric_at(xb, check=False)

    crit = (two_n - 4.0) * grad_h + (m - two_n) * mu
    r_crit = np.sqrt(np.einsum("...i,...ij,...j->...", crit, g, crit))

    F = F or induced_f_structure(phi, J)
    fdf = f_div_f(F, xb)
    ident = fdf - (two_n - 2.0) * grad_h - (m - two_n) * mu
    r_ident = np.sqrt(np.einsum("...i,...ij,...j->...", ident, g, ident))
    if squeeze:
        return r_crit[0], r_ident[0]
    return r_crit, r_ident


# ---------------------------------------------------------------------------
# Weyl connections


class WeylConnection:
    """Torsion-free connection D_X Y = nabla_X Y + t(X)Y + t(Y)X - g(X,Y) t^sharp."""

    def __init__(self, M, theta):
        self.M = M
        self.theta = theta  # batch field (N, m) covector

    def gamma_correction(self, x):
        """Extra C^k_ij on top of the Levi-Civita symbols."""
        th = np.asarray(self.theta(x), dtype=float)
        g = self.M.metric_at(x, check=False)
        sharp = np.einsum("...ij,...j->...i", np.linalg.inv(g), th)
        m = g.shape[-1]
        eye = np.eye(m)
        c = (
            np.einsum("...i,kj->...kij", th, eye)
            + np.einsum("...j,ki->...kij", th, eye)
            - np.einsum("...ij,...k->...kij", g, sharp)
        )
        return c

    def derivative(self, X, Y, x):
        """D_X Y for vector fields (batch callables)."""
        from .geometry import covariant_derivative_vector

        base = covariant_derivative_vector(self.M, X, Y, x)
        c = self.gamma_correction(np.atleast_2d(np.asarray(x, float)))
        c = c[0] if np.asarray(x).ndim == 1 else c
        Xv = np.asarray(X(np.atleast_2d(np.asarray(x, float))), dtype=float)
        Yv = np.asarray(Y(np.atleast_2d(np.asarray(x, float))), dtype=float)
        if np.asarray(x).ndim == 1:
            Xv, Yv = Xv[0], Yv[0]
        return base + np.einsum("...kij,...i,...j->...k", c, Xv, Yv)


def weyl_connection(M, theta):
    return WeylConnection(M, theta)


def compatible_weyl_theta(M, F):
    """1-form with sharp = F div F / (m - 2); makes D compatible with F."""
    if M.dim <= 2:
        raise DimensionTooSmall("compatible Weyl forms need dim M > 2")

    def theta(x):
        v = f_div_f(F, x) / (M.dim - 2.0)
        g = M.metric_at(x, check=False)
        return np.einsum("...ij,...j->...i", g, v)

    return theta


def f_div_f_weyl(M, F, x, connection):
    """F(div^D F) for a Weyl connection D."""
    div = endomorphism_divergence(
        M, lambda p: F.F_at(p), x, extra_gamma=connection.gamma_correction
    )
    Fv = np.asarray(F.F_at(x), dtype=float)
    return np.einsum("...ij,...j->...i", Fv, div)


def weyl_compat_residual(M, F, x, theta=None):
    """max over the sample of |F div^D F|_g with the compatible Weyl connection."""
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    theta = theta or compatible_weyl_theta(M, F)
    conn = WeylConnection(M, theta)
    v = f_div_f_weyl(M, F, xb, conn)
    g = M.metric_at(xb, check=False)
    return float(np.max(np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))))


# ---------------------------------------------------------------------------
# PHWC tension and the corollary conditions


def tension_phwc(phi, J, x, F=None):
    """tau = J div^phi J - dphi(F div F) for a constant-rank PHWC map.

    div^phi J = trace_g of the pullback of nabla^N J; identically zero on a
    verified Kaehler target (flag set by check_kaehler), in which case the
    term is skipped.
    """
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    squeeze = np.asarray(x).ndim == 1
    jet = phi.jet(xb)
    res = phwc_residual(phi, J, xb, jet=jet)
    if np.max(res) > PHWC_GATE_TOL:
        raise NotPHWC(f"map {phi.name!r} is not PHWC (residual {np.max(res):.2e})")
    F = F or induced_f_structure(phi, J)
    fdf = f_div_f(F, xb)
    tau = -np.einsum("...ai,...i->...a", jet.dphi, fdf)
    if not J.kaehler:
        from .geometry import nabla_endomorphism

        nabJ = nabla_endomorphism(phi.codomain, lambda y: J.J_at(y), jet.y)
        ginv = phi.domain.inverse_metric_at(xb)
        divphiJ = np.einsum(
            "...ij,...ai,...bj,...agb->...g", ginv, jet.dphi, jet.dphi, nabJ
        )
        Jv = J.J_at(jet.y)
        tau = tau + np.einsum("...ga,...a->...g", Jv, divphiJ)
    return tau[0] if squeeze else tau


def cond_1_1_residual(phi, J, x, F=None):
    """Defects of the second-fundamental-form conditions on a Kaehler target.

    Returns (membership, identity):
      membership  max |P^(0,1) nabla dphi(X, Y + i F Y)|_h over horizontal X, Y
      identity    max |dphi((nabla_X F)Y) + nabla dphi(X, FY) - J nabla dphi(X, Y)|_h
    """
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    squeeze = np.asarray(x).ndim == 1
    jet = phi.second_jet(xb)
    res = phwc_residual(phi, J, xb, jet=jet)
    if np.max(res) > PHWC_GATE_TOL:
        raise NotPHWC(f"map {phi.name!r} is not PHWC (residual {np.max(res):.2e})")
    F = F or induced_f_structure(phi, J)
    from .geometry import nabla_endomorphism

    H = horizontal_frame(phi, xb, jet=jet)
    Fv = F.F_at(xb)
    nabF = nabla_endomorphism(phi.domain, lambda p: F.F_at(p), xb)
    nd = second_fundamental_form_tensor(phi, xb, jet=jet)
    h = phi.codomain.metric_at(jet.y, check=False)
    Jv = J.J_at(jet.y)

    FH = np.einsum("...ij,...jb->...ib", Fv, H)
    # (nabla_{H_a} F) H_b, then pushed through dphi
    nabF_ab = np.einsum("...ia,...ikj,...jb->...kab", H, nabF, H)
    dphi_nabF = np.einsum("...gk,...kab->...gab", jet.dphi, nabF_ab)
    nd_X_FY = np.einsum("...gij,...ia,...jb->...gab", nd, H, FH)
    nd_X_Y = np.einsum("...gij,...ia,...jb->...gab", nd, H, H)
    J_nd = np.einsum("...gc,...cab->...gab", Jv, nd_X_Y)

    ident = dphi_nabF + nd_X_FY - J_nd
    r_ident = np.sqrt(np.einsum("...gab,...gc,...cab->...ab", ident, h, ident))
    r_ident = np.max(r_ident, axis=(-1, -2))

    # membership defect: project nabla dphi(X, Y + iFY) onto T^(0,1)N
    C = nd_X_Y + 1j * nd_X_FY
    JC = np.einsum("...gc,...cab->...gab", Jv.astype(complex), C)
    P = 0.5 * (C + 1j * JC)
    r_cond = np.sqrt(
        np.abs(np.einsum("...gab,...gc,...cab->...ab", np.conj(P), h.astype(complex), P))
    )
    r_cond = np.max(r_cond, axis=(-1, -2))
    if squeeze:
        return r_cond[0], r_ident[0]
    return r_cond, r_ident
