"""Almost Hermitian structures, metric f-structures and the PHWC machinery.

The pseudo-horizontal-weak-conformality residual is the Frobenius norm of
F [dphi dphi^t, F] on the codomain; the induced structure on the domain is
built from the adjoint image of the (1,0)-space and makes the map
holomorphic wherever that residual vanishes.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    ComplexChartMissing,
    IsotropyFailure,
    NotPHWC,
    RankDeficient,
)
from .geometry import gram_schmidt, nabla_endomorphism, endomorphism_divergence
from .maps import adjoint_differential, horizontal_frame


def _field(fn, x):
    """Evaluate a batch tensor field at (m,) or (N, m) points."""
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.asarray(fn(xb), dtype=float)
    return out[0] if np.asarray(x).ndim == 1 else out


def constant_endomorphism(mat):
    """Wrap a constant matrix as a batch endomorphism field."""
    mat = np.asarray(mat, dtype=float)

    def fn(x):
        return np.broadcast_to(mat, (len(x),) + mat.shape)

    return fn

__all__ = [
    "AlmostHermitianStructure",
    "MetricFStructure",
    "ContactMetricStructure",
    "constant_endomorphism",
    "j_adapted_frame",
    "phwc_residual",
    "phwc_residual_coordinates",
    "induced_f_structure",
    "holomorphy_residual",
    "f_div_f",
    "phh_residual",
    "cond_b_residual",
    "cond_div_residual",
    "PHWC_GATE_TOL",
]

# residuals below this treat a map as PHWC when gating the induced structure
PHWC_GATE_TOL = 1e-6


class AlmostHermitianStructure:
    """Endomorphism field J with J^2 = -I, compatible with the base metric.

    ``J`` is a batch field: points (N, dim) -> matrices (N, dim, dim).
    ``expr``, when given, is the same field as a coordinate expression;
    derivative checks then use exact dual-number differentiation.
    """

    def __init__(self, base, J, name="J", expr=None):
        self.base = base
        self.J_fn = J
        self.name = name
        self.expr = expr
        self.kaehler = None  # set by check_kaehler

    def J_at(self, y):
        return _field(self.J_fn, y)

    def F_at(self, y):  # a J is an f-structure of full rank
        return self.J_at(y)

    @property
    def rank(self):
        return self.base.dim

    def omega_at(self, y):
        """Fundamental 2-form Omega(X, Y) = h(JX, Y), i.e. Omega = J^T h."""
        h = self.base.metric_at(y, check=False)
        J = self.J_at(y)
        return np.einsum("...ki,...kj->...ij", J, h)

    def check_invariants(self, points, tol=1e-10):
        J = self.J_at(points)
        h = self.base.metric_at(points, check=False)
        eye = np.eye(self.base.dim)
        r1 = np.max(np.abs(np.einsum("...ik,...kj->...ij", J, J) + eye))
        r2 = np.max(np.abs(np.einsum("...ki,...kl,...lj->...ij", J, h, J) - h))
        om = self.omega_at(points)
        r3 = np.max(np.abs(om + np.swapaxes(om, -1, -2)))
        worst = max(r1, r2, r3)
        if worst > tol:
            raise ValueError(f"{self.name}: almost Hermitian invariants fail ({worst:.2e})")
        return worst

    def check_kaehler(self, points, tol=1e-8):
        """Verify nabla J = 0 at the sample points; caches the verdict."""
        dJ = None
        if self.expr is not None:
            from .autodiff import tensor_jet

            _, dJ = tensor_jet(self.expr, points, self.base.diff)
        nab = nabla_endomorphism(self.base, self.J_at, points, dF=dJ)
        worst = float(np.max(np.abs(nab)))
        self.kaehler = worst < tol
        return worst


class MetricFStructure:
    """Endomorphism field F with F^3 + F = 0, skew-adjoint for the metric.

    ``F`` is a batch field: points (N, dim) -> matrices (N, dim, dim).
    """

    def __init__(self, base, F, rank=None, name="F"):
        self.base = base
        self.F_fn = F
        self.rank = rank
        self.name = name

    def F_at(self, x):
        return _field(self.F_fn, x)

    def check_invariants(self, points, tol=1e-10):
        F = np.asarray(self.F_at(points), dtype=float)
        g = self.base.metric_at(points, check=False)
        F3 = np.einsum("...ij,...jk,...kl->...il", F, F, F)
        r1 = np.max(np.abs(F3 + F))
        skew = np.einsum("...ki,...kj->...ij", F, g)  # F^T g
        r2 = np.max(np.abs(skew + np.einsum("...ik,...kj->...ij", g, F)))
        ranks = np.round(np.einsum("...ii->...", -np.einsum("...ij,...jk->...ik", F, F)))
        if self.rank is None:
            self.rank = int(ranks.flat[0])
        r3 = 0.0 if np.all(ranks == self.rank) else np.inf
        if self.rank % 2:
            raise ValueError(f"{self.name}: rank {self.rank} is odd")
        worst = max(r1, r2, r3)
        if worst > tol:
            raise ValueError(f"{self.name}: f-structure invariants fail ({worst:.2e})")
        return worst


class ContactMetricStructure:
    """(phi, xi, eta, g) data of a metric almost contact manifold."""

    def __init__(self, base, phi, xi, name="contact"):
        self.base = base
        self.phi_fn = phi  # batch field (N, m) -> (N, m, m)
        self.xi_fn = xi  # batch field (N, m) -> (N, m)
        self.name = name

    def phi_at(self, x):
        return _field(self.phi_fn, x)

    def xi_at(self, x):
        return _field(self.xi_fn, x)

    def eta_at(self, x):
        g = self.base.metric_at(x, check=False)
        return np.einsum("...ij,...j->...i", g, self.xi_at(x))

    def as_f_structure(self):
        return MetricFStructure(
            self.base, lambda x: self.phi_at(x), rank=self.base.dim - 1, name="phi-tensor"
        )

    def check_invariants(self, points, tol=1e-10):
        ph = self.phi_at(points)
        xi = self.xi_at(points)
        eta = self.eta_at(points)
        g = self.base.metric_at(points, check=False)
        eye = np.eye(self.base.dim)
        phi2 = np.einsum("...ij,...jk->...ik", ph, ph)
        r1 = np.max(np.abs(phi2 + eye - np.einsum("...i,...j->...ij", xi, eta)))
        r2 = np.max(np.abs(np.einsum("...i,...i->...", eta, xi) - 1.0))
        gphi = np.einsum("...ki,...kl,...lj->...ij", ph, g, ph)
        r3 = np.max(np.abs(gphi - g + np.einsum("...i,...j->...ij", eta, eta)))
        worst = max(r1, r2, r3)
        if worst > tol:
            raise ValueError(f"{self.name}: contact metric invariants fail ({worst:.2e})")
        return worst


# ---------------------------------------------------------------------------
# frames adapted to a complex/f-structure


def j_adapted_frame(g, J, pairs, seeds=None):
    """Orthonormal frame (..., m, 2*pairs) of columns (u_1, Ju_1, u_2, Ju_2, ...).

    ``seeds`` (..., m, pairs) default to the first coordinate fields; they
    must stay independent of the previously built columns (true for every
    built-in structure here).
    """
    m = g.shape[-1]
    batch = g.shape[:-2]
    if seeds is None:
        seeds = np.broadcast_to(np.eye(m)[:, :pairs], batch + (m, pairs))
    cols = np.zeros(batch + (m, 2 * pairs))
    for k in range(pairs):
        v = seeds[..., :, k]
        for b in range(2 * k):
            e = cols[..., :, b]
            proj = np.einsum("...i,...ij,...j->...", v, g, e)
            v = v - proj[..., None] * e
        nrm = np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))
        if np.any(nrm < 1e-10):
            raise RankDeficient("adapted-frame seed fell into the span of earlier columns")
        v = v / nrm[..., None]
        cols[..., :, 2 * k] = v
        cols[..., :, 2 * k + 1] = np.einsum("...ij,...j->...i", J, v)
    return cols


# ---------------------------------------------------------------------------
# PHWC condition


def _struct_at(structure, y):
    # a codomain structure exposes F_at (J is full-rank F)
    return np.asarray(structure.F_at(y), dtype=float)


def phwc_residual(phi, structure, x, jet=None):
    """Frobenius norm of F [dphi dphi^t, F] at phi(x); zero iff PHWC there."""
    jet = jet or phi.jet(x)
    adj = adjoint_differential(phi, x, jet=jet)
    q = jet.dphi @ adj
    F = _struct_at(structure, jet.y)
    r = F @ (q @ F - F @ q)
    return np.sqrt(np.einsum("...ab,...ab->...", r, r))


def phwc_residual_coordinates(phi, x, jet=None):
    """Coordinate form of the PHWC condition on a complex codomain chart.

    max over a <= b of | g^ij  d_i phi^a d_j phi^b | with phi^a the complex
    chart components; equivalent to the commutator residual for an
    integrable codomain structure.
    """
    pairs = phi.codomain.complex_pairs
    if not pairs:
        raise ComplexChartMissing(
            f"codomain {phi.codomain.name!r} declares no complex chart pairing"
        )
    jet = jet or phi.jet(x)
    ginv = phi.domain.inverse_metric_at(x)
    zd = np.stack(
        [jet.dphi[..., re, :] + 1j * jet.dphi[..., im, :] for re, im in pairs], axis=-2
    )
    # sesquilinear-free product: g^ij dphi^a_i dphi^b_j (complex bilinear)
    prod = np.einsum("...ij,...ai,...bj->...ab", ginv, zd, zd)
    return np.max(np.abs(prod), axis=(-1, -2))


def induced_f_structure(phi, J, gate_tol=PHWC_GATE_TOL):
    """Metric f-structure F on the domain making a PHWC map holomorphic.

    F = i on W = dphi^t(T^(1,0)N), -i on the conjugate, 0 on the complement;
    realized as the real matrix -2 Im(B B^dagger) g from a complex-orthonormal
    basis B of W.  Deterministic: the codomain frame is J-adapted in fixed
    coordinate order, and columns are orthonormalized in natural order, so
    the construction is smooth wherever the rank is constant.
    """
    n_pairs = phi.codomain.dim // 2

    def F_at(x):
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        squeeze = np.asarray(x).ndim == 1
        jet = phi.jet(xb)
        res = phwc_residual(phi, J, xb, jet=jet)
        if np.max(res) > gate_tol:
            raise NotPHWC(
                f"map {phi.name!r}: PHWC residual {np.max(res):.3e} exceeds gate {gate_tol:g}"
            )
        h = phi.codomain.metric_at(jet.y, check=False)
        Jv = J.J_at(jet.y)
        u = j_adapted_frame(h, Jv, n_pairs)
        adj = adjoint_differential(phi, xb, jet=jet)
        a = np.einsum("...ia,...ab->...ib", adj, u[..., 0::2])
        b = np.einsum("...ia,...ab->...ib", adj, u[..., 1::2])
        cols = a - 1j * b  # dphi^t (u - i J u)
        g = phi.domain.metric_at(xb, check=False)
        B, kept = _complex_orthonormalize(cols, g)
        iso = np.einsum("...ik,...ij,...jl->...kl", B, g.astype(complex), B)
        if np.max(np.abs(iso)) > 1e-8:
            raise IsotropyFailure(
                f"map {phi.name!r}: pulled-back (1,0)-space is not isotropic "
                f"({np.max(np.abs(iso)):.3e}); PHWC fails"
            )
        bb = np.einsum("...ik,...jk->...ij", B, B.conj())
        F = -2.0 * np.einsum("...ij,...jk->...ik", bb.imag, g)
        return (F[0] if squeeze else F), kept

    def F_only(x):
        return F_at(x)[0]

    # rank = 2 * dim_C W; probe at a quadrature node
    probe = phi.domain.quadrature.nodes[:1]
    _, kept = F_at(probe)
    return MetricFStructure(phi.domain, F_only, rank=2 * kept, name=f"F^{phi.name}")


def _complex_orthonormalize(cols, g):
    """Gram-Schmidt in the Hermitian metric <z, w> = conj(w)^T g z, natural order.

    Drops columns whose residual norm is below 1e-10 of the largest seen
    (redundant generators of the same complex span); returns (B, kept).
    """
    gc = g.astype(complex)
    out = []
    scale = None
    k = cols.shape[-1]
    for j in range(k):
        v = cols[..., j]
        for e in out:
            pr = np.einsum("...i,...ij,...j->...", e.conj(), gc, v)
            v = v - pr[..., None] * e
        nrm = np.sqrt(np.abs(np.einsum("...i,...ij,...j->...", v.conj(), gc, v)))
        if scale is None:
            scale = np.max(nrm)
        if np.all(nrm > 1e-10 * scale):
            out.append(v / nrm[..., None])
        elif np.any(nrm > 1e-10 * scale):
            raise RankDeficient("induced-structure rank varies inside the batch")
    B = np.stack(out, axis=-1)
    return B, len(out)


# ---------------------------------------------------------------------------
# holomorphy and harmonicity residuals


def holomorphy_residual(phi, F_M, F_N, x, jet=None):
    """Defect of dphi(F^M X) - F^N dphi(X) lying in Ker F^N.

    The Ker component is projected out by applying (F^N)^2 (minus the
    projector onto (Ker F^N)^perp); each frame vector's defect is normalized
    by 1 + |dphi X|_h.
    """
    jet = jet or phi.jet(x)
    FM = np.asarray(F_M.F_at(x), dtype=float)
    FN = np.asarray(F_N.F_at(jet.y), dtype=float)
    h = phi.codomain.metric_at(jet.y, check=False)
    E = phi.domain.frame_at(x)
    X = E  # columns
    dX = np.einsum("...ai,...ik->...ak", jet.dphi, X)
    dFX = np.einsum("...ai,...ij,...jk->...ak", jet.dphi, FM, X)
    D = dFX - np.einsum("...ab,...bk->...ak", FN, dX)
    D2 = np.einsum("...ab,...bc,...ck->...ak", FN, FN, D)
    num = np.sqrt(np.einsum("...ak,...ab,...bk->...k", D2, h, D2))
    den = 1.0 + np.sqrt(np.einsum("...ak,...ab,...bk->...k", dX, h, dX))
    return np.max(num / den, axis=-1)


def f_div_f(F, x):
    """F(div F) with div F = trace nabla F; vanishing = cosymplectic."""
    div = endomorphism_divergence(F.base, lambda p: np.asarray(F.F_at(p), float), x)
    Fv = np.asarray(F.F_at(x), dtype=float)
    return np.einsum("...ij,...j->...i", Fv, div)


def _vec_norm(M, x, v):
    g = M.metric_at(x, check=False)
    return np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))


def phh_residual(phi, J, x, F=None):
    """max over horizontal orthonormal X, Y of |F((nabla_X F) Y)|_g."""
    F = F or induced_f_structure(phi, J)
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    squeeze = np.asarray(x).ndim == 1
    H = horizontal_frame(phi, xb)
    nab = nabla_endomorphism(phi.domain, lambda p: np.asarray(F.F_at(p), float), xb)
    Fv = np.asarray(F.F_at(xb), dtype=float)
    # F((nabla_{H_a} F) H_b) for all horizontal pairs
    v = np.einsum(
        "...kl,...ia,...ilj,...jb->...kab", Fv, H, nab, H
    )
    g = phi.domain.metric_at(xb, check=False)
    norms = np.sqrt(np.einsum("...kab,...kl,...lab->...ab", v, g, v))
    out = np.max(norms, axis=(-1, -2))
    return out[0] if squeeze else out


def _im_f_basis(F, x, g):
    """Deterministic orthonormal basis of (Ker F)^perp = im F, batched."""
    Fv = np.asarray(F.F_at(x), dtype=float)
    proj = -np.einsum("...ij,...jk->...ik", Fv, Fv)  # projector onto im F
    k = int(round(float(np.einsum("...ii->...", proj).flat[0])))
    rng = np.random.default_rng(2024)
    m = Fv.shape[-1]
    mix = rng.normal(size=(m, m)) + np.eye(m) * m
    seeds = np.einsum("...ij,jk->...ik", proj, mix[:, :k])
    return gram_schmidt(seeds, g), k


def _cond_b_vectors(F, x):
    """Sample set for the quadratic condition: frame vectors and pair sums."""
    g = F.base.metric_at(x, check=False)
    H, k = _im_f_basis(F, x, g)
    vecs = [H[..., a] for a in range(k)]
    for a in range(k):
        for b in range(a + 1, k):
            vecs.append((H[..., a] + H[..., b]) / np.sqrt(2.0))
    return vecs


def _cond_b_expression(F, x, X, nab=None):
    """(nabla_X F)X + (nabla_{FX} F)(FX)."""
    if nab is None:
        nab = nabla_endomorphism(F.base, lambda p: np.asarray(F.F_at(p), float), x)
    Fv = np.asarray(F.F_at(x), dtype=float)
    FX = np.einsum("...ij,...j->...i", Fv, X)
    t1 = np.einsum("...i,...ikj,...j->...k", X, nab, X)
    t2 = np.einsum("...i,...ikj,...j->...k", FX, nab, FX)
    return t1 + t2


def cond_b_residual(F, x):
    """max_X |(nabla_X F)X + (nabla_FX F)(FX)| over unit horizontal samples."""
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    squeeze = np.asarray(x).ndim == 1
    nab = nabla_endomorphism(F.base, lambda p: np.asarray(F.F_at(p), float), xb)
    worst = 0.0
    for X in _cond_b_vectors(F, xb):
        v = _cond_b_expression(F, xb, X, nab=nab)
        worst = np.maximum(worst, _vec_norm(F.base, xb, v))
    return worst[0] if squeeze else worst


def cond_div_residual(F, x):
    """Same expression with F applied, sampled over Ker(F^2 + I)."""
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    squeeze = np.asarray(x).ndim == 1
    nab = nabla_endomorphism(F.base, lambda p: np.asarray(F.F_at(p), float), xb)
    Fv = np.asarray(F.F_at(xb), dtype=float)
    worst = 0.0
    for X in _cond_b_vectors(F, xb):
        v = _cond_b_expression(F, xb, X, nab=nab)
        Fv_v = np.einsum("...ij,...j->...i", Fv, v)
        worst = np.maximum(worst, _vec_norm(F.base, xb, Fv_v))
    return worst[0] if squeeze else worst
