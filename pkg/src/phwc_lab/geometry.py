"""Coordinate-chart Riemannian manifolds and frame/tensor calculus.

A chart is an axis-aligned box of coordinates with a metric expression.
Built-in geometries cover their manifold minus a measure-zero set, so
integrals are unaffected and pointwise checks sample the interior.
All evaluators accept a single point ``(m,)`` or a batch ``(N, m)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import DiffConfig, field_partials, tensor_jet, tensor_value
from .errors import (
    DegenerateMetric,
    NonFiniteIntegrand,
    OutOfChart,
)

__all__ = [
    "Box",
    "QuadratureRule",
    "TangentVector",
    "ChartManifold",
    "gram_schmidt",
    "covariant_derivative_vector",
    "divergence_vector_field",
    "divergence_two_tensor",
    "codifferential_two_form",
    "nabla_endomorphism",
    "endomorphism_divergence",
    "lie_bracket",
    "two_form_norm2",
    "TWO_FORM_CONVENTION",
]

# Inner product of 2-forms: <w, s> = sum_{a<b} w(e_a,e_b) s(e_a,e_b) over an
# orthonormal frame.  ||Omega||^2 = 1 on CP^1 under this choice; recorded in
# every report.
TWO_FORM_CONVENTION = "sum over a<b of w(e_a,e_b)*s(e_a,e_b), orthonormal frame"


@dataclass(frozen=True)
class Box:
    """Open axis-aligned coordinate box, optionally with excluded slices.

    Axes listed in ``periodic`` wrap (the chart expressions extend
    periodically), so containment does not constrain them; the stated range
    still parametrizes quadrature and sampling.
    """

    lower: tuple
    upper: tuple
    excluded: tuple = ()  # (axis, value) measure-zero slices
    periodic: tuple = ()  # axis indices

    @property
    def dim(self):
        return len(self.lower)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for i in range(self.dim):
            if i in self.periodic:
                continue
            ok = ok & (x[..., i] > self.lower[i]) & (x[..., i] < self.upper[i])
        for axis, value in self.excluded:
            ok = ok & (x[..., axis] != value)
        return ok

    def finite(self):
        return np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))


@dataclass
class QuadratureRule:
    """Explicit nodes/weights realizing integrals against the volume form."""

    nodes: np.ndarray  # (K, m)
    weights: np.ndarray  # (K,)
    total_measure: float = float("nan")


def _gauss_axis(lo, hi, order, axis_map=None):
    t, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (hi - lo) * (t + 1.0) + lo
    w = 0.5 * (hi - lo) * w
    if axis_map is not None:
        map_fn, jac_fn = axis_map
        w = w * jac_fn(t)
        t = map_fn(t)
    return t, w


def tensor_gauss_legendre(param_box, orders, axis_maps=None):
    """Tensor-product Gauss-Legendre nodes on a finite parameter box.

    ``axis_maps[i]`` may remap axis i through (map, jacobian) for charts of
    infinite extent.  Gauss nodes avoid endpoints, so excluded slices at box
    boundaries need no special handling.
    """
    m = len(param_box.lower)
    if np.isscalar(orders):
        orders = [int(orders)] * m
    axis_maps = axis_maps or [None] * m
    pts, wts = [], []
    for i in range(m):
        t, w = _gauss_axis(param_box.lower[i], param_box.upper[i], orders[i], axis_maps[i])
        pts.append(t)
        wts.append(w)
    grids = np.meshgrid(*pts, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weight = wts[0]
    for w in wts[1:]:
        weight = np.multiply.outer(weight, w)
    return QuadratureRule(nodes=nodes, weights=weight.ravel())


@dataclass
class TangentVector:
    """Chart components of a tangent vector at a base point."""

    base_point: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        self.base_point = np.asarray(self.base_point, dtype=float)
        self.components = np.asarray(self.components, dtype=float)
        if not np.all(np.isfinite(self.components)):
            raise ValueError("tangent vector components must be finite")


def _batch(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


class ChartManifold:
    """A Riemannian manifold presented in one coordinate chart.

    Parameters
    ----------
    metric : callable
        Coordinate expression ``coords -> dim x dim`` nested list, evaluable
        on floats, batches and dual numbers alike.
    box : Box
        Chart domain.  May be infinite if ``param_box``/``axis_maps`` supply a
        finite quadrature parametrization.
    embedding : callable, optional
        Coordinate expression into an ambient Euclidean space; used by
        oracles, Killing-field machinery and ambient-polynomial sections.
    complex_pairs : sequence of (re, im) index pairs, optional
        Declares a complex chart z^a = x[re] + i x[im].
    """

    def __init__(
        self,
        name,
        metric,
        box,
        quad_orders=12,
        *,
        param_box=None,
        axis_maps=None,
        embedding=None,
        complex_pairs=None,
        sample_box=None,
        diff=None,
    ):
        self.name = name
        self.metric_fn = metric
        self.box = box
        self.dim = box.dim
        self.diff = diff or DiffConfig()
        self.embedding = embedding
        self.complex_pairs = tuple(complex_pairs) if complex_pairs else None
        self.sample_box = sample_box or (box if box.finite() else None)
        self.param_box = param_box or box
        self.axis_maps = axis_maps
        self.quad_orders = quad_orders
        self.quadrature = tensor_gauss_legendre(self.param_box, quad_orders, axis_maps)
        self._node_volw = self.volume_weight(self.quadrature.nodes)
        self.quadrature.total_measure = float(
            np.sum(self.quadrature.weights * self._node_volw)
        )

    # -- basic fields --------------------------------------------------------
    def require_inside(self, x):
        if not np.all(self.box.contains(x)):
            raise OutOfChart(f"point outside chart {self.name!r}")

    def _g(self, x):
        return tensor_value(self.metric_fn, x)

    def metric_at(self, x, check=True):
        """Metric matrix g(x); raises OutOfChart / DegenerateMetric."""
        if check:
            self.require_inside(x)
        g = self._g(x)
        if check:
            w = np.linalg.eigvalsh(g)
            if np.min(w) <= 1e-12:
                raise DegenerateMetric(
                    f"metric on {self.name!r} has min eigenvalue {np.min(w):.3e}"
                )
        return g

    def inverse_metric_at(self, x):
        return np.linalg.inv(self._g(x))

    def metric_jet(self, x):
        """(g, dg) with dg[..., i, j, l] the l-th partial of g_ij."""
        return tensor_jet(self.metric_fn, x, self.diff)

    def volume_weight(self, x):
        det = np.linalg.det(self._g(x))
        return np.sqrt(det)

    def christoffel_at(self, x):
        """Levi-Civita symbols Gamma^k_ij, symmetric in (i, j)."""
        self.require_inside(x)
        g, dg = self.metric_jet(x)
        ginv = np.linalg.inv(g)
        # dg axes: (..., i, j, l) = partial_l g_ij
        d = np.moveaxis(dg, -1, -3)  # d[..., l, i, j] = partial_l g_ij
        term = np.swapaxes(d, -3, -2) + np.swapaxes(d, -3, -1) - d
        # term[..., l, i, j] = d_i g_lj + d_j g_li - d_l g_ij  (g symmetric)
        return 0.5 * np.einsum("...kl,...lij->...kij", ginv, term)

    # -- frames and musical isomorphisms --------------------------------------
    def frame_at(self, x, rotation=None):
        """g-orthonormal frame columns via Gram-Schmidt on coordinate fields.

        Fixed index order makes the result deterministic; ``rotation`` mixes
        the coordinate fields first (frame-independence tests).
        """
        g = self._g(x)
        m = self.dim
        basis = np.eye(m)
        if rotation is not None:
            basis = basis @ rotation
        vecs = np.broadcast_to(basis, g.shape[:-2] + (m, m)).copy()
        return gram_schmidt(vecs, g)

    def sharp(self, x, omega):
        """Raise an index: (w^sharp)^i = g^ij w_j."""
        g = self._g(x)
        w = np.linalg.eigvalsh(g)
        if np.min(w) <= 1e-12:
            raise DegenerateMetric(f"metric on {self.name!r} degenerate at sharp()")
        return np.einsum("...ij,...j->...i", np.linalg.inv(g), np.asarray(omega, float))

    def flat(self, x, vec):
        g = self._g(x)
        return np.einsum("...ij,...j->...i", g, np.asarray(vec, float))

    # -- integration -----------------------------------------------------------
    def integrate(self, f):
        """Quadrature of a scalar field against the volume form.

        ``f`` is a batch callable on nodes (K, m) -> (K,), or an array of
        node values.  Summation uses numpy's fixed pairwise order, so results
        are reproducible.
        """
        vals = f(self.quadrature.nodes) if callable(f) else np.asarray(f, dtype=float)
        vals = np.broadcast_to(vals, self.quadrature.weights.shape)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteIntegrand(f"integrand non-finite on {self.name!r}")
        return float(np.sum(self.quadrature.weights * vals * self._node_volw))

    def random_points(self, rng, count, margin=0.02):
        """Seeded interior samples, margin-fraction away from the box boundary."""
        box = self.sample_box
        if box is None:
            raise OutOfChart(f"chart {self.name!r} has no finite sampling box")
        lo = np.asarray(box.lower)
        hi = np.asarray(box.upper)
        pad = margin * (hi - lo)
        return rng.uniform(lo + pad, hi - pad, size=(count, self.dim))


def gram_schmidt(vecs, g):
    """Orthonormalize column vectors (..., m, k) against metric g (..., m, m)."""
    vecs = np.array(vecs, dtype=float, copy=True)
    k = vecs.shape[-1]
    for a in range(k):
        v = vecs[..., a]
        for b in range(a):
            e = vecs[..., b]
            proj = np.einsum("...i,...ij,...j->...", v, g, e)
            v = v - proj[..., None] * e
        norm = np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))
        vecs[..., a] = v / norm[..., None]
    return vecs


# ---------------------------------------------------------------------------
# tensor-field calculus (fields are batch callables (N, m) -> arrays)


def covariant_derivative_vector(M, X, Y, x):
    """(nabla_X Y)^k = X^i d_i Y^k + Gamma^k_ij X^i Y^j at x."""
    xb, squeeze = _batch(x)
    M.require_inside(xb)
    gamma = M.christoffel_at(xb)
    Xv = np.asarray(X(xb), dtype=float)
    Yv = np.asarray(Y(xb), dtype=float)
    dY = field_partials(lambda p: np.asarray(Y(p), dtype=float), xb, M.diff.fd_step)
    out = np.einsum("...i,...ki->...k", Xv, dY) + np.einsum(
        "...kij,...i,...j->...k", gamma, Xv, Yv
    )
    return out[0] if squeeze else out


def divergence_vector_field(M, X, x):
    """div X = sum_a g(nabla_{e_a} X, e_a) = d_k X^k + Gamma^k_kj X^j."""
    xb, squeeze = _batch(x)
    gamma = M.christoffel_at(xb)
    Xv = np.asarray(X(xb), dtype=float)
    dX = field_partials(lambda p: np.asarray(X(p), dtype=float), xb, M.diff.fd_step)
    out = np.einsum("...kk->...", dX) + np.einsum("...kkj,...j->...", gamma, Xv)
    return out[0] if squeeze else out


def _nabla_two_tensor(M, T, x, Tv=None, dT=None):
    """(nabla_i T)_jk for a (0,2)-tensor field.

    Pass precomputed values/partials (``Tv``, ``dT`` with derivative index
    last) to reuse a shared finite-difference stencil.
    """
    gamma = M.christoffel_at(x)
    if Tv is None:
        Tv = np.asarray(T(x), dtype=float)
    if dT is None:
        dT = field_partials(lambda p: np.asarray(T(p), dtype=float), x, M.diff.fd_step)
    dT = np.moveaxis(dT, -1, -3)  # derivative index first
    corr1 = np.einsum("...lij,...lk->...ijk", gamma, Tv, optimize=True)
    corr2 = np.einsum("...lik,...jl->...ijk", gamma, Tv, optimize=True)
    return dT - corr1 - corr2


def divergence_two_tensor(M, T, x):
    """(div T)(Z) = sum_a (nabla_{e_a} T)(e_a, Z); returns the covector."""
    xb, squeeze = _batch(x)
    nab = _nabla_two_tensor(M, T, xb)
    ginv = M.inverse_metric_at(xb)
    out = np.einsum("...ij,...ijk->...k", ginv, nab)
    return out[0] if squeeze else out


def codifferential_two_form(M, omega, x, rotation=None, omega_values=None, omega_partials=None):
    """Codifferential of a 2-form field: (delta w)(Z) = -sum_a (nabla_{e_a} w)(e_a, Z).

    Realized over an explicit orthonormal frame (Gram-Schmidt on coordinate
    fields, optionally rotated); the result is frame-independent.  Optional
    precomputed field values/partials allow stencil sharing.
    """
    xb, squeeze = _batch(x)
    nab = _nabla_two_tensor(M, omega, xb, Tv=omega_values, dT=omega_partials)
    E = M.frame_at(xb, rotation=rotation)
    proj = np.einsum("...ia,...ja->...ij", E, E)  # = g^{-1} for any ON frame
    out = -np.einsum("...ij,...ijk->...k", proj, nab, optimize=True)
    return out[0] if squeeze else out


def nabla_endomorphism(M, F, x, extra_gamma=None, dF=None):
    """(nabla_i F)^k_j for an endomorphism field, axes (..., i, k, j).

    ``extra_gamma`` adds connection corrections C^k_ij on top of Levi-Civita
    (used for Weyl connections); ``dF`` passes precomputed partials
    (derivative index last).
    """
    xb, squeeze = _batch(x)
    gamma = M.christoffel_at(xb)
    if extra_gamma is not None:
        gamma = gamma + extra_gamma(xb)
    Fv = np.asarray(F(xb), dtype=float)
    if dF is None:
        dF = field_partials(lambda p: np.asarray(F(p), dtype=float), xb, M.diff.fd_step)
    dF = np.moveaxis(dF, -1, -3)  # (..., i, k, j)
    nab = (
        dF
        + np.einsum("...kil,...lj->...ikj", gamma, Fv)
        - np.einsum("...lij,...kl->...ikj", gamma, Fv)
    )
    return nab[0] if squeeze else nab


def endomorphism_divergence(M, F, x, extra_gamma=None):
    """div F = trace nabla F for an endomorphism field F (..., k_up, j_low)."""
    xb, squeeze = _batch(x)
    nab = nabla_endomorphism(M, F, xb, extra_gamma=extra_gamma)
    ginv = M.inverse_metric_at(xb)
    out = np.einsum("...ij,...ikj->...k", ginv, nab)
    return out[0] if squeeze else out


def lie_bracket(M, X, Y, x):
    """[X, Y]^k = X^i d_i Y^k - Y^i d_i X^k (chart computation)."""
    xb, squeeze = _batch(x)
    h = M.diff.fd_step
    Xv = np.asarray(X(xb), dtype=float)
    Yv = np.asarray(Y(xb), dtype=float)
    dX = field_partials(lambda p: np.asarray(X(p), dtype=float), xb, h)
    dY = field_partials(lambda p: np.asarray(Y(p), dtype=float), xb, h)
    out = np.einsum("...i,...ki->...k", Xv, dY) - np.einsum("...i,...ki->...k", Yv, dX)
    return out[0] if squeeze else out


def two_form_norm2(M, x, omega):
    """Squared norm of a 2-form value under the a<b convention.

    sum_{a<b} w(e_a, e_b)^2 = (1/2) tr(g^-1 w g^-1 w^T), frame independent.
    """
    ginv = M.inverse_metric_at(x)
    w = np.asarray(omega, dtype=float)
    return 0.5 * np.einsum("...ij,...jk,...kl,...li->...", ginv, w, ginv, -w)
