"""Identity suites: every two-route identity checked at seeded random points.

Each suite pits two independently computed sides of an identity against each
other (second derivatives by central differences of dual-exact first
derivatives, i.e. the package-default config), so a pass certifies both code
paths at once.  These back the `identities` CLI subcommand and the
acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import DiffConfig
from .errors import EigenframeDegenerate
from .geometry import TangentVector
from .maps import (
    nabla_pullback_metric,
    stress_energy_residual,
    tension_field_direct,
)
from .stability import (
    bracket_identity_sasakian,
    vertical_codifferential_formula,
)
from .structures import induced_f_structure
from .variational import (
    cond_1_1_residual,
    criticality_equivalence,
    semiconformal_criticality,
    tension_phwc,
)

__all__ = ["SuiteResult", "identity_suites", "SUITE_TOLERANCES"]

SUITE_TOLERANCES = {
    "pullback_metric_derivative": 1e-4,
    "pushforward_parallelism": 1e-4,
    "semiconformal_divergence": 1e-4,
    "codifferential_expansion": 1e-4,
    "vertical_codifferential": 1e-4,
    "sasakian_bracket": 1e-4,
    "tension_agreement": 1e-4,
    "stress_energy": 1e-4,
}


@dataclass
class SuiteResult:
    suite: str
    scenario: str
    n_points: int
    max_residual: float
    tolerance: float
    passed: bool
    note: str = ""

    def row(self):
        return {
            "suite": self.suite,
            "scenario": self.scenario,
            "points": self.n_points,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "note": self.note,
        }


def identity_suites(sc, n_points=100, seed=0, margin=0.05, suites=None):
    """Run the applicable identity suites for one scenario."""
    rng = np.random.default_rng(seed)
    phi = sc.map_with(DiffConfig(fd_step=sc.map.diff.fd_step))
    pts = sc.domain.random_points(rng, n_points, margin=margin)
    F = induced_f_structure(phi, sc.J)
    out = []

    def emit(name, value, n=n_points, note=""):
        tol = SUITE_TOLERANCES[name]
        out.append(
            SuiteResult(
                suite=name,
                scenario=sc.id,
                n_points=n,
                max_residual=float(value),
                tolerance=tol,
                passed=bool(value < tol),
                note=note,
            )
        )

    wanted = lambda name: suites is None or name in suites

    if wanted("pullback_metric_derivative"):
        X, Y, Z = (
            TangentVector(pts, rng.normal(size=pts.shape)) for _ in range(3)
        )
        lhs = nabla_pullback_metric(phi, X, Y, Z, direct=True)
        rhs = nabla_pullback_metric(phi, X, Y, Z, direct=False)
        emit("pullback_metric_derivative", np.max(np.abs(lhs - rhs)))

    if wanted("pushforward_parallelism"):
        _, ident = cond_1_1_residual(phi, sc.J, pts, F=F)
        emit("pushforward_parallelism", np.max(ident))

    if wanted("semiconformal_divergence"):
        _, ident = semiconformal_criticality(phi, sc.J, pts, F=F)
        emit("semiconformal_divergence", np.max(ident))

    if wanted("codifferential_expansion"):
        rep = criticality_equivalence(phi, sc.J, pts, F=F)
        emit("codifferential_expansion", np.max(rep["proof_identity"]))

    if wanted("vertical_codifferential"):
        worst, used, skipped = 0.0, 0, 0
        count = min(n_points, 60)  # pointwise frames; plenty for a sup estimate
        from .maps import fibre_splitting

        for p in pts[:count]:
            split = fibre_splitting(phi, p)
            if split.rank == phi.domain.dim:
                break  # no vertical directions anywhere
            V = split.vertical[:, 0]
            try:
                lhs, rhs = vertical_codifferential_formula(phi, sc.J, V, p, F=F)
            except EigenframeDegenerate:
                skipped += 1
                continue
            worst = max(worst, abs(lhs - rhs))
            used += 1
        emit(
            "vertical_codifferential",
            worst,
            n=used,
            note=f"{skipped} degenerate points skipped" if skipped else "",
        )

    if wanted("sasakian_bracket") and sc.contact is not None:
        Xc = rng.normal(size=pts.shape)
        X = lambda p: np.broadcast_to(Xc[: len(p)], (len(p), sc.domain.dim))
        lhs, rhs = bracket_identity_sasakian(sc.contact, X, pts)
        emit("sasakian_bracket", np.max(np.abs(lhs - rhs)))

    if wanted("tension_agreement"):
        tau_a = tension_field_direct(phi, pts)
        tau_b = tension_phwc(phi, sc.J, pts, F=F)
        y = phi.value(pts)
        h = phi.codomain.metric_at(y, check=False)
        diff = tau_a - tau_b
        val = np.max(np.sqrt(np.einsum("...a,...ab,...b->...", diff, h, diff)))
        emit("tension_agreement", val)

    if wanted("stress_energy"):
        Z = rng.normal(size=pts.shape)
        emit("stress_energy", np.max(stress_energy_residual(phi, pts, Z=Z)))

    return out
