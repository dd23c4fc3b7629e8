"""Exception hierarchy shared by all modules."""


class PhwcLabError(Exception):
    """Base class for every error raised by this package."""


class OutOfChart(PhwcLabError):
    """A point lies outside the coordinate chart (or on an excluded slice)."""


class DegenerateMetric(PhwcLabError):
    """The metric is not positive definite at the requested point."""


class DifferentiationFailure(PhwcLabError):
    """A derivative came out non-finite."""


class NonFiniteIntegrand(PhwcLabError):
    """An integrand produced NaN or infinity on a quadrature node."""


class RankDeficient(PhwcLabError):
    """A map does not have the rank an operation requires (e.g. submersivity)."""


class NotPHWC(PhwcLabError):
    """The pseudo-horizontal-weak-conformality residual exceeds the gate tolerance."""


class IsotropyFailure(PhwcLabError):
    """The candidate (1,0)-space pulled back to the domain is not isotropic."""


class ComplexChartMissing(PhwcLabError):
    """The codomain chart does not declare a complex coordinate pairing."""


class NotSemiconformal(PhwcLabError):
    """The dilation residual exceeds tolerance, so there is no well-defined dilation."""


class NotCritical(PhwcLabError):
    """Refusing to evaluate a Hessian at a visibly non-critical map."""


class NotSasakianScenario(PhwcLabError):
    """The operation needs a built-in with a validated contact metric structure."""


class EigenframeDegenerate(PhwcLabError):
    """Eigenvalue clustering prevents a smooth local eigenframe at this point."""


class DimensionTooSmall(PhwcLabError):
    """The operation needs dim M > 2."""


class UnknownScenario(PhwcLabError):
    """Scenario id not present in the catalog."""


class ConfigError(PhwcLabError):
    """Invalid run configuration."""
