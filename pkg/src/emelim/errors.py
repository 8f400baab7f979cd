"""Exception hierarchy shared by all modules."""


class EmelimError(Exception):
    """Base class for every error raised by this package."""


class MissingSlices(EmelimError):
    """A temporal stencil needs more time slices than are available."""


class UnsupportedOrder(MissingSlices):
    """Temporal derivative order outside the supported range 1..4."""


class NonFiniteValue(EmelimError):
    """An integrator produced NaN or Inf."""


class NoConvergence(EmelimError):
    """An iterative solver exhausted its iteration budget."""


class Degenerate(EmelimError):
    """An elliptic operator has a (near) null mode that the right-hand side excites."""


class SiteError(EmelimError):
    """Error tied to a lattice site; ``site`` holds the offending index."""

    def __init__(self, message, site=None, time=None):
        if site is not None:
            message = f"{message} (site={tuple(int(i) for i in site)})"
        if time is not None:
            message = f"{message} (t={time:.6g})"
        super().__init__(message)
        self.site = site
        self.time = time


class DegeneratePotential(SiteError):
    """The temporal potential component is too close to zero to divide by."""


class VanishingDensity(SiteError):
    """The matter density Phi dropped below its positivity threshold."""


class DegenerateField(SiteError):
    """A field combination used as a divisor (iF1 + F2, psi1, ...) vanishes."""


class WindingObstruction(EmelimError):
    """A phase winds around a periodic axis, so no single-valued gauge exists."""


class AmplitudeTooLarge(EmelimError):
    """Coherent amplitude exceeds the bound that keeps truncation error small."""


class ConfigError(EmelimError):
    """Invalid experiment configuration."""


class PipelineError(EmelimError):
    """Failure inside an experiment pipeline, wrapping the module error."""
