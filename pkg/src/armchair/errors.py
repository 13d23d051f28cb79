class NumericalError(RuntimeError):
    """A numerical procedure failed; carries the offending spectral parameter."""

    def __init__(self, message: str, lam=None, module: str | None = None):
        self.lam = lam
        self.module = module
        prefix = f"[{module}] " if module else ""
        suffix = f" (lambda={lam!r})" if lam is not None else ""
        super().__init__(prefix + message + suffix)


class PoleError(NumericalError):
    """The unregularized monodromy matrix was requested on the Dirichlet spectrum."""


class DegenerateError(NumericalError):
    """rho_k vanishes identically, so there are no isolated resonances."""
