class DegenerateGapError(ValueError):
    """Spectral gap vanishes where the power spectrum does not."""


class QuadratureError(RuntimeError):
    """Requested tolerance not reached; carries the best estimate."""

    def __init__(self, estimate, abs_error, message=None):
        self.estimate = estimate
        self.abs_error = abs_error
        super().__init__(message or f"quadrature did not converge: estimate={estimate!r}, "
                                    f"error estimate={abs_error:.3e}")


class GridError(ValueError):
    """Probe or profile incompatible with the periodic grid."""


class CFLError(ValueError):
    """Explicit kinetic step would lose positivity."""


class SymmetryError(ValueError):
    """Field modes are not Hermitian-symmetric."""


class ConfigError(ValueError):
    """Invalid run configuration; ``errors`` lists ``(key_path, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.errors))
