"""Global numerical settings shared by every module.

All rank decisions, hermiticity checks and positivity checks in the package
funnel through a single :class:`Numerics` instance so that a run is fully
characterised by one set of tolerances plus an RNG seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Numerics:
    """Tolerances and caps used across the toolkit.

    rank_tol
        Relative singular-value threshold: a direction is kept when its
        singular value exceeds ``rank_tol * largest``.  Rank decisions drive
        every subspace/algebra dimension in the package.
    hermitian_tol
        Absolute bound on ``max |X - X^dag|`` entries for an operator to be
        accepted as Hermitian.
    psd_tol
        Absolute floor on eigenvalues in positivity checks.
    cluster_gap
        Relative spectral gap used to split eigenvalue clusters when reading
        off multiplicity structure from random algebra elements.
    cap_dim
        Largest n**2 for which a dense superoperator may be materialised.
    """

    rank_tol: float = 1e-10
    hermitian_tol: float = 1e-10
    psd_tol: float = 1e-9
    cluster_gap: float = 1e-8
    cap_dim: int = 4096
    seed: int = 0
    epsilon: float = 1.0
    quad_order: int = 20
    iteration_cap: int = 20

    def with_overrides(self, **kwargs) -> "Numerics":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs) if kwargs else self


DEFAULTS = Numerics()


class DimensionCapError(RuntimeError):
    """Raised when a dense superoperator would exceed the configured cap."""


def check_cap(n: int, numerics: Numerics = DEFAULTS) -> None:
    if n * n > numerics.cap_dim:
        raise DimensionCapError(
            f"dense superoperator of size {n * n}x{n * n} exceeds the cap "
            f"{numerics.cap_dim}; use a reduced-space construction instead"
        )
