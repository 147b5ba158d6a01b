"""Problem parameters and the exponents derived from them."""

from __future__ import annotations

from dataclasses import dataclass, field


class ParameterDomainError(ValueError):
    """A parameter lies outside the range where the problem is defined."""


def _check_open_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ParameterDomainError(f"{name} must lie in (0, 1), got {value!r}")
    return value


def scaling_exponent(sigma: float, gamma: float) -> float:
    """Critical growth exponent 2 sigma / (2 - gamma)."""
    sigma = _check_open_unit("sigma", sigma)
    gamma = _check_open_unit("gamma", gamma)
    return 2.0 * sigma / (2.0 - gamma)


@dataclass(frozen=True)
class EnergyParams:
    """Constants of the energy ``1/2 int y^a |grad u|^2 + int_Gamma u^gamma``.

    ``n`` is the dimension of the thin space Gamma; the extension domain has
    dimension ``n + 1``.
    """

    sigma: float
    gamma: float
    n: int = 1
    a: float = field(init=False)
    beta: float = field(init=False)
    beta2nd: float = field(init=False)

    def __post_init__(self) -> None:
        sigma = _check_open_unit("sigma", self.sigma)
        gamma = _check_open_unit("gamma", self.gamma)
        if int(self.n) != self.n or self.n < 1:
            raise ParameterDomainError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "a", 1.0 - 2.0 * sigma)
        object.__setattr__(self, "beta", 2.0 * sigma / (2.0 - gamma))
        object.__setattr__(self, "beta2nd", 2.0 / (2.0 - gamma))

    @property
    def psi_exponent(self) -> float:
        """Exponent ``beta - 2 sigma`` of the barrier density; always in (-sigma, 0)."""
        return self.beta - 2.0 * self.sigma

    def energy_exponents(self) -> tuple[float, float]:
        """The pair (-a - n + 2 - 2 beta, -beta gamma - n + 1) as written for the rescaled energy.

        Both entries carry the same extra power of lambda relative to the
        exact change of variables (see :func:`jacobian_exponents`); their
        equality is what fixes ``beta``.
        """
        n, a, b, g = self.n, self.a, self.beta, self.gamma
        return (-a - n + 2.0 - 2.0 * b, -b * g - n + 1.0)

    def jacobian_exponents(self) -> tuple[float, float]:
        """Exponents of lambda picked up by the Dirichlet and penalty terms.

        For ``w(X) = lambda^-beta u(lambda X)`` the Dirichlet term over ``Omega``
        equals ``lambda^(1 - a - n - 2 beta)`` times the Dirichlet term of ``u``
        over ``lambda Omega``; the penalty picks up ``lambda^(-beta gamma - n)``.
        """
        d, p = self.energy_exponents()
        return (d - 1.0, p - 1.0)

    def as_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "gamma": self.gamma,
            "n": self.n,
            "a": self.a,
            "beta": self.beta,
            "beta2nd": self.beta2nd,
        }
