"""Derived parameters for the Byzantine-resilient protocol.

All committee thresholds descend from the lottery probability p0. With
the default p0 every desk-scale n clamps to 1 and the committee is the
whole network; a p0 override exercises sub-linear committees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class ByzParams:
    n: int
    N: int
    epsilon0: float
    p0: float
    c_g: float
    c_hat_g: float
    f_bound: int

    @classmethod
    def for_namespace(cls, n: int, N: int, epsilon0: float = 0.05,
                      p0_override: float | None = None) -> "ByzParams":
        if n < 2 or N < n:
            raise ConfigError(f"need 2 <= n <= N, got n={n} N={N}")
        if not 0.0 < epsilon0 < 1.0 / 3.0:
            raise ConfigError(f"epsilon0 must lie in (0, 1/3), got {epsilon0}")
        if p0_override is None:
            p0 = min(1.0, 8.0 * math.log2(n) /
                     ((1.0 - 3.0 * epsilon0) * epsilon0 ** 2 * n))
        else:
            if not 0.0 < p0_override <= 1.0:
                raise ConfigError(f"p0 override must lie in (0, 1], got {p0_override}")
            p0 = float(p0_override)
        c_g = (1.0 - 1.5 * epsilon0) * (2.0 / 3.0 + epsilon0) * p0 * n
        c_hat_g = min(float(n), 4.0 * p0 * n)
        f_bound = math.ceil((1.0 / 3.0 - epsilon0) * n) - 1
        return cls(n=n, N=N, epsilon0=epsilon0, p0=p0,
                   c_g=c_g, c_hat_g=c_hat_g, f_bound=f_bound)
