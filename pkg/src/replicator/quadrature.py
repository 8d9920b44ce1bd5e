"""Gauss-Legendre quadrature for integrands with an integrable blow-up at the right endpoint."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import DivergenceError


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def panel(f, a: float, b: float, order: int = 20):
    """Gauss-Legendre rule on [a, b]. ``f`` maps an array of nodes to an array of values."""
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    vals = np.asarray(f(0.5 * (a + b) + half * x))
    return half * np.tensordot(w, vals, axes=(0, 0))


def _shells(r_max: float, breakpoints):
    # dyadic shells [r/2, r] in the distance r to the singular endpoint
    r = r_max
    while True:
        cuts = [0.5 * r] + sorted(p for p in breakpoints if 0.5 * r < p < r) + [r]
        yield list(zip(cuts[:-1], cuts[1:]))
        r *= 0.5


def singular_integral(f, r_max: float, *, breakpoints=(), order: int = 20,
                      rtol: float = 1e-14, max_shells: int = 400, min_shells: int = 6):
    """Integrate ``f(r)`` over (0, r_max] when f may behave like r**beta, beta > -1.

    ``r`` is the distance to the singular endpoint, so callers integrating
    toward a terminal time T pass r = T - t and keep full precision near T.
    The interval is split into dyadic shells toward 0; the remaining tail is
    extrapolated geometrically from the ratio of the last two shell
    contributions.  Raises DivergenceError when the contributions stop decaying.
    """
    if not r_max > 0:
        raise ValueError("need r_max > 0")
    total = 0.0
    prev = None
    growing = 0
    zeros = 0
    for k, pieces in enumerate(_shells(r_max, breakpoints)):
        c = sum(panel(f, lo, hi, order) for lo, hi in pieces)
        total = total + c
        size = float(np.max(np.abs(c)))
        if not np.isfinite(size):
            raise DivergenceError("integrand is not finite near the endpoint")
        if size == 0.0:
            zeros += 1
            if zeros >= min_shells and k >= min_shells:
                return total
            prev = size
            continue
        zeros = 0
        if prev:
            ratio = size / prev
            growing = growing + 1 if ratio >= 1.0 - 1e-9 else 0
            if growing >= 12:
                raise DivergenceError(
                    f"singular integral diverges: shell contributions growing by {ratio:.4f}")
            if k >= min_shells and ratio < 1.0:
                tail = c * (ratio / (1.0 - ratio))
                if float(np.max(np.abs(tail))) <= rtol * float(np.max(np.abs(total))):
                    return total + tail
        prev = size
        if k + 1 >= max_shells:
            break
    raise DivergenceError("singular integral did not converge within the shell budget")
