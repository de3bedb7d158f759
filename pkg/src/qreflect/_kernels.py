"""Compiled integrands handed to ``scipy.integrate.quad``.

The inner angular integral of the non-equilibrium potential is evaluated
many thousand times per radius, so it is compiled with numba and passed to
QUADPACK as a ``LowLevelCallable`` (signature ``double f(int, double*)``).
"""

import math

from numba import cfunc, types
from scipy import LowLevelCallable

_sig = types.double(types.intc, types.CPointer(types.double))


@cfunc(_sig, cache=True)
def _neq_angular(n, xx):
    # xx = (theta, a, eps); t = sqrt(eps-1) sin(theta) removes the
    # square-root endpoint of sqrt(eps-1-t^2).
    th = xx[0]
    a = xx[1]
    e = xx[2]
    b = math.sqrt(e - 1.0)
    t = b * math.sin(th)
    ct = b * math.cos(th)
    t2 = t * t
    return t * math.exp(-a * t) * ct * ct * (1.0 + e * (2.0 * t2 + 1.0) / (1.0 + t2 * (e + 1.0)))


neq_angular = LowLevelCallable(_neq_angular.ctypes)
