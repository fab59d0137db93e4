"""Vectorized bisection primitives shared by the routing and RAN solvers.

Every lane of a call is fully independent: lanes never read each other's
brackets and the iteration count is fixed, so results are bit-identical no
matter how a batch is split across workers.
"""

import numpy as np

from .errors import ConvergenceError

BISECT_ITERS = 100
MAX_DOUBLINGS = 64


def bisect_root(fn, lo, hi, iters=BISECT_ITERS):
    """Halve [lo, hi] per lane around the sign change of a nondecreasing fn.

    Returns (lo, hi) with fn(lo) <= 0 <= fn(hi) preserved from the inputs.
    If fn has no root in the bracket the iteration collapses onto the matching
    endpoint, which is exactly the projected solution the callers want.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = fn(mid) > 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
    return lo, hi


def grow_upper(fn, hi, context, max_doublings=MAX_DOUBLINGS):
    """Double hi per lane until fn(hi) >= 0 everywhere.

    Lanes that already satisfy the condition are left untouched.  Exhausting
    the doubling budget means the problem is unbounded or badly scaled, which
    the callers treat as nonconvergence.
    """
    hi = np.array(hi, dtype=float, copy=True)
    need = np.asarray(fn(hi) < 0.0)
    for _ in range(max_doublings):
        if not need.any():
            return hi
        hi = np.where(need, hi * 2.0, hi)
        need = need & (fn(hi) < 0.0)
    raise ConvergenceError(
        f"{context}: bracket growth exhausted after {max_doublings} doublings",
        residual=float(np.max(np.where(need, -fn(hi), 0.0))),
    )
