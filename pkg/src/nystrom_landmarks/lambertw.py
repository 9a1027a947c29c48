"""Lower real branch of the Lambert W function."""

from __future__ import annotations

import math

from .errors import DomainError

BRANCH_POINT = -math.exp(-1.0)


def lambertw_m1(y: float, tol: float = 1e-12, maxiter: int = 200) -> float:
    """Solve ``w * exp(w) = y`` for ``w <= -1`` with ``y`` in ``[-1/e, 0)``.

    Newton's method on ``g(w) = w + log(-w) - log(-y)``, which is increasing on
    ``(-inf, -1]``, safeguarded by a bisection bracket.
    """
    if not (math.isfinite(y) and y < 0.0):
        raise DomainError(f"W_-1 is defined on [-1/e, 0), got {y}")
    if y < BRANCH_POINT:
        if BRANCH_POINT - y > 1e-15:
            raise DomainError(f"W_-1 is defined on [-1/e, 0), got {y}")
        y = BRANCH_POINT
    if y == BRANCH_POINT:
        return -1.0
    log_my = math.log(-y)

    def g(w):
        return w + math.log(-w) - log_my

    hi = -1.0
    lo = 2.0 * log_my - 1.0
    while g(lo) > 0.0:
        lo *= 2.0
    # Asymptotic start log(-y) - log(-log(-y)) is accurate away from the branch point.
    w = log_my - math.log(-log_my) if log_my < -1.0 else -1.0 - 1e-3
    if not lo < w < hi:
        w = 0.5 * (lo + hi)
    for _ in range(maxiter):
        gw = g(w)
        if gw > 0.0:
            hi = w
        else:
            lo = w
        step = gw * w / (w + 1.0)
        w_new = w - step
        if not lo < w_new < hi:
            w_new = 0.5 * (lo + hi)
        if abs(w_new - w) <= tol * abs(w_new) or hi - lo <= tol * abs(w_new):
            return w_new
        w = w_new
    return w
