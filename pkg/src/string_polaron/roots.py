"""Vectorised bracketed root refinement.

Every bracket is refined independently but in lock-step, so thousands of
branches of a secular equation cost a few dozen array evaluations.
"""

import numpy as np

from .errors import RootNotBracketed, ToleranceNotReached


def refine_brackets(f, lo, hi, rtol=1e-12, atol=0.0, n_bisect=4, max_iter=200):
    """Find one root of ``f`` inside each bracket ``[lo[i], hi[i]]``.

    ``f`` must accept and return arrays of the bracket shape and change sign
    across every bracket.  A few bisection steps first tighten the brackets,
    then the Illinois variant of regula falsi (superlinear, derivative free)
    takes over; whenever a secant step fails to halve a bracket the next step
    is a plain bisection, so convergence is never slower than bisection.

    Returns the midpoints of the final brackets.  Raises
    :class:`RootNotBracketed` if an endpoint pair has equal signs and
    :class:`ToleranceNotReached` if ``max_iter`` runs out.
    """
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    if a.shape != b.shape:
        raise ValueError("lo and hi must have the same shape")
    if a.size == 0:
        return a
    fa = np.asarray(f(a), dtype=float)
    fb = np.asarray(f(b), dtype=float)
    if np.any(~np.isfinite(fa)) or np.any(~np.isfinite(fb)):
        raise RootNotBracketed("secular function is not finite at a bracket end")

    exact_a = fa == 0
    exact_b = fb == 0
    bad = (np.sign(fa) == np.sign(fb)) & ~exact_a & ~exact_b
    if np.any(bad):
        idx = np.flatnonzero(bad)[:5]
        raise RootNotBracketed(f"no sign change in brackets {idx.tolist()} "
                               f"(e.g. [{a[idx[0]]!r}, {b[idx[0]]!r}])")
    # collapse brackets whose endpoint is already a root
    b = np.where(exact_a, a, b)
    a = np.where(exact_b, b, a)
    fa = np.where(exact_b, 0.0, fa)
    fb = np.where(exact_a, 0.0, fb)

    def done(a, b):
        scale = np.maximum(np.abs(a), np.abs(b))
        return (b - a) <= 2.0 * (rtol * scale + atol)

    side = np.zeros(a.shape, dtype=np.int8)   # last endpoint kept: -1 lo, +1 hi
    history = [np.full(a.shape, np.inf)] * 3   # widths at the last 3 iteration starts
    for it in range(max_iter):
        active = ~done(a, b)
        if not active.any():
            return 0.5 * (a + b)
        width = b - a
        # bisect during warm-up, and whenever 3 steps failed to halve the bracket
        use_bisect = (it < n_bisect) | (width > 0.5 * history[0])
        history = history[1:] + [width]
        with np.errstate(divide="ignore", invalid="ignore"):
            x_sec = b - fb * (b - a) / (fb - fa)
        mid = 0.5 * (a + b)
        ok = np.isfinite(x_sec) & (x_sec > a) & (x_sec < b)
        x = np.where(use_bisect | ~ok | ~active, mid, x_sec)
        fx = np.asarray(f(x), dtype=float)

        zero = (fx == 0) & active
        left = (np.sign(fx) == np.sign(fa)) & active & ~zero    # root in [x, b]
        right = active & ~left & ~zero                           # root in [a, x]

        # Illinois: halve the stored value at an endpoint retained twice
        fb = np.where(left & (side == 1), 0.5 * fb, fb)
        fa = np.where(right & (side == -1), 0.5 * fa, fa)

        a = np.where(left | zero, x, a)
        fa = np.where(left, fx, np.where(zero, 0.0, fa))
        b = np.where(right | zero, x, b)
        fb = np.where(right, fx, np.where(zero, 0.0, fb))
        side = np.where(left, 1, np.where(right, -1, side)).astype(np.int8)
    if not done(a, b).all():
        worst = np.max((b - a) / np.maximum(np.abs(a), np.abs(b)).clip(min=1e-300))
        raise ToleranceNotReached(f"bracket refinement stopped at relative width {worst:.3e}")
    return 0.5 * (a + b)
