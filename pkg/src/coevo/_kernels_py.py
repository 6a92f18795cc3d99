"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same functions with the same argument conventions;
``coevo._backend`` picks one at import time.
"""
import numpy as np


def run_steps(x, y, A, W, cw, ca, lam, cx, cy, indptr, indices,
              T, win, tol, band, stride, t0, snap_t, snap_x, snap_y, nsnap, stats):
    """Advance the controlled best-response dynamics over a block of steps.

    ``x``/``y`` are updated in place.  Step ``s`` activates
    ``indices[indptr[s]:indptr[s+1]]``; every active node best-responds to the
    pre-step state.  ``win`` carries the open window's
    ``[steps, flips, max |dy|]`` across calls, ``stats`` accumulates
    ``[min dy, x decreases, x increases]``.  Returns
    ``(steps_done, stopped, nsnap)``; ``stopped`` is 1 when a full window of
    ``T`` steps saw no action change and opinion moves below ``tol``.
    """
    nsteps = len(indptr) - 1
    cxb = cx.astype(bool)
    cyb = cy.astype(bool)
    for s in range(nsteps):
        idx = indices[indptr[s]:indptr[s + 1]]
        if idx.size:
            m = W[idx] @ y
            d = cw[idx] * m + ca[idx] * (A[idx] @ x)
            xo = x[idx]
            xn = np.where(d > band, 1.0, np.where(d < -band, -1.0, xo))
            xn = np.where(cxb[idx], 1.0, xn)
            yn = (1.0 - lam[idx]) * m + lam[idx] * xn
            yn = np.where(cyb[idx], 1.0, yn)
            dy = yn - y[idx]
            dx = xn - xo
            down = int(np.count_nonzero(dx < 0))
            up = int(np.count_nonzero(dx > 0))
            x[idx] = xn
            y[idx] = yn
            mdy = float(dy.min())
            if mdy < stats[0]:
                stats[0] = mdy
            stats[1] += down
            stats[2] += up
            win[1] += down + up
            amax = float(np.abs(dy).max())
            if amax > win[2]:
                win[2] = amax
        win[0] += 1
        t = t0 + s + 1
        if stride > 0 and t % stride == 0:
            snap_t[nsnap] = t
            snap_x[nsnap] = x
            snap_y[nsnap] = y
            nsnap += 1
        if win[0] >= T:
            if win[1] == 0 and win[2] < tol:
                return s + 1, 1, nsnap
            win[0] = 0
            win[1] = 0
            win[2] = 0.0
    return nsteps, 0, nsnap


def walk_table(table, start, r_draws, u_draws, eps, visits):
    """Run the control-set chain over a precomputed admissibility table.

    ``table[mask]`` is nonzero when the set encoded by ``mask`` is admissible.
    Iteration ``k`` picks bit ``r_draws[k]``: a set bit is cleared when the
    reduced set is admissible; an unset bit is set when ``u_draws[k] < eps``.
    ``visits[mask]`` counts iterations ending in each state.  Returns the final
    mask.
    """
    c = int(start)
    for k in range(len(r_draws)):
        bit = 1 << int(r_draws[k])
        if c & bit:
            if table[c ^ bit]:
                c ^= bit
        elif u_draws[k] < eps:
            c |= bit
        visits[c] += 1
    return c
