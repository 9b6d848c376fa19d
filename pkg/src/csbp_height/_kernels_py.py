"""Pure-Python reference implementations of the hot loops.

Semantics (including the order in which random variates are consumed)
match ``_kernels_c`` exactly; the test-suite checks both against each other.
"""

import numpy as np

GW_NEED_RANDOMS = 0
GW_FINISHED = 1
GW_ABSORBED = 2
GW_OVERFLOW = 3
GW_BUFFER_FULL = 4


def height_scan(y, y_left, jump):
    """Jump-penalty evaluation of ``cH`` along a skeleton with a monotone stack.

    ``y[i]`` is the value at skeleton point ``i``, ``y_left[i]`` its left
    limit (they differ only where ``jump[i]`` is set).  Each active jump
    keeps its pre-jump level ``L`` and the infimum ``M`` of the path since
    the jump; its penalty is ``M - L`` until the path falls to ``L``, at
    which point the jump is popped for good.  Only the top jump's ``M`` can
    move, so the penalties below the top are kept as one running sum.

    Returns ``(cH, U, I, tv)``: heights, total penalty, running infimum and
    the running total variation of ``U``.
    """
    n = len(y)
    cH = np.empty(n)
    U = np.empty(n)
    I = np.empty(n)
    tv = np.empty(n)
    Ls = []
    Ms = []
    below = 0.0
    inf = y_left[0] if n else 0.0
    prev_u = 0.0
    acc_tv = 0.0
    for i in range(n):
        v = float(y_left[i])
        if v < inf:
            inf = v
        while Ls and Ls[-1] >= v:
            Ls.pop()
            Ms.pop()
            if Ls:
                below -= Ms[-1] - Ls[-1]
        if Ls and v < Ms[-1]:
            Ms[-1] = v
        if not Ls:
            below = 0.0
        # variation of the continuous move to the left limit, then of the jump
        u_mid = below + (Ms[-1] - Ls[-1] if Ls else 0.0)
        acc_tv += abs(u_mid - prev_u)
        if jump[i]:
            if Ls:
                below += Ms[-1] - Ls[-1]
            Ls.append(v)
            Ms.append(float(y[i]))
        u = below + (Ms[-1] - Ls[-1]) if Ls else 0.0
        acc_tv += abs(u - u_mid)
        h = float(y[i]) - inf - u
        cH[i] = h if h > 0.0 else 0.0
        U[i] = u
        I[i] = inf
        tv[i] = acc_tv
        prev_u = u
    return cH, U, I, tv


def gw_advance(state, t_max, total_rate, cdf, exps, unifs, rec_t, rec_k, cap):
    """Run Gillespie events for one population until a stop condition.

    ``state`` is a length-4 float array ``[k, t, pos, n_rec]`` updated in
    place: population size, current time, index of the next unused random
    pair, and number of recorded events.  Each event consumes one unit
    exponential (waiting time at rate ``total_rate * k``) and one uniform
    (offspring count by inverse CDF).  ``rec_t``/``rec_k`` may be empty to
    skip recording.  Returns a ``GW_*`` status code.
    """
    k = int(state[0])
    t = state[1]
    pos = int(state[2])
    n_rec = int(state[3])
    record = len(rec_t) > 0
    n = len(exps)
    status = GW_NEED_RANDOMS
    while True:
        if k == 0:
            status = GW_ABSORBED
            break
        if record and n_rec >= len(rec_t):
            status = GW_BUFFER_FULL
            break
        if pos >= n:
            status = GW_NEED_RANDOMS
            break
        dt = exps[pos] / (total_rate * k)
        if t + dt >= t_max:
            t = t_max
            pos += 1
            status = GW_FINISHED
            break
        t += dt
        ell = int(np.searchsorted(cdf, unifs[pos], side="right"))
        if ell >= len(cdf):
            ell = len(cdf) - 1
        k += ell - 1
        pos += 1
        if record:
            rec_t[n_rec] = t
            rec_k[n_rec] = k
            n_rec += 1
        if k > cap:
            status = GW_OVERFLOW
            break
    state[0] = k
    state[1] = t
    state[2] = pos
    state[3] = n_rec
    return status
