"""Compiled search kernels shared by GLS and EB-GLS.

All mutable search state lives in numpy arrays so that one run can be
advanced in chunks from Python. Scalars are packed into an int64 array
``st`` addressed by the constants below.

Penalties live in an open-addressing hash table keyed by ``lo * N + hi``.
The augmented objective uses an exact rational penalty weight
``lam_num / lam_den``; a move is improving under h iff
``lam_den * delta_g + lam_num * delta_p < 0``.
"""
import time

import numpy as np
from numba import njit, objmode

from .tsp_core import coord_distance

# scalar slots in ``st``
N = 0
CUR_G = 1
BEST_G = 2
LAM_NUM = 3
LAM_DEN = 4
ITER = 5
PEN_COUNT = 6  # distinct penalized edges
PEN_TOTAL = 7  # sum of all penalties
GOOD_TOTAL = 8  # penalty mass on marked ("good") edges
Q_HEAD = 9
Q_SIZE = 10
CUR_IS_BEST = 11
TARGET = 12
EB_START = 13  # first iteration using elite-biased utilities, -1 = never
W_NUM = 14
W_DEN = 15
PERIOD = 16
LAST_REFRESH = 17
ELITE_COST = 18
LAM_SET = 19
COEF_NUM = 20
COEF_DEN = 21
MOVES = 22
SCANS = 23
BEST_ITER = 24
ELITE_SET = 25
LAST_PEN = 26  # edges penalized in the most recent event
CUR_P = 27  # sum of penalties over the current tour's edges
REFRESHES = 28
STATE_SIZE = 32

# kernel exit codes
ITERS_DONE = 0
TARGET_REACHED = 1
TIME_UP = 2
IMPROVED = 3
NEED_GROW = 4

EMPTY = -1
TIME_CHECK_EVERY = 32


@njit(cache=True)
def _now():
    with objmode(t="float64"):
        t = time.perf_counter()
    return t


# --- hash table -------------------------------------------------------------

@njit(cache=True, inline="always")
def _slot(key, mask):
    h = np.uint64(key) * np.uint64(11400714819323198485)
    return np.int64(h >> np.uint64(32)) & mask


@njit(cache=True, inline="always")
def ekey(a, b, n):
    if a < b:
        return np.int64(a) * n + b
    return np.int64(b) * n + a


@njit(cache=True)
def hget(keys, vals, key):
    mask = keys.shape[0] - 1
    i = _slot(key, mask)
    while True:
        k = keys[i]
        if k == key:
            return np.int64(vals[i])
        if k == EMPTY:
            return np.int64(0)
        i = (i + 1) & mask


@njit(cache=True)
def hadd(keys, vals, key, inc):
    """Add ``inc`` to the value of ``key``; return 1 if the key is new."""
    mask = keys.shape[0] - 1
    i = _slot(key, mask)
    while True:
        k = keys[i]
        if k == key:
            vals[i] += inc
            return 0
        if k == EMPTY:
            keys[i] = key
            vals[i] = inc
            return 1
        i = (i + 1) & mask


@njit(cache=True)
def rehash(keys, vals, new_keys, new_vals):
    for i in range(keys.shape[0]):
        if keys[i] != EMPTY:
            hadd(new_keys, new_vals, keys[i], vals[i])


def new_table(capacity):
    cap = 1 << max(4, int(capacity - 1).bit_length())
    return np.full(cap, EMPTY, dtype=np.int64), np.zeros(cap, dtype=np.int32)


# --- distances and tour primitives -------------------------------------------

@njit(cache=True, inline="always")
def _d(D, coords, rule, a, b):
    if D.shape[0] > 0:
        return np.int64(D[a, b])
    return coord_distance(coords, rule, a, b)


@njit(cache=True, inline="always")
def _succ(order, pos, n, c):
    i = pos[c] + 1
    return order[0 if i == n else i]


@njit(cache=True, inline="always")
def _pred(order, pos, n, c):
    i = pos[c]
    return order[n - 1 if i == 0 else i - 1]


@njit(cache=True)
def _reverse(order, pos, n, i, j):
    """Reverse the cyclic segment of positions i..j (inclusive)."""
    length = j - i
    if length < 0:
        length += n
    length += 1
    for _ in range(length // 2):
        a = order[i]
        b = order[j]
        order[i] = b
        pos[b] = i
        order[j] = a
        pos[a] = j
        i += 1
        if i == n:
            i = 0
        j -= 1
        if j < 0:
            j = n - 1


@njit(cache=True)
def apply_2opt(order, pos, n, x, y):
    """Replace edges (x, succ x), (y, succ y) by (x, y), (succ x, succ y)."""
    i = pos[x]
    j = pos[y]
    inner = j - i
    if inner < 0:
        inner += n
    # segment succ(x)..y has ``inner`` cities, the complement succ(y)..x has n - inner
    if 2 * inner <= n:
        _reverse(order, pos, n, (i + 1) % n, j)
    else:
        _reverse(order, pos, n, (j + 1) % n, i)


@njit(cache=True)
def move_delta_parts(order, pos, D, coords, rule, keys, vals, n, x, y):
    """(delta_g, delta_p) of the 2-opt move removing (x, sx) and (y, sy)."""
    sx = _succ(order, pos, n, x)
    sy = _succ(order, pos, n, y)
    dg = (_d(D, coords, rule, x, y) + _d(D, coords, rule, sx, sy)
          - _d(D, coords, rule, x, sx) - _d(D, coords, rule, y, sy))
    dp = (hget(keys, vals, ekey(x, y, n)) + hget(keys, vals, ekey(sx, sy, n))
          - hget(keys, vals, ekey(x, sx, n)) - hget(keys, vals, ekey(y, sy, n)))
    return dg, dp


# --- fast local search --------------------------------------------------------

@njit(cache=True, inline="always")
def _activate(active, queue, st, n, c):
    if not active[c]:
        active[c] = True
        t = st[Q_HEAD] + st[Q_SIZE]
        if t >= n:
            t -= n
        queue[t] = c
        st[Q_SIZE] += 1


@njit(cache=True)
def _commit_move(order, pos, best_order, active, queue, st, n, x, y, dg, dp):
    """Apply a 2-opt move, keep best-so-far and FLS bits up to date."""
    sx = _succ(order, pos, n, x)
    sy = _succ(order, pos, n, y)
    new_g = st[CUR_G] + dg
    if new_g < st[BEST_G]:
        st[BEST_G] = new_g
        st[CUR_IS_BEST] = 1
    elif st[CUR_IS_BEST] == 1:
        # leaving the best tour: snapshot it before it is modified
        best_order[:] = order
        st[CUR_IS_BEST] = 0
    apply_2opt(order, pos, n, x, y)
    st[CUR_G] = new_g
    st[CUR_P] += dp
    st[MOVES] += 1
    _activate(active, queue, st, n, x)
    _activate(active, queue, st, n, sx)
    _activate(active, queue, st, n, y)
    _activate(active, queue, st, n, sy)


@njit(cache=True)
def _improve_city(a, order, pos, best_order, D, coords, rule, nbrs, keys, vals,
                  active, queue, st):
    """First-improvement scan of city a's sub-neighbourhood; True if a move was applied."""
    n = st[N]
    num = st[LAM_NUM]
    den = st[LAM_DEN]
    an = _succ(order, pos, n, a)
    ap = _pred(order, pos, n, a)
    d_an = _d(D, coords, rule, a, an)
    d_ap = _d(D, coords, rule, ap, a)
    p_an = hget(keys, vals, ekey(a, an, n))
    p_ap = hget(keys, vals, ekey(ap, a, n))
    # an improving move from a's side must replace one of a's tour edges by a
    # cheaper (a, c); neighbours are sorted by distance, so stop once d(a, c)
    # reaches the augmented cost of both tour edges at a
    h_an = den * d_an + num * p_an
    h_ap = den * d_ap + num * p_ap
    h_max = h_an if h_an > h_ap else h_ap
    for k in range(nbrs.shape[1]):
        c = nbrs[a, k]
        d_ac = _d(D, coords, rule, a, c)
        if den * d_ac >= h_max:
            break
        # successor move: remove (a, an), (c, cn); add (a, c), (an, cn)
        cn = _succ(order, pos, n, c)
        if c != an and cn != a:
            d_ccn = _d(D, coords, rule, c, cn)
            dg = d_ac + _d(D, coords, rule, an, cn) - d_an - d_ccn
            p_ccn = hget(keys, vals, ekey(c, cn, n))
            # new edges carry non-negative penalties: cheap lower bound first
            if den * dg - num * (p_an + p_ccn) < 0:
                dp = (hget(keys, vals, ekey(a, c, n)) + hget(keys, vals, ekey(an, cn, n))
                      - p_an - p_ccn)
                if den * dg + num * dp < 0:
                    _commit_move(order, pos, best_order, active, queue, st, n, a, c, dg, dp)
                    return True
        # predecessor move: remove (ap, a), (cp, c); add (a, c), (ap, cp)
        cp = _pred(order, pos, n, c)
        if c != ap and cp != a:
            d_cpc = _d(D, coords, rule, cp, c)
            dg = d_ac + _d(D, coords, rule, ap, cp) - d_ap - d_cpc
            p_cpc = hget(keys, vals, ekey(cp, c, n))
            if den * dg - num * (p_ap + p_cpc) < 0:
                dp = (hget(keys, vals, ekey(a, c, n)) + hget(keys, vals, ekey(ap, cp, n))
                      - p_ap - p_cpc)
                if den * dg + num * dp < 0:
                    _commit_move(order, pos, best_order, active, queue, st, n, ap, cp, dg, dp)
                    return True
    return False


@njit(cache=True)
def local_search(order, pos, best_order, D, coords, rule, nbrs, keys, vals,
                 active, queue, st, deadline):
    """Run FLS until no city is active. Returns ITERS_DONE, TARGET_REACHED or TIME_UP."""
    n = st[N]
    while st[Q_SIZE] > 0:
        a = queue[st[Q_HEAD]]
        while True:
            st[SCANS] += 1
            if deadline > 0.0 and st[SCANS] % TIME_CHECK_EVERY == 0:
                if _now() >= deadline:
                    return TIME_UP
            if not _improve_city(a, order, pos, best_order, D, coords, rule, nbrs,
                                 keys, vals, active, queue, st):
                break
            if st[BEST_G] <= st[TARGET]:
                return TARGET_REACHED
        active[a] = False
        st[Q_HEAD] += 1
        if st[Q_HEAD] == n:
            st[Q_HEAD] = 0
        st[Q_SIZE] -= 1
    return ITERS_DONE


@njit(cache=True)
def local_search_complete(order, pos, best_order, D, coords, rule, nbrs, keys, vals,
                          active, queue, st):
    """FLS followed by full sweeps until no city admits an improving move.

    Plain FLS can stop early: a reversal elsewhere may turn a pair of old
    edges into a valid improving move without waking their endpoints.
    """
    n = st[N]
    while True:
        code = local_search(order, pos, best_order, D, coords, rule, nbrs, keys, vals,
                            active, queue, st, 0.0)
        if code != ITERS_DONE:
            return code
        found = False
        for a in range(n):
            while _improve_city(a, order, pos, best_order, D, coords, rule, nbrs,
                                keys, vals, active, queue, st):
                found = True
        if not found:
            return ITERS_DONE


# --- penalization -------------------------------------------------------------

@njit(cache=True)
def sync_best(order, best_order, st):
    if st[CUR_IS_BEST] == 1:
        best_order[:] = order


@njit(cache=True)
def refresh_elite(order, best_order, elite_next, elite_prev, st):
    sync_best(order, best_order, st)
    n = st[N]
    for k in range(n):
        a = best_order[k]
        b = best_order[k + 1 if k + 1 < n else 0]
        elite_next[a] = b
        elite_prev[b] = a
    st[ELITE_COST] = st[BEST_G]
    st[ELITE_SET] = 1
    st[REFRESHES] += 1


@njit(cache=True)
def penalize(order, D, coords, rule, keys, vals, gkeys, gvals, elite_next, elite_prev,
             active, queue, st, use_elite, util_num, util_den, penalized):
    """Increment the penalty of every max-utility edge of the current tour.

    Utilities are compared exactly as fractions ``util_num / util_den``.
    GLS: c / (1 + p). Elite-biased: c * w_den / (1 + p) for elite edges and
    c * w_num / (1 + p) otherwise (a common factor w_den is dropped).
    """
    n = st[N]
    best_num = np.int64(-1)
    best_den = np.int64(1)
    for k in range(n):
        a = order[k]
        b = order[k + 1 if k + 1 < n else 0]
        c = _d(D, coords, rule, a, b)
        p = hget(keys, vals, ekey(a, b, n))
        if use_elite:
            in_elite = elite_next[a] == b or elite_prev[a] == b
            num = c * (st[W_DEN] if in_elite else st[W_NUM])
        else:
            num = c
        util_num[k] = num
        util_den[k] = 1 + p
        if num * best_den > best_num * util_den[k]:
            best_num = num
            best_den = util_den[k]
    count = 0
    for k in range(n):
        if util_num[k] * best_den == best_num * util_den[k]:
            a = order[k]
            b = order[k + 1 if k + 1 < n else 0]
            key = ekey(a, b, n)
            st[PEN_COUNT] += hadd(keys, vals, key, 1)
            st[PEN_TOTAL] += 1
            st[CUR_P] += 1
            if gkeys.shape[0] > 0 and hget(gkeys, gvals, key) > 0:
                st[GOOD_TOTAL] += 1
            penalized[count] = key
            count += 1
            _activate(active, queue, st, n, a)
            _activate(active, queue, st, n, b)
    st[LAST_PEN] = count


# --- outer loop -------------------------------------------------------------

@njit(cache=True)
def run_iterations(order, pos, best_order, D, coords, rule, nbrs, keys, vals,
                   gkeys, gvals, elite_next, elite_prev, active, queue, st,
                   util_num, util_den, penalized, iter_best,
                   max_iters, deadline, stop_on_improve):
    """Advance the guided search by up to ``max_iters`` outer iterations.

    One iteration = one local search on h plus one penalization event.
    ``iter_best[k]`` receives the best cost after the k-th iteration of
    this call. Returns (exit code, iterations completed in this call).
    """
    n = st[N]
    done = 0
    while done < max_iters:
        if 2 * (st[PEN_COUNT] + n) > keys.shape[0]:
            return NEED_GROW, done
        if deadline > 0.0 and _now() >= deadline:
            return TIME_UP, done
        best_before = st[BEST_G]
        code = local_search(order, pos, best_order, D, coords, rule, nbrs, keys, vals,
                            active, queue, st, deadline)
        if code == TIME_UP:
            return TIME_UP, done
        if st[LAM_SET] == 0:
            # first local optimum fixes the penalty weight
            st[LAM_NUM] = st[COEF_NUM] * st[CUR_G]
            st[LAM_DEN] = st[COEF_DEN] * n
            st[LAM_SET] = 1
        j = st[ITER] + 1
        if st[BEST_G] < best_before:
            st[BEST_ITER] = j
        if code == TARGET_REACHED or st[BEST_G] <= st[TARGET]:
            # search ends at the optimum; no penalization needed
            st[ITER] = j
            iter_best[done] = st[BEST_G]
            return TARGET_REACHED, done + 1
        use_elite = st[EB_START] >= 0 and j >= st[EB_START]
        if use_elite and (st[ELITE_SET] == 0 or j == st[EB_START]
                          or j - st[LAST_REFRESH] >= st[PERIOD]):
            refresh_elite(order, best_order, elite_next, elite_prev, st)
            st[LAST_REFRESH] = j
        penalize(order, D, coords, rule, keys, vals, gkeys, gvals, elite_next, elite_prev,
                 active, queue, st, use_elite, util_num, util_den, penalized)
        st[ITER] = j
        iter_best[done] = st[BEST_G]
        done += 1
        if stop_on_improve and st[BEST_G] < best_before:
            return IMPROVED, done
    return ITERS_DONE, done
