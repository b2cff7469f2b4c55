"""Hot inner loops, compiled with numba when available.

Every kernel exists twice: a loop-form body that numba compiles and a
vectorised numpy twin used when numba is missing or disabled.  Set
``FOGRL_DISABLE_NUMBA=1`` before import to force the numpy path.  Both
variants are importable directly (``*_numba`` / ``*_numpy``) so tests and
benchmarks can compare them.
"""

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("FOGRL_DISABLE_NUMBA", "0").lower() in ("", "0", "false", "no")


def _jit(func):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


# ---------------------------------------------------------------------------
# Sum/max segment tree (heap layout: root at 1, leaves at cap .. 2*cap-1)
# ---------------------------------------------------------------------------

def _tree_set_loop(sums, maxes, cap, leaves, values):
    for j in range(leaves.shape[0]):
        node = leaves[j] + cap
        sums[node] = values[j]
        maxes[node] = values[j]
        node //= 2
        while node >= 1:
            left = 2 * node
            sums[node] = sums[left] + sums[left + 1]
            a = maxes[left]
            b = maxes[left + 1]
            maxes[node] = a if a >= b else b
            node //= 2


def _tree_retrieve_loop(sums, cap, targets):
    out = np.empty(targets.shape[0], dtype=np.int64)
    for j in range(targets.shape[0]):
        v = targets[j]
        node = 1
        while node < cap:
            left = 2 * node
            ls = sums[left]
            rs = sums[left + 1]
            # Never descend into an empty subtree (guards float round-off at the edges).
            if rs <= 0.0 or (v < ls and ls > 0.0):
                node = left
            else:
                v -= ls
                node = left + 1
        out[j] = node - cap
    return out


tree_set_numba = _jit(_tree_set_loop)
tree_retrieve_numba = _jit(_tree_retrieve_loop)


def tree_set_numpy(sums, maxes, cap, leaves, values):
    # Sequential semantics for duplicate leaves: last write wins.
    leaves = np.asarray(leaves, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    nodes = leaves + cap
    sums[nodes] = values
    maxes[nodes] = values
    nodes = np.unique(nodes // 2)
    while nodes.size and nodes[0] >= 1:
        left = 2 * nodes
        sums[nodes] = sums[left] + sums[left + 1]
        maxes[nodes] = np.maximum(maxes[left], maxes[left + 1])
        if nodes[-1] == 1:
            break
        nodes = np.unique(nodes // 2)


def tree_retrieve_numpy(sums, cap, targets):
    v = np.array(targets, dtype=np.float64)
    node = np.ones(v.shape[0], dtype=np.int64)
    while node.size and node[0] < cap:
        left = 2 * node
        ls = sums[left]
        rs = sums[left + 1]
        go_left = (rs <= 0.0) | ((v < ls) & (ls > 0.0))
        v = np.where(go_left, v, v - ls)
        node = np.where(go_left, left, left + 1)
    return node - cap


# ---------------------------------------------------------------------------
# Window statistics: mean, population std, OLS slope, max
# ---------------------------------------------------------------------------

def _window_stats_loop(t, x):
    n = x.shape[0]
    mean = 0.0
    tm = 0.0
    mx = x[0]
    for i in range(n):
        mean += x[i]
        tm += t[i]
        if x[i] > mx:
            mx = x[i]
    mean /= n
    tm /= n
    var = 0.0
    sxy = 0.0
    sxx = 0.0
    for i in range(n):
        dx = x[i] - mean
        dt = t[i] - tm
        var += dx * dx
        sxy += dt * dx
        sxx += dt * dt
    std = np.sqrt(var / n)
    slope = sxy / sxx if sxx > 0.0 else 0.0
    return mean, std, slope, mx


window_stats_numba = _jit(_window_stats_loop)


def window_stats_numpy(t, x):
    mean = x.mean()
    dx = x - mean
    dt = t - t.mean()
    sxx = float(dt @ dt)
    slope = float(dt @ dx) / sxx if sxx > 0.0 else 0.0
    return float(mean), float(np.sqrt(dx @ dx / x.shape[0])), slope, float(x.max())


# ---------------------------------------------------------------------------
# Maximal runs of True in a boolean mask
# ---------------------------------------------------------------------------

def _runs_loop(mask):
    n = mask.shape[0]
    starts = np.empty(n, dtype=np.int64)
    ends = np.empty(n, dtype=np.int64)
    k = 0
    i = 0
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            starts[k] = i
            ends[k] = j
            k += 1
            i = j + 1
        else:
            i += 1
    return starts[:k], ends[:k]


runs_numba = _jit(_runs_loop)


def runs_numpy(mask):
    m = np.asarray(mask, dtype=np.int8)
    d = np.diff(np.concatenate(([0], m, [0])))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return starts.astype(np.int64), ends.astype(np.int64)


if USE_NUMBA:
    tree_set = tree_set_numba
    tree_retrieve = tree_retrieve_numba
    window_stats = window_stats_numba
    runs = runs_numba
else:
    tree_set = tree_set_numpy
    tree_retrieve = tree_retrieve_numpy
    window_stats = window_stats_numpy
    runs = runs_numpy
