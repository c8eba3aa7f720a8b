"""Compiled round loop. Mirrors ``engine._run_python`` operation for operation so
both paths produce bit-identical traces from the same pre-drawn randomness."""

import math

import numpy as np
from numba import njit

UCB, EPS, BAD, LEAST = 0, 1, 2, 3


@njit(cache=True)
def _choose(kind, param, counts, sums, n_child, log_t, u0, u1):
    if kind == BAD:
        return int(param)
    if kind == LEAST:
        best = 0
        for c in range(1, n_child):
            if counts[c] < counts[best]:
                best = c
        return best
    if kind == UCB:
        for c in range(n_child):
            if counts[c] == 0:
                return c
        best = 0
        best_v = -np.inf
        for c in range(n_child):
            v = sums[c] / counts[c] + math.sqrt(param * log_t / (2.0 * counts[c]))
            if v > best_v:
                best_v = v
                best = c
        return best
    # epsilon-greedy
    if u0 < param:
        c = int(u1 * n_child)
        return c if c < n_child else n_child - 1
    best = 0
    best_v = -np.inf
    for c in range(n_child):
        v = sums[c] / counts[c] if counts[c] > 0 else 0.0
        if v > best_v:
            best_v = v
            best = c
    return best


@njit(cache=True)
def simulate(kinds, params, n_child, shared, local_clock, table, uniforms, n):
    n_dec, max_sel = kinds.shape
    max_child = 0
    for d in range(n_dec):
        if n_child[d] > max_child:
            max_child = n_child[d]
    n_rows = 1 if shared else max_sel
    counts = np.zeros((n_dec, n_rows, max_child), np.int64)
    sums = np.zeros((n_dec, n_rows, max_child), np.float64)
    pair = np.zeros((n_dec, max_sel, max_child), np.int64)
    calls = np.zeros((n_dec, max_sel), np.int64)
    pulls = np.zeros(table.shape[0], np.int64)
    path = np.empty((n, n_dec), np.int64)
    reward = np.empty(n, np.float64)
    selector = np.empty(n_dec, np.int64)
    use_u = uniforms.shape[0] > 0

    for step in range(n):
        log_t = math.log(step + 1)
        j = 0
        for d in range(n_dec):
            selector[d] = j
            s = 0 if shared else j
            lt = math.log(calls[d, j] + 1) if local_clock else log_t
            u0 = 0.0
            u1 = 0.0
            if use_u:
                u0 = uniforms[step, d, 0]
                u1 = uniforms[step, d, 1]
            c = _choose(kinds[d, j], params[d, j], counts[d, s], sums[d, s], n_child[d], lt, u0, u1)
            path[step, d] = c
            j = c
        x = table[j, pulls[j]]
        pulls[j] += 1
        reward[step] = x
        for d in range(n_dec):
            j = selector[d]
            s = 0 if shared else j
            c = path[step, d]
            counts[d, s, c] += 1
            sums[d, s, c] += x
            pair[d, j, c] += 1
            calls[d, j] += 1
    return path, reward, pair
