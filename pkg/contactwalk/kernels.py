"""Compiled event-sweep kernels.

Kernels work on window indices 0..n-1 and on the merged event arrays of an
EventLog: ``times`` ascending, ``kinds`` 0 for a cross and 1 for an arrow,
``sites`` the healed site or the left end of the arrow's bond. A cross heals
an infected site; an arrow whose endpoints differ infects the healthy one.
"""

import math

import numpy as np
from numba import njit

CROSS = 0
ARROW = 1


@njit(cache=True)
def sweep(state, times, kinds, sites, start, stop, record):
    """Apply events start..stop-1 to ``state`` in place, optionally recording flips."""
    size = stop - start if record else 0
    chg_times = np.empty(size, np.float64)
    chg_sites = np.empty(size, np.int64)
    chg_vals = np.empty(size, np.uint8)
    n_chg = 0
    for i in range(start, stop):
        s = sites[i]
        if kinds[i] == CROSS:
            if state[s] == 1:
                state[s] = 0
                if record:
                    chg_times[n_chg] = times[i]
                    chg_sites[n_chg] = s
                    chg_vals[n_chg] = 0
                    n_chg += 1
        elif state[s] != state[s + 1]:
            target = s + 1 if state[s] == 1 else s
            state[target] = 1
            if record:
                chg_times[n_chg] = times[i]
                chg_sites[n_chg] = target
                chg_vals[n_chg] = 1
                n_chg += 1
    return chg_times[:n_chg], chg_sites[:n_chg], chg_vals[:n_chg]


@njit(cache=True)
def apply_changes(state, chg_sites, chg_vals, count):
    for c in range(count):
        state[chg_sites[c]] = chg_vals[c]
    return state


@njit(cache=True)
def sweep_edges(state, times, kinds, sites, start, stop):
    """Evolve ``state`` tracking its leftmost and rightmost infected sites.

    Returns the flips, the edge trajectory (time, lo, hi) recorded whenever
    an edge moves, the death time (nan while alive) and the extreme values
    reached by the edges (min lo, max hi, min hi).
    """
    n = state.shape[0]
    lo = -1
    hi = -1
    count = 0
    for x in range(n):
        if state[x] == 1:
            if lo < 0:
                lo = x
            hi = x
            count += 1
    size = stop - start
    chg_times = np.empty(size, np.float64)
    chg_sites = np.empty(size, np.int64)
    chg_vals = np.empty(size, np.uint8)
    edge_times = np.empty(size, np.float64)
    edge_lo = np.empty(size, np.int64)
    edge_hi = np.empty(size, np.int64)
    n_chg = 0
    n_edge = 0
    death = np.nan
    min_lo = lo
    max_hi = hi
    min_hi = hi
    if count > 0:
        for i in range(start, stop):
            s = sites[i]
            t = times[i]
            moved = False
            if kinds[i] == CROSS:
                if state[s] == 0:
                    continue
                state[s] = 0
                count -= 1
                chg_times[n_chg] = t
                chg_sites[n_chg] = s
                chg_vals[n_chg] = 0
                n_chg += 1
                if count == 0:
                    death = t
                    break
                if s == lo:
                    while state[lo] == 0:
                        lo += 1
                    moved = True
                if s == hi:
                    while state[hi] == 0:
                        hi -= 1
                    moved = True
            else:
                if s + 1 < lo or s > hi or state[s] == state[s + 1]:
                    continue
                target = s + 1 if state[s] == 1 else s
                state[target] = 1
                count += 1
                chg_times[n_chg] = t
                chg_sites[n_chg] = target
                chg_vals[n_chg] = 1
                n_chg += 1
                if target < lo:
                    lo = target
                    moved = True
                if target > hi:
                    hi = target
                    moved = True
            if moved:
                edge_times[n_edge] = t
                edge_lo[n_edge] = lo
                edge_hi[n_edge] = hi
                n_edge += 1
                min_lo = min(min_lo, lo)
                max_hi = max(max_hi, hi)
                min_hi = min(min_hi, hi)
    return (
        chg_times[:n_chg],
        chg_sites[:n_chg],
        chg_vals[:n_chg],
        edge_times[:n_edge],
        edge_lo[:n_edge],
        edge_hi[:n_edge],
        death,
        min_lo,
        max_hi,
        min_hi,
    )


@njit(cache=True)
def walk_skeleton(state, chg_times, chg_sites, chg_vals, jump_times, uniforms, p_right0, p_right1, start, margin):
    """Skeleton recursion: the environment is read after all flips at times <= the jump time.

    Returns positions (one more than the jumps taken), the environment seen
    at each jump, and whether the walk came within ``margin`` of a window end.
    The path is truncated when the walk would leave the window.
    """
    n = state.shape[0]
    m = jump_times.shape[0]
    positions = np.empty(m + 1, np.int64)
    envs = np.empty(m, np.uint8)
    positions[0] = start
    pos = start
    c = 0
    n_chg = chg_times.shape[0]
    done = 0
    contaminated = pos <= margin or pos >= n - 1 - margin
    for k in range(m):
        t = jump_times[k]
        while c < n_chg and chg_times[c] <= t:
            state[chg_sites[c]] = chg_vals[c]
            c += 1
        env = state[pos]
        envs[k] = env
        p = p_right1 if env == 1 else p_right0
        if uniforms[k] <= p:
            pos += 1
        else:
            pos -= 1
        if pos < 0 or pos >= n:
            contaminated = True
            break
        positions[k + 1] = pos
        done = k + 1
        if pos <= margin or pos >= n - 1 - margin:
            contaminated = True
    return positions[: done + 1], envs[:done], contaminated


@njit(cache=True)
def first_infected_visit(state, chg_times, chg_sites, chg_vals, jump_times, positions, t_end):
    """First time the site under the walker is infected (0.0 if it already is, nan if never)."""
    m = positions.shape[0] - 1
    pos = positions[0]
    if state[pos] == 1:
        return 0.0
    c = 0
    k = 0
    n_chg = chg_times.shape[0]
    while True:
        tc = chg_times[c] if c < n_chg else np.inf
        tj = jump_times[k] if k < m else np.inf
        if tc <= tj:
            t = tc
            if t > t_end:
                return np.nan
            state[chg_sites[c]] = chg_vals[c]
            c += 1
        else:
            t = tj
            if t > t_end:
                return np.nan
            k += 1
            pos = positions[k]
        if state[pos] == 1:
            return t


@njit(cache=True)
def failure_scan(n, times, kinds, sites, ev_start, x, t_limit, jump_times, positions, k0):
    """Replay the cluster of (x, t0) together with the walk.

    ``ev_start`` is the first event after t0 and ``k0`` the number of jumps
    up to t0. Returns the first time the cluster is empty or the walk is
    outside [lo, hi] (nan if none up to ``t_limit``), plus min lo and max hi.
    """
    state = np.zeros(n, np.uint8)
    state[x] = 1
    lo = x
    hi = x
    count = 1
    min_lo = x
    max_hi = x
    m = positions.shape[0] - 1
    k = k0
    pos = positions[k0]
    i = ev_start
    n_ev = times.shape[0]
    while True:
        te = times[i] if i < n_ev else np.inf
        tj = jump_times[k] if k < m else np.inf
        if te <= tj:
            t = te
            if t > t_limit:
                return np.nan, min_lo, max_hi
            s = sites[i]
            i += 1
            if kinds[i - 1] == CROSS:
                if state[s] == 1:
                    state[s] = 0
                    count -= 1
                    if count == 0:
                        return t, min_lo, max_hi
                    while state[lo] == 0:
                        lo += 1
                    while state[hi] == 0:
                        hi -= 1
            elif s + 1 >= lo and s <= hi and state[s] != state[s + 1]:
                target = s + 1 if state[s] == 1 else s
                state[target] = 1
                count += 1
                if target < lo:
                    lo = target
                    min_lo = min(min_lo, lo)
                if target > hi:
                    hi = target
                    max_hi = max(max_hi, hi)
        else:
            t = tj
            if t > t_limit:
                return np.nan, min_lo, max_hi
            k += 1
            pos = positions[k]
        if pos < lo or pos > hi:
            return t, min_lo, max_hi


@njit(cache=True)
def wave_hit_scan(state, times, kinds, sites, ev_start, t0, t_limit, jump_times, positions, k0, margin):
    """First time the walk sits on the rightmost infected site of ``state``.

    Returns (time or nan, died, contaminated); contamination means the
    tracked edge came within ``margin`` of either window end.
    """
    n = state.shape[0]
    hi = -1
    count = 0
    for x in range(n):
        if state[x] == 1:
            hi = x
            count += 1
    if count == 0:
        return np.nan, True, False
    contaminated = hi <= margin or hi >= n - 1 - margin
    m = positions.shape[0] - 1
    k = k0
    pos = positions[k0]
    if pos == hi:
        return t0, False, contaminated
    i = ev_start
    n_ev = times.shape[0]
    while True:
        te = times[i] if i < n_ev else np.inf
        tj = jump_times[k] if k < m else np.inf
        if te <= tj:
            t = te
            if t > t_limit:
                return np.nan, False, contaminated
            s = sites[i]
            i += 1
            if kinds[i - 1] == CROSS:
                if state[s] == 1:
                    state[s] = 0
                    count -= 1
                    if count == 0:
                        return np.nan, True, contaminated
                    while state[hi] == 0:
                        hi -= 1
            elif s <= hi and state[s] != state[s + 1]:
                target = s + 1 if state[s] == 1 else s
                state[target] = 1
                count += 1
                if target > hi:
                    hi = target
            if hi <= margin or hi >= n - 1 - margin:
                contaminated = True
        else:
            t = tj
            if t > t_limit:
                return np.nan, False, contaminated
            k += 1
            pos = positions[k]
        if pos == hi:
            return t, False, contaminated


@njit(cache=True)
def wedge_cluster_survives(n, times, kinds, sites, ev_start, x, t0, t_end, slow, fast):
    """Does the cluster of (x, t0), confined to slow*u - 1 < z - x <= fast*u, live until t_end?"""
    state = np.zeros(n, np.uint8)
    state[x] = 1
    lo = x
    hi = x
    count = 1
    n_ev = times.shape[0]
    i = ev_start
    while True:
        t = times[i] if i < n_ev else np.inf
        at = min(t, t_end)
        u = at - t0
        # the left wall only moves right, so exits happen at lo
        while slow * u - 1.0 >= lo - x:
            state[lo] = 0
            count -= 1
            if count == 0:
                return False
            while state[lo] == 0:
                lo += 1
        if t > t_end:
            return True
        s = sites[i]
        if kinds[i] == CROSS:
            if state[s] == 1:
                state[s] = 0
                count -= 1
                if count == 0:
                    return False
                while state[lo] == 0:
                    lo += 1
                while state[hi] == 0:
                    hi -= 1
        elif s + 1 >= lo and s <= hi and state[s] != state[s + 1]:
            target = s + 1 if state[s] == 1 else s
            offset = target - x
            if slow * u - 1.0 < offset and offset <= fast * u:
                state[target] = 1
                count += 1
                lo = min(lo, target)
                hi = max(hi, target)
        i += 1


@njit(cache=True)
def spreads_widely(n, times, kinds, sites, x, t_end, half_iota):
    """Check min(x - L_t, R_t - x) >= floor(half_iota * t) for all t <= t_end.

    On a constancy interval that ends at event time b the binding value is
    ceil(half_iota * b) - 1; at t_end itself it is floor(half_iota * t_end).
    """
    state = np.zeros(n, np.uint8)
    state[x] = 1
    lo = x
    hi = x
    count = 1
    n_ev = times.shape[0]
    for i in range(n_ev):
        t = times[i]
        if t > t_end:
            break
        need = math.ceil(half_iota * t) - 1
        if x - lo < need or hi - x < need:
            return False
        s = sites[i]
        if kinds[i] == CROSS:
            if state[s] == 1:
                state[s] = 0
                count -= 1
                if count == 0:
                    return False
                while state[lo] == 0:
                    lo += 1
                while state[hi] == 0:
                    hi -= 1
        elif s + 1 >= lo and s <= hi and state[s] != state[s + 1]:
            target = s + 1 if state[s] == 1 else s
            state[target] = 1
            count += 1
            lo = min(lo, target)
            hi = max(hi, target)
    need = math.floor(half_iota * t_end)
    return x - lo >= need and hi - x >= need


@njit(cache=True)
def _nearest_distance(markers, y):
    j = np.searchsorted(markers, y)
    best = 1 << 62
    if j < markers.shape[0]:
        best = markers[j] - y
    if j > 0:
        best = min(best, y - markers[j - 1])
    return best


@njit(cache=True)
def coupling_scan(lower, upper, times, kinds, sites, t_end, origin, slope, markers, iota):
    """Evolve ``lower`` <= ``upper`` on shared events and audit their disagreements.

    A disagreement at y lasting over [on, off) is in the cone when
    max(on, |y - origin| / slope) < off, and lies in the safe region of
    the (sorted) marker sites when max(on, 2 (d + 1) / iota) < off, d the
    distance to the nearest marker. Returns the latest cone disagreement
    time (-1.0 if none), the number of safe-region violations and the
    number of disagreement intervals. A cone disagreement still open at
    ``t_end`` gives an infinite latest time.
    """
    n = lower.shape[0]
    on_time = np.zeros(n, np.float64)
    last_bad = -1.0
    violations = 0
    intervals = 0
    has_markers = markers.shape[0] > 0
    n_ev = times.shape[0]
    for i in range(n_ev + 1):
        final = i == n_ev or times[i] > t_end
        if final:
            for y in range(n):
                if upper[y] == 1 and lower[y] == 0:
                    intervals += 1
                    start = max(on_time[y], abs(y - origin) / slope)
                    if start <= t_end:
                        last_bad = np.inf
                    if has_markers:
                        d = _nearest_distance(markers, y)
                        if max(on_time[y], 2.0 * (d + 1) / iota) <= t_end:
                            violations += 1
            break
        t = times[i]
        s = sites[i]
        touched = 1 if kinds[i] == CROSS else 2
        before0 = upper[s] == 1 and lower[s] == 0
        before1 = touched == 2 and upper[s + 1] == 1 and lower[s + 1] == 0
        if kinds[i] == CROSS:
            upper[s] = 0
            lower[s] = 0
        else:
            if upper[s] != upper[s + 1]:
                upper[s] = 1
                upper[s + 1] = 1
            if lower[s] != lower[s + 1]:
                lower[s] = 1
                lower[s + 1] = 1
        for j in range(touched):
            y = s + j
            before = before0 if j == 0 else before1
            after = upper[y] == 1 and lower[y] == 0
            if before and not after:
                intervals += 1
                start = max(on_time[y], abs(y - origin) / slope)
                if start < t:
                    last_bad = max(last_bad, t)
                if has_markers:
                    d = _nearest_distance(markers, y)
                    if max(on_time[y], 2.0 * (d + 1) / iota) < t:
                        violations += 1
            elif after and not before:
                on_time[y] = t
    return last_bad, violations, intervals
