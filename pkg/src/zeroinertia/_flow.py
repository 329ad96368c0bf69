"""Exact transportation solver: successive shortest paths with node potentials.

Supplies and demands are integers, so every augmentation moves an integral
amount and the final flow is an exact vertex of the transportation polytope.
Shortest paths are found with a dense O(V^2) Dijkstra on reduced costs.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def transport_ssp(cost, supply, demand):
    n, m = cost.shape
    flow = np.zeros((n, m), dtype=np.int64)
    rem_s = supply.copy()
    rem_t = demand.copy()
    pi_s = np.zeros(n)
    pi_t = np.zeros(m)
    ds = np.empty(n)
    dt = np.empty(m)
    done_s = np.empty(n, dtype=np.bool_)
    done_t = np.empty(m, dtype=np.bool_)
    pred_s = np.empty(n, dtype=np.int64)
    pred_t = np.empty(m, dtype=np.int64)
    left = rem_s.sum()
    while left > 0:
        for i in range(n):
            ds[i] = 0.0 if rem_s[i] > 0 else np.inf
            done_s[i] = False
            pred_s[i] = -1
        for j in range(m):
            dt[j] = np.inf
            done_t[j] = False
            pred_t[j] = -1
        target = -1
        while True:
            best = np.inf
            node = -1
            is_sink = False
            for i in range(n):
                if not done_s[i] and ds[i] < best:
                    best = ds[i]
                    node = i
                    is_sink = False
            for j in range(m):
                if not done_t[j] and dt[j] < best:
                    best = dt[j]
                    node = j
                    is_sink = True
            if node < 0:
                break
            if is_sink:
                j = node
                done_t[j] = True
                if rem_t[j] > 0:
                    target = j
                    break
                # residual reverse edges j -> i exist where flow is positive
                for i in range(n):
                    if not done_s[i] and flow[i, j] > 0:
                        rc = -(cost[i, j] + pi_s[i] - pi_t[j])
                        if rc < 0.0:
                            rc = 0.0
                        nd = dt[j] + rc
                        if nd < ds[i]:
                            ds[i] = nd
                            pred_s[i] = j
            else:
                i = node
                done_s[i] = True
                for j in range(m):
                    if not done_t[j]:
                        rc = cost[i, j] + pi_s[i] - pi_t[j]
                        if rc < 0.0:
                            rc = 0.0
                        nd = ds[i] + rc
                        if nd < dt[j]:
                            dt[j] = nd
                            pred_t[j] = i
        if target < 0:
            raise RuntimeError("transport problem is infeasible")
        D = dt[target]
        for i in range(n):
            pi_s[i] += min(ds[i], D)
        for j in range(m):
            pi_t[j] += min(dt[j], D)
        # bottleneck along the path, walking back from the target sink
        b = rem_t[target]
        j = target
        while True:
            i = pred_t[j]
            if pred_s[i] < 0:
                if rem_s[i] < b:
                    b = rem_s[i]
                break
            j = pred_s[i]
            if flow[i, j] < b:
                b = flow[i, j]
        j = target
        while True:
            i = pred_t[j]
            flow[i, j] += b
            if pred_s[i] < 0:
                rem_s[i] -= b
                break
            j = pred_s[i]
            flow[i, j] -= b
        rem_t[target] -= b
        left -= b
    return flow
