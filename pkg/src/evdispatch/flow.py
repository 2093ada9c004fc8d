"""Minimum-cost flow by successive shortest paths with node potentials.

Integer arc costs only, so path comparisons are exact. Arcs may carry
negative costs (the guidance model's first under-supply marginals do);
initial potentials come from one Bellman-Ford pass, after which every
augmentation runs Dijkstra on reduced costs. Augmentation continues while
the cheapest source->sink path has non-positive cost (largest minimizer
among optimal flow values) up to the requested flow cap.

Determinism: nodes are relaxed in insertion order and the heap breaks cost
ties by node id, so equal-cost augmenting paths resolve the same way on
every run.
"""

from __future__ import annotations

import heapq

INF = float("inf")


class MinCostFlow:
    def __init__(self, n_nodes: int):
        self.n = n_nodes
        # arc storage: to[], cap[], cost[], paired with reverse arc at i^1
        self.head: list[list[int]] = [[] for _ in range(n_nodes)]
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[int] = []

    def add_arc(self, u: int, v: int, cap: int, cost: int) -> int:
        """Add arc u->v; returns the arc index (reverse arc is index+1)."""
        idx = len(self.to)
        self.head[u].append(idx)
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.head[v].append(idx + 1)
        self.to.append(u)
        self.cap.append(0)
        self.cost.append(-cost)
        return idx

    def flow_on(self, arc: int) -> int:
        return self.cap[arc + 1] if arc % 2 == 0 else self.cap[arc ^ 1]

    def _bellman_ford(self, src: int) -> list[float]:
        dist: list[float] = [INF] * self.n
        dist[src] = 0.0
        for _ in range(self.n - 1):
            changed = False
            for idx in range(0, len(self.to), 2):
                if self.cap[idx] <= 0:
                    continue
                u = self.to[idx + 1]
                if dist[u] + self.cost[idx] < dist[self.to[idx]]:
                    dist[self.to[idx]] = dist[u] + self.cost[idx]
                    changed = True
            if not changed:
                break
        return dist

    def _dijkstra(self, src: int,
                  potential: list[float]) -> tuple[list[float], list[int]]:
        dist: list[float] = [INF] * self.n
        parent_arc: list[int] = [-1] * self.n
        dist[src] = 0.0
        heap: list[tuple[float, int]] = [(0.0, src)]
        done = [False] * self.n
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for idx in self.head[u]:
                if self.cap[idx] <= 0:
                    continue
                v = self.to[idx]
                if done[v] or potential[v] == INF:
                    continue
                nd = d + self.cost[idx] + potential[u] - potential[v]
                if nd < dist[v]:
                    dist[v] = nd
                    parent_arc[v] = idx
                    heapq.heappush(heap, (nd, v))
        return dist, parent_arc

    def solve(self, src: int, sink: int, max_flow: int) -> tuple[int, int]:
        """Push up to max_flow units while each extra unit costs <= 0.

        Returns (flow, total_cost). Residual capacities are left in place so
        callers can read per-arc flow afterwards.
        """
        potential = self._bellman_ford(src)
        flow = 0
        total_cost = 0
        while flow < max_flow:
            if potential[sink] == INF:
                break
            dist, parent_arc = self._dijkstra(src, potential)
            if dist[sink] == INF:
                break
            path_cost = dist[sink] + potential[sink] - potential[src]
            if path_cost > 0:
                break
            for v in range(self.n):
                if dist[v] < INF:
                    potential[v] += dist[v]
            # unit capacities throughout: push exactly one unit
            v = sink
            while v != src:
                idx = parent_arc[v]
                self.cap[idx] -= 1
                self.cap[idx ^ 1] += 1
                v = self.to[idx ^ 1]
            flow += 1
            total_cost += int(path_cost)
        return flow, total_cost
