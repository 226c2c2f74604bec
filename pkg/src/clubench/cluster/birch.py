"""BIRCH: clustering-feature tree followed by a global clustering of leaf entries."""

from __future__ import annotations

import numpy as np
from scipy.cluster.hierarchy import cut_tree, linkage
from scipy.spatial.distance import cdist


class _CF:
    """Clustering feature: count, linear sum, sum of squared norms."""

    __slots__ = ("n", "ls", "ss", "child")

    def __init__(self, n, ls, ss, child=None):
        self.n = n
        self.ls = ls
        self.ss = ss
        self.child = child

    @property
    def centroid(self):
        return self.ls / self.n

    def merged_radius(self, x):
        n = self.n + 1
        ls = self.ls + x
        ss = self.ss + float(x @ x)
        c = ls / n
        return np.sqrt(max(ss / n - float(c @ c), 0.0))

    def absorb(self, other):
        self.n += other.n
        self.ls = self.ls + other.ls
        self.ss += other.ss


class _Node:
    __slots__ = ("entries", "leaf")

    def __init__(self, leaf):
        self.entries: list[_CF] = []
        self.leaf = leaf

    def centroids(self):
        return np.vstack([e.centroid for e in self.entries])


class CFTree:
    def __init__(self, threshold, branching_factor):
        if threshold <= 0:
            raise ValueError("threshold must be positive")
        if branching_factor < 2:
            raise ValueError("branching factor must be at least 2")
        self.threshold = threshold
        self.B = branching_factor
        self.root = _Node(leaf=True)

    def insert(self, x):
        split = self._insert(self.root, x)
        if split is not None:
            new_root = _Node(leaf=False)
            new_root.entries = [self._summarise(node) for node in split]
            self.root = new_root

    @staticmethod
    def _summarise(node):
        n = sum(e.n for e in node.entries)
        ls = np.sum([e.ls for e in node.entries], axis=0)
        ss = sum(e.ss for e in node.entries)
        return _CF(n, ls, ss, child=node)

    def _closest(self, node, x):
        d = ((node.centroids() - x) ** 2).sum(axis=1)
        return int(d.argmin())

    def _insert(self, node, x):
        if node.leaf:
            if node.entries:
                j = self._closest(node, x)
                e = node.entries[j]
                if e.merged_radius(x) <= self.threshold:
                    e.absorb(_CF(1, x.copy(), float(x @ x)))
                    return None
            node.entries.append(_CF(1, x.copy(), float(x @ x)))
        else:
            j = self._closest(node, x)
            e = node.entries[j]
            split = self._insert(e.child, x)
            if split is None:
                e.absorb(_CF(1, x, float(x @ x)))
                return None
            node.entries[j:j + 1] = [self._summarise(s) for s in split]
        if len(node.entries) > self.B:
            return self._split(node)
        return None

    def _split(self, node):
        C = node.centroids()
        D = cdist(C, C, metric="sqeuclidean")
        a, b = np.unravel_index(int(D.argmax()), D.shape)
        left, right = _Node(node.leaf), _Node(node.leaf)
        for i, e in enumerate(node.entries):
            (left if D[i, a] <= D[i, b] else right).entries.append(e)
        if not right.entries:
            right.entries.append(left.entries.pop())
        return left, right

    def leaf_entries(self):
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.leaf:
                out.extend(node.entries)
            else:
                stack.extend(e.child for e in reversed(node.entries))
        return out


def birch(X, K, threshold, branching_factor):
    """Labels from a CF-tree summary reduced to ``K`` groups by Ward linkage.

    Every sample is labelled by its nearest leaf-subcluster centroid.  When the
    tree holds fewer than ``K`` subclusters each subcluster is its own group.
    """
    X = np.asarray(X, dtype=np.float64)
    tree = CFTree(threshold, branching_factor)
    for x in X:
        tree.insert(x)
    subs = tree.leaf_entries()
    centroids = np.vstack([s.centroid for s in subs])
    if len(subs) > K:
        group = cut_tree(linkage(centroids, method="ward"), n_clusters=K).ravel()
    else:
        group = np.arange(len(subs))
    nearest = cdist(X, centroids, metric="sqeuclidean").argmin(axis=1)
    return group[nearest].astype(np.int64)
