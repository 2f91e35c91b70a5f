"""Incremental maintenance of the C files with the largest scores.

The tracker keeps the current top-C members in a position-indexed binary
min-heap keyed by (score asc, id desc), so the root is always the member
that would be displaced first. Scores only ever increase in this system,
which reduces every update to an increase-key or a replace-root, both
O(log C). ``op_counter`` tallies heap work (one per swap, plus one per
insert/delete event) so callers can measure amortized cost.
"""

from __future__ import annotations

import heapq


class TopCTracker:
    """Top-C view over a dense score table with increase-only updates.

    Ties are broken toward the lower file id everywhere: the members are
    exactly the first C files under (score desc, id asc) ordering.
    """

    __slots__ = ("capacity", "scores", "_heap", "_pos", "op_counter")

    def __init__(self, scores, capacity: int):
        n = len(scores)
        if capacity < 1:
            raise ValueError("capacity must be positive")
        if capacity > n:
            raise ValueError(f"capacity {capacity} exceeds file count {n}")
        self.capacity = capacity
        self.scores = [float(s) for s in scores]
        self.op_counter = 0
        members = heapq.nsmallest(capacity, range(n), key=lambda f: (-self.scores[f], f))
        self._heap = members
        self._pos = [-1] * n
        for i, f in enumerate(members):
            self._pos[f] = i
        for i in range(capacity // 2 - 1, -1, -1):
            self._sift_down(i)

    def __contains__(self, file_id: int) -> bool:
        return self._pos[file_id] >= 0

    def members(self) -> set[int]:
        return set(self._heap)

    def min_member(self) -> int:
        return self._heap[0]

    def _before(self, a: int, b: int) -> bool:
        # a precedes b in the min-heap iff a is the weaker member.
        sa = self.scores[a]
        sb = self.scores[b]
        return sa < sb or (sa == sb and a > b)

    def _sift_down(self, i: int) -> None:
        heap = self._heap
        pos = self._pos
        size = len(heap)
        while True:
            left = 2 * i + 1
            if left >= size:
                return
            child = left
            right = left + 1
            if right < size and self._before(heap[right], heap[left]):
                child = right
            if self._before(heap[child], heap[i]):
                heap[i], heap[child] = heap[child], heap[i]
                pos[heap[i]] = i
                pos[heap[child]] = child
                self.op_counter += 1
                i = child
            else:
                return

    def bump(self, file_id: int, new_score: float):
        """Raise a file's score; returns (evicted, admitted) file ids.

        Both are None when top-C membership did not change. A non-member
        displaces the weakest member only when strictly stronger under
        the (score, lower-id) order.
        """
        if not 0 <= file_id < len(self.scores):
            raise ValueError(f"unknown file id {file_id}")
        old = self.scores[file_id]
        if new_score < old:
            raise ValueError(
                f"scores only increase: file {file_id} has {old}, got {new_score}"
            )
        if new_score == old:
            return (None, None)
        self.scores[file_id] = new_score
        i = self._pos[file_id]
        if i >= 0:
            self.op_counter += 1
            self._sift_down(i)
            return (None, None)
        root = self._heap[0]
        root_score = self.scores[root]
        if new_score > root_score or (new_score == root_score and file_id < root):
            self._pos[root] = -1
            self._heap[0] = file_id
            self._pos[file_id] = 0
            self.op_counter += 2
            self._sift_down(0)
            return (root, file_id)
        return (None, None)
