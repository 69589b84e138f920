"""Exact projective decoding over arc scores (Eisner's span algorithm).

Scores are indexed ``[head, modifier]`` over positions 0..n, position 0
being ROOT. Column 0 and the diagonal are never read.
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .autodiff import ContractError, Node


@dataclass
class ScoreMatrix:
    scores: np.ndarray
    # Graph node the scores were read from, when they are differentiable
    node: Optional[Node] = None

    @property
    def n(self) -> int:
        return self.scores.shape[0] - 1

    def __getitem__(self, arc) -> float:
        return float(self.scores[arc])


@dataclass
class ParseTree:
    """heads[m - 1] is the head of token m; labels likewise hold relation ids"""
    heads: List[int]
    labels: Optional[List[int]] = None

    def __len__(self):
        return len(self.heads)

    def arcs(self):
        return [(h, m) for m, h in enumerate(self.heads, start=1)]


def eisner_decode(scores: ScoreMatrix, single_root: bool = True) -> ParseTree:
    n = scores.n
    if n < 1:
        raise ContractError("eisner_decode: empty sentence")

    S = scores.scores
    size = n + 1

    # With a single root, spans cover tokens 1..n and ROOT is attached last
    lo = 1 if single_root else 0

    # [s, t, d]: d = 0 head at t (left arcs), d = 1 head at s (right arcs)
    complete = np.full((size, size, 2), -np.inf)
    incomplete = np.full((size, size, 2), -np.inf)
    complete_split = np.zeros((size, size, 2), dtype=np.int64)
    incomplete_split = np.zeros((size, size, 2), dtype=np.int64)

    for s in range(lo, size):
        complete[s, s, :] = 0.0

    for width in range(1, size - lo):
        for s in range(lo, size - width):
            t = s + width

            joined = complete[s, s:t, 1] + complete[s + 1:t + 1, t, 0]
            r = int(np.argmax(joined))
            incomplete_split[s, t, :] = s + r

            # ROOT never takes a head
            if s > 0:
                incomplete[s, t, 0] = joined[r] + S[t, s]
            incomplete[s, t, 1] = joined[r] + S[s, t]

            left = complete[s, s:t, 0] + incomplete[s:t, t, 0]
            r = int(np.argmax(left))
            complete[s, t, 0] = left[r]
            complete_split[s, t, 0] = s + r

            right = incomplete[s, s + 1:t + 1, 1] + complete[s + 1:t + 1, t, 1]
            r = int(np.argmax(right))
            complete[s, t, 1] = right[r]
            complete_split[s, t, 1] = s + 1 + r

    heads = [0] * size

    if single_root:
        candidates = complete[1, 1:, 0] + complete[1:, n, 1] + S[0, 1:]
        root_child = 1 + int(np.argmax(candidates))
        heads[root_child] = 0
        agenda = [(1, root_child, 0, True), (root_child, n, 1, True)]
    else:
        agenda = [(0, n, 1, True)]

    while agenda:
        s, t, d, is_complete = agenda.pop()

        if s == t:
            continue

        if is_complete:
            r = complete_split[s, t, d]
            if d == 0:
                agenda.append((s, r, 0, True))
                agenda.append((r, t, 0, False))
            else:
                agenda.append((s, r, 1, False))
                agenda.append((r, t, 1, True))
        else:
            r = incomplete_split[s, t, d]
            if d == 0:
                heads[s] = t
            else:
                heads[t] = s
            agenda.append((s, r, 1, True))
            agenda.append((r + 1, t, 0, True))

    return ParseTree(heads=heads[1:])


def loss_augment(scores: ScoreMatrix, gold: ParseTree,
                 margin: float = 1.0) -> ScoreMatrix:
    n = scores.n

    if len(gold.heads) != n:
        raise ContractError(f"loss_augment: gold tree has {len(gold.heads)} "
                            f"heads for a sentence of {n} tokens")

    cost = np.full((n + 1, n + 1), margin)
    cost[:, 0] = 0.0
    np.fill_diagonal(cost, 0.0)
    for h, m in gold.arcs():
        cost[h, m] = 0.0

    return ScoreMatrix(scores.scores + cost)


def tree_score(scores: ScoreMatrix, tree: ParseTree) -> float:
    n = scores.n

    if len(tree.heads) != n:
        raise ContractError(f"tree_score: {len(tree.heads)} heads for a "
                            f"sentence of {n} tokens")

    total = 0.0
    for h, m in tree.arcs():
        if not 0 <= h <= n or h == m:
            raise ContractError(f"tree_score: invalid head {h} for token {m}")
        total += scores.scores[h, m]

    return float(total)


def hamming(predicted: ParseTree, gold: ParseTree) -> int:
    return sum(p != g for p, g in zip(predicted.heads, gold.heads))


__all__ = ("ScoreMatrix", "ParseTree", "eisner_decode", "loss_augment",
           "tree_score", "hamming")
