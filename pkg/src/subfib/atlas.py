"""Census over starting-pair ranges, predecessor enumeration, and node digraphs.

The census classifies every ordered starting pair in a square range by the
cycle it ends in.  The production path steps all pairs in lockstep with
numpy and resolves them against the absorbing set of known-cycle pairs
(plus the trivial a == a states); anything still unresolved after the
lockstep budget is finished exactly by the scalar classifier, which is also
how previously unknown cycles would be discovered and reported.  A plain
per-pair walker with a shared pair -> class memo (`census_scalar`) is kept
as the reference implementation and cross-checked in the tests.
"""

import json
import multiprocessing
from collections import Counter
from dataclasses import dataclass
from math import gcd

import numpy as np

from . import engine
from .engine import (
    DEFAULT_MAX_STEPS,
    NonterminationSuspected,
    Node,
    canonical_rotation,
    classify,
    next_term,
    registry,
)
from .primes import get_sieve, is_prime, smallest_prime_factor

CLASS_ORDER = ("trivial", "10", "11", "18", "19", "56", "136", "unknown", "unresolved")

_VECTOR_STEP_CAP = 4096
_BLOCK_PAIR_TARGET = 1 << 21
DEFAULT_MEMO_CAP = 1 << 20


@dataclass(frozen=True)
class CensusReport:
    lo: int
    hi: int
    counts: dict[str, int]  # nonzero classes only, in CLASS_ORDER order
    unknown_cycles: tuple[tuple[int, ...], ...]
    unresolved: tuple[tuple[int, int], ...]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_json_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "counts": dict(self.counts),
            "unknown_cycles": [list(c) for c in self.unknown_cycles],
            "unresolved": [list(p) for p in self.unresolved],
        }


def _ordered_counts(counter) -> dict[str, int]:
    return {label: counter[label] for label in CLASS_ORDER if counter.get(label)}


def _known_pair_map() -> dict[tuple[int, int], str]:
    pairs = {}
    for entry in registry():
        terms = entry.cycle.terms
        m = len(terms)
        for i in range(m):
            pairs[(terms[i], terms[(i + 1) % m])] = entry.cycle.label
    return pairs


def _scalar_walk(a, b, memo, memo_cap, max_steps, known_pairs, unknown_index):
    """Class label of the pair (a, b), updating memo and unknown_index."""
    path = []
    seen = {}
    trail = [a]
    x, y = a, b
    label = None
    for step in range(max_steps + 1):
        if memo is not None and x <= memo_cap and y <= memo_cap:
            key = (x << 21) | y
            hit = memo.get(key)
            if hit is not None:
                label = hit
                break
            path.append(key)
        if x == y and x != 1:
            label = "trivial"
            break
        hit = known_pairs.get((x, y))
        if hit is not None:
            label = hit
            break
        pos = seen.get((x, y))
        if pos is not None:
            canonical = canonical_rotation(trail[pos:step])
            if len(canonical) == 1:
                label = "trivial"
            else:
                unknown_index.setdefault(canonical, "unknown")
                label = "unknown"
            break
        seen[(x, y)] = step
        trail.append(y)
        x, y = y, next_term(x, y)
    else:
        label = "unresolved"
    if memo is not None:
        for key in path:
            memo[key] = label
    return label


def census_scalar(
    lo: int,
    hi: int,
    memoize: bool = True,
    max_steps: int = DEFAULT_MAX_STEPS,
    memo_cap: int = DEFAULT_MEMO_CAP,
) -> CensusReport:
    """Reference census: walk every ordered pair, sharing a pair -> class memo."""
    if not (1 <= lo <= hi):
        raise ValueError(f"need 1 <= lo <= hi, got ({lo}, {hi})")
    known_pairs = _known_pair_map()
    memo = {} if memoize else None
    counts: Counter = Counter()
    unknown_index: dict[tuple[int, ...], str] = {}
    unresolved = []
    for a in range(lo, hi + 1):
        for b in range(lo, hi + 1):
            label = _scalar_walk(a, b, memo, memo_cap, max_steps, known_pairs, unknown_index)
            counts[label] += 1
            if label == "unresolved":
                unresolved.append((a, b))
    return CensusReport(
        lo=lo,
        hi=hi,
        counts=_ordered_counts(counts),
        unknown_cycles=tuple(sorted(unknown_index)),
        unresolved=tuple(unresolved),
    )


def _census_block(args):
    """Lockstep-classify the ordered pairs (a, b) with a in [row_lo, row_hi]."""
    lo, hi, row_lo, row_hi, max_steps = args
    sieve = get_sieve()
    table = sieve.table
    known_pairs = _known_pair_map()
    keys = np.array(
        sorted((a << 32) | b for (a, b) in known_pairs), dtype=np.int64
    )
    key_labels = [known_pairs[(int(k) >> 32, int(k) & 0xFFFFFFFF)] for k in keys]
    label_ids = {label: i for i, label in enumerate(CLASS_ORDER)}
    key_label_ids = np.array([label_ids[lbl] for lbl in key_labels], dtype=np.int64)

    width = hi - lo + 1
    a_vals = np.repeat(np.arange(row_lo, row_hi + 1, dtype=np.int64), width)
    b_vals = np.tile(np.arange(lo, hi + 1, dtype=np.int64), row_hi - row_lo + 1)

    counts: Counter = Counter()
    stragglers: list[tuple[int, int]] = []
    for step in range(_VECTOR_STEP_CAP + 1):
        if a_vals.size == 0:
            break
        trivial = (a_vals == b_vals) & (a_vals != 1)
        if trivial.any():
            counts["trivial"] += int(trivial.sum())
            keep = ~trivial
            a_vals, b_vals = a_vals[keep], b_vals[keep]
            if a_vals.size == 0:
                break
        pair_keys = (a_vals << 32) | b_vals
        pos = np.searchsorted(keys, pair_keys)
        pos[pos == keys.size] = 0
        hits = keys[pos] == pair_keys
        if hits.any():
            for label_id, n in zip(*np.unique(key_label_ids[pos[hits]], return_counts=True)):
                counts[CLASS_ORDER[int(label_id)]] += int(n)
            keep = ~hits
            a_vals, b_vals = a_vals[keep], b_vals[keep]
            if a_vals.size == 0:
                break
        if step == _VECTOR_STEP_CAP:
            stragglers.extend(zip(a_vals.tolist(), b_vals.tolist()))
            break
        sums = a_vals + b_vals
        too_big = sums >= sieve.bound
        if too_big.any():
            stragglers.extend(zip(a_vals[too_big].tolist(), b_vals[too_big].tolist()))
            keep = ~too_big
            a_vals, b_vals, sums = a_vals[keep], b_vals[keep], sums[keep]
            if a_vals.size == 0:
                break
        spf = table[sums].astype(np.int64)
        a_vals, b_vals = b_vals, np.where(spf == sums, sums, sums // spf)

    unknown_index: dict[tuple[int, ...], str] = {}
    unresolved = []
    for a, b in stragglers:
        label = _scalar_walk(a, b, None, 0, max_steps, known_pairs, unknown_index)
        counts[label] += 1
        if label == "unresolved":
            unresolved.append((a, b))
    return counts, sorted(unknown_index), unresolved


def census(
    lo: int,
    hi: int,
    workers: int = 1,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> CensusReport:
    """Classify every ordered starting pair (a, b) in [lo, hi]^2.

    The result is independent of the worker count: the pair space is split
    into fixed row blocks and the per-block tallies are merged by summation.
    """
    if not (1 <= lo <= hi):
        raise ValueError(f"need 1 <= lo <= hi, got ({lo}, {hi})")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if 2 * hi >= get_sieve().bound:
        return census_scalar(lo, hi, max_steps=max_steps)

    width = hi - lo + 1
    rows_per_block = max(1, _BLOCK_PAIR_TARGET // width)
    blocks = [
        (lo, hi, row_lo, min(row_lo + rows_per_block - 1, hi), max_steps)
        for row_lo in range(lo, hi + 1, rows_per_block)
    ]
    if workers == 1 or len(blocks) == 1:
        results = [_census_block(block) for block in blocks]
    else:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_census_block, blocks)

    counts: Counter = Counter()
    unknown: set[tuple[int, ...]] = set()
    unresolved: list[tuple[int, int]] = []
    for block_counts, block_unknown, block_unresolved in results:
        counts.update(block_counts)
        unknown.update(block_unknown)
        unresolved.extend(block_unresolved)
    return CensusReport(
        lo=lo,
        hi=hi,
        counts=_ordered_counts(counts),
        unknown_cycles=tuple(sorted(unknown)),
        unresolved=tuple(sorted(unresolved)),
    )


# --- direct predecessors -------------------------------------------------------


@dataclass(frozen=True)
class PredecessorChain:
    """One backward odd chain into the target: terms are in forward order and
    end with the even link; every adjacent odd pair along it is a node."""

    even_link: int
    terms: tuple[int, ...]
    nodes: tuple[tuple[int, int], ...]
    rejected: tuple[tuple[int, int], ...]  # adjacent pairs skipped as non-coprime


@dataclass(frozen=True)
class PredecessorSet:
    target: tuple[int, int]
    even_link: int | None
    predecessors: tuple[tuple[int, int], ...]
    chains: tuple[PredecessorChain, ...]

    def to_json_dict(self) -> dict:
        return {
            "target": list(self.target),
            "even_link": self.even_link,
            "predecessors": [list(p) for p in self.predecessors],
            "chains": [
                {
                    "even_link": chain.even_link,
                    "terms": list(chain.terms),
                    "nodes": [list(n) for n in chain.nodes],
                    "rejected": [list(n) for n in chain.rejected],
                }
                for chain in self.chains
            ],
        }


def _odd_primes_upto(bound: int) -> list[int]:
    sieve = get_sieve()
    if bound < sieve.bound:
        primes = sieve.primes
        return [int(p) for p in primes[(primes >= 3) & (primes <= bound)]]
    raise ValueError(f"prime enumeration bound {bound} exceeds the sieve")


def _even_links(a: int, b: int) -> list[int]:
    """Even terms t that can immediately precede the node pair (a, b)."""
    if b == 1:
        return []  # no sum ever reduces to 1
    qs = [1] if is_prime(b) else []
    qs.extend(_odd_primes_upto(smallest_prime_factor(b)))
    links = []
    for q in qs:
        t = q * b - a
        if t > 0 and t % 2 == 0 and next_term(t, a) == b:
            links.append(t)
    return links


def _chains_from(t: int, s: int) -> list[list[int]]:
    """Backward odd chains starting s, t (in backward order, even link first).

    Forward steps inside a run are averages, so the term before the pair
    (x, y) is 2y - x; the single exception is an even link of 2, which the
    node (1, 1) also reaches through its undivided prime sum 1 + 1, forking
    a second chain.  Every step is re-verified with the forward rule.
    """
    main = [t, s]
    while True:
        prev = 2 * main[-2] - main[-1]
        if prev <= 0 or next_term(prev, main[-1]) != main[-2]:
            break
        main.append(prev)
    chains = [main]
    if (t, s) == (2, 1):
        chains.append([2, 1, 1])
    return chains


def direct_predecessors(target) -> PredecessorSet:
    """All nodes whose run leads immediately into the target node.

    Implements the backward procedure: enumerate the even link t, then the
    odd term s before it, extend the forced averaging chain while positive,
    and collect every coprime adjacent odd pair along each chain.  Every
    candidate step is verified by forward simulation.
    """
    node = target if isinstance(target, Node) else Node(*target)
    a, b = node.a, node.b
    chains = []
    predecessors: list[tuple[int, int]] = []
    for t in _even_links(a, b):
        # the odd term s before t satisfies s + t = p * a; s > 0 and its own
        # odd predecessor 2t - s > 0 force t/a < p < 3t/a
        p_candidates = [
            p
            for p in [1] + _odd_primes_upto((3 * t) // a + 1)
            if t < p * a < 3 * t
        ]
        for p in p_candidates:
            s = p * a - t
            if next_term(s, t) != a:
                continue
            for chain in _chains_from(t, s):
                nodes = []
                rejected = []
                for j in range(len(chain) - 2, 0, -1):
                    pair = (chain[j + 1], chain[j])
                    if gcd(pair[0], pair[1]) == 1:
                        nodes.append(pair)
                    else:
                        rejected.append(pair)
                chains.append(
                    PredecessorChain(
                        even_link=t,
                        terms=tuple(reversed(chain)),
                        nodes=tuple(nodes),
                        rejected=tuple(rejected),
                    )
                )
                for pair in nodes:
                    if pair not in predecessors:
                        predecessors.append(pair)
    productive = sorted({c.even_link for c in chains if c.nodes})
    return PredecessorSet(
        target=(a, b),
        even_link=productive[0] if len(productive) == 1 else None,
        predecessors=tuple(predecessors),
        chains=tuple(chains),
    )


def brute_force_predecessors(target, limit: int) -> tuple[tuple[int, int], ...]:
    """Forward-scan oracle: all nodes with components <= limit whose run leads
    directly into the target node."""
    node = target if isinstance(target, Node) else Node(*target)
    found = []
    for u in range(1, limit + 1, 2):
        for v in range(1, limit + 1, 2):
            if gcd(u, v) != 1:
                continue
            x, y = u, v
            while y % 2:  # follow the run to its even term
                x, y = y, next_term(x, y)
            first = next_term(x, y)
            if first != node.a:
                continue
            if next_term(y, first) == node.b:
                found.append((u, v))
    return tuple(sorted(found))


# --- node digraphs ---------------------------------------------------------------


@dataclass(frozen=True)
class NodeGraph:
    vertices: tuple[tuple[int, int], ...]
    arcs: tuple[tuple[tuple[int, int], tuple[int, int], int], ...]
    skipped: tuple[tuple[int, int], ...]  # trivial starts, reported not drawn

    def to_json_dict(self) -> dict:
        return {
            "vertices": [list(v) for v in self.vertices],
            "arcs": [
                {"from": list(src), "to": list(dst), "weight": w}
                for src, dst, w in self.arcs
            ],
            "skipped": [list(s) for s in self.skipped],
        }


def build_graph(starts, max_steps: int = DEFAULT_MAX_STEPS) -> NodeGraph:
    """Union of the node paths of the given starts, arcs weighted by run length."""
    vertices: list[tuple[int, int]] = []
    arcs: list[tuple[tuple[int, int], tuple[int, int], int]] = []
    skipped = []
    for start in starts:
        trajectory = classify(tuple(start), max_steps=max_steps)
        if trajectory.cycle.label == "trivial":
            skipped.append(tuple(start))
            continue
        cycle_len = trajectory.cycle.length
        steps = trajectory.tail_length + 2 * cycle_len + 8
        terms = engine.generate(tuple(start), steps)
        runs = engine.decompose_trajectory(terms)
        for current, following in zip(runs, runs[1:]):
            src, dst = current.node.pair, following.node.pair
            if src not in vertices:
                vertices.append(src)
            if dst not in vertices:
                vertices.append(dst)
            arc = (src, dst, current.k)
            if arc not in arcs:
                arcs.append(arc)
    return NodeGraph(vertices=tuple(vertices), arcs=tuple(arcs), skipped=tuple(skipped))


# --- export ----------------------------------------------------------------------


def _graph_to_dot(graph: NodeGraph) -> str:
    lines = ["digraph subfib {"]
    for a, b in graph.vertices:
        lines.append(f'  "{a},{b}";')
    for (a, b), (c, d), w in graph.arcs:
        lines.append(f'  "{a},{b}" -> "{c},{d}" [label="{w}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _census_to_csv(report: CensusReport) -> str:
    lines = ["lo,hi,class,count"]
    for label, count in report.counts.items():
        lines.append(f"{report.lo},{report.hi},{label},{count}")
    return "\n".join(lines) + "\n"


def export(obj, format: str) -> str:
    """Serialize a CensusReport (csv/json), NodeGraph (dot/json), or
    PredecessorSet (json) to text."""
    fmt = format.lower()
    if isinstance(obj, CensusReport):
        if fmt == "csv":
            return _census_to_csv(obj)
        if fmt == "json":
            return json.dumps(obj.to_json_dict(), indent=2) + "\n"
    elif isinstance(obj, NodeGraph):
        if fmt == "dot":
            return _graph_to_dot(obj)
        if fmt == "json":
            return json.dumps(obj.to_json_dict(), indent=2) + "\n"
    elif isinstance(obj, PredecessorSet):
        if fmt == "json":
            return json.dumps(obj.to_json_dict(), indent=2) + "\n"
    raise ValueError(f"unsupported export format {format!r} for {type(obj).__name__}")
