"""Subprime Fibonacci step rule, trajectory generation, and cycle structure.

The step: add the last two terms; if the sum is composite, divide it by its
smallest prime factor.  Sums of magnitude <= 1 pass through unchanged, and
division acts on the magnitude with the sign preserved, so negative and
mixed-sign starting pairs behave like their mirrored positive counterparts.

A variant policy divides only by one fixed odd prime p (when the sum is a
multiple of p); pass ``fixed_prime=p`` to select it.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import gcd

from .algebra import jacobsthal
from .primes import smallest_prime_factor

# Terms are checked 63-bit signed integers: exceeding this is reported as an
# error, never silently promoted (keeps the census hot path honest about cost).
TERM_LIMIT = 2**63 - 1

DEFAULT_MAX_STEPS = 10**6


class TermOverflowError(OverflowError):
    """A term exceeded the supported 63-bit width."""


class NonterminationSuspected(RuntimeError):
    """No pair of consecutive terms repeated within the step budget."""


class InconsistentCycle(ValueError):
    """Term list is not a genuine subprime cycle (divisibility check failed)."""


class NotDecomposable(ValueError):
    """Term list violates the run structure (parity or coprimality)."""


def _check_width(value: int) -> int:
    if value > TERM_LIMIT or value < -TERM_LIMIT:
        raise TermOverflowError(f"term {value} exceeds the 63-bit range")
    return value


def next_term(a: int, b: int, fixed_prime: int | None = None) -> int:
    """The term following a, b.

    Subprime policy (default): keep the sum if |sum| <= 1 or |sum| is prime,
    otherwise divide by the smallest prime factor of |sum| (sign preserved).
    Fixed-prime policy: divide by ``fixed_prime`` when it divides a nonzero
    sum; every other sum passes through unchanged.
    """
    s = _check_width(a + b)
    if fixed_prime is not None:
        if s != 0 and s % fixed_prime == 0:
            return s // fixed_prime
        return s
    m = abs(s)
    if m <= 1:
        return s
    f = smallest_prime_factor(m)
    if f == m:
        return s
    return s // f  # exact: f divides s, and // keeps the sign right


def generate(start: tuple[int, int], steps: int, fixed_prime: int | None = None) -> list[int]:
    """First steps+2 terms of the sequence beginning with the start pair."""
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    a, b = start
    _check_width(a)
    _check_width(b)
    terms = [a, b]
    for _ in range(steps):
        a, b = b, next_term(a, b, fixed_prime)
        terms.append(b)
    return terms


def shape_of(terms) -> str:
    """Parity string of the terms: O for odd, E for even."""
    if not terms:
        raise ValueError("shape_of requires at least one term")
    return "".join("E" if t % 2 == 0 else "O" for t in terms)


def canonical_rotation(terms) -> tuple[int, ...]:
    """Lexicographically least rotation of the term list."""
    terms = tuple(terms)
    if not terms:
        raise ValueError("cannot canonicalize an empty cycle")
    return min(terms[i:] + terms[:i] for i in range(len(terms)))


@dataclass(frozen=True)
class Cycle:
    """A detected cycle in canonical (lexicographically least) rotation.

    ``label`` is "trivial", the known-cycle id ("10", "11", "18", "19",
    "56", "136"), or "unknown".
    """

    terms: tuple[int, ...]
    label: str

    @property
    def length(self) -> int:
        return len(self.terms)

    @property
    def trivial_value(self) -> int:
        if self.label != "trivial":
            raise ValueError(f"cycle {self.label} is not trivial")
        return self.terms[0]


@dataclass(frozen=True)
class Trajectory:
    start: tuple[int, int]
    terms: tuple[int, ...]  # tail followed by one full pass around the cycle
    tail_length: int
    cycle: Cycle


def _detect_cycle(start, max_steps, fixed_prime=None):
    """Iterate until a consecutive ordered pair repeats.

    Returns (terms through one full cycle pass, tail_length, raw cycle terms).
    """
    a, b = start
    _check_width(a)
    _check_width(b)
    seen = {(a, b): 0}
    terms = [a, b]
    for step in range(max_steps):
        a, b = b, next_term(a, b, fixed_prime)
        terms.append(b)
        key = (a, b)
        i = step + 1  # index of the pair (terms[i], terms[i+1])
        if key in seen:
            j = seen[key]
            return terms[:i], j, tuple(terms[j:i])
        seen[key] = i
    raise NonterminationSuspected(
        f"no repeated pair within {max_steps} steps from {start}"
    )


def _label_for(canonical: tuple[int, ...]) -> str:
    if len(canonical) == 1:
        return "trivial"
    return _known_cycle_index().get(canonical, "unknown")


def classify(
    start: tuple[int, int],
    max_steps: int = DEFAULT_MAX_STEPS,
    fixed_prime: int | None = None,
) -> Trajectory:
    """Follow the trajectory until its cycle is found, and identify the cycle."""
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    terms, tail, raw_cycle = _detect_cycle(tuple(start), max_steps, fixed_prime)
    canonical = canonical_rotation(raw_cycle)
    cycle = Cycle(terms=canonical, label=_label_for(canonical))
    return Trajectory(start=tuple(start), terms=tuple(terms), tail_length=tail, cycle=cycle)


def signature_of(cycle) -> tuple[int, ...]:
    """Per-term divisors s_i with t[i-2] + t[i-1] = s_i * t[i], cyclically.

    Each s_i is verified to be the genuine subprime divisor (1 for a prime or
    magnitude <= 1 sum, else the smallest prime factor); anything else raises
    InconsistentCycle.
    """
    terms = tuple(cycle.terms) if isinstance(cycle, Cycle) else tuple(cycle)
    m = len(terms)
    if m < 2:
        raise InconsistentCycle("signature needs a cycle of length >= 2")
    sig = []
    for i in range(m):
        prev2, prev1, t = terms[i - 2], terms[i - 1], terms[i]
        if t == 0 or next_term(prev2, prev1) != t:
            raise InconsistentCycle(
                f"{prev2},{prev1} is not followed by {t} under the step rule"
            )
        sig.append((prev2 + prev1) // t)
    return tuple(sig)


@dataclass(frozen=True)
class Node:
    """Ordered pair of positive coprime odd integers (the start of a run)."""

    a: int
    b: int

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"node terms must be positive: ({self.a}, {self.b})")
        if self.a % 2 == 0 or self.b % 2 == 0:
            raise ValueError(f"node terms must be odd: ({self.a}, {self.b})")
        if gcd(self.a, self.b) != 1:
            raise ValueError(f"node terms must be coprime: ({self.a}, {self.b})")

    @property
    def pair(self) -> tuple[int, int]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Run:
    """k-1 odd terms followed by one even term, generated by its node.

    d is the odd offset with b = a + 2^(k-2) * d (0 for the exceptional
    node (1,1), whose run 1, 1, 2 keeps its prime sum undivided).
    """

    node: Node
    k: int
    d: int
    terms: tuple[int, ...]


def run_from_node(node: Node, k: int) -> Run:
    """Closed-form run of length k from a node: terms a + 2^(k-1-i) * J_i * d."""
    if k < 3:
        raise ValueError(f"run length must be >= 3, got {k}")
    a, b = node.a, node.b
    step = b - a
    if step == 0:
        raise ValueError("node (1,1) has no closed-form run (d would be 0)")
    if step % (1 << (k - 2)) != 0:
        raise ValueError(f"b - a = {step} is not divisible by 2^(k-2) = {1 << (k - 2)}")
    d = step >> (k - 2)
    if d % 2 == 0:
        raise ValueError(f"(a, b, k) = ({a}, {b}, {k}) gives even d = {d}")
    if a + (1 << (k - 2)) * d <= 0:
        raise ValueError(f"d = {d} violates positivity d > -a / 2^(k-2)")
    terms = tuple(a + (1 << (k - 1 - i)) * jacobsthal(i) * d for i in range(k))
    return Run(node=node, k=k, d=d, terms=terms)


def run_length_of_node(node: Node) -> int:
    """Run length implied by the node: 2 + (power of two dividing b - a)."""
    step = node.b - node.a
    if step == 0:
        return 3  # the exceptional node (1,1)
    k = 2
    while step % 2 == 0:
        step //= 2
        k += 1
    return k


def _run_by_simulation(a: int, b: int) -> tuple[int, ...]:
    """Run terms from a node pair by direct stepping (handles (1,1) too)."""
    terms = [a, b]
    while terms[-1] % 2 != 0:
        terms.append(next_term(terms[-2], terms[-1]))
    return tuple(terms)


@dataclass(frozen=True)
class CycleDecomposition:
    runs: tuple[Run, ...]
    configuration: tuple[int, ...]  # run lengths, in cycle order
    divisors: tuple[tuple[int, int], ...]  # (p_i, q_i) per node

    @property
    def nodes(self) -> tuple[Node, ...]:
        return tuple(run.node for run in self.runs)


def _node_positions(terms: tuple[int, ...]) -> list[int]:
    """Cyclic positions i where terms[i-1] is even and terms[i], terms[i+1] odd."""
    m = len(terms)
    return [
        i
        for i in range(m)
        if terms[i - 1] % 2 == 0 and terms[i] % 2 != 0 and terms[(i + 1) % m] % 2 != 0
    ]


def decompose_cycle(cycle) -> CycleDecomposition:
    """Split a non-trivial cycle into its runs, nodes, and node divisors."""
    terms = tuple(cycle.terms) if isinstance(cycle, Cycle) else tuple(cycle)
    m = len(terms)
    if m < 3:
        raise NotDecomposable("trivial or too-short cycles have no run structure")
    if any(t <= 0 for t in terms):
        raise NotDecomposable("cycle terms must be positive")
    positions = _node_positions(terms)
    if not positions:
        raise NotDecomposable("no node (even, odd, odd) pattern found")
    signature = signature_of(terms)  # validates the cycle itself
    runs = []
    divisors = []
    for idx, pos in enumerate(positions):
        nxt = positions[(idx + 1) % len(positions)]
        k = (nxt - pos) % m
        if k == 0:
            k = m
        run_terms = tuple(terms[(pos + j) % m] for j in range(k))
        if k < 3 or any(t % 2 == 0 for t in run_terms[:-1]) or run_terms[-1] % 2 != 0:
            raise NotDecomposable(f"bad run of length {k} at position {pos}")
        node = Node(run_terms[0], run_terms[1])
        expected = run_from_node(node, k)
        if expected.terms != run_terms:
            raise NotDecomposable(f"run at {pos} deviates from its closed form")
        runs.append(expected)
        divisors.append((signature[pos], signature[(pos + 1) % m]))
    if sum(run.k for run in runs) != m:
        raise NotDecomposable("run lengths do not add up to the cycle length")
    return CycleDecomposition(
        runs=tuple(runs),
        configuration=tuple(run.k for run in runs),
        divisors=tuple(divisors),
    )


def decompose_trajectory(terms) -> tuple[Run, ...]:
    """Runs of an (open) trajectory segment, starting at its first node.

    Leading terms before the first valid node are skipped; the final partial
    run (if the segment ends mid-run) is dropped.
    """
    terms = tuple(terms)
    n = len(terms)
    runs = []
    i = 0
    while i < n - 1:
        a, b = terms[i], terms[i + 1]
        prev_even = i == 0 or terms[i - 1] % 2 == 0
        if not (prev_even and a > 0 and b > 0 and a % 2 and b % 2 and gcd(a, b) == 1):
            i += 1
            continue
        run_terms = _run_by_simulation(a, b)
        k = len(run_terms)
        if i + k > n or tuple(terms[i : i + k]) != run_terms:
            break  # segment ends before this run completes
        node = Node(a, b)
        d = 0 if a == b else (b - a) >> (k - 2)
        runs.append(Run(node=node, k=k, d=d, terms=run_terms))
        i += k
    return tuple(runs)


def decompose_runs(obj):
    """Run decomposition of a Cycle (full structure) or trajectory terms."""
    if isinstance(obj, Cycle):
        return decompose_cycle(obj)
    if isinstance(obj, Trajectory):
        return decompose_trajectory(obj.terms)
    return decompose_trajectory(obj)


# --- known-cycle registry ---------------------------------------------------

# Transcribed term lists (canonical rotation = least rotation).
_CYCLE_18 = (13, 61, 37, 49, 43, 46, 89, 45, 67, 56, 41, 97, 69, 83, 76, 53, 43, 48)
_CYCLE_19 = (17, 43, 30, 73, 103, 88, 191, 93, 142, 47, 63, 55, 59, 57, 58, 23, 27, 25, 26)
_CYCLE_10 = (127, 509, 318, 827, 229, 528, 757, 257, 507, 382)

# Published entry pairs: the first is used to materialize the term list for
# the cycles not transcribed above; the rest are recorded ways in.
_REGISTRY_SEEDS = {
    "10": (None, ((127, 509),)),
    "11": ((37, 199), ((37, 199),)),
    "18": (None, ((0, 1), (1, 1), (1, 2))),
    "19": (None, ((151, 227), (23, 27))),
    "56": ((119, 109), ((5, 23), (119, 109))),
    "136": ((47, 23), ((5, 13), (1, 4), (47, 23))),
}


@dataclass(frozen=True)
class KnownCycle:
    cycle: Cycle
    entry_pairs: tuple[tuple[int, int], ...]
    signature: tuple[int, ...]
    configuration: tuple[int, ...]
    divisors: tuple[tuple[int, int], ...]

    @property
    def length(self) -> int:
        return self.cycle.length


@lru_cache(maxsize=1)
def registry() -> tuple[KnownCycle, ...]:
    """The six known non-trivial cycles (lengths 10, 11, 18, 19, 56, 136)."""
    transcribed = {"10": _CYCLE_10, "18": _CYCLE_18, "19": _CYCLE_19}
    entries = []
    for label, (seed, entry_pairs) in _REGISTRY_SEEDS.items():
        if label in transcribed:
            canonical = canonical_rotation(transcribed[label])
        else:
            _, _, raw = _detect_cycle(seed, DEFAULT_MAX_STEPS)
            canonical = canonical_rotation(raw)
        if len(canonical) != int(label):
            raise AssertionError(f"registry cycle {label} has length {len(canonical)}")
        cycle = Cycle(terms=canonical, label=label)
        deco = decompose_cycle(canonical)
        entries.append(
            KnownCycle(
                cycle=cycle,
                entry_pairs=entry_pairs,
                signature=signature_of(canonical),
                configuration=deco.configuration,
                divisors=deco.divisors,
            )
        )
    entries.sort(key=lambda e: e.length)
    return tuple(entries)


@lru_cache(maxsize=1)
def _known_cycle_index() -> dict[tuple[int, ...], str]:
    return {entry.cycle.terms: entry.cycle.label for entry in registry()}


def lookup(length: int) -> KnownCycle:
    """Registry entry with the given cycle length."""
    for entry in registry():
        if entry.length == length:
            return entry
    raise KeyError(f"no known cycle of length {length}")
