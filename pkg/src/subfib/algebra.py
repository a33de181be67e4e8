"""Exact algebra on cycle signatures and run configurations.

Everything here is exact integer / rational arithmetic (no floats): the
per-term signature system and its nullspace, candidate-cycle extraction and
validation, Jacobsthal numbers, the run-centric 2n x 2n determinant system,
the n-run divisor identity, the divisor-placement restrictions, and the
exhaustive searches for short cycles built on top of them.

A "signature" is the tuple of per-term divisors s_i (1, 2, or an odd prime)
with t[i-2] + t[i-1] = s_i * t[i] cyclically.  Node divisors are the
signature values (p_i, q_i) at the two node terms of each run; all other
run divisors are 2.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from math import gcd, lcm

from .primes import divisors as all_divisors
from .primes import get_sieve, is_prime

Rational = Fraction  # exact reduced rationals; stdlib does exactly what we need


# --- Jacobsthal numbers ------------------------------------------------------


def jacobsthal(n: int) -> int:
    """J_n with J_0 = 0, J_1 = 1, J_n = J_(n-1) + 2 J_(n-2)."""
    if n < 0:
        raise ValueError(f"Jacobsthal index must be >= 0, got {n}")
    a, b = 0, 1
    for _ in range(n):
        a, b = b, b + 2 * a
    return a


def jacobsthal_closed_form(n: int) -> int:
    """J_n = (2^n - (-1)^n) / 3."""
    if n < 0:
        raise ValueError(f"Jacobsthal index must be >= 0, got {n}")
    return ((1 << n) - (-1) ** n) // 3


# --- run configurations -------------------------------------------------------


def canonical_configuration(lengths) -> tuple[int, ...]:
    """Least rotation of a run-length tuple; configurations are cyclic."""
    lengths = tuple(lengths)
    if not lengths:
        raise ValueError("empty run configuration")
    return min(lengths[i:] + lengths[:i] for i in range(len(lengths)))


def run_configurations(m: int) -> list[tuple[int, ...]]:
    """All run configurations of total length m (parts >= 3, up to rotation)."""
    if m < 3:
        raise ValueError(f"cycle length must be >= 3, got {m}")

    def compositions(rest):
        if rest == 0:
            yield ()
            return
        for first in range(3, rest + 1):
            if rest - first in (1, 2):
                continue
            for tail in compositions(rest - first):
                yield (first,) + tail

    return sorted({canonical_configuration(c) for c in compositions(m)})


def _config_symmetries(config: tuple[int, ...]) -> list[int]:
    """Rotation amounts that map the configuration onto itself."""
    n = len(config)
    return [r for r in range(n) if config[r:] + config[:r] == config]


def signature_for(config, divisors) -> tuple[int, ...]:
    """Full cycle signature from run lengths and node divisors (p_i, q_i)."""
    sig = []
    for k, (p, q) in zip(config, divisors, strict=True):
        sig.extend((p, q))
        sig.extend([2] * (k - 2))
    return tuple(sig)


# --- the per-term linear system ----------------------------------------------


def signature_system(signature) -> list[list[int]]:
    """Matrix of the homogeneous system: row i has s_i on the diagonal and
    -1 in the two columns of t[i-2] and t[i-1] (cyclically)."""
    sig = tuple(signature)
    m = len(sig)
    if m < 3:
        raise ValueError(f"signature must have length >= 3, got {m}")
    if any(s < 1 for s in sig):
        raise ValueError("signature entries must be >= 1")
    matrix = [[0] * m for _ in range(m)]
    for i in range(m):
        matrix[i][i] = sig[i]
        matrix[i][(i - 2) % m] -= 1
        matrix[i][(i - 1) % m] -= 1
    return matrix


def rational_nullspace(matrix) -> list[tuple[Fraction, ...]]:
    """Basis of the right nullspace, by exact-rational Gaussian elimination."""
    rows = [[Fraction(x) for x in row] for row in matrix]
    if not rows:
        return []
    ncols = len(rows[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pivot_row = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        inv = rows[r][c]
        rows[r] = [x / inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for ri, pc in enumerate(pivots):
            v[pc] = -rows[ri][fc]
        basis.append(tuple(v))
    return basis


@dataclass(frozen=True)
class CandidateCycle:
    """Primitive positive integer solution of a signature system."""

    terms: tuple[int, ...]
    signature: tuple[int, ...]


@dataclass(frozen=True)
class SolveOutcome:
    status: str  # "candidate" | "no_solution" | "degenerate"
    candidate: CandidateCycle | None = None
    reason: str | None = None


def solve_signature(signature) -> SolveOutcome:
    """Unique positive primitive cycle candidate of a signature, if any.

    The nullspace of the signature system is computed exactly: dimension 0
    means no cycle; dimension 1 is normalized to the smallest positive
    integer vector (rejected if any component is <= 0); dimension >= 2 is
    surfaced as "degenerate" (it cannot occur for positive signatures, so
    seeing it would mean the input is malformed).
    """
    sig = tuple(signature)
    basis = rational_nullspace(signature_system(sig))
    if not basis:
        return SolveOutcome(status="no_solution", reason="nullspace is trivial")
    if len(basis) > 1:
        return SolveOutcome(
            status="degenerate", reason=f"nullspace has dimension {len(basis)}"
        )
    vec = basis[0]
    scale = lcm(*(x.denominator for x in vec))
    ints = [int(x * scale) for x in vec]
    content = gcd(*ints)
    ints = [x // content for x in ints]
    if ints[0] < 0:
        ints = [-x for x in ints]
    bad = next((i for i, t in enumerate(ints) if t <= 0), None)
    if bad is not None:
        return SolveOutcome(
            status="no_solution",
            reason=f"component t_{bad + 1} = {ints[bad]} is not positive",
        )
    return SolveOutcome(
        status="candidate",
        candidate=CandidateCycle(terms=tuple(ints), signature=sig),
    )


@dataclass(frozen=True)
class Verdict:
    valid: bool
    failures: tuple[str, ...]


def validate_candidate(candidate) -> Verdict:
    """Re-simulate a candidate around the cycle; simulation is the arbiter.

    Also reports the named structural checks: smallest term at a node and
    at least 7, largest term prime with divisor 1, and cyclic consecutive
    coprimality.
    """
    from .engine import next_term  # runtime import; engine builds on algebra

    if isinstance(candidate, CandidateCycle):
        terms, sig = candidate.terms, candidate.signature
    else:
        terms, sig = tuple(candidate), None
    m = len(terms)
    failures = []
    for i in range(m):
        expected = next_term(terms[i - 2], terms[i - 1])
        if expected != terms[i]:
            failures.append(
                f"{terms[i - 2]},{terms[i - 1]} must be followed by "
                f"{expected}, not {terms[i]}"
            )
    smallest = min(terms)
    if smallest < 7:
        failures.append(f"smallest term {smallest} is below 7")
    node_term_positions = set()
    for i in range(m):
        if terms[i - 1] % 2 == 0 and terms[i] % 2 and terms[(i + 1) % m] % 2:
            node_term_positions.update((i, (i + 1) % m))
    if not any(terms[i] == smallest for i in node_term_positions):
        failures.append(f"smallest term {smallest} is not a node term")
    largest = max(terms)
    if not is_prime(largest):
        failures.append(f"largest term {largest} is not prime")
    elif sig is not None and any(
        sig[i] != 1 for i in range(m) if terms[i] == largest
    ):
        failures.append(f"largest term {largest} does not have divisor 1")
    for i in range(m):
        if gcd(terms[i - 1], terms[i]) != 1:
            failures.append(
                f"consecutive terms {terms[i - 1]},{terms[i]} are not coprime"
            )
    return Verdict(valid=not failures, failures=tuple(failures))


# --- the run-centric system ----------------------------------------------------


def run_matrix(config, divisors) -> list[list[int]]:
    """The 2n x 2n block-cyclic matrix in the unknowns (a_1, d_1, ..., a_n, d_n).

    For run i (indices mod n): one row [2 at a_i, J(k_i) at d_i, -p_(i+1)
    at a_(i+1)] and one row [1 at a_i, J(k_i - 1) at d_i, -(q_(i+1) - 1) at
    a_(i+1), -2^(k_(i+1) - 2) q_(i+1) at d_(i+1)].  Its determinant vanishes
    exactly when the configuration and divisors admit a cycle.
    """
    config = tuple(config)
    divisors = tuple(tuple(pair) for pair in divisors)
    n = len(config)
    if n < 2:
        raise ValueError(f"run matrix needs at least 2 runs, got {n}")
    if len(divisors) != n:
        raise ValueError("one (p, q) pair is required per run")
    if any(k < 3 for k in config):
        raise ValueError("run lengths must be >= 3")
    size = 2 * n
    matrix = [[0] * size for _ in range(size)]
    for i in range(n):
        j = (i + 1) % n
        p_next, q_next = divisors[j]
        row_a, row_b = 2 * i, 2 * i + 1
        matrix[row_a][2 * i] = 2
        matrix[row_a][2 * i + 1] = jacobsthal(config[i])
        matrix[row_a][2 * j] = -p_next
        matrix[row_b][2 * i] = 1
        matrix[row_b][2 * i + 1] = jacobsthal(config[i] - 1)
        matrix[row_b][2 * j] = -(q_next - 1)
        matrix[row_b][2 * j + 1] = -(1 << (config[j] - 2)) * q_next
    return matrix


def exact_determinant(matrix) -> int:
    """Integer determinant by fraction-free (Bareiss) elimination."""
    m = [list(map(int, row)) for row in matrix]
    n = len(m)
    if any(len(row) != n for row in m):
        raise ValueError("determinant requires a square matrix")
    sign = 1
    prev = 1
    for i in range(n - 1):
        if m[i][i] == 0:
            swap = next((r for r in range(i + 1, n) if m[r][i]), None)
            if swap is None:
                return 0
            m[i], m[swap] = m[swap], m[i]
            sign = -sign
        for r in range(i + 1, n):
            for c in range(i + 1, n):
                m[r][c] = (m[r][c] * m[i][i] - m[r][i] * m[i][c]) // prev
            m[r][i] = 0
        prev = m[i][i]
    return sign * m[n - 1][n - 1]


def _selection_sum(config, flat) -> int:
    """Sum over divisor selections of the n-run identity's right-hand side.

    Selections pick at most one of {p_j, q_j} per node; a selected divisor
    multiplies the term, and run i's Jacobsthal index k_i drops by one for
    each of p_(i+1) and q_i selected.  The sum contracts as the trace of a
    product of 3x3 transfer matrices (node states: none, p, q), which keeps
    long configurations cheap.
    """
    n = len(config)
    total = None
    for i in range(n):
        k = config[i]
        weights = (1, flat[2 * i], flat[2 * i + 1])
        step = [
            [jacobsthal(k - (v == 1) - (u == 2)) * weights[u] for v in range(3)]
            for u in range(3)
        ]
        if total is None:
            total = step
        else:
            total = [
                [sum(total[u][w] * step[w][v] for w in range(3)) for v in range(3)]
                for u in range(3)
            ]
    return total[0][0] + total[1][1] + total[2][2]


def nrun_condition(config, divisors) -> tuple[int, int]:
    """(lhs, rhs) of the divisor identity for an n-run cycle; equality is the
    cycle condition.  lhs = 2^sum(k_i - 2) * prod(p_i q_i)."""
    config = tuple(config)
    n = len(config)
    if n < 2:
        raise ValueError(f"the identity holds for n >= 2 runs, got {n}")
    flat = [x for pair in divisors for x in pair]
    if len(flat) != 2 * n:
        raise ValueError("one (p, q) pair is required per run")
    exponent = sum(k - 2 for k in config)
    lhs = (1 << exponent)
    for x in flat:
        lhs *= x
    rhs = _selection_sum(config, flat) - (-1) ** exponent
    return lhs, rhs


@dataclass(frozen=True)
class DivisorReport:
    """The three divisor-placement restrictions for a cycle's node divisors."""

    at_least_two_ones: bool
    at_least_two_non_ones: bool
    same_node_ones_ok: bool

    @property
    def satisfied(self) -> bool:
        return self.at_least_two_ones and self.at_least_two_non_ones and self.same_node_ones_ok


# When exactly two divisors are 1 and they are the p_i, q_i of one node, the
# next node's divisors must be one of these for a cycle to be possible.
SAME_NODE_EXCEPTIONS = ((3, 3), (3, 5), (5, 3))


def divisor_predicates(divisors) -> DivisorReport:
    pairs = tuple(tuple(pair) for pair in divisors)
    flat = [x for pair in pairs for x in pair]
    ones = sum(1 for x in flat if x == 1)
    report_ones = ones >= 2
    report_non_ones = len(flat) - ones >= 2
    same_node_ok = True
    if ones == 2:
        n = len(pairs)
        for i, (p, q) in enumerate(pairs):
            if p == 1 and q == 1:
                same_node_ok = pairs[(i + 1) % n] in SAME_NODE_EXCEPTIONS
    return DivisorReport(
        at_least_two_ones=report_ones,
        at_least_two_non_ones=report_non_ones,
        same_node_ones_ok=same_node_ok,
    )


# --- exhaustive short-cycle search ---------------------------------------------


class DegenerateCaseError(RuntimeError):
    """A divisor equation degenerated to an infinite family; the search for
    this configuration cannot be completed exactly."""


def _bilinear_prime_solutions(a, b, c, d, prime_bound=None):
    """All odd-prime pairs (x, y) with a*x*y + b*x + c*y + d = 0.

    Solved exactly by the hyperbola transform (a x + c)(a y + b) = bc - ad
    and divisor enumeration.  With prime_bound set, solutions are restricted
    to primes <= bound (and degenerate linear cases are enumerated up to the
    bound rather than rejected).
    """

    def good(v):
        return v >= 3 and v % 2 == 1 and (prime_bound is None or v <= prime_bound) and is_prime(v)

    sieve = get_sieve()

    def primes_upto(bound):
        return [int(p) for p in sieve.primes[(sieve.primes >= 3) & (sieve.primes <= bound)]]

    solutions = set()
    if a == 0:
        if b == 0 and c == 0:
            if d == 0:
                raise DegenerateCaseError("identically zero divisor equation")
            return []
        if b == 0 or c == 0:
            if prime_bound is None:
                raise DegenerateCaseError("equation is linear in one unknown only")
            if b == 0:  # c*y + d = 0, x free
                if d % c == 0 and good(-d // c):
                    solutions.update((x, -d // c) for x in primes_upto(prime_bound))
            else:
                if d % b == 0 and good(-d // b):
                    solutions.update((-d // b, y) for y in primes_upto(prime_bound))
            return sorted(solutions)
        # b*x + c*y + d = 0: one unknown determines the other
        if prime_bound is None:
            raise DegenerateCaseError("bilinear coefficient vanished in an exact case")
        for y in primes_upto(prime_bound):
            num = -(c * y + d)
            if num % b == 0 and good(num // b):
                solutions.add((num // b, y))
        return sorted(solutions)
    n_const = b * c - a * d
    if n_const == 0:
        # (a x + c)(a y + b) = 0: a line of solutions in one variable
        x_line = -c % a == 0 and good(-c // a)
        y_line = -b % a == 0 and good(-b // a)
        if not x_line and not y_line:
            return []
        if prime_bound is None:
            raise DegenerateCaseError("divisor equation factored into a line")
        if x_line:
            solutions.update((-c // a, y) for y in primes_upto(prime_bound))
        if y_line:
            solutions.update((x, -b // a) for x in primes_upto(prime_bound))
        return sorted(solutions)
    for u in all_divisors(abs(n_const)):
        for su in (u, -u):
            sv = n_const // su
            if (su - c) % a or (sv - b) % a:
                continue
            x, y = (su - c) // a, (sv - b) // a
            if good(x) and good(y):
                solutions.add((x, y))
    return sorted(solutions)


def _case_equation(config, fixed_flat, unknown_slots):
    """Coefficients (a, b, c, d) of the condition lhs - rhs = 0 as a bilinear
    function of the two unknown flat slots (everything else fixed)."""
    s0, s1 = unknown_slots

    def evaluate(x, y):
        flat = list(fixed_flat)
        flat[s0], flat[s1] = x, y
        pairs = [(flat[2 * i], flat[2 * i + 1]) for i in range(len(config))]
        lhs, rhs = nrun_condition(config, pairs)
        return lhs - rhs

    d = evaluate(0, 0)
    b = evaluate(1, 0) - d
    c = evaluate(0, 1) - d
    a = evaluate(1, 1) - b - c - d
    return a, b, c, d


def _canonical_assignment(config, flat):
    """Least representative of a flat divisor tuple under the rotations that
    preserve the configuration."""
    n = len(config)
    best = tuple(flat)
    for r in _config_symmetries(config):
        rotated = tuple(flat[(2 * (i + r)) % (2 * n) + (j % 2)] for i in range(n) for j in (0, 1))
        if rotated < best:
            best = rotated
    return best


def _divisor_solutions_two_runs(config):
    """Exact divisor solutions for a two-run configuration.

    Exactly two of the four divisors must equal 1; each of the six
    placements reduces to a bilinear Diophantine equation solved completely.
    """
    found = set()
    for ones in combinations(range(4), 2):
        unknown = tuple(i for i in range(4) if i not in ones)
        fixed = [0] * 4
        for i in ones:
            fixed[i] = 1
        a, b, c, d = _case_equation(config, fixed, unknown)
        for x, y in _bilinear_prime_solutions(a, b, c, d):
            flat = list(fixed)
            flat[unknown[0]], flat[unknown[1]] = x, y
            found.add(_canonical_assignment(config, flat))
    return sorted(found)


def _divisor_solutions_bounded(config, prime_bound):
    """Bounded divisor search for n >= 3 runs: all but two of the non-one
    slots are enumerated over odd primes <= prime_bound and the final two are
    solved exactly; kept solutions have every divisor <= prime_bound."""
    n = len(config)
    size = 2 * n
    sieve = get_sieve()
    primes = [int(p) for p in sieve.primes[(sieve.primes >= 3) & (sieve.primes <= prime_bound)]]
    found = set()
    for ones_count in range(2, size - 1):
        for ones in combinations(range(size), ones_count):
            free = [i for i in range(size) if i not in ones]
            enum_slots, unknown = free[:-2], tuple(free[-2:])
            base = [0] * size
            for i in ones:
                base[i] = 1
            for values in product(primes, repeat=len(enum_slots)):
                flat = list(base)
                for slot, v in zip(enum_slots, values):
                    flat[slot] = v
                a, b, c, d = _case_equation(config, flat, unknown)
                for x, y in _bilinear_prime_solutions(a, b, c, d, prime_bound):
                    sol = list(flat)
                    sol[unknown[0]], sol[unknown[1]] = x, y
                    found.add(_canonical_assignment(config, sol))
    return sorted(found)


@dataclass(frozen=True)
class CaseReport:
    divisors: tuple[tuple[int, int], ...]
    signature: tuple[int, ...]
    candidate: tuple[int, ...] | None
    failure_reasons: tuple[str, ...]
    valid: bool


@dataclass(frozen=True)
class ConfigurationReport:
    lengths: tuple[int, ...]
    exact: bool
    cases: tuple[CaseReport, ...]
    note: str | None = None


@dataclass(frozen=True)
class ExhaustReport:
    length: int
    prime_bound: int
    configurations: tuple[ConfigurationReport, ...]
    max_runs: int | None = None

    @property
    def candidates(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            case.candidate
            for conf in self.configurations
            for case in conf.cases
            if case.candidate is not None
        )

    @property
    def valid_candidates(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            case.candidate
            for conf in self.configurations
            for case in conf.cases
            if case.valid and case.candidate is not None
        )

    def to_json_dict(self) -> dict:
        return {
            "length": self.length,
            "prime_bound": self.prime_bound,
            "max_runs": self.max_runs,
            "configurations": [
                {
                    "lengths": list(conf.lengths),
                    "exact": conf.exact,
                    "note": conf.note,
                    "cases": [
                        {
                            "divisors": [list(pair) for pair in case.divisors],
                            "signature": list(case.signature),
                            "candidate": list(case.candidate) if case.candidate else None,
                            "failure_reasons": list(case.failure_reasons),
                            "valid": case.valid,
                        }
                        for case in conf.cases
                    ],
                }
                for conf in self.configurations
            ],
        }


def _case_report(config, flat) -> CaseReport:
    pairs = tuple((flat[2 * i], flat[2 * i + 1]) for i in range(len(config)))
    signature = signature_for(config, pairs)
    report = divisor_predicates(pairs)
    reasons = []
    if not report.at_least_two_ones:
        reasons.append("fewer than two divisors equal 1")
    if not report.at_least_two_non_ones:
        reasons.append("fewer than two divisors differ from 1")
    if not report.same_node_ones_ok:
        reasons.append(
            "the two divisors equal to 1 share a node and the next node "
            f"is not one of {SAME_NODE_EXCEPTIONS}"
        )
    if reasons:
        return CaseReport(
            divisors=pairs,
            signature=signature,
            candidate=None,
            failure_reasons=tuple(reasons),
            valid=False,
        )
    outcome = solve_signature(signature)
    if outcome.candidate is None:
        return CaseReport(
            divisors=pairs,
            signature=signature,
            candidate=None,
            failure_reasons=(f"signature has no positive solution: {outcome.reason}",),
            valid=False,
        )
    verdict = validate_candidate(outcome.candidate)
    return CaseReport(
        divisors=pairs,
        signature=signature,
        candidate=outcome.candidate.terms,
        failure_reasons=verdict.failures,
        valid=verdict.valid,
    )


DEFAULT_PRIME_BOUND = 1000


def exhaust_cycles(length: int, prime_bound: int = DEFAULT_PRIME_BOUND, max_runs: int | None = None) -> ExhaustReport:
    """Search for all cycles of the given length.

    One-run configurations are impossible; two-run configurations are solved
    exactly; configurations of three or more runs are searched over divisors
    in {1} union odd primes <= prime_bound (the report marks these bounded).
    Every surviving divisor assignment is solved to a candidate term vector
    and re-simulated; simulation is the final arbiter of validity.
    """
    if length < 3:
        raise ValueError(f"cycle length must be >= 3, got {length}")
    configurations = []
    for config in run_configurations(length):
        n = len(config)
        if max_runs is not None and n > max_runs:
            continue
        if n == 1:
            configurations.append(
                ConfigurationReport(
                    lengths=config,
                    exact=True,
                    cases=(),
                    note="excluded: no non-trivial cycles of one run",
                )
            )
            continue
        if n == 2:
            assignments = _divisor_solutions_two_runs(config)
            exact = True
        else:
            assignments = _divisor_solutions_bounded(config, prime_bound)
            exact = False
        cases = tuple(_case_report(config, flat) for flat in assignments)
        configurations.append(
            ConfigurationReport(lengths=config, exact=exact, cases=cases)
        )
    return ExhaustReport(
        length=length,
        prime_bound=prime_bound,
        configurations=tuple(configurations),
        max_runs=max_runs,
    )
