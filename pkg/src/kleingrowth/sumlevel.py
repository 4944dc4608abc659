"""Exact Lebesgue measure of continued-fraction sum-level sets.

``C_n`` is the set of ``x`` in (0, 1) whose continued-fraction digits have a
partial sum equal to ``n``. It is the disjoint union of the cylinders
``[a_1, ..., a_k]`` over all compositions of ``n``, and the cylinder with
continuants ``q_{k-1}, q_k`` has measure ``1 / (q_k (q_k + q_{k-1}))``.

Two independent routes are provided: a vectorized walk over continuant
states summed with GMP rationals, and an interval recursion over plain
:class:`fractions.Fraction` endpoints.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, TextIO

import gmpy2
import numpy as np

from .asymptotics import AsymptoticModel, FitResult, fit_series
from .errors import OverflowDomainError, UsageError

#: Largest n accepted by the continuant walk (2^(n-1) cylinders at level n).
MEASURE_CAP = 30
#: Largest n accepted by the interval recursion (memory bound).
ORACLE_CAP = 18

CHUNK_SIZE = 1 << 16
_BLOCK = 1 << 12
# keeps q (q + q_prev) inside int64
_Q_LIMIT = 1 << 31


def _check_n(n: int, cap: int, what: str) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise UsageError(f"{what} needs an integer n >= 1, got {n!r}")
    if n > cap:
        raise UsageError(f"{what}: n = {n} exceeds the cap {cap}")


def tree_sum(values: list, zero=0):
    """Balanced pairwise sum; keeps exact rational operands of similar size."""
    if not values:
        return zero
    vals = list(values)
    while len(vals) > 1:
        paired = [a + b for a, b in zip(vals[::2], vals[1::2])]
        if len(vals) % 2:
            paired.append(vals[-1])
        vals = paired
    return vals[0]


def _exact_reciprocal_sum(den: np.ndarray):
    """Exact ``sum(1 / den)`` as an ``mpq``."""
    uniq, mult = np.unique(den, return_counts=True)
    blocks = []
    for i in range(0, len(uniq), _BLOCK):
        blocks.append(
            tree_sum(
                [gmpy2.mpq(m, d) for m, d in zip(mult[i : i + _BLOCK].tolist(), uniq[i : i + _BLOCK].tolist())],
                gmpy2.mpq(0),
            )
        )
    return tree_sum(blocks, gmpy2.mpq(0))


def _walk_first_digit(first: int, n_max: int) -> tuple[list, list]:
    """Exact measure contributions, per level, of cylinders starting with ``first``.

    States are ``(q_prev, q)`` pairs grouped by digit sum. A level is expanded
    once it holds a full chunk, deepest first; otherwise the shallowest level
    is expanded so that chunks fill up. Memory stays ``O(CHUNK_SIZE * n_max^2)``.
    """
    pending: list[list] = [[] for _ in range(n_max + 1)]
    sizes = [0] * (n_max + 1)
    pending[first].append((np.array([1], np.int64), np.array([first], np.int64)))
    sizes[first] = 1
    parts: list[list] = [[] for _ in range(n_max + 1)]
    visited = [0] * (n_max + 1)
    while True:
        m = next((k for k in range(n_max, 0, -1) if sizes[k] >= CHUNK_SIZE), 0)
        if not m:
            m = next((k for k in range(1, n_max + 1) if sizes[k]), 0)
        if not m:
            break
        buf = pending[m]
        qp = np.concatenate([b[0] for b in buf])
        q = np.concatenate([b[1] for b in buf])
        buf.clear()
        if len(q) > CHUNK_SIZE:
            buf.append((qp[CHUNK_SIZE:], q[CHUNK_SIZE:]))
            qp, q = qp[:CHUNK_SIZE], q[:CHUNK_SIZE]
        sizes[m] -= len(q)
        if int(q.max()) >= _Q_LIMIT:
            raise OverflowDomainError(f"continuant exceeds 2^31 at digit sum {m}")
        visited[m] += len(q)
        parts[m].append(_exact_reciprocal_sum(q * (q + qp)))
        for a in range(1, n_max - m + 1):
            pending[m + a].append((q, a * q + qp))
            sizes[m + a] += len(q)
    return parts, visited


def _level_measures(n_max: int, threads: int = 1) -> tuple[list[Fraction], list[int]]:
    """Exact ``lambda(C_n)`` for ``n = 1..n_max`` and the number of cylinders visited."""
    digits = list(range(1, n_max + 1))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda a: _walk_first_digit(a, n_max), digits))
    else:
        results = [_walk_first_digit(a, n_max) for a in digits]
    measures, counts = [], []
    for n in range(1, n_max + 1):
        # merged in first-digit order; exact, so the order only fixes the work
        total = tree_sum([tree_sum(parts[n], gmpy2.mpq(0)) for parts, _ in results], gmpy2.mpq(0))
        num, den = int(total.numerator), int(total.denominator)
        if math.gcd(num, den) != 1:
            raise ArithmeticError(f"level {n}: rational not reduced")
        measures.append(Fraction(num, den))
        counts.append(sum(v[n] for _, v in results))
    return measures, counts


def sum_level_measure(n: int, *, cap: int = MEASURE_CAP, threads: int = 1) -> Fraction:
    """Exact ``lambda(C_n)``."""
    _check_n(n, cap, "sum_level_measure")
    return _level_measures(n, threads)[0][n - 1]


def cylinder_count(n: int, *, cap: int = MEASURE_CAP) -> int:
    """Number of cylinders the walk visits at level ``n`` (equals ``2^(n-1)``)."""
    _check_n(n, cap, "cylinder_count")
    return _level_measures(n)[1][n - 1]


def continuants(digits: Sequence[int]) -> list[int]:
    """``[q_{-1}, q_0, q_1, ..., q_k]`` for the digit string."""
    qs = [0, 1]
    for a in digits:
        if a < 1:
            raise UsageError("continued-fraction digits must be positive")
        qs.append(a * qs[-1] + qs[-2])
    return qs


def cylinder_measure(digits: Sequence[int]) -> Fraction:
    qs = continuants(digits)
    return Fraction(1, qs[-1] * (qs[-1] + qs[-2]))


def interval_oracle(n: int, *, cap: int = ORACLE_CAP) -> list[tuple[Fraction, Fraction]]:
    """Sorted disjoint intervals whose union is ``C_n`` (up to endpoints).

    Uses ``C_n = [n] u U_j T_j(C_{n-j})`` with ``T_j(y) = 1 / (j + y)``.
    """
    _check_n(n, cap, "interval_oracle")
    levels: list[list] = [[]]
    for m in range(1, n + 1):
        ivs = [(Fraction(1, m + 1), Fraction(1, m))]
        for j in range(1, m):
            for lo, hi in levels[m - j]:
                # T_j reverses orientation
                ivs.append((1 / (j + hi), 1 / (j + lo)))
        levels.append(ivs)
    out = sorted(levels[n])
    for (lo, hi), (lo2, _) in zip(out, out[1:]):
        if hi > lo2:
            raise ArithmeticError("interval oracle produced overlapping cylinders")
    return out


def interval_total(intervals: list[tuple[Fraction, Fraction]]) -> Fraction:
    return tree_sum([hi - lo for lo, hi in intervals], Fraction(0))


@dataclass(frozen=True)
class SumLevelTable:
    entries: dict
    cumulative: dict

    @property
    def n_max(self) -> int:
        return max(self.entries)

    def normalized(self) -> dict:
        """``n -> lambda(C_n) log2 n``."""
        return {n: float(v) * math.log2(n) for n, v in self.entries.items()}

    def normalized_cumulative(self) -> dict:
        """``n -> (sum_{k <= n} lambda(C_k)) log2(n) / n``."""
        return {n: float(v) * math.log2(n) / n for n, v in self.cumulative.items()}


def cumulative_table(n_max: int, *, cap: int = MEASURE_CAP, threads: int = 1) -> SumLevelTable:
    _check_n(n_max, cap, "cumulative_table")
    measures, _ = _level_measures(n_max, threads)
    entries, cumulative = {}, {}
    running = Fraction(0)
    for n, v in enumerate(measures, start=1):
        running += v
        entries[n] = v
        cumulative[n] = running
    return SumLevelTable(entries, cumulative)


SUMLEVEL_CANDIDATES = (
    AsymptoticModel("inverse_log"),
    AsymptoticModel("power"),
    AsymptoticModel("constant"),
)


def asymptotic_report(
    n_max: int = 25, *, n_min: int = 8, table: SumLevelTable | None = None, threads: int = 1
) -> FitResult:
    """Model selection on ``lambda(C_n)``, ``n_min <= n <= n_max``."""
    if n_max < 16:
        raise UsageError("asymptotic_report needs n_max >= 16")
    if table is None or table.n_max < n_max:
        table = cumulative_table(n_max, threads=threads)
    series = {n: float(table.entries[n]) for n in range(n_min, n_max + 1)}
    # [8, 25] spans only ~3x; all exact levels are used, so the span floor is relaxed
    return fit_series(series, SUMLEVEL_CANDIDATES, min_span=3.0)


CSV_COLUMNS = ("n", "measure", "measure_decimal", "cumulative", "cumulative_decimal",
               "measure_log2n", "cumulative_log2n_over_n")


def fraction_text(x: Fraction) -> str:
    """``"p/q"``; GMP formatting avoids the interpreter's digit limit on int-to-str."""
    return f"{gmpy2.mpz(x.numerator).digits()}/{gmpy2.mpz(x.denominator).digits()}"


def write_csv(table: SumLevelTable, out: TextIO) -> None:
    norm = table.normalized()
    normc = table.normalized_cumulative()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for n in sorted(table.entries):
        v, c = table.entries[n], table.cumulative[n]
        w.writerow([n, fraction_text(v), f"{float(v):.17g}", fraction_text(c), f"{float(c):.17g}",
                    f"{norm[n]:.17g}", f"{normc[n]:.17g}"])
