"""Orbit enumeration by word length and the Poincare sums built on it.

The walk is depth-first over the canonical extension tree of normal forms
(see :func:`kleingrowth.presentation.canonical_letters`). It is vectorized
over *chunks*: every chunk holds words of one length together with their
matrices, and spawns one child chunk per generator letter. Chunks are capped
in size, so memory stays bounded for any ``n_max``.

Top-level partitions are the first letters of the word. They may run on a
thread pool, and their results are always combined in letter order, so the
output does not depend on the thread count.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from scipy import stats

from .errors import InsufficientDataError, OverflowDomainError, UsageError
from .hyperbolic import HEIGHT_FLOOR, HPoint, Model, apply, distance, displacement
from .presentation import (
    GroupPresentation,
    NormalWord,
    Syllable,
    sphere_counts,
)

#: Default cap on word length; see :func:`check_word_cap`.
DEFAULT_WORD_CAP = 40
CHUNK_SIZE = 1 << 13
# log of the largest finite binary64 is ~709.78; matrix entries grow like e^(d/2)
_LOG_FLOAT_MAX = 709.0


@dataclass(frozen=True)
class OrbitRecord:
    word: NormalWord
    point: HPoint
    dist: float


def max_generator_displacement(gp: GroupPresentation, w: HPoint | None = None) -> float:
    w = w or HPoint.base(gp.model)
    return max(displacement(g, w) for f in gp.factors for g in f.generators)


def check_word_cap(gp: GroupPresentation, cap: int, w: HPoint | None = None, z: HPoint | None = None) -> None:
    """Reject caps whose worst-case displacement would overflow binary64 matrix entries."""
    w = w or HPoint.base(gp.model)
    z = z or w
    worst = cap * max_generator_displacement(gp, w) + distance(z, w)
    if worst / 2.0 + 2.0 > _LOG_FLOAT_MAX:
        raise UsageError(
            f"word-length cap {cap} allows displacement up to {worst:.1f}, "
            f"beyond the binary64 range of matrix entries"
        )


# -- chunked walk ----------------------------------------------------------


@dataclass
class _Chunk:
    """Words of one length: matrices plus the state needed to extend them.

    ``last`` is the letter id of the final letter (-1 for the identity).
    ``letters`` (full letter sequences) is only kept when words are needed;
    ``peak`` (largest distance along the prefix chain) only in ball walks.
    A *leaf* chunk carries the parent matrices plus ``pre = (x, h)``, the
    last letter applied to ``w``; this skips one matrix product per word.
    """

    depth: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    last: np.ndarray
    multi: np.ndarray | None
    first_factor: np.ndarray | None
    first_exp: np.ndarray | None
    letters: np.ndarray | None = None
    peak: np.ndarray | None = None
    pre: tuple | None = None

    def __len__(self):
        return len(self.a)

    def take(self, idx) -> "_Chunk":
        return _Chunk(
            self.depth,
            self.a[idx], self.b[idx], self.c[idx], self.d[idx],
            self.last[idx],
            None if self.multi is None else self.multi[idx],
            None if self.first_factor is None else self.first_factor[idx],
            None if self.first_exp is None else self.first_exp[idx],
            None if self.letters is None else self.letters[idx],
            None if self.peak is None else self.peak[idx],
            None if self.pre is None else (self.pre[0][idx], self.pre[1][idx]),
        )

    def split(self, size: int | None = None) -> list:
        size = size or CHUNK_SIZE
        if len(self) <= size:
            return [self]
        return [self.take(slice(i, i + size)) for i in range(0, len(self), size)]


class _Walker:
    """Letter tables and point geometry for one (group, z, w) triple."""

    def __init__(self, gp: GroupPresentation, z: HPoint, w: HPoint, track_words: bool = True,
                 track_first: bool = True):
        if z.model is not gp.model or w.model is not gp.model:
            raise UsageError("base points must lie in the presentation's model")
        self.gp = gp
        self.z = z
        self.w = w
        self.track_words = track_words
        # first-syllable state is only needed by the restricted and coset sums
        self.track_first = track_first
        self.letters = gp.letters()
        self.R = gp.max_rank
        self.real = gp.model is Model.H2 and all(
            g.is_real() for f in gp.factors for g in f.generators
        )
        self.dtype = np.float64 if self.real else np.complex128
        L = len(self.letters)
        self.fac = np.array([f for f, _, _ in self.letters], np.int16)
        self.coord = np.array([j for _, j, _ in self.letters], np.int16)
        self.sign = np.array([s for _, _, s in self.letters], np.int16)
        ents = [gp.letter_matrix(*lt) for lt in self.letters]
        self.G = [np.array([getattr(m, k) for m in ents], dtype=complex) for k in "abcd"]
        if self.real:
            self.G = [g.real.copy() for g in self.G]
        # allowed[prev + 1, nxt]: may letter ``nxt`` follow letter ``prev``? Row 0 is the identity.
        allowed = np.ones((L + 1, L), bool)
        new_syl = np.ones((L + 1, L), bool)
        for p, (pf, pj, ps) in enumerate(self.letters):
            for q, (qf, qj, qs) in enumerate(self.letters):
                same = pf == qf
                new_syl[p + 1, q] = not same
                allowed[p + 1, q] = (not same) or qj > pj or (qj == pj and qs == ps)
        self.allowed = allowed
        self.new_syl = new_syl
        images = [apply(m, w) for m in ents]
        self.pre_x = np.array([p.horizontal if gp.model is Model.H3 else p.coords.real for p in images],
                              dtype=complex if gp.model is Model.H3 else float)
        self.pre_h = np.array([p.height for p in images])

    def identity_chunk(self) -> _Chunk:
        one = np.ones(1, dtype=self.dtype)
        zero = np.zeros(1, dtype=self.dtype)
        return _Chunk(
            0, one, zero, zero.copy(), one.copy(),
            np.full(1, -1, np.int16), np.zeros(1, bool), np.full(1, -1, np.int16),
            np.zeros((1, self.R), np.int16),
            np.zeros((1, 0), np.uint8) if self.track_words else None,
        )

    def children(self, ch: _Chunk, only: int | None = None, leaf: bool = False) -> _Chunk | None:
        """All canonical one-letter extensions of ``ch`` (or just letter ``only``)."""
        ok = self.allowed[ch.last + 1]
        if only is not None:
            sel = np.zeros_like(ok)
            sel[:, only] = ok[:, only]
            ok = sel
        rows, cols = np.nonzero(ok)
        if len(rows) == 0:
            return None
        pa, pb, pc, pd = ch.a[rows], ch.b[rows], ch.c[rows], ch.d[rows]
        n = len(rows)
        if not self.track_first:
            multi = first_factor = first_exp = None
        elif ch.depth == 0:
            multi = np.zeros(n, bool)
            first_factor = self.fac[cols]
            first_exp = np.zeros((n, self.R), np.int16)
            first_exp[np.arange(n), self.coord[cols]] = self.sign[cols]
        else:
            multi = ch.multi[rows] | self.new_syl[ch.last[rows] + 1, cols]
            first_factor = ch.first_factor[rows]
            first_exp = ch.first_exp[rows]
            one = np.flatnonzero(~multi)
            first_exp[one, self.coord[cols[one]]] += self.sign[cols[one]]
        letters = None
        if ch.letters is not None:
            letters = np.empty((n, ch.depth + 1), np.uint8)
            letters[:, :-1] = ch.letters[rows]
            letters[:, -1] = cols
        peak = None if ch.peak is None else ch.peak[rows]
        last = cols.astype(np.int16)
        if leaf:
            pre = (self.pre_x[cols], self.pre_h[cols])
            return _Chunk(ch.depth + 1, pa, pb, pc, pd, last, multi, first_factor, first_exp,
                          letters, peak, pre)
        ga, gb, gc, gd = (g[cols] for g in self.G)
        return _Chunk(
            ch.depth + 1,
            pa * ga + pb * gc, pa * gb + pb * gd, pc * ga + pd * gc, pc * gb + pd * gd,
            last, multi, first_factor, first_exp, letters, peak,
        )

    def points_and_distances(self, ch: _Chunk):
        """Images ``g(w)`` as (horizontal, height) and distances ``d(z, g(w))``."""
        with np.errstate(all="ignore"):
            if self.gp.model is Model.H2:
                if ch.pre is None:
                    w, wh = self.w.coords, self.w.coords.imag
                else:
                    w, wh = ch.pre[0] + 1j * ch.pre[1], ch.pre[1]
                den = ch.c * w + ch.d
                num = ch.a * w + ch.b
                if self.real:
                    den2 = den.real**2 + den.imag**2
                    h = wh / den2
                    x = (num * np.conj(den)).real / den2
                else:
                    q = num / den
                    x, h = q.real, q.imag
                eu = np.hypot(x - self.z.coords.real, h - self.z.coords.imag)
                horiz = x
            else:
                if ch.pre is None:
                    wx, wy, t = self.w.coords
                    zz = complex(wx, wy)
                else:
                    zz, t = ch.pre
                czd = ch.c * zz + ch.d
                den = czd.real**2 + czd.imag**2 + (ch.c.real**2 + ch.c.imag**2) * (t * t)
                num = (ch.a * zz + ch.b) * np.conj(czd) + ch.a * np.conj(ch.c) * (t * t)
                horiz = num / den
                h = t / den
                zx, zy, zt = self.z.coords
                dx = horiz - complex(zx, zy)
                eu = np.sqrt(dx.real**2 + dx.imag**2 + (h - zt) ** 2)
            dist = 2.0 * np.arcsinh(eu / (2.0 * np.sqrt(self.z.height * h)))
        bad = ~np.isfinite(dist) | ~(h > HEIGHT_FLOOR)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise OverflowDomainError(
                "Mobius action left the binary64 range",
                word_length=ch.depth,
                word=None if ch.letters is None else self.word_of(ch.letters[k]),
            )
        return horiz, h, dist

    def word_of(self, codes) -> NormalWord:
        syllables = []
        cur_fac, cur = None, None
        for li in codes:
            fac, j, s = self.letters[int(li)]
            if fac != cur_fac:
                if cur is not None:
                    syllables.append(Syllable(cur_fac, tuple(cur)))
                cur_fac, cur = fac, [0] * self.gp.factors[fac].rank
            cur[j] += s
        if cur is not None:
            syllables.append(Syllable(cur_fac, tuple(cur)))
        return NormalWord(tuple(syllables))

    def walk(self, first_letter: int, n_max: int) -> Iterator[_Chunk]:
        """Depth-first over all words of length ``<= n_max`` starting with ``first_letter``."""
        stack = [self.children(self.identity_chunk(), only=first_letter, leaf=n_max == 1)]
        while stack:
            ch = stack.pop()
            yield ch
            if ch.depth < n_max:
                kids = self.children(ch, leaf=ch.depth + 1 == n_max)
                if kids is not None:
                    stack.extend(reversed(kids.split()))

    def walk_ball(self, radius: float, slack: float, max_depth: int):
        """Yield ``(depth, distances <= radius, largest prefix-to-descendant drop)`` per chunk.

        A word is not extended once its distance exceeds ``radius + slack``;
        this is exact as long as no descendant comes closer to ``z`` than its
        prefix by more than ``slack``. The observed drops are reported so the
        caller can check that.
        """
        root = self.identity_chunk()
        root.peak = np.array([distance(self.z, self.w)])
        stack = [root]
        while stack:
            ch = stack.pop()
            kids = self.children(ch)
            if kids is None:
                continue
            _, _, d = self.points_and_distances(kids)
            drop = float(np.max(kids.peak - d))
            yield kids.depth, d[d <= radius], drop
            keep = d <= radius + slack
            if not keep.any():
                continue
            if kids.depth >= max_depth:
                raise OverflowDomainError(f"ball walk exceeded depth {max_depth}", word_length=kids.depth)
            nxt = kids.take(keep)
            nxt.peak = np.maximum(nxt.peak, d[keep])
            stack.extend(reversed(nxt.split()))


def _prepare(gp, z, w, n_max, word_cap, track_words=True, track_first=True):
    w = w or HPoint.base(gp.model)
    z = z or HPoint.base(gp.model)
    if n_max < 0:
        raise UsageError("n_max must be nonnegative")
    if n_max > word_cap:
        raise UsageError(f"n_max={n_max} exceeds the word-length cap {word_cap}")
    check_word_cap(gp, word_cap, w, z)
    return _Walker(gp, z, w, track_words, track_first)


def _run_partitions(fn, count: int, threads: int):
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


# -- streaming interface ---------------------------------------------------


def iter_orbit(gp: GroupPresentation, w: HPoint | None = None, n_max: int = 0, *,
               z: HPoint | None = None, word_cap: int = DEFAULT_WORD_CAP) -> Iterator[OrbitRecord]:
    """Yield every element of length ``<= n_max`` once, as an :class:`OrbitRecord`."""
    walker = _prepare(gp, z, w, n_max, word_cap)
    w, z = walker.w, walker.z
    yield OrbitRecord(NormalWord(), w, distance(z, w))
    if n_max == 0:
        return
    for li in range(len(walker.letters)):
        for ch in walker.walk(li, n_max):
            horiz, h, dist = walker.points_and_distances(ch)
            for k in range(len(ch)):
                yield OrbitRecord(walker.word_of(ch.letters[k]), _point(gp.model, horiz[k], h[k]), float(dist[k]))


def _point(model, horiz, h) -> HPoint:
    if model is Model.H2:
        return HPoint(Model.H2, complex(float(np.real(horiz)), float(h)))
    horiz = complex(horiz)
    return HPoint(Model.H3, (horiz.real, horiz.imag, float(h)))


def enumerate_orbit(gp: GroupPresentation, w: HPoint | None, n_max: int,
                    visitor: Callable[[OrbitRecord], None], *, z: HPoint | None = None,
                    threads: int = 1, serialized: bool = True,
                    word_cap: int = DEFAULT_WORD_CAP) -> int:
    """Call ``visitor`` on every orbit record of length ``<= n_max``; return the count.

    With ``threads > 1`` partitions run concurrently. ``serialized=True``
    guards the visitor with a lock; pass ``False`` only for thread-safe visitors.
    """
    walker = _prepare(gp, z, w, n_max, word_cap)
    lock = threading.Lock() if serialized and threads > 1 else None

    def deliver(rec):
        if lock is None:
            visitor(rec)
        else:
            with lock:
                visitor(rec)

    deliver(OrbitRecord(NormalWord(), walker.w, distance(walker.z, walker.w)))
    if n_max == 0:
        return 1

    def run(li):
        count = 0
        for ch in walker.walk(li, n_max):
            horiz, h, dist = walker.points_and_distances(ch)
            for k in range(len(ch)):
                deliver(OrbitRecord(walker.word_of(ch.letters[k]), _point(gp.model, horiz[k], h[k]), float(dist[k])))
            count += len(ch)
        return count

    return 1 + sum(_run_partitions(run, len(walker.letters), threads))


# -- bulk sample -----------------------------------------------------------


@dataclass
class OrbitSample:
    """Distances of all orbit points up to ``n_max``, grouped by word length.

    ``first_factor`` / ``first_exp`` describe the first syllable of each word
    (``-1`` / zeros for the identity); they drive the coset decomposition.
    """

    gp: GroupPresentation
    z: HPoint
    w: HPoint
    n_max: int
    dist: list = field(default_factory=list)
    first_factor: list = field(default_factory=list)
    first_exp: list = field(default_factory=list)

    @property
    def counts(self) -> list[int]:
        return [len(d) for d in self.dist]

    def all_distances(self) -> np.ndarray:
        return np.concatenate(self.dist)

    def first_length(self, n: int) -> np.ndarray:
        return np.abs(self.first_exp[n]).sum(axis=1)

    def cusp_mask(self, n: int) -> np.ndarray:
        """Words whose first syllable is a maximal-rank parabolic syllable of length >= 2."""
        deep = [i for i, f in enumerate(self.gp.factors) if f.is_parabolic and f.rank == self.gp.r_max]
        return np.isin(self.first_factor[n], deep) & (self.first_length(n) >= 2)


def orbit_sample(gp: GroupPresentation, z: HPoint | None = None, w: HPoint | None = None,
                 n_max: int = 0, *, threads: int = 1, word_cap: int = DEFAULT_WORD_CAP) -> OrbitSample:
    walker = _prepare(gp, z, w, n_max, word_cap, track_words=False)
    R = walker.R

    def run(li):
        per = [([], [], []) for _ in range(n_max + 1)]
        for ch in walker.walk(li, n_max):
            _, _, dist = walker.points_and_distances(ch)
            slot = per[ch.depth]
            slot[0].append(dist)
            slot[1].append(ch.first_factor)
            slot[2].append(ch.first_exp)
        return per

    parts = _run_partitions(run, len(walker.letters), threads) if n_max > 0 else []
    sample = OrbitSample(gp, walker.z, walker.w, n_max)
    sample.dist.append(np.array([distance(walker.z, walker.w)]))
    sample.first_factor.append(np.full(1, -1, np.int16))
    sample.first_exp.append(np.zeros((1, R), np.int16))
    for n in range(1, n_max + 1):
        ds, fs, es = [], [], []
        for per in parts:
            ds += per[n][0]
            fs += per[n][1]
            es += per[n][2]
        sample.dist.append(np.concatenate(ds) if ds else np.empty(0))
        sample.first_factor.append(np.concatenate(fs) if fs else np.empty(0, np.int16))
        sample.first_exp.append(np.concatenate(es) if es else np.empty((0, R), np.int16))
    return sample


def level_counts(gp: GroupPresentation, z: HPoint | None = None, w: HPoint | None = None,
                 n_max: int = 0, *, threads: int = 1, word_cap: int = DEFAULT_WORD_CAP) -> list[dict]:
    """Per-length count and distance range, without keeping the distances or words."""
    walker = _prepare(gp, z, w, n_max, word_cap, track_words=False, track_first=False)
    d0 = distance(walker.z, walker.w)

    def run(li):
        per = [[0, math.inf, -math.inf] for _ in range(n_max + 1)]
        for ch in walker.walk(li, n_max):
            _, _, dist = walker.points_and_distances(ch)
            slot = per[ch.depth]
            slot[0] += len(dist)
            slot[1] = min(slot[1], float(dist.min()))
            slot[2] = max(slot[2], float(dist.max()))
        return per

    parts = _run_partitions(run, len(walker.letters), threads) if n_max > 0 else []
    rows = [{"n": 0, "count": 1, "min_dist": d0, "max_dist": d0}]
    for n in range(1, n_max + 1):
        rows.append({
            "n": n,
            "count": sum(p[n][0] for p in parts),
            "min_dist": min(p[n][1] for p in parts),
            "max_dist": max(p[n][2] for p in parts),
        })
    return rows


# -- Poincare sums ---------------------------------------------------------


@dataclass(frozen=True)
class PartialSumTable:
    s: float
    z: HPoint
    w: HPoint
    counts: tuple
    values: tuple

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, n: int) -> tuple[int, float]:
        return self.counts[n], self.values[n]


def _level_sums(sample: OrbitSample, s: float, select=None) -> list[float]:
    out = []
    for n in range(sample.n_max + 1):
        d = sample.dist[n]
        if select is not None:
            d = d[select(n)]
        out.append(math.fsum(np.exp(-s * d)))
    return out


def _table(sample, s, level_sums, level_counts) -> PartialSumTable:
    values, counts = [], []
    running_terms, running = [], 0
    for v, c in zip(level_sums, level_counts):
        running_terms.append(v)
        running += c
        values.append(math.fsum(running_terms))
        counts.append(running)
    return PartialSumTable(float(s), sample.z, sample.w, tuple(counts), tuple(values))


def _sample_for(gp, z, w, n_max, sample, threads):
    if sample is not None:
        if sample.n_max < n_max:
            raise UsageError(f"sample only reaches length {sample.n_max}, need {n_max}")
        return sample
    return orbit_sample(gp, z, w, n_max, threads=threads)


def _truncate(sample: OrbitSample, n_max: int) -> OrbitSample:
    if sample.n_max == n_max:
        return sample
    return OrbitSample(sample.gp, sample.z, sample.w, n_max, sample.dist[: n_max + 1],
                       sample.first_factor[: n_max + 1], sample.first_exp[: n_max + 1])


def partial_sum(gp, z=None, w=None, s: float = 1.0, n_max: int = 0, *,
                sample: OrbitSample | None = None, threads: int = 1) -> PartialSumTable:
    """``P_n(z, w, s) = sum over |g| <= n of exp(-s d(z, g w))`` for ``n = 0..n_max``."""
    if not s > 0:
        raise UsageError("s must be positive")
    sample = _truncate(_sample_for(gp, z, w, n_max, sample, threads), n_max)
    return _table(sample, s, _level_sums(sample, s), sample.counts)


def restricted_sum_D(gp, z=None, w=None, s: float = 1.0, n_max: int = 0, *,
                     sample: OrbitSample | None = None, threads: int = 1) -> PartialSumTable:
    """Partial sums over words NOT entering a maximal-rank cusp with a syllable of length >= 2."""
    if not s > 0:
        raise UsageError("s must be positive")
    sample = _truncate(_sample_for(gp, z, w, n_max, sample, threads), n_max)
    keep = lambda n: ~sample.cusp_mask(n)
    counts = [int(keep(n).sum()) for n in range(n_max + 1)]
    return _table(sample, s, _level_sums(sample, s, keep), counts)


def admissible_prefixes(gp: GroupPresentation, n_max: int) -> list[Syllable]:
    """All maximal-rank parabolic syllables with l1 length in ``[2, n_max]``."""
    out = []
    for i, f in enumerate(gp.factors):
        if not (f.is_parabolic and f.rank == gp.r_max):
            continue
        for vec in _lattice_vectors(f.rank, n_max):
            if sum(abs(v) for v in vec) >= 2:
                out.append(Syllable(i, vec))
    return out


def _lattice_vectors(r: int, n: int):
    for vec in _ball(r, n):
        if any(vec):
            yield vec


def _ball(r: int, n: int):
    if r == 0:
        yield ()
        return
    for head in range(-n, n + 1):
        for tail in _ball(r - 1, n - abs(head)):
            yield (head,) + tail


def coset_sum(gp, z=None, w=None, s: float = 1.0, n_max: int = 0, prefix: Syllable | None = None, *,
              sample: OrbitSample | None = None, threads: int = 1) -> float:
    """Sum of ``exp(-s d(z, g w))`` over ``|g| <= n_max`` whose first syllable is ``prefix``."""
    if prefix is None:
        raise UsageError("coset_sum needs a prefix syllable")
    if not 0 <= prefix.factor_index < len(gp.factors):
        raise UsageError(f"prefix factor {prefix.factor_index} out of range")
    f = gp.factors[prefix.factor_index]
    if not (f.is_parabolic and f.rank == gp.r_max):
        raise UsageError("prefix must lie in a maximal-rank parabolic factor")
    if len(prefix.exponents) != f.rank:
        raise UsageError("prefix exponent vector has the wrong rank")
    if not 2 <= prefix.length <= n_max:
        raise UsageError(f"prefix length {prefix.length} outside [2, {n_max}]")
    sample = _truncate(_sample_for(gp, z, w, n_max, sample, threads), n_max)
    target = np.zeros(sample.first_exp[0].shape[1], np.int16)
    target[: f.rank] = prefix.exponents
    terms = []
    for n in range(prefix.length, n_max + 1):
        sel = (sample.first_factor[n] == prefix.factor_index) & np.all(sample.first_exp[n] == target, axis=1)
        terms.append(math.fsum(np.exp(-s * sample.dist[n][sel])))
    return math.fsum(terms)


def coset_sums_by_length(sample: OrbitSample, s: float) -> dict[int, float]:
    """Coset sums aggregated by prefix length ``k``; the sum over ``k`` is the cusp part."""
    out: dict[int, list] = {}
    for n in range(sample.n_max + 1):
        mask = sample.cusp_mask(n)
        if not mask.any():
            continue
        k = sample.first_length(n)[mask]
        vals = np.exp(-s * sample.dist[n][mask])
        for kk in np.unique(k):
            out.setdefault(int(kk), []).append(math.fsum(vals[k == kk]))
    return {k: math.fsum(v) for k, v in sorted(out.items())}


# -- counting function and critical exponent -------------------------------


@dataclass(frozen=True)
class CountingFunction:
    """Right-continuous step function ``N(R)``; ``values[i] = N(radii[i])``.

    ``horizon`` is the radius up to which the enumeration is believed complete
    (no element of greater word length lands closer); ``max_dist`` is the
    largest realized distance.
    """

    radii: np.ndarray
    values: np.ndarray
    horizon: float = math.inf
    max_dist: float = math.inf

    def __call__(self, R):
        idx = np.searchsorted(self.radii, R, side="right")
        vals = np.concatenate(([0], self.values))
        return vals[idx]


def counting_function(gp, z=None, w=None, n_max: int = 0, *, sample: OrbitSample | None = None,
                      threads: int = 1, completeness: float = 0.05,
                      min_population: int = 100) -> CountingFunction:
    """Orbit counting function over ``|g| <= n_max``.

    The horizon is the largest radius at which the outermost word-length
    sphere contributes at most ``completeness`` of the count (ignoring radii
    with fewer than ``min_population`` points); beyond it the truncation in
    word length visibly depletes ``N(R)``.
    """
    sample = _truncate(_sample_for(gp, z, w, n_max, sample, threads), n_max)
    d = np.sort(sample.all_distances(), kind="stable")
    radii, idx = np.unique(d, return_index=False, return_counts=True)
    values = np.cumsum(idx)
    max_dist = float(d[-1])
    horizon = max_dist
    if n_max >= 1:
        outer = np.sort(sample.dist[n_max])
        inside = np.searchsorted(d, outer, side="right")
        frac = np.arange(1, len(outer) + 1) / inside
        over = np.flatnonzero((frac > completeness) & (inside >= min_population))
        if len(over):
            horizon = float(outer[over[0]])
    return CountingFunction(radii, values, horizon=min(horizon, max_dist), max_dist=max_dist)


@dataclass(frozen=True)
class DeltaEstimate:
    """Slope of ``log N(R)`` against ``R``.

    ``polynomial_growth`` flags windows where ``log N`` is better explained by
    ``log R`` than by ``R``: the orbit grows polynomially, the true exponent
    is 0 and ``delta`` is only a small positive artefact of the fit.
    """

    delta: float
    stderr: float
    r_min: float
    r_max: float
    points: int
    polynomial_growth: bool = False


def default_window(cf: CountingFunction, gp: GroupPresentation | None = None, w: HPoint | None = None):
    """``[2 * max generator displacement, 0.8 * horizon]``."""
    r_min = 2.0 * max_generator_displacement(gp, w) if gp is not None else 0.0
    return r_min, 0.8 * min(cf.horizon, cf.max_dist)


def delta_estimate(cf: CountingFunction, R_min: float, R_max: float, *, grid: int = 200) -> DeltaEstimate:
    """Least-squares slope of ``log N(R)`` against ``R`` on ``[R_min, R_max]``.

    The regression uses up to ``grid`` points: for each node of a uniform
    grid the nearest jump of ``N`` at or below it, so every pair ``(R, N(R))``
    is an exact point of the step function.
    """
    if not R_max > R_min:
        raise InsufficientDataError(f"empty window [{R_min}, {R_max}]")
    if math.isfinite(cf.max_dist) and R_max > 0.8 * cf.max_dist * (1 + 1e-12):
        raise InsufficientDataError(
            f"R_max={R_max:.4g} beyond 0.8 x max realized distance {cf.max_dist:.4g}"
        )
    nodes = np.linspace(R_min, R_max, grid)
    idx = np.searchsorted(cf.radii, nodes, side="right") - 1
    idx = np.unique(idx[idx >= 0])
    r = cf.radii[idx]
    n = cf.values[idx].astype(float)
    keep = (r >= R_min) & (n >= 10)
    r, n = r[keep], n[keep]
    if len(r) < 10:
        raise InsufficientDataError(
            f"only {len(r)} grid points with N(R) >= 10 in [{R_min:.4g}, {R_max:.4g}]; need 10"
        )
    fit = stats.linregress(r, np.log(n))
    if not fit.slope > 0:
        raise InsufficientDataError(f"non-positive growth slope {fit.slope:.3g}: orbit does not grow exponentially")
    poly = False
    if r[0] > 0:
        poly = stats.linregress(np.log(r), np.log(n)).rvalue ** 2 > fit.rvalue ** 2
    return DeltaEstimate(float(fit.slope), float(fit.stderr), float(R_min), float(R_max), len(r), bool(poly))


# -- distance-ball counting -------------------------------------------------


@dataclass(frozen=True)
class BallSample:
    """All orbit distances ``<= radius``, sorted, plus the pruning diagnostic."""

    radius: float
    slack: float
    distances: np.ndarray
    max_drop: float
    max_depth: int

    @property
    def pruning_safe(self) -> bool:
        return self.max_drop < self.slack


def ball_sample(gp: GroupPresentation, z: HPoint | None = None, w: HPoint | None = None,
                radius: float = 10.0, *, slack: float = 1.0, max_depth: int = 200_000) -> BallSample:
    """Orbit points with ``d(z, g w) <= radius``, with no word-length cap.

    Deep cusp excursions are followed to whatever syllable length the radius
    allows, which a word-length-truncated enumeration cannot do.
    """
    w = w or HPoint.base(gp.model)
    z = z or HPoint.base(gp.model)
    walker = _Walker(gp, z, w, track_words=False)
    d0 = distance(z, w)
    found = [np.array([d0])] if d0 <= radius else []
    drop, depth = 0.0, 0
    for k, d, dr in walker.walk_ball(radius, slack, max_depth):
        found.append(d)
        drop = max(drop, dr)
        depth = max(depth, k)
    dist = np.sort(np.concatenate(found)) if found else np.empty(0)
    return BallSample(float(radius), float(slack), dist, drop, depth)


def ball_counting_function(gp: GroupPresentation, z: HPoint | None = None, w: HPoint | None = None,
                           radius: float = 10.0, *, slack: float = 1.0,
                           sample: BallSample | None = None) -> CountingFunction:
    sample = sample or ball_sample(gp, z, w, radius, slack=slack)
    radii, counts = np.unique(sample.distances, return_counts=True)
    return CountingFunction(radii, np.cumsum(counts), horizon=sample.radius,
                            max_dist=float(radii[-1]) if len(radii) else 0.0)


def estimate_delta(gp: GroupPresentation, z: HPoint | None = None, w: HPoint | None = None, *,
                   budget: int = 1_000_000, slack: float = 1.0, start_radius: float = 8.0,
                   max_step: float = 3.0, max_radius: float = 40.0) -> tuple[DeltaEstimate, BallSample]:
    """Critical exponent from a distance ball holding roughly ``budget`` points.

    The radius grows in steps of at most ``max_step``, each sized from the
    growth rate of the previous ball (never below ``r_max / 2``). The
    regression window is ``[0.4 R, 0.8 R]`` of the final radius ``R``.
    """
    floor = gp.r_max / 2.0
    radius = start_radius
    ball = ball_sample(gp, z, w, radius, slack=slack)
    while radius < max_radius:
        n = len(ball.distances)
        if n >= budget:
            break
        try:
            cf = ball_counting_function(gp, sample=ball)
            rate = delta_estimate(cf, 0.4 * radius, 0.8 * cf.max_dist).delta
        except InsufficientDataError:
            rate = floor
        step = min(max_step, math.log(budget / max(n, 1)) / max(rate, floor), max_radius - radius)
        if step < 0.25:
            break
        radius += step
        ball = ball_sample(gp, z, w, radius, slack=slack)
    cf = ball_counting_function(gp, sample=ball)
    return delta_estimate(cf, 0.4 * radius, 0.8 * cf.max_dist), ball
