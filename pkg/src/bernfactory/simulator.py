"""Exact f(p)-coin simulation from a certified dyadic ladder.

At a rung of degree n the 2^n C(n,k) equally likely (path, fair bits)
configurations with k heads are split into A_n(k) accept-1 units,
R_n(k) accept-0 units and the rest, which continue.  Between rungs
m < n every configuration of the new rung extends a configuration of the
old one; accepted configurations stay accepted and the remaining
("free") configurations of each heads class are ordered by

    (prefix heads, prefix continuing rank, suffix colex rank, suffix fair bits).

Fresh accept-1 units are taken from the bottom of that order and fresh
accept-0 units from the top.  Condition (iv) of the ladder is exactly the
statement that there are enough fresh units on both sides.
"""

from __future__ import annotations

import json
import math
import random
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._exact import binomial_row, convolve
from .bernstein import BernsteinPoly, EnvelopePair, sub
from .errors import ArgumentError, ContractError, LadderConsistencyError

ACCEPT1, ACCEPT0, CONTINUE = "accept-1", "accept-0", "continue"


@dataclass(frozen=True)
class StageTable:
    level: int
    accept: tuple[int, ...]
    reject: tuple[int, ...]
    cont: tuple[int, ...]

    def total(self, k: int) -> int:
        return binomial_row(self.level)[k] << self.level


def stage_tables(pairs: Sequence[EnvelopePair]) -> list[StageTable]:
    tables = []
    for pair in pairs:
        n = pair.level
        if not pair.is_dyadic():
            raise ContractError(f"envelope at level {n} is not dyadic")
        a = pair.lower.mantissas(n)
        u = pair.upper.mantissas(n)
        row = binomial_row(n)
        total = [c << n for c in row]
        rej = [t - x for t, x in zip(total, u)]
        cont = [x - y for x, y in zip(u, a)]
        if min(a) < 0 or min(rej) < 0 or min(cont) < 0:
            raise ContractError(f"envelope at level {n} violates 0 <= g <= h <= 1")
        tables.append(StageTable(n, tuple(a), tuple(rej), tuple(cont)))
    return tables


class _Transition:
    """Precomputed counts for moving from one stage to the next."""

    def __init__(self, prev_level: int, prev_accept, prev_reject, prev_cont, table: StageTable):
        d = table.level - prev_level
        if d <= 0:
            raise ContractError("rung levels must increase")
        self.d = d
        self.prev_cont = prev_cont
        self.row = binomial_row(d)
        inh1 = [x << d for x in convolve(prev_accept, self.row)]
        inh0 = [x << d for x in convolve(prev_reject, self.row)]
        self.free = [x << d for x in convolve(prev_cont, self.row)]
        self.new1 = [a - i for a, i in zip(table.accept, inh1)]
        self.new0 = [r - i for r, i in zip(table.reject, inh0)]
        for k, (x, y) in enumerate(zip(self.new1, self.new0)):
            if x < 0 or y < 0:
                side = "accept" if x < 0 else "reject"
                raise LadderConsistencyError(
                    f"inherited {side} units exceed the stage count at level {table.level}, k={k}"
                )
        self.table = table
        self._bounds: dict[int, tuple[int, int, int, int]] = {}

    def block(self, kp: int, k: int) -> int:
        j = kp - k
        if not 0 <= j <= self.d:
            return 0
        return self.prev_cont[k] * self.row[j] << self.d

    def offset(self, kp: int, k: int) -> int:
        lo = max(0, kp - self.d)
        return sum(self.block(kp, kappa) for kappa in range(lo, k))

    def bounds(self, kp: int) -> tuple[int, int, int, int]:
        """(k1, o1, k0, o0): the first block not wholly accept-1 and its offset,
        and the last block not wholly accept-0 and its offset."""
        cached = self._bounds.get(kp)
        if cached is not None:
            return cached
        lo, hi = max(0, kp - self.d), min(kp, len(self.prev_cont) - 1)
        b1 = self.new1[kp]
        b0 = self.free[kp] - self.new0[kp]
        k1, o1, o = hi + 1, 0, 0
        for kappa in range(lo, hi + 1):
            size = self.block(kp, kappa)
            if o + size > b1:
                k1, o1 = kappa, o
                break
            o += size
        k0, o0, top = lo - 1, 0, self.free[kp]
        for kappa in range(hi, lo - 1, -1):
            start = top - self.block(kp, kappa)
            if start < b0:
                k0, o0 = kappa, start
                break
            top = start
        out = (k1, o1, k0, o0)
        self._bounds[kp] = out
        return out

    def classify(self, kp: int, rank: int) -> tuple[str, int]:
        if rank < self.new1[kp]:
            return ACCEPT1, rank
        if rank >= self.free[kp] - self.new0[kp]:
            return ACCEPT0, rank
        return CONTINUE, rank - self.new1[kp]


def colex_rank(bits: Sequence[int]) -> int:
    """Rank of a bit string among strings of the same length and weight."""
    rank, ones = 0, 0
    for pos, b in enumerate(bits):
        if b:
            ones += 1
            if pos >= ones:
                rank += math.comb(pos, ones)
    return rank


def colex_unrank(rank: int, length: int, weight: int) -> list[int]:
    bits = [0] * length
    for pos in range(length - 1, -1, -1):
        if weight == 0:
            break
        c = math.comb(pos, weight)
        if rank >= c:
            bits[pos] = 1
            rank -= c
            weight -= 1
    return bits


def bits_to_int(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | b
    return v


@dataclass
class SimulationState:
    stage: int = 0
    heads: int = 0
    rank: int = 0
    path: list[int] = field(default_factory=list)
    fair: list[int] = field(default_factory=list)
    history: list[str] = field(default_factory=list)


@dataclass
class StepRecord:
    level: int
    heads: int
    free_rank: int
    decision: str


@dataclass
class SimulationResult:
    output: int | None
    tosses: int
    timed_out: bool
    transcript: list[StepRecord]


class NestedUnitEngine:
    def __init__(self, tables: Sequence[StageTable]):
        if not tables:
            raise ArgumentError("need at least one stage")
        self.tables = list(tables)
        self.transitions = []
        prev = (0, (0,), (0,), (1,))
        for t in self.tables:
            self.transitions.append(_Transition(prev[0], prev[1], prev[2], prev[3], t))
            prev = (t.level, t.accept, t.reject, t.cont)

    @classmethod
    def from_pairs(cls, pairs: Sequence[EnvelopePair]) -> "NestedUnitEngine":
        return cls(stage_tables(pairs))

    @property
    def levels(self) -> list[int]:
        return [t.level for t in self.tables]

    def inherited_accept(self, stage: int) -> list[int]:
        tr = self.transitions[stage]
        return [a - x for a, x in zip(self.tables[stage].accept, tr.new1)]

    def step(self, state: SimulationState, p_bits: Sequence[int], fair_bits: Sequence[int]) -> tuple[str, SimulationState]:
        if state.stage >= len(self.tables):
            raise ArgumentError("no stages left")
        tr = self.transitions[state.stage]
        if len(p_bits) != tr.d or len(fair_bits) != tr.d:
            raise ArgumentError(f"stage needs {tr.d} new bits of each coin")
        j = sum(p_bits)
        kp = state.heads + j
        free_rank = (
            tr.offset(kp, state.heads)
            + ((state.rank * tr.row[j] + colex_rank(p_bits)) << tr.d)
            + bits_to_int(fair_bits)
        )
        decision, new_rank = tr.classify(kp, free_rank)
        new_state = SimulationState(
            state.stage + 1,
            kp,
            new_rank,
            state.path + list(p_bits),
            state.fair + list(fair_bits),
            state.history + [decision],
        )
        return decision, new_state

    def run_bits(self, p_source, fair_source, max_stages: int | None = None) -> SimulationResult:
        limit = len(self.tables) if max_stages is None else min(max_stages, len(self.tables))
        state = SimulationState()
        transcript = []
        for _ in range(limit):
            tr = self.transitions[state.stage]
            p_bits = p_source.bits(tr.d)
            fair_bits = fair_source.bits(tr.d)
            decision, state = self.step(state, p_bits, fair_bits)
            transcript.append(StepRecord(tr.table.level, state.heads, state.rank, decision))
            if decision != CONTINUE:
                return SimulationResult(1 if decision == ACCEPT1 else 0, tr.table.level, False, transcript)
        return SimulationResult(None, self.tables[limit - 1].level, True, transcript)

    def run_fast(self, p: float, replications: int, rng: np.random.Generator, py_rng: random.Random):
        """Vectorised replications; returns (stage index or -1 on timeout, output) arrays.

        Only the heads count of a continuing run is tracked.  Given its heads
        class every continuing unit is equally likely, so the unit reached
        after the next batch is uniform inside the block of free ranks that
        its class feeds; that block is located through cached boundaries.
        """
        stage_of = np.full(replications, -1, dtype=np.int64)
        output = np.zeros(replications, dtype=np.int8)
        alive = np.arange(replications)
        heads = np.zeros(replications, dtype=np.int64)
        for s, tr in enumerate(self.transitions):
            if alive.size == 0:
                break
            j = rng.binomial(tr.d, p, size=alive.size)
            kp = heads[alive] + j
            keep = []
            if s == 0 and tr.table.level <= 40 and (1 << tr.table.level) * max(tr.row) < 2**62:
                total = np.array([c << tr.d for c in tr.row], dtype=np.int64)
                new1 = np.array(tr.new1, dtype=np.int64)
                top = np.array([f - r for f, r in zip(tr.free, tr.new0)], dtype=np.int64)
                x = rng.integers(0, total[kp])
                one = x < new1[kp]
                zero = x >= top[kp]
                stage_of[alive[one | zero]] = s
                output[alive[one]] = 1
                mask = ~(one | zero)
                heads[alive] = kp
                alive = alive[mask]
                continue
            prev_heads = heads[alive]
            for idx, k, kk in zip(alive.tolist(), prev_heads.tolist(), kp.tolist()):
                k1, o1, k0, o0 = tr.bounds(kk)
                if k < k1:
                    decision = ACCEPT1
                elif k > k0:
                    decision = ACCEPT0
                elif k == k1 or k == k0:
                    base = o1 if k == k1 else o0
                    rank = base + py_rng.randrange(tr.block(kk, k))
                    decision, _ = tr.classify(kk, rank)
                else:
                    decision = CONTINUE
                if decision == CONTINUE:
                    keep.append(idx)
                    heads[idx] = kk
                else:
                    stage_of[idx] = s
                    output[idx] = 1 if decision == ACCEPT1 else 0
            alive = np.array(keep, dtype=np.int64)
        return stage_of, output


class PCoin:
    """Seeded pseudo-random p-coin."""

    def __init__(self, p: float, seed: int | None = None):
        if not 0 <= p <= 1:
            raise ArgumentError("p must lie in [0, 1]")
        self.p = float(p)
        self._rng = random.Random(seed)

    def next_bit(self) -> int:
        return 1 if self._rng.random() < self.p else 0

    def bits(self, count: int) -> list[int]:
        return [self.next_bit() for _ in range(count)]


class FairCoin:
    def __init__(self, seed: int | None = None):
        self._rng = random.Random(seed)

    def next_bit(self) -> int:
        return self._rng.getrandbits(1)

    def bits(self, count: int) -> list[int]:
        return [self.next_bit() for _ in range(count)]


class ReplayCoin:
    """Replays a fixed bit sequence; running out is a contract error."""

    def __init__(self, bits: Iterable[int]):
        self._bits = list(bits)
        self._pos = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayCoin":
        return cls(read_bit_file(path))

    def next_bit(self) -> int:
        if self._pos >= len(self._bits):
            raise ContractError("replay bit stream exhausted")
        b = self._bits[self._pos]
        self._pos += 1
        return b

    def bits(self, count: int) -> list[int]:
        return [self.next_bit() for _ in range(count)]


def write_bit_file(path: str | Path, bits: Sequence[int]) -> None:
    """8-byte big-endian bit count, then the bits packed most significant first."""
    packed = np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes() if len(bits) else b""
    Path(path).write_bytes(struct.pack(">Q", len(bits)) + packed)


def read_bit_file(path: str | Path) -> list[int]:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ContractError("bit file shorter than its header")
    (count,) = struct.unpack(">Q", raw[:8])
    body = np.frombuffer(raw[8:], dtype=np.uint8)
    if body.size * 8 < count:
        raise ContractError("bit file shorter than its declared length")
    return np.unpackbits(body)[:count].astype(int).tolist()


def simulate(ladder, p_source, fair_source, max_rung: int | None = None) -> SimulationResult:
    engine = ladder if isinstance(ladder, NestedUnitEngine) else NestedUnitEngine.from_pairs(_pairs_of(ladder))
    return engine.run_bits(p_source, fair_source, max_rung)


def _pairs_of(ladder) -> list[EnvelopePair]:
    return list(getattr(ladder, "pairs", ladder))


def wilson_interval(successes: int, trials: int, z: float = 3.0) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class TailCurve:
    p: float
    levels: list[int]
    survivors: list[int]
    ones: int
    zeros: int
    timeouts: int
    replications: int

    def survival(self) -> list[float]:
        if self.replications == 0:
            return [0.0] * len(self.levels)
        return [s / self.replications for s in self.survivors]

    def survival_bounds(self, z: float = 3.0) -> list[tuple[float, float]]:
        return [wilson_interval(s, self.replications, z) for s in self.survivors]

    def output_frequency(self) -> float:
        decided = self.ones + self.zeros
        return self.ones / decided if decided else float("nan")

    def output_interval(self, z: float = 3.0) -> tuple[float, float]:
        return wilson_interval(self.ones, self.ones + self.zeros, z)

    def slope(self) -> float | None:
        pts = [(n, s) for n, s in zip(self.levels, self.survivors) if s > 0]
        if len(pts) < 2:
            return None
        ns, ss = zip(*pts)
        slope, _ = np.polyfit(np.log(ns), np.log(ss), 1)
        return float(slope)

    def merge(self, other: "TailCurve") -> "TailCurve":
        if other.p != self.p or other.levels != self.levels:
            raise ArgumentError("curves describe different experiments")
        return TailCurve(
            self.p,
            self.levels,
            [a + b for a, b in zip(self.survivors, other.survivors)],
            self.ones + other.ones,
            self.zeros + other.zeros,
            self.timeouts + other.timeouts,
            self.replications + other.replications,
        )


@dataclass
class TailStats:
    curves: list[TailCurve]
    seed: int | None = None
    seeds: list[list[int]] = field(default_factory=list)
    source: str = ""

    def curve(self, p: float) -> TailCurve:
        for c in self.curves:
            if c.p == p:
                return c
        raise KeyError(p)

    def merge(self, other: "TailStats") -> "TailStats":
        mine = {c.p: c for c in self.curves}
        for c in other.curves:
            mine[c.p] = mine[c.p].merge(c) if c.p in mine else c
        return TailStats(sorted(mine.values(), key=lambda c: c.p), self.seed, self.seeds + other.seeds, self.source)

    def csv_rows(self, z: float = 3.0) -> list[dict]:
        rows = []
        for c in self.curves:
            for n, s, (lo, hi) in zip(c.levels, c.survivors, c.survival_bounds(z)):
                rows.append({"p": c.p, "n": n, "survivors": s, "replications": c.replications, "lower": lo, "upper": hi})
        return rows

    def to_json(self, z: float = 3.0) -> dict:
        return {
            "seed": self.seed,
            "source": self.source,
            "z": z,
            "curves": [
                {
                    **asdict(c),
                    "output_frequency": c.output_frequency(),
                    "output_interval": list(c.output_interval(z)),
                    "slope": c.slope(),
                }
                for c in self.curves
            ],
        }


CHUNK = 20000


def _chunk_seeds(seed: int, p_index: int, replications: int) -> list[tuple[list[int], int]]:
    out = []
    for c, start in enumerate(range(0, replications, CHUNK)):
        out.append(([seed, p_index, c], min(CHUNK, replications - start)))
    return out


def _run_chunk(engine: NestedUnitEngine, p: float, entropy: list[int], count: int) -> TailCurve:
    ss = np.random.SeedSequence(entropy)
    rng = np.random.Generator(np.random.PCG64(ss))
    py_rng = random.Random(int(ss.generate_state(2, np.uint64)[0]))
    stage_of, output = engine.run_fast(p, count, rng, py_rng)
    levels = engine.levels
    survivors = [int(np.sum((stage_of > i) | (stage_of < 0))) for i in range(len(levels))]
    decided = stage_of >= 0
    ones = int(np.sum(output[decided] == 1))
    return TailCurve(p, levels, survivors, ones, int(np.sum(decided)) - ones, int(np.sum(~decided)), count)


_WORKER_ENGINE: NestedUnitEngine | None = None


def _init_worker(tables):
    global _WORKER_ENGINE
    _WORKER_ENGINE = NestedUnitEngine(tables)


def _worker(args):
    p, entropy, count = args
    return _run_chunk(_WORKER_ENGINE, p, entropy, count)


def monte_carlo_tails(
    ladder, ps: Sequence[float], replications: int, seed: int = 0, threads: int = 1
) -> TailStats:
    """Empirical survival curves and output frequencies, deterministic in seed.

    Replications are split into fixed-size chunks whose seeds depend only
    on (seed, p index, chunk index), so the result does not depend on the
    number of worker processes.
    """
    engine = ladder if isinstance(ladder, NestedUnitEngine) else NestedUnitEngine.from_pairs(_pairs_of(ladder))
    jobs = []
    for i, p in enumerate(ps):
        for entropy, count in _chunk_seeds(seed, i, replications):
            jobs.append((float(p), entropy, count))
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(threads, initializer=_init_worker, initargs=(engine.tables,)) as pool:
            parts = list(pool.map(_worker, jobs))
    else:
        parts = [_run_chunk(engine, *job) for job in jobs]
    curves = {}
    for part in parts:
        curves[part.p] = curves[part.p].merge(part) if part.p in curves else part
    empty = [TailCurve(float(p), engine.levels, [0] * len(engine.levels), 0, 0, 0, 0) for p in ps if float(p) not in curves]
    ordered = [curves.get(float(p)) for p in ps if float(p) in curves] + empty
    return TailStats(ordered, seed, [list(j[1]) for j in jobs])


def chi_square_pvalue(stats: TailStats, f) -> float:
    """Goodness of fit of output-1 counts against f(p) across the curves."""
    from scipy.stats import chi2

    total, dof = 0.0, 0
    for c in stats.curves:
        n = c.ones + c.zeros
        if n == 0:
            continue
        q = f(c.p)
        total += (c.ones - n * q) ** 2 / (n * q * (1 - q))
        dof += 1
    return float(chi2.sf(total, dof)) if dof else 1.0


@dataclass
class ExhaustiveReport:
    levels: list[int]
    accepted_by_level: list[BernsteinPoly]
    rejected_by_level: list[BernsteinPoly]
    survival_by_level: list[BernsteinPoly]
    mismatches: list[str]

    @property
    def ok(self) -> bool:
        return not self.mismatches


def exhaustive_oracle(pairs: Sequence[EnvelopePair], max_level: int = 12) -> ExhaustiveReport:
    """Enumerate every (path, fair bits) configuration of a small ladder.

    Checks per-class unit counts, nesting across rungs, and that the
    probabilities of accepting 1 by level n and of running past n are
    exactly g_n and h_n - g_n.
    """
    engine = NestedUnitEngine.from_pairs(pairs)
    levels = engine.levels
    if levels[-1] > max_level:
        raise ArgumentError(f"exhaustive enumeration limited to level {max_level}")
    top = levels[-1]
    n_stages = len(levels)
    acc1 = [[0] * (lv + 1) for lv in levels]
    acc0 = [[0] * (lv + 1) for lv in levels]
    cont = [[0] * (lv + 1) for lv in levels]
    mismatches: list[str] = []
    for path_int in range(1 << top):
        path = [(path_int >> (top - 1 - i)) & 1 for i in range(top)]
        for fair_int in range(1 << top):
            fair = [(fair_int >> (top - 1 - i)) & 1 for i in range(top)]
            state = SimulationState()
            status = CONTINUE
            for s in range(n_stages):
                lv = levels[s]
                heads = sum(path[:lv])
                if status == CONTINUE:
                    lo = 0 if s == 0 else levels[s - 1]
                    status, state = engine.step(state, path[lo:lv], fair[lo:lv])
                bucket = {ACCEPT1: acc1, ACCEPT0: acc0, CONTINUE: cont}[status]
                bucket[s][heads] += 1
    result_acc, result_rej, result_surv = [], [], []
    for s, (lv, table) in enumerate(zip(levels, engine.tables)):
        # every level-lv configuration was visited 4^(top-lv) times
        mult = 4 ** (top - lv)
        a = [x // mult for x in acc1[s]]
        r = [x // mult for x in acc0[s]]
        c = [x // mult for x in cont[s]]
        if list(table.accept) != a:
            mismatches.append(f"level {lv}: accept-1 counts {a} != {list(table.accept)}")
        if list(table.reject) != r:
            mismatches.append(f"level {lv}: accept-0 counts {r} != {list(table.reject)}")
        if list(table.cont) != c:
            mismatches.append(f"level {lv}: continuing counts {c} != {list(table.cont)}")
        pa = BernsteinPoly.from_scaled(lv, a, 1 << lv)
        pr = BernsteinPoly.from_scaled(lv, r, 1 << lv)
        pc = BernsteinPoly.from_scaled(lv, c, 1 << lv)
        pair = pairs[s]
        if pa != pair.lower:
            mismatches.append(f"level {lv}: P(accept 1 by n) != g_n")
        if pc != sub(pair.upper, pair.lower):
            mismatches.append(f"level {lv}: P(N > n) != h_n - g_n")
        if pr != sub(BernsteinPoly.constant(1, lv), pair.upper):
            mismatches.append(f"level {lv}: P(accept 0 by n) != 1 - h_n")
        result_acc.append(pa)
        result_rej.append(pr)
        result_surv.append(pc)
    return ExhaustiveReport(levels, result_acc, result_rej, result_surv, mismatches)


def tail_stats_to_csv(stats: TailStats, z: float = 3.0) -> str:
    rows = stats.csv_rows(z)
    lines = ["p,n,survivors,replications,lower,upper"]
    for r in rows:
        lines.append(f"{r['p']},{r['n']},{r['survivors']},{r['replications']},{r['lower']:.8g},{r['upper']:.8g}")
    return "\n".join(lines) + "\n"


def tail_stats_to_json(stats: TailStats, z: float = 3.0) -> str:
    return json.dumps(stats.to_json(z), indent=2, sort_keys=True)


def exact_acceptance(pairs: Sequence[EnvelopePair], p) -> list[tuple[Fraction, Fraction]]:
    """(g_n(p), (h_n - g_n)(p)) per rung, for comparison with Monte Carlo."""
    from .bernstein import evaluate

    return [(evaluate(pp.lower, p), evaluate(pp.gap(), p)) for pp in pairs]
