"""Rule chromosome, decoding and the long/flat position state machine.

A chromosome ``(b1, b2, b3, b4, v1, v2, v3, v4)`` encodes two rule arms::

    entry:  [i_bull >= v1]_{b1} AND [r_bull >= v2]_{b2}  -> go long
    exit:   [i_bear >= v3]_{b3} AND [r_bear >= v4]_{b4}  -> go flat

A flag of 1 includes its condition.  Each arm must keep at least one
condition, which leaves nine valid flag assignments.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import astuple, dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, InvalidChromosomeError
from .market_data import AlignedAssetSeries, NormalizedSentimentRecord, SentimentFeatures

ENTRY_FEATURES = ("i_bull", "r_bull")
EXIT_FEATURES = ("i_bear", "r_bear")

VALID_FLAGS: tuple[tuple[int, int, int, int], ...] = tuple(
    f for f in itertools.product((0, 1), repeat=4) if f[0] + f[1] >= 1 and f[2] + f[3] >= 1
)


@dataclass(frozen=True, order=True)
class Chromosome:
    b1: int
    b2: int
    b3: int
    b4: int
    v1: float
    v2: float
    v3: float
    v4: float

    @classmethod
    def from_genes(cls, flags: Sequence[int], thresholds: Sequence[float]) -> "Chromosome":
        return cls(*(int(b) for b in flags), *(float(v) for v in thresholds))

    @classmethod
    def parse(cls, text: str) -> "Chromosome":
        """Inverse of ``str()``: ``"(1,0,1,0,0.4100,0.3700,0.5000,0.4100)"``."""
        parts = re.sub(r"[()\s]", "", text).split(",")
        if len(parts) != 8:
            raise ValueError(f"expected 8 genes, got {len(parts)}: {text!r}")
        flags = [int(p) for p in parts[:4]]
        if any(b not in (0, 1) for b in flags):
            raise ValueError(f"flags must be 0 or 1: {text!r}")
        return cls.from_genes(flags, [float(p) for p in parts[4:]])

    @property
    def flags(self) -> tuple[int, int, int, int]:
        return (self.b1, self.b2, self.b3, self.b4)

    @property
    def thresholds(self) -> tuple[float, float, float, float]:
        return (self.v1, self.v2, self.v3, self.v4)

    def genes(self) -> tuple:
        return astuple(self)

    def is_valid(self) -> bool:
        return (
            self.flags in VALID_FLAGS
            and all(0.0 <= v <= 1.0 for v in self.thresholds)
        )

    def __str__(self):
        flags = ",".join(str(b) for b in self.flags)
        values = ",".join(f"{v:.4f}" for v in self.thresholds)
        return f"({flags},{values})"


@dataclass(frozen=True)
class Condition:
    feature: str
    threshold: float

    def holds(self, day: NormalizedSentimentRecord) -> bool:
        return getattr(day, self.feature) >= self.threshold

    def __str__(self):
        return f"{self.feature} >= {self.threshold:g}"


@dataclass(frozen=True)
class RuleSet:
    entry: tuple[Condition, ...]
    exit: tuple[Condition, ...]

    def __str__(self):
        fmt = lambda arm: " AND ".join(f"IF ({c})" for c in arm)  # noqa: E731
        return f"{fmt(self.entry)} THEN long position. {fmt(self.exit)} THEN exit position."


def decode(c: Chromosome) -> RuleSet:
    if not c.is_valid():
        raise InvalidChromosomeError(f"chromosome {c} needs repair before decoding")
    genes = zip(ENTRY_FEATURES + EXIT_FEATURES, c.flags, c.thresholds)
    conds = [Condition(name, v) if b else None for name, b, v in genes]
    return RuleSet(
        entry=tuple(x for x in conds[:2] if x is not None),
        exit=tuple(x for x in conds[2:] if x is not None),
    )


def repair(c: Chromosome, rng: np.random.Generator) -> Chromosome:
    """Give each empty arm one condition, picked uniformly; clamp thresholds.

    Already valid chromosomes come back unchanged and consume no randomness.
    """
    flags = [1 if b else 0 for b in c.flags]
    for lo in (0, 2):
        if flags[lo] == 0 and flags[lo + 1] == 0:
            flags[lo + int(rng.integers(2))] = 1
    thresholds = [min(max(float(v), 0.0), 1.0) for v in c.thresholds]
    return Chromosome.from_genes(flags, thresholds)


def signals(rs: RuleSet, day: Optional[NormalizedSentimentRecord]) -> tuple[bool, bool]:
    if day is None:
        return False, False
    return all(c.holds(day) for c in rs.entry), all(c.holds(day) for c in rs.exit)


def simulate(rs: RuleSet, series: AlignedAssetSeries) -> np.ndarray:
    """Position per trading day, True when long.

    Signals seen at the close of day t set the position held on day t+1,
    so ``pos[0]`` is always flat.  Exit wins over entry on the same day.
    """
    pos = np.zeros(len(series.dates), dtype=bool)
    long_ = False
    for t, day in enumerate(series.sentiment[:-1]):
        entry, exit_ = signals(rs, day)
        if exit_:
            long_ = False
        elif entry:
            long_ = True
        pos[t + 1] = long_
    return pos


def strategy_returns(pos: np.ndarray, series: AlignedAssetSeries) -> np.ndarray:
    pos = np.asarray(pos, dtype=bool)
    if pos.shape != (len(series.dates),):
        raise DataError(f"position length {pos.shape} does not match {len(series.dates)} trading days")
    return np.where(pos[1:], series.returns, 0.0)


# Vectorised path used by the optimiser: rows are chromosomes.

def as_matrix(chromosomes: Sequence[Chromosome]) -> np.ndarray:
    return np.array([c.genes() for c in chromosomes], dtype=float).reshape(-1, 8)


def fire_batch(genes: np.ndarray, feats: SentimentFeatures) -> tuple[np.ndarray, np.ndarray]:
    """Entry and exit firing masks, shape (m, days)."""
    genes = np.asarray(genes, dtype=float)
    cols = (feats.i_bull, feats.r_bull, feats.i_bear, feats.r_bear)
    cond = []
    for k, col in enumerate(cols):
        active = genes[:, k, None] > 0.5
        # NaN (no record) compares False, so an included condition fails.
        cond.append(~active | (col[None, :] >= genes[:, 4 + k, None]))
    has = ~np.isnan(feats.i_bull)[None, :]
    return cond[0] & cond[1] & has, cond[2] & cond[3] & has


def simulate_batch(entry: np.ndarray, exit_: np.ndarray) -> np.ndarray:
    m, days = entry.shape
    # Day-major so each step touches one contiguous row.
    go_long = np.ascontiguousarray((entry & ~exit_).T)
    stay = np.ascontiguousarray(~exit_.T)
    pos = np.zeros((days, m), dtype=bool)
    for t in range(days - 1):
        np.logical_or(pos[t], go_long[t], out=pos[t + 1])
        pos[t + 1] &= stay[t]
    # C order keeps row reductions bitwise independent of the batch size.
    return np.ascontiguousarray(pos.T)


def strategy_returns_batch(genes: np.ndarray, series: AlignedAssetSeries) -> np.ndarray:
    """Strategy return matrix, shape (m, T)."""
    entry, exit_ = fire_batch(genes, series.features())
    pos = simulate_batch(entry, exit_)
    return np.where(pos[:, 1:], series.returns[None, :], 0.0)

