"""Embedding spaces, bilingual dictionaries, and their text formats.

Matrices follow the column-per-word convention: an ``EmbeddingSpace`` with
``n`` words in ``d`` dimensions stores a ``(d, n)`` float64 array. Word index
order is file order, which by convention is frequency order (most frequent
first); refinement and neighbor pools rely on that.
"""

from __future__ import annotations

import io
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True, eq=False)
class EmbeddingSpace:
    vocab: tuple[str, ...]
    matrix: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        vocab = tuple(self.vocab)
        matrix = np.array(self.matrix, dtype=np.float64, copy=True)
        if matrix.ndim != 2:
            raise DataError(f"matrix must be 2-D, got shape {matrix.shape}")
        d, n = matrix.shape
        if n < 1 or d < 1:
            raise DataError(f"empty embedding space (d={d}, n={n})")
        if len(vocab) != n:
            raise DataError(f"vocab has {len(vocab)} words but matrix has {n} columns")
        index = {}
        for i, word in enumerate(vocab):
            if word in index:
                raise DataError(f"duplicate word {word!r} at index {i}")
            index[word] = i
        if not np.all(np.isfinite(matrix)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(matrix), axis=0))[0])
            raise DataError(f"non-finite value in column {bad} ({vocab[bad]!r})")
        matrix.flags.writeable = False
        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "index", index)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return self.n

    def __contains__(self, word):
        return word in self.index

    def vector(self, word: str) -> np.ndarray:
        return self.matrix[:, self.index[word]]

    def with_matrix(self, matrix: np.ndarray) -> "EmbeddingSpace":
        """Same vocabulary, new vectors."""
        return EmbeddingSpace(self.vocab, matrix)

    def truncate(self, max_words: int) -> "EmbeddingSpace":
        """Keep the ``max_words`` most frequent words."""
        if max_words >= self.n:
            return self
        return EmbeddingSpace(self.vocab[:max_words], self.matrix[:, :max_words])

    def equals(self, other: "EmbeddingSpace", rtol: float = 0.0, atol: float = 0.0) -> bool:
        return (
            self.vocab == other.vocab
            and self.matrix.shape == other.matrix.shape
            and np.allclose(self.matrix, other.matrix, rtol=rtol, atol=atol)
        )


@dataclass(frozen=True)
class SeedDictionary:
    """Ordered (source_index, target_index) translation pairs."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((int(i), int(j)) for i, j in self.pairs))

    def __len__(self):
        return len(self.pairs)

    def unique(self) -> "SeedDictionary":
        """De-duplicated pairs in ascending (source, target) order."""
        return SeedDictionary(tuple(sorted(set(self.pairs))))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.pairs:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        arr = np.asarray(self.pairs, dtype=np.int64)
        return arr[:, 0], arr[:, 1]

    def check_bounds(self, n_src: int, n_tgt: int) -> None:
        src, tgt = self.arrays()
        if src.size and (src.min() < 0 or src.max() >= n_src):
            raise DataError(f"source index out of range [0, {n_src})")
        if tgt.size and (tgt.min() < 0 or tgt.max() >= n_tgt):
            raise DataError(f"target index out of range [0, {n_tgt})")

    def to_multi(self) -> "MultiDictionary":
        groups = defaultdict(set)
        for i, j in self.pairs:
            groups[i].add(j)
        return MultiDictionary({i: frozenset(js) for i, js in groups.items()})


@dataclass(frozen=True)
class MultiDictionary:
    """Source index -> set of acceptable target indices (evaluation dictionaries)."""

    entries: dict[int, frozenset[int]]

    def __post_init__(self):
        entries = {int(k): frozenset(int(t) for t in v) for k, v in self.entries.items()}
        for k, v in entries.items():
            if not v:
                raise DataError(f"source index {k} has an empty target set")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def sources(self) -> list[int]:
        return sorted(self.entries)

    def to_seed(self) -> SeedDictionary:
        return SeedDictionary(tuple((i, j) for i in self.sources() for j in sorted(self.entries[i])))


# --------------------------------------------------------------------------
# .vec text format


def parse_vec(stream: Iterable[str], max_vocab: int | None = None) -> EmbeddingSpace:
    """Read fastText ``.vec`` text: a ``"n d"`` header, then ``word f1 ... fd`` rows.

    ``max_vocab`` stops after that many rows (header counts are then only
    checked for the rows that were read). Later duplicates of a word are
    dropped with a warning.
    """
    lines = iter(stream)
    try:
        header = next(lines)
    except StopIteration:
        raise DataError("empty input: missing header line") from None
    parts = header.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise DataError(f"malformed header on line 1: {header.rstrip()!r}")
    n_header, d = int(parts[0]), int(parts[1])
    if d < 1:
        raise DataError(f"header declares dimension {d}")
    limit = n_header if max_vocab is None else min(n_header, max_vocab)

    vocab: list[str] = []
    seen: set[str] = set()
    rows: list[np.ndarray] = []
    n_read = 0
    for lineno, line in enumerate(lines, start=2):
        if n_read >= limit:
            if max_vocab is None and line.strip():
                raise DataError(f"line {lineno}: more rows than the header's {n_header}")
            if max_vocab is not None:
                break
            continue
        tokens = line.split()
        if not tokens:
            continue
        n_read += 1
        if len(tokens) != d + 1:
            raise DataError(
                f"line {lineno}: expected a word and {d} values, got {len(tokens) - 1} values"
            )
        word = tokens[0]
        try:
            values = np.array(tokens[1:], dtype=np.float64)
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric value for {word!r}") from None
        if not np.all(np.isfinite(values)):
            raise DataError(f"line {lineno}: non-finite value for {word!r}")
        if word in seen:
            logger.warning("line %d: duplicate word %r dropped", lineno, word)
            continue
        seen.add(word)
        vocab.append(word)
        rows.append(values)
    if n_read < limit:
        raise DataError(f"header declares {n_header} rows but only {n_read} found")
    if not vocab:
        raise DataError("empty vocabulary")
    return EmbeddingSpace(tuple(vocab), np.stack(rows, axis=1))


def write_vec(space: EmbeddingSpace, stream: TextIO) -> None:
    stream.write(f"{space.n} {space.dim}\n")
    cols = space.matrix.T
    for word, vec in zip(space.vocab, cols):
        stream.write(word + " " + " ".join(FLOAT_FORMAT % v for v in vec) + "\n")


def dumps_vec(space: EmbeddingSpace) -> str:
    buf = io.StringIO()
    write_vec(space, buf)
    return buf.getvalue()


def loads_vec(text: str, max_vocab: int | None = None) -> EmbeddingSpace:
    return parse_vec(io.StringIO(text), max_vocab=max_vocab)


def load_vec(path, max_vocab: int | None = None) -> EmbeddingSpace:
    with open(path, encoding="utf-8", errors="replace") as fh:
        return parse_vec(fh, max_vocab=max_vocab)


def save_vec(space: EmbeddingSpace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_vec(space, fh)


# --------------------------------------------------------------------------
# dictionaries


def load_dictionary(
    stream: Iterable[str], src: EmbeddingSpace, tgt: EmbeddingSpace
) -> tuple[SeedDictionary, MultiDictionary, int]:
    """Parse ``src_word tgt_word`` lines against two vocabularies.

    Returns the in-vocabulary pairs (file order), the same pairs grouped by
    source word, and the number of lines skipped for out-of-vocabulary words.
    """
    pairs = []
    skipped = 0
    for lineno, line in enumerate(stream, start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) < 2:
            raise DataError(f"dictionary line {lineno}: expected two words, got {line.rstrip()!r}")
        s, t = tokens[0], tokens[1]
        if s in src.index and t in tgt.index:
            pairs.append((src.index[s], tgt.index[t]))
        else:
            skipped += 1
    seed = SeedDictionary(tuple(pairs))
    multi = seed.to_multi() if pairs else MultiDictionary({})
    return seed, multi, skipped


def read_dictionary(path, src: EmbeddingSpace, tgt: EmbeddingSpace):
    with open(path, encoding="utf-8", errors="replace") as fh:
        return load_dictionary(fh, src, tgt)


def write_dictionary(pairs: SeedDictionary, src: EmbeddingSpace, tgt: EmbeddingSpace, stream: TextIO) -> None:
    for i, j in pairs.pairs:
        stream.write(f"{src.vocab[i]} {tgt.vocab[j]}\n")


def save_dictionary(pairs: SeedDictionary, src, tgt, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_dictionary(pairs, src, tgt, fh)
