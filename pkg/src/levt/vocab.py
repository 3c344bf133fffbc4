"""Vocabulary with reserved control symbols and sentinel-guarded sequences."""

from __future__ import annotations

from collections import Counter

from .errors import ConfigError, ContractError

PAD, UNK, BOS, EOS, PLH = 0, 1, 2, 3, 4
RESERVED = ("<pad>", "<unk>", "<s>", "</s>", "<PLH>")


class TokenSeq:
    """Immutable id sequence bracketed by begin/end sentinels.

    Positions are indexed 0..n with ids[0] = begin and ids[n] = end; the
    interior may contain any non-structural ids (placeholders included).
    """

    __slots__ = ("ids",)

    def __init__(self, ids):
        ids = tuple(int(i) for i in ids)
        if len(ids) < 2 or ids[0] != BOS or ids[-1] != EOS:
            raise ContractError(f"sequence must be bracketed by sentinels, got {ids}")
        for t in ids[1:-1]:
            if t in (BOS, EOS, PAD):
                raise ContractError(f"structural id {t} inside sequence interior")
        self.ids = ids

    @classmethod
    def empty(cls):
        return cls((BOS, EOS))

    @classmethod
    def from_interior(cls, interior):
        return cls((BOS, *interior, EOS))

    @property
    def interior(self):
        return self.ids[1:-1]

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def __getitem__(self, i):
        return self.ids[i]

    def __eq__(self, other):
        return isinstance(other, TokenSeq) and self.ids == other.ids

    def __hash__(self):
        return hash(self.ids)

    def __repr__(self):
        return f"TokenSeq{self.ids}"

    def placeholder_positions(self):
        return [i for i, t in enumerate(self.ids) if t == PLH]


EMPTY_SEQ = TokenSeq((BOS, EOS))


class Vocab:
    """Bijective surface<->id map; ids 0..4 are reserved control symbols."""

    def __init__(self, surfaces):
        """`surfaces` are the non-reserved token strings, already ordered."""
        self.itos = list(RESERVED) + list(surfaces)
        self.stoi = {s: i for i, s in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ConfigError("duplicate surface forms in vocabulary")

    def __len__(self):
        return len(self.itos)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.itos == other.itos

    def id_of(self, surface):
        return self.stoi.get(surface, UNK)

    def surface_of(self, i):
        return self.itos[i]

    def content_ids(self):
        """Ids eligible as random content (everything past the reserved block)."""
        return range(len(RESERVED), len(self.itos))


def build_vocab(lines, min_count=1):
    """Count whitespace tokens; keep those with count >= min_count.

    Ids are assigned after the reserved block, by descending count and then
    lexicographically.
    """
    counts = Counter()
    n_lines = 0
    for line in lines:
        n_lines += 1
        counts.update(line.split())
    if n_lines == 0:
        raise ConfigError("cannot build a vocabulary from an empty corpus")
    for s in RESERVED:
        counts.pop(s, None)
    kept = [s for s, c in counts.items() if c >= min_count]
    kept.sort(key=lambda s: (-counts[s], s))
    return Vocab(kept)


def encode(text, vocab):
    """Whitespace-tokenize and wrap with sentinels; unknown tokens map to <unk>."""
    ids = [BOS]
    for tok in text.split():
        if tok in RESERVED:
            raise ContractError(f"reserved surface form {tok!r} in input text")
        ids.append(vocab.id_of(tok))
    ids.append(EOS)
    return TokenSeq(ids)


def decode(seq, vocab):
    """Render the interior; placeholders appear literally as <PLH> for traces."""
    return " ".join(vocab.surface_of(i) for i in seq.interior)
