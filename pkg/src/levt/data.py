"""Corpus files, synthetic task generation, corruption, and batching.

Corpora are plain text, one sequence per line, whitespace-separated tokens.
Parallel corpora are aligned file pairs (.src/.tgt); refinement corpora add
a third aligned .init file holding the sequences to start decoding from.
Files end with a newline; empty lines are invalid.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import CompatibilityError, ConfigError
from .vocab import BOS, EOS, PAD, TokenSeq, Vocab, encode

SYNTH_TASKS = ("copy", "reverse", "sort", "toy-translate")


def read_lines(path):
    with open(path, encoding="utf-8") as f:
        text = f.read()
    if text and not text.endswith("\n"):
        raise ConfigError(f"{path}: corpus files must end with a newline")
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            raise ConfigError(f"{path}:{i + 1}: empty lines are invalid")
    return lines


def write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


@dataclass
class ParallelCorpus:
    sources: list
    targets: list
    inits: list | None = None

    def __len__(self):
        return len(self.sources)


def load_parallel(prefix, with_init=False):
    """Read `prefix`.src / `prefix`.tgt (and `.init`) as aligned raw lines."""
    sources = read_lines(prefix + ".src")
    targets = read_lines(prefix + ".tgt")
    if len(sources) != len(targets):
        raise CompatibilityError(
            f"{prefix}: .src has {len(sources)} lines but .tgt has {len(targets)}"
        )
    inits = None
    if with_init:
        inits = read_lines(prefix + ".init")
        if len(inits) != len(sources):
            raise CompatibilityError(
                f"{prefix}: .init has {len(inits)} lines but .src has {len(sources)}"
            )
    return ParallelCorpus(sources, targets, inits)


def encode_corpus(corpus, vocab):
    """Encode every line; returns lists of TokenSeq aligned like the corpus."""
    src = [encode(s, vocab) for s in corpus.sources]
    tgt = [encode(s, vocab) for s in corpus.targets]
    init = [encode(s, vocab) for s in corpus.inits] if corpus.inits is not None else None
    return ParallelCorpus(src, tgt, init)


# ---------------------------------------------------------------------------
# Synthetic tasks
# ---------------------------------------------------------------------------


def _translate_table(vocab_size, rng):
    perm = rng.permutation(vocab_size)
    return {str(i + 1): str(perm[i] + 1) for i in range(vocab_size)}


def make_synthetic_corpus(task, vocab_size, length_range, n_pairs, seed):
    """Deterministic parallel corpus for a toy task.

    Tokens are the numerals "1".."vocab_size". toy-translate applies a fixed
    seed-derived token permutation and reverses the result.
    """
    if task not in SYNTH_TASKS:
        raise ConfigError(f"unknown task {task!r}; choose from {SYNTH_TASKS}")
    if vocab_size < 2:
        raise ConfigError("vocab_size must be >= 2")
    lo, hi = length_range
    if not (1 <= lo <= hi):
        raise ConfigError(f"bad length range {length_range}")
    rng = np.random.default_rng(seed)
    table = _translate_table(vocab_size, rng) if task == "toy-translate" else None
    sources, targets = [], []
    for _ in range(n_pairs):
        n = int(rng.integers(lo, hi + 1))
        toks = [str(int(t) + 1) for t in rng.integers(0, vocab_size, size=n)]
        if task == "copy":
            out = toks
        elif task == "reverse":
            out = toks[::-1]
        elif task == "sort":
            out = sorted(toks, key=int)
        else:
            out = [table[t] for t in toks][::-1]
        sources.append(" ".join(toks))
        targets.append(" ".join(out))
    return ParallelCorpus(sources, targets)


def corrupt(seq, drop_prob, insert_prob, vocab, rng):
    """Noise a sequence: drop interior tokens, insert random in-vocab tokens.

    Each interior token is independently deleted with drop_prob, and a
    random content token is independently inserted after each interior
    position with insert_prob (whether or not its token survived, so the
    expected length change is exactly n * (insert_prob - drop_prob)).
    Sentinels are never touched.
    """
    if not (0.0 <= drop_prob <= 1.0 and 0.0 <= insert_prob <= 1.0):
        raise ConfigError("corruption probabilities must lie in [0, 1]")
    content = vocab.content_ids()
    if len(content) == 0:
        raise ConfigError("vocabulary has no content tokens to insert")
    out = [BOS]
    for tok in seq.interior:
        if not (drop_prob > 0 and rng.random() < drop_prob):
            out.append(tok)
        if insert_prob > 0 and rng.random() < insert_prob:
            out.append(int(rng.integers(content.start, content.stop)))
    out.append(EOS)
    return TokenSeq(out)


def corrupt_line(line, drop_prob, insert_prob, vocab, rng, ensure_changed=False, max_tries=100):
    """Corrupt a raw text line via its encoding; optionally redraw until changed."""
    seq = encode(line, vocab)
    noisy = corrupt(seq, drop_prob, insert_prob, vocab, rng)
    tries = 1
    while ensure_changed and noisy == seq and tries < max_tries:
        noisy = corrupt(seq, drop_prob, insert_prob, vocab, rng)
        tries += 1
    from .vocab import decode as _decode

    return _decode(noisy, vocab)


def generate_corpus_files(
    task,
    out_dir,
    sizes,
    vocab_size,
    length_range,
    seed,
    refine=False,
    drop_prob=0.2,
    insert_prob=0.1,
    ensure_corrupted=False,
):
    """Write {train,valid,test}.{src,tgt[,init]} under out_dir; deterministic."""
    os.makedirs(out_dir, exist_ok=True)
    names = ("train", "valid", "test")
    written = []
    for split, n_pairs, sub_seed in zip(names, sizes, (seed, seed + 1, seed + 2)):
        corpus = make_synthetic_corpus(task, vocab_size, length_range, n_pairs, sub_seed)
        base = os.path.join(out_dir, split)
        write_lines(base + ".src", corpus.sources)
        write_lines(base + ".tgt", corpus.targets)
        written.extend([base + ".src", base + ".tgt"])
        if refine:
            vocab = Vocab([str(i + 1) for i in range(vocab_size)])
            rng = np.random.default_rng(sub_seed + 10_000)
            inits = [
                corrupt_line(t, drop_prob, insert_prob, vocab, rng, ensure_corrupted)
                for t in corpus.targets
            ]
            write_lines(base + ".init", inits)
            written.append(base + ".init")
    return written


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------


def pad_batch(seqs, n_max=None):
    """Stack TokenSeqs into an int32 (B, T) matrix padded after </s>.

    Returns (ids, lengths); lengths are true position counts per row.
    """
    lengths = np.array([len(s) for s in seqs], dtype=np.int64)
    T = int(lengths.max())
    if n_max is not None and T > n_max:
        raise ConfigError(f"sequence length {T} exceeds N_max={n_max}")
    ids = np.full((len(seqs), T), PAD, dtype=np.int32)
    for r, s in enumerate(seqs):
        ids[r, : len(s)] = s.ids
    return ids, lengths


def iter_batches(n_items, batch_size, rng=None):
    """Yield index arrays of size <= batch_size; shuffled when rng is given."""
    order = np.arange(n_items)
    if rng is not None:
        rng.shuffle(order)
    for start in range(0, n_items, batch_size):
        yield order[start : start + batch_size]
