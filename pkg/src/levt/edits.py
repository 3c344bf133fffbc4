"""Edit environment and expert policy.

The environment is three pure functions (delete / insert placeholders /
fill) over sentinel-bracketed sequences. The expert derives optimal actions
from an insertion+deletion-only Levenshtein distance: the deletion oracle
keeps one longest-common-subsequence alignment against the reference, and
the insertion oracle reads slot gaps off the alignment of a subsequence
into the reference. Distances and alignments are computed on interiors;
sentinels are structural and never edited.
"""

from __future__ import annotations

from .errors import ContractError
from .vocab import PLH, TokenSeq


def apply_deletion(y: TokenSeq, d) -> TokenSeq:
    """Drop positions with d[i] = 1. Boundary bits must be zero."""
    if len(d) != len(y):
        raise ContractError(f"mask length {len(d)} != sequence length {len(y)}")
    if d[0] or d[-1]:
        raise ContractError("deletion mask may not touch boundary sentinels")
    return TokenSeq(t for t, di in zip(y.ids, d) if not di)


def apply_placeholders(y: TokenSeq, p, k_max=None) -> TokenSeq:
    """Insert p[i] placeholder ids into slot i (between positions i and i+1)."""
    if len(p) != len(y) - 1:
        raise ContractError(f"plan length {len(p)} != slot count {len(y) - 1}")
    if any(c < 0 for c in p):
        raise ContractError("negative placeholder count")
    if k_max is not None and any(c > k_max for c in p):
        raise ContractError(f"placeholder count above K_max={k_max}")
    out = []
    for i, t in enumerate(y.ids[:-1]):
        out.append(t)
        out.extend([PLH] * p[i])
    out.append(y.ids[-1])
    return TokenSeq(out)


def apply_fill(y: TokenSeq, t) -> TokenSeq:
    """Replace the k-th placeholder (left to right) with t[k]."""
    slots = y.placeholder_positions()
    if len(t) != len(slots):
        raise ContractError(f"{len(t)} fill tokens for {len(slots)} placeholders")
    ids = list(y.ids)
    for pos, tok in zip(slots, t):
        ids[pos] = tok
    return TokenSeq(ids)


def lev_distance(a: TokenSeq, b: TokenSeq) -> int:
    """Insertion+deletion-only edit distance between interiors (no substitution)."""
    xs, ys = a.interior, b.interior
    la, lb = len(xs), len(ys)
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev = list(range(lb + 1))
    cur = [0] * (lb + 1)
    for i in range(1, la + 1):
        cur[0] = i
        xi = xs[i - 1]
        for j in range(1, lb + 1):
            if xi == ys[j - 1]:
                cur[j] = prev[j - 1]
            else:
                cur[j] = 1 + min(prev[j], cur[j - 1])
        prev, cur = cur, prev
    return prev[lb]


def _suffix_lcs(xs, ys):
    """S[i][j] = LCS length of xs[i:] and ys[j:]."""
    la, lb = len(xs), len(ys)
    S = [[0] * (lb + 1) for _ in range(la + 1)]
    for i in range(la - 1, -1, -1):
        Si, Si1 = S[i], S[i + 1]
        xi = xs[i]
        for j in range(lb - 1, -1, -1):
            if xi == ys[j]:
                Si[j] = Si1[j + 1] + 1
            else:
                Si[j] = Si1[j] if Si1[j] >= Si[j + 1] else Si[j + 1]
    return S


def lcs_alignment(xs, ys):
    """One LCS alignment as (i, j) match pairs, keeping the earliest positions.

    Ties are broken by matching as early as possible in xs (and, within
    that, in ys), so the expert is deterministic.
    """
    S = _suffix_lcs(xs, ys)
    i = j = 0
    pairs = []
    while i < len(xs) and j < len(ys):
        if xs[i] == ys[j] and S[i][j] == S[i + 1][j + 1] + 1:
            pairs.append((i, j))
            i += 1
            j += 1
        elif S[i + 1][j] == S[i][j]:
            i += 1
        else:
            j += 1
    return pairs


def oracle_deletion(y: TokenSeq, y_star: TokenSeq):
    """Mask that deletes everything off one LCS alignment of y against y*.

    The kept interior is a subsequence of y*'s interior, and no other mask
    reaches a smaller post-deletion distance to y*.
    """
    matched = {i for i, _ in lcs_alignment(y.interior, y_star.interior)}
    mask = [0] * len(y)
    for i in range(len(y.interior)):
        if i not in matched:
            mask[i + 1] = 1
    return mask


def oracle_insertion(y: TokenSeq, y_star: TokenSeq):
    """Placeholder counts and fill tokens that rebuild y* from a subsequence y.

    Precondition: y's interior is a subsequence of y*'s interior (both
    roll-in branches guarantee it). Matching is greedy-leftmost, so gaps
    are uniquely determined. Counts are not capped here; see
    clip_insertion for the K_max treatment used in training.
    """
    sub, full = y.interior, y_star.interior
    positions = []
    j = 0
    for tok in sub:
        while j < len(full) and full[j] != tok:
            j += 1
        if j == len(full):
            raise ContractError("insertion oracle requires y interior to be a subsequence of y*")
        positions.append(j)
        j += 1
    bounds = [-1] + positions + [len(full)]
    plan = []
    fill = []
    for s in range(len(bounds) - 1):
        gap = full[bounds[s] + 1 : bounds[s + 1]]
        plan.append(len(gap))
        fill.extend(gap)
    return plan, fill


def clip_insertion(plan, fill, k_max):
    """Cap per-slot counts at k_max, dropping the tail of each oversized gap.

    Returns (plan, fill, clipped_slots); clipped_slots counts how many slots
    lost tokens, for surfacing in training logs.
    """
    clipped = 0
    new_plan = []
    new_fill = []
    pos = 0
    for c in plan:
        gap = fill[pos : pos + c]
        pos += c
        if c > k_max:
            clipped += 1
            gap = gap[:k_max]
            c = k_max
        new_plan.append(c)
        new_fill.extend(gap)
    return new_plan, new_fill, clipped


def random_deletion(y_star: TokenSeq, rng):
    """Word-drop mask: one rate q ~ Uniform[0,1] per call, applied per token."""
    n = len(y_star.interior)
    mask = [0] * len(y_star)
    if n == 0:
        return mask
    q = rng.random()
    for i in range(n):
        if rng.random() < q:
            mask[i + 1] = 1
    return mask
