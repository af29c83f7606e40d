"""Pure-Python edit-distance kernels.

Same contract as the compiled ``_align_ext`` module; selected automatically
when the extension is not built. Sequences are integer token ids.
"""

MATCH, SUBSTITUTE, DELETE, INSERT = 0, 1, 2, 3


def edit_distance(ref, hyp):
    n, m = len(ref), len(hyp)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        r = ref[i - 1]
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            if r == hyp[j - 1]:
                best = prev[j - 1]
            else:
                best = prev[j - 1] + 1
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        prev = cur
    return prev[m]


def alignment_ops(ref, hyp):
    """Return the optimal alignment as ``(kind, ref_index, hyp_index)`` triples.

    Missing indices are ``-1``. Ties during the backtrace prefer match, then
    substitute, then delete, then insert.
    """
    n, m = len(ref), len(hyp)
    table = [[0] * (m + 1) for _ in range(n + 1)]
    for j in range(m + 1):
        table[0][j] = j
    for i in range(1, n + 1):
        row, up = table[i], table[i - 1]
        row[0] = i
        r = ref[i - 1]
        for j in range(1, m + 1):
            best = up[j - 1] + (0 if r == hyp[j - 1] else 1)
            if up[j] + 1 < best:
                best = up[j] + 1
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1
            row[j] = best

    ops = []
    i, j = n, m
    while i > 0 or j > 0:
        cost = table[i][j]
        if i > 0 and j > 0:
            diag = table[i - 1][j - 1]
            if ref[i - 1] == hyp[j - 1] and diag == cost:
                ops.append((MATCH, i - 1, j - 1))
                i -= 1
                j -= 1
                continue
            if diag + 1 == cost:
                ops.append((SUBSTITUTE, i - 1, j - 1))
                i -= 1
                j -= 1
                continue
        if i > 0 and table[i - 1][j] + 1 == cost:
            ops.append((DELETE, i - 1, -1))
            i -= 1
        else:
            ops.append((INSERT, -1, j - 1))
            j -= 1
    ops.reverse()
    return ops
