"""Pure-Python edit-distance kernel; used when the compiled one is unavailable.

Both kernels take two integer sequences and return the forward op codes of a
minimum-cost unit alignment.  Ties between equally cheap predecessors go
Match > Substitute > Delete > Insert.
"""
MATCH, SUB, DEL, INS = 0, 1, 2, 3


def distance(a, b) -> int:
    n, m = len(a), len(b)
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        ai = a[i - 1]
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            diag = prev[j - 1] + (ai != b[j - 1])
            up = prev[j] + 1
            left = cur[j - 1] + 1
            cur[j] = min(diag, up, left)
        prev = cur
    return prev[m]


def backtrace(a, b) -> bytes:
    n, m = len(a), len(b)
    # back[i][j]: op code of the preferred predecessor of cell (i, j)
    back = [bytearray(m + 1) for _ in range(n + 1)]
    row0 = back[0]
    for j in range(1, m + 1):
        row0[j] = INS
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        ai = a[i - 1]
        bi = back[i]
        bi[0] = DEL
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                best, op = prev[j - 1], MATCH
            else:
                best, op = prev[j - 1] + 1, SUB
            c = prev[j] + 1
            if c < best:
                best, op = c, DEL
            c = cur[j - 1] + 1
            if c < best:
                best, op = c, INS
            cur[j] = best
            bi[j] = op
        prev = cur

    ops = bytearray()
    i, j = n, m
    while i > 0 or j > 0:
        op = back[i][j]
        ops.append(op)
        if op == MATCH or op == SUB:
            i -= 1
            j -= 1
        elif op == DEL:
            i -= 1
        else:
            j -= 1
    ops.reverse()
    return bytes(ops)
