"""Pure-Python Ryser permanent, used when the compiled kernel is unavailable."""

import numpy as np


def permanent(a):
    """Permanent of a square complex matrix via Ryser's formula.

    Subsets are visited in Gray-code order so each step updates the row
    sums by one column.

    Parameters
    ----------
    a : array_like, shape (n, n)

    Returns
    -------
    complex
    """
    m = np.asarray(a, dtype=complex)
    n = m.shape[0]
    if m.ndim != 2 or m.shape[1] != n:
        raise ValueError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0.0j
    rows = np.zeros(n, dtype=complex)
    total = 0j
    prev = 0
    size = 0
    for k in range(1, 1 << n):
        gray = k ^ (k >> 1)
        diff = gray ^ prev
        j = diff.bit_length() - 1
        if gray & diff:
            rows += m[:, j]
            size += 1
        else:
            rows -= m[:, j]
            size -= 1
        prev = gray
        term = complex(np.prod(rows))
        total += -term if (n - size) % 2 else term
    return complex(total)
