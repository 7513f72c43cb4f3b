"""Pure-numpy fallback for the simplex hot kernels."""

import numpy as np

BACKEND = "numpy"


def eliminate(T, zrow, r, q):
    """Pivot on (r, q): normalize row r, clear column q from all other rows
    and from the reduced-cost row. T and zrow are updated in place.
    """
    piv = T[r, q]
    T[r] *= 1.0 / piv
    col = T[:, q].copy()
    col[r] = 0.0
    # rank-1 update; re-zero the column explicitly to kill roundoff residue
    T -= np.outer(col, T[r])
    T[:, q] = 0.0
    T[r, q] = 1.0
    zq = zrow[q]
    if zq != 0.0:
        zrow -= zq * T[r]
        zrow[q] = 0.0
