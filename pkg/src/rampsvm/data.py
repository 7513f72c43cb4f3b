"""Dataset ingestion, synthetic generation, and same-class distance statistics."""

import csv

import numpy as np

_NORMS = ("L1", "L2", "LINF")


class Dataset:
    """Labeled sample: X is n x d, y has entries in {-1, +1}.

    Same-class maximum distances are computed lazily and cached per norm,
    since the tightening strategies query every instance.
    """

    def __init__(self, X, y, name="data"):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        n, d = X.shape
        if n < 2 or d < 1:
            raise ValueError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
        if y.shape != (n,):
            raise ValueError(f"y must have length {n}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if np.all(y == 1) or np.all(y == -1):
            raise ValueError("both classes must be nonempty")
        self.X = X
        self.y = y
        self.name = name
        self._dist_cache = {}

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def __repr__(self):
        return f"Dataset({self.name!r}, n={self.n}, d={self.d})"


class SyntheticSpec:
    """Parameters for the synthetic two-Gaussian generator."""

    def __init__(self, n, d, class_balance=0.5, outlier_rate=0.0,
                 separation=4.0, seed=0):
        if n < 4:
            raise ValueError("n >= 4 required")
        if not 0.0 < class_balance < 1.0:
            raise ValueError("class_balance must be in (0, 1)")
        if not 0.0 <= outlier_rate <= 1.0:
            raise ValueError("outlier_rate must be in [0, 1]")
        if separation <= 0:
            raise ValueError("separation must be positive")
        self.n = int(n)
        self.d = int(d)
        self.class_balance = float(class_balance)
        self.outlier_rate = float(outlier_rate)
        self.separation = float(separation)
        self.seed = int(seed)


def load_csv(path, label_column=0):
    """Read a dense CSV dataset.

    Parameters
    ----------
    path : str
        File with one row per instance, features plus one +/-1 label field.
    label_column : int
        Index of the label field within each row (default first).

    Returns
    -------
    Dataset with rows in file order.
    """
    rows = []
    labels = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            row = [c.strip() for c in row if c.strip() != ""]
            if not row:
                continue
            if label_column >= len(row):
                raise ValueError(
                    f"row {lineno}: label column {label_column} out of range")
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                bad = next(i for i, c in enumerate(row)
                           if not _parses_float(c))
                raise ValueError(
                    f"row {lineno}, column {bad}: not a number: {row[bad]!r}"
                ) from exc
            lab = vals.pop(label_column)
            if lab not in (-1.0, 1.0):
                raise ValueError(f"row {lineno}: label must be -1 or +1, got {lab}")
            rows.append(vals)
            labels.append(lab)
    if not rows:
        raise ValueError("no rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"inconsistent row widths: {sorted(widths)}")
    import os
    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(np.array(rows), np.array(labels), name=name)


def _parses_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def write_csv(ds, path):
    """Write label-first CSV with full float round-trip precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i in range(ds.n):
            writer.writerow([repr(float(ds.y[i]))] +
                            [repr(float(v)) for v in ds.X[i]])


def load_sparse(path):
    """Read LIBSVM-style lines: "label idx:val idx:val ..." (1-based indices).

    Indices must be strictly increasing within a line; absent indices are 0.
    """
    labels = []
    entries = []
    d = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                lab = float(parts[0])
            except ValueError:
                raise ValueError(f"line {lineno}: bad label {parts[0]!r}")
            if lab not in (-1.0, 1.0):
                raise ValueError(f"line {lineno}: label must be -1 or +1")
            row = []
            prev = 0
            for tok in parts[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ValueError(f"line {lineno}: bad entry {tok!r}")
                if idx <= prev:
                    raise ValueError(f"line {lineno}: indices not increasing")
                prev = idx
                row.append((idx, val))
                d = max(d, idx)
            labels.append(lab)
            entries.append(row)
    if not entries:
        raise ValueError("no rows")
    X = np.zeros((len(entries), max(d, 1)))
    for i, row in enumerate(entries):
        for idx, val in row:
            X[i, idx - 1] = val
    import os
    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(X, np.array(labels), name=name)


def generate_synthetic(spec):
    """Two isotropic Gaussian clouds at +/- separation/2 along axis 1.

    Deterministic for a fixed seed. outlier_rate flips ceil(rate * n)
    labels, chosen uniformly without replacement.
    """
    rng = np.random.default_rng(spec.seed)
    n_pos = int(np.floor(spec.n * spec.class_balance))
    n_pos = min(max(n_pos, 1), spec.n - 1)
    n_neg = spec.n - n_pos
    X = rng.standard_normal((spec.n, spec.d))
    y = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])
    X[:n_pos, 0] += spec.separation / 2.0
    X[n_pos:, 0] -= spec.separation / 2.0
    if spec.outlier_rate > 0:
        n_flip = int(np.ceil(spec.outlier_rate * spec.n))
        flip = rng.choice(spec.n, size=n_flip, replace=False)
        y[flip] *= -1
        # a flip may empty a class on tiny n; undo the last flips if so
        while np.all(y == 1) or np.all(y == -1):
            y[flip[-1]] *= -1
            flip = flip[:-1]
    name = (f"synthetic-n{spec.n}-d{spec.d}-b{spec.class_balance:g}"
            f"-o{spec.outlier_rate:g}-s{spec.separation:g}-seed{spec.seed}")
    return Dataset(X, y, name=name)


def same_class_max_distance(ds, i, norm):
    """max over j with y_j == y_i of ||x_i - x_j|| in the requested norm.

    j == i is allowed and contributes 0, so a singleton class yields 0.
    """
    if norm not in _NORMS:
        raise ValueError(f"norm must be one of {_NORMS}")
    key = norm
    if key not in ds._dist_cache:
        ds._dist_cache[key] = _all_same_class_distances(ds, norm)
    return float(ds._dist_cache[key][i])


def _all_same_class_distances(ds, norm):
    out = np.zeros(ds.n)
    for cls in (-1.0, 1.0):
        idx = np.flatnonzero(ds.y == cls)
        if idx.size == 0:
            continue
        P = ds.X[idx]
        diff = P[:, None, :] - P[None, :, :]
        if norm == "L1":
            D = np.abs(diff).sum(axis=2)
        elif norm == "L2":
            D = np.sqrt((diff ** 2).sum(axis=2))
        else:
            D = np.abs(diff).max(axis=2)
        out[idx] = D.max(axis=1)
    return out
