"""Instance-file loading for the sequence model.

One CSV row = 500 residual values, 500 normalized parameter values and one
normalized label.  The two channels stack side by side into a (500, 2) input
so a 2-wide convolution kernel sees both at once.
"""

from __future__ import annotations

import numpy as np

SERIES_LEN = 500
ROW_WIDTH = 2 * SERIES_LEN + 1


class CorpusFormatError(ValueError):
    pass


def load_instances(path):
    """Parse an instance file into (inputs (n,500,2), labels (n,)).

    Aborts with the offending row index on malformed rows.
    """
    inputs, labels = [], []
    with open(path) as fh:
        for row_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != ROW_WIDTH:
                raise CorpusFormatError(
                    f"row {row_no}: expected {ROW_WIDTH} columns, got "
                    f"{len(parts)}")
            try:
                vals = np.asarray(parts, dtype=np.float64)
            except ValueError as exc:
                raise CorpusFormatError(f"row {row_no}: {exc}")
            x = np.stack([vals[:SERIES_LEN],
                          vals[SERIES_LEN:2 * SERIES_LEN]], axis=1)
            inputs.append(x)
            labels.append(vals[-1])
    if not inputs:
        raise CorpusFormatError(f"{path}: no instances")
    return np.asarray(inputs, dtype=np.float32), \
        np.asarray(labels, dtype=np.float32)


def split_indices(n, seed, fractions=(0.95, 0.04, 0.01)):
    """Deterministic train/validation/test index split."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_val = min(n_val, n - n_train)
    train = order[:n_train]
    val = order[n_train:n_train + n_val]
    test = order[n_train + n_val:]
    if len(val) == 0:  # tiny corpora: keep at least one held-out point
        val = train[-1:]
        train = train[:-1]
    return train, val, test
