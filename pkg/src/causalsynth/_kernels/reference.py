"""NumPy reference implementation of the sampling kernels.

This is the fallback used when the compiled extension is missing.
Outputs must be bit-identical to ``_fastcore``: both count cumulative
entries that are <= u over the same float64 cumulative tables, and
both generate noise with the same integer arithmetic.
"""

from __future__ import annotations

import numpy as np

from ..rng import DOMAIN_NOISE, GOLDEN, domain_key, fold_array, mix64_array

_INV_2_53 = 2.0 ** -53


def noise_block(seed: int, first: int, count: int, nvars: int) -> np.ndarray:
    """Noise matrix for skeletons ``first .. first+count-1``.

    Row j holds the noise vector of skeleton ``first + j``; column i
    is the i-th declared variable.  Entry (j, i) equals the i-th draw
    of the per-skeleton noise stream, so batch and scalar sampling
    agree exactly.
    """
    keys = fold_array(
        domain_key(seed, DOMAIN_NOISE),
        np.arange(first, first + count, dtype=np.uint64),
    )
    steps = np.arange(1, nvars + 1, dtype=np.uint64) * np.uint64(GOLDEN)
    words = mix64_array(keys[:, None] + steps[None, :])
    return (words >> np.uint64(11)) * _INV_2_53


def ancestral_codes(order, par_flat, par_off, stride_flat, cum_flat, cum_off,
                    cards, u) -> np.ndarray:
    """Evaluate all mechanisms over a noise matrix.

    Parameters are the flattened model arrays (see the compiled-model
    builder): topological order over declaration indices, per-variable
    parent index and stride slices, concatenated cumulative CPT rows,
    and per-variable offsets into them.  ``u`` has shape (m, nvars).
    Returns the state-index matrix with the same shape.
    """
    m, n = u.shape
    codes = np.zeros((m, n), dtype=np.int64)
    for i in order:
        lo, hi = par_off[i], par_off[i + 1]
        card = int(cards[i])
        if hi > lo:
            rows = (codes[:, par_flat[lo:hi]] * stride_flat[lo:hi]).sum(axis=1)
        else:
            rows = np.zeros(m, dtype=np.int64)
        base = cum_off[i] + rows * card
        block = cum_flat[base[:, None] + np.arange(card)]
        codes[:, i] = np.sum(block <= u[:, i][:, None], axis=1)
    return codes
