"""Independent reference implementations used to check the fast paths.

These stay deliberately naive: exhaustive enumeration for the combinatorial
search, a textbook dense Viterbi over the explicitly materialised product
chain, and the literal sum-of-minimum-fractions energy overlap.
"""

import itertools
import math

import numpy as np


def co_bruteforce(models, ybar: float) -> tuple[int, ...]:
    """Exhaustive argmin over state combinations.

    Tie-break: smaller |difference|, then smaller total power, then the
    lexicographically smallest state vector.
    """
    best = None
    for combo in itertools.product(*[range(a.K) for a in models]):
        total = sum(float(a.means[s]) for a, s in zip(models, combo))
        key = (abs(ybar - total), total, combo)
        if best is None or key < best:
            best = key
    return best[2]


def dense_viterbi(pi, A, emission_means, emission_variances, y):
    """Log-space Viterbi over an explicit chain; argmax ties to lower index.

    Returns (state path, path log-likelihood).
    """
    with np.errstate(divide="ignore"):
        log_pi = np.log(pi)
        log_A = np.log(A)

    def em(yt):
        return -0.5 * (
            math.log(2 * math.pi)
            + np.log(emission_variances)
            + (yt - emission_means) ** 2 / emission_variances
        )

    T = len(y)
    S = len(pi)
    delta = log_pi + em(y[0])
    back = np.zeros((T, S), dtype=int)
    for t in range(1, T):
        scores = delta[:, None] + log_A
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(S)] + em(y[t])
    path = np.empty(T, dtype=int)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t][path[t]]
    return path, float(np.max(delta))


def product_index(states_row, sizes) -> int:
    """Mixed-radix product index, appliance 0 most significant."""
    idx = 0
    for s, k in zip(states_row, sizes):
        idx = idx * k + int(s)
    return idx


def fte_sum_of_minima(Y: dict, Y_hat: dict) -> float:
    """Literal sum over appliances of min(actual fraction, predicted fraction)."""
    names = sorted(Y)
    actual = np.array([float(np.sum(Y[n])) for n in names])
    predicted = np.array([float(np.sum(Y_hat[n])) for n in names])
    return float(
        np.minimum(actual / actual.sum(), predicted / predicted.sum()).sum()
    )


def trapezoid_energy(t, p) -> float:
    """Plain trapezoid integral, no gap handling (for gapless fixtures)."""
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    return float(np.sum(np.diff(t) * 0.5 * (p[:-1] + p[1:])))
