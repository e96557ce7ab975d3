"""Independent reference computations used by the test-suite.

Everything here is written straight from the defining sums, with plain
Python loops and no shared code with the package.
"""

from itertools import combinations_with_replacement

TABLE1_LEVELS = (10.0, 11.0, 12.0, 13.0, 14.0, 15.0)
TABLE1_PROBS = (0.10, 0.15, 0.25, 0.25, 0.15, 0.10)
TABLE1_VARIANCES = tuple(v / 3.0 for v in TABLE1_LEVELS)

REFERENCE_QUANTILES = {
    "T1a": 2.3456, "T1b": 2.6310, "T2a": 4.2060, "T2b": 4.2263,
    "T3a": 5.4066, "T3b": 9.1198, "T3c": 12.5916,
}
# p_k tau_k^2 for the gamma example: 1/3, 0.55, 1, 13/12, 0.7, 0.5
TABLE1_STEP_VARIANCES = tuple(p * v for p, v in zip(TABLE1_PROBS, TABLE1_VARIANCES))

GRID_PREDICTIONS = (1.0, 2.0, 3.0)
GRID_RESPONSES = (1.0, 2.5, 4.0)


def exhaustive_samples(max_n):
    """Every multiset of (y, pi) grid pairs with 1 <= n <= max_n."""
    pairs = [(y, p) for y in GRID_RESPONSES for p in GRID_PREDICTIONS]
    for n in range(1, max_n + 1):
        yield from combinations_with_replacement(pairs, n)


def brute_force(pairs, levels, probs, variances):
    """All statistics by double loops over observations and levels."""
    n = len(pairs)
    K = len(levels)
    S, T, Tm, U = [], [], [], []
    ybar = sum(y for y, _ in pairs) / n
    pbar = sum(p for _, p in pairs) / n
    for k in range(K):
        s = t = tm = u = 0.0
        for y, p in pairs:
            if p == levels[k]:
                s += y - p
            if p <= levels[k]:
                t += y - p
                u += y / ybar - p / pbar
            if p >= levels[k]:
                tm += y - p
        S.append(s / n)
        T.append(t / n)
        Tm.append(tm / n)
        U.append(u / n)
    alpha = [0.0]
    for k in range(K):
        alpha.append(alpha[-1] + probs[k])
    abc = 0.0
    for k in range(K - 1):
        abc += probs[k + 1] * T[k]
    v2w = v2u = chi2 = 0.0
    for k in range(K):
        v2w += (1.0 - alpha[k]) * S[k] ** 2
        v2u += S[k] ** 2
        chi2 += S[k] ** 2 / (probs[k] * variances[k])
    return {
        "S": S, "T": T, "T_mirrored": Tm, "U": U, "abc": abc,
        "v2_weighted": v2w, "v2_unweighted": v2u, "chi2": n * chi2,
        "y_bar": ybar, "pi_bar": pbar,
    }
