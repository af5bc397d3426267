"""Loop-based reimplementations used as independent oracles."""
import math
import random


def occurs(p):
    return p > 0.5


def dominant(row):
    best = 0
    for j in range(1, len(row)):
        if row[j] > row[best]:
            best = j
    return best


def all_metrics(probs, answers, accepted):
    """Every metric as plain Python values from nested lists."""
    n = len(probs)
    m = len(probs[0]) if n else 0
    out = {"occurrence": [[occurs(p) for p in row] for row in probs],
           "dominance": [dominant(row) for row in probs]}
    freq = [sum(1 for i in range(n) if occurs(probs[i][j])) for j in range(m)]
    pop = [sum(1 for i in range(n) if out["dominance"][i] == j) for j in range(m)]
    cof, aff = {}, {}
    for a in range(m):
        for b in range(a + 1, m):
            c = sum(1 for i in range(n) if occurs(probs[i][a]) and occurs(probs[i][b]))
            cof[(a, b)] = c
            mean = (freq[a] + freq[b]) / 2
            aff[(a, b)] = None if mean == 0 else c / mean
    attraction, attention, agreement = [], [], []
    for j in range(m):
        dom_rows = [i for i in range(n) if out["dominance"][i] == j]
        attraction.append(None if not dom_rows else sum(1 for i in dom_rows if answers[i] > 0) / len(dom_rows))
        occ_rows = [i for i in range(n) if occurs(probs[i][j])]
        if not occ_rows:
            attention.append(None)
            agreement.append(None)
        else:
            num = math.fsum(probs[i][j] * answers[i] for i in occ_rows)
            den = math.fsum(probs[i][j] for i in occ_rows)
            attention.append(num / den)
            agreement.append(sum(1 for i in occ_rows if accepted[i]) / len(occ_rows))
    out.update(frequency=freq, popularity=pop, co_frequency=cof, affinity=aff, attraction=attraction,
               attention=attention, agreement=agreement,
               kus_per_document=[sum(1 for p in row if occurs(p)) for row in probs])
    return out


GRID = [0.0, 0.1, 0.25, 0.5, 0.5, 0.75, 0.9, 1.0]


def random_instance(rng: random.Random, max_docs=50, max_topics=8):
    """Probabilities mixing grid values (ties, the 0.5 boundary) with continuous draws."""
    n = rng.randint(1, max_docs)
    m = rng.randint(1, max_topics)
    probs = [[rng.choice(GRID) if rng.random() < 0.4 else rng.random() for _ in range(m)] for _ in range(n)]
    answers = [rng.choice([0, 0, 1, 2, 3, 7]) for _ in range(n)]
    accepted = [a > 0 and rng.random() < 0.5 for a in answers]
    return probs, answers, accepted


def close(a, b, tol=1e-12):
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) <= tol


def g1_formula(values):
    """n^2 / ((n-1)(n-2)) * m3 / s^3 with the sample standard deviation s."""
    n = len(values)
    mean = math.fsum(values) / n
    m3 = math.fsum((v - mean) ** 3 for v in values) / n
    s = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    return n * n / ((n - 1) * (n - 2)) * m3 / s ** 3


def mw_exact_by_enumeration(a, b, alternative):
    """Exact Mann-Whitney p by enumerating every split of the pooled midranks."""
    from itertools import combinations

    pooled = list(a) + list(b)
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j + 2) / 2
        i = j + 1
    observed = sum(ranks[: len(a)])
    sums = [sum(ranks[i] for i in combo) for combo in combinations(range(len(pooled)), len(a))]
    upper = sum(1 for s in sums if s >= observed - 1e-9) / len(sums)
    lower = sum(1 for s in sums if s <= observed + 1e-9) / len(sums)
    if alternative == "a-greater":
        return upper
    if alternative == "b-greater":
        return lower
    return min(1.0, 2 * min(upper, lower))


def tail_fixtures():
    """Small samples (both n >= 5, no ties) whose exact p lies in the tail (<= 0.1)."""
    import numpy as np

    from docalign.stats import mann_whitney

    rng = np.random.default_rng(20240101)
    out = []
    while len(out) < 300:
        na, nb = int(rng.integers(5, 21)), int(rng.integers(5, 21))
        if na * nb > 400:
            continue
        a = rng.normal(rng.uniform(0.0, 2.5), 1.0, na)
        b = rng.normal(0.0, 1.0, nb)
        for alt in ("two-sided", "a-greater", "b-greater"):
            if mann_whitney(a, b, alt, method="exact").p_value <= 0.1:
                out.append((a, b, alt))
    return out
