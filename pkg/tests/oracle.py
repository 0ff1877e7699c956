"""Unoptimized reference computations, independent of the solver under test.

Bundles are rebuilt here from scratch as slot sets so that nothing in the
package's bundle numbering or search code is reused.
"""

import itertools

TOL = 1e-9


def bundles(T):
    out = [frozenset()]
    for d in range(1, T + 1):
        for t in range(1, T - d + 2):
            out.append(frozenset(range(t, t + d)))
    return out


def brute_force(bids, capacity, masks=None):
    """Scan every profile in lexicographic order; keep the first strict improvement."""
    T = len(capacity)
    universe = bundles(T)
    n = len(bids)
    best, best_profile = None, None
    for profile in itertools.product(range(1, len(universe) + 1), repeat=n):
        if masks is not None and not all(masks[k][j - 1] for k, j in enumerate(profile)):
            continue
        load = {t: 0 for t in range(1, T + 1)}
        for j in profile:
            for t in universe[j - 1]:
                load[t] += 1
        if any(load[t] > capacity[t - 1] for t in load):
            continue
        value = 0.0
        for b, j in zip(bids, profile):
            value += b[j - 1]
        if best is None or value > best + TOL:
            best, best_profile = value, profile
    return best if best is not None else 0.0, best_profile if best_profile is not None else ()


def brute_vcg(bids, capacity, reduced=None):
    """VCG payments; ``reduced(i)`` gives the capacity for EV i's counterfactual."""
    reduced = reduced or (lambda i: capacity)
    welfare, profile = brute_force(bids, capacity)
    payments = []
    for i in range(len(bids)):
        others = [b for k, b in enumerate(bids) if k != i]
        absent, _ = brute_force(others, reduced(i)) if others else (0.0, ())
        present = sum(b[j - 1] for k, (b, j) in enumerate(zip(bids, profile)) if k != i)
        payments.append(absent - present)
    return welfare, profile, payments


def slot_values_to_bundles(slot_values, rule):
    T = len(slot_values)
    out = []
    for b in bundles(T):
        if not b:
            out.append(0.0)
        elif rule == "max":
            out.append(max(slot_values[t - 1] for t in b))
        else:
            out.append(sum(slot_values[t - 1] for t in sorted(b)))
    return tuple(out)
