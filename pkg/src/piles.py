"""Bus-to-pile assignment (C^PEB -> C^FCP)."""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError


def assign_piles(
    on_charge: Sequence[int], current: Dict[int, int], pile_count: int
) -> Tuple[List[int], Dict[int, int]]:
    """Map one interval's charging buses onto piles.

    A bus that keeps charging keeps its pile; a bus that starts takes the
    lowest-numbered free pile, in ascending bus order.

    Args:
        on_charge: 0/1 per bus for the interval
        current: bus -> pile for buses charging in the previous interval
        pile_count: Number of piles at the station

    Returns:
        (pile state column, new bus -> pile assignment)
    """
    charging = [n for n, state in enumerate(on_charge) if state]
    if len(charging) > pile_count:
        raise DomainError(f"{len(charging)} buses on charge but only {pile_count} piles")
    assignment = {n: current[n] for n in charging if n in current}
    taken = set(assignment.values())
    free = (m for m in range(pile_count) if m not in taken)
    for n in charging:
        if n not in assignment:
            assignment[n] = next(free)
    column = [0] * pile_count
    for pile in assignment.values():
        column[pile] = 1
    return column, assignment


def pile_matrix(peb_on_charge: np.ndarray, pile_count: int, initial: Optional[Dict[int, int]] = None) -> np.ndarray:
    """Apply ``assign_piles`` column by column over a whole schedule."""
    peb = np.asarray(peb_on_charge, dtype=int)
    interval_count = peb.shape[1] if peb.ndim == 2 else 0
    piles = np.zeros((pile_count, interval_count), dtype=int)
    assignment = dict(initial or {})
    for k in range(interval_count):
        column, assignment = assign_piles(peb[:, k], assignment, pile_count)
        piles[:, k] = column
    return piles
