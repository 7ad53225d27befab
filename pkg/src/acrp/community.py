"""Duplicate detection, priority scoring and ranking over published reports.

Votes and merges are ledger transaction effects; these functions are pure
reads over a LedgerState snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

from .ledger import LIVE_PUBLISHED, LedgerState
from .report import haversine_m

DEFAULT_DUPLICATE_THRESHOLD_M = 50.0


class UnknownReport(LookupError):
    pass


@dataclass(frozen=True)
class DuplicateCandidate:
    report_a: bytes
    report_b: bytes
    distance_m: float
    same_type: bool = True


def _comparable(state: LedgerState, rid: bytes) -> bool:
    rs = state.reports[rid]
    return (
        rs.phase in LIVE_PUBLISHED
        and rs.location is not None
        and rs.report_type is not None
    )


def find_duplicates(
    state: LedgerState, rid: bytes, threshold_m: float = DEFAULT_DUPLICATE_THRESHOLD_M
) -> List[DuplicateCandidate]:
    """Same-type reports within threshold_m of the given one.

    Sorted by distance ascending, ties broken by report id bytes.  Only
    non-terminal published reports with a disclosed location qualify.
    """
    if rid not in state.reports:
        raise UnknownReport(rid.hex())
    if not _comparable(state, rid):
        return []
    base = state.reports[rid]
    out = []
    for other_id, other in state.reports.items():
        if other_id == rid or not _comparable(state, other_id):
            continue
        if other.report_type != base.report_type:
            continue
        d = haversine_m(base.location, other.location)
        if d <= threshold_m:
            out.append(DuplicateCandidate(rid, other_id, d))
    out.sort(key=lambda c: (c.distance_m, c.report_b))
    return out


@dataclass(frozen=True)
class PriorityScore:
    report_id: bytes
    score: int


def priority_ranking(state: LedgerState) -> List[PriorityScore]:
    """Live published reports by vote score descending.

    Merged-in votes are already folded into the target's tally by the merge
    transaction.  Ties go to the oldest announcement, then id bytes.
    """
    live = [
        (rid, rs)
        for rid, rs in state.reports.items()
        if rs.phase in LIVE_PUBLISHED
    ]
    live.sort(key=lambda item: (-item[1].votes, item[1].announce_height, item[0]))
    return [PriorityScore(rid, rs.votes) for rid, rs in live]
