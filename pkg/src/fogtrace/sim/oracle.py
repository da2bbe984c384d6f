"""Whole-log reference for the mobile suspect filter.

Works per code instead of per scan: split each code's sightings into runs
of consecutive scans, walk every run once to find the scans where the
contact conditions fire, then apply the once-per-day and consent rules to
the merged, time-ordered candidate list. Used only to check
``MobileState.on_scan`` against.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Callable, Iterable, Mapping, Sequence

from ..ids import ASU, RSU, SSU, ReferenceCode
from ..mobile import CLOSE_CONTACT_S, PROXIMITY_CONTACT_S, ConsentFlags
from ..radio import CLOSE_CONTACT_M, SignalObservation
from ..records import ContactRecord

ScanLog = Sequence[tuple[int, Iterable[SignalObservation]]]


def filter_log(log: ScanLog, store_contacts: bool = True,
               own_code: Callable[[int], ReferenceCode] | None = None) -> list[ContactRecord]:
    """Final file for one device's log; a code appears at most once per scan."""
    if not store_contacts:
        return []
    skip = {ASU, RSU, SSU}
    sightings = defaultdict(list)  # code -> [(scan index, time, distance)]
    for index, (t, observations) in enumerate(log):
        own = own_code(t) if own_code else None
        for code, distance, _ in observations:
            if code != own and code not in skip:
                sightings[code].append((index, t, distance))

    candidates = []  # (scan index, code, distance, time, elapsed)
    for code, seen in sightings.items():
        previous = -2
        for index, t, distance in seen:
            if index != previous + 1:  # a gap starts a new run
                first_time, anchor_distance = t, distance
            else:
                elapsed = t - first_time
                if distance <= CLOSE_CONTACT_M and anchor_distance <= CLOSE_CONTACT_M:
                    fires = elapsed >= CLOSE_CONTACT_S
                else:
                    fires = elapsed >= PROXIMITY_CONTACT_S
                if fires:
                    candidates.append((index, code, distance, t, elapsed))
                else:
                    anchor_distance = distance
            previous = index

    # the streaming filter visits a scan in list order; rank same-scan candidates that way
    slots = {}
    for index in {c[0] for c in candidates}:
        slots[index] = {obs[0]: slot for slot, obs in enumerate(log[index][1])}
    candidates.sort(key=lambda c: (c[0], slots[c[0]][c[1]]))

    final, taken = [], set()
    for _, code, distance, t, elapsed in candidates:
        key = (code, t // 86400)
        if key not in taken:
            taken.add(key)
            final.append(ContactRecord(code, distance, t, elapsed))
    return final


def batch_filter_oracle(scan_logs: Mapping[str, ScanLog], consent: Mapping[str, ConsentFlags],
                        own_codes: Mapping[str, Callable[[int], ReferenceCode]] | None = None,
                        ) -> dict[str, list[ContactRecord]]:
    """Final file per agent for a whole set of scan logs."""
    own_codes = own_codes or {}
    return {
        agent: filter_log(log, consent[agent].store_contacts, own_codes.get(agent))
        for agent, log in scan_logs.items()
    }
