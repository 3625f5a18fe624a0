"""The ordered queue of unreported exams under a selectable policy.

Three policies are supported: chronological (FIFO), urgency-priority
insertion (PRIO), and priority with maximum-waiting-time escalation
(PRIO_MAXWAIT). Ordering is stable: exams never swap places with equals.
"""

from __future__ import annotations

import bisect
import heapq
import itertools

from .model import Exam

__all__ = [
    "FIFO",
    "PRIO",
    "PRIO_MAXWAIT",
    "POLICIES",
    "DEFAULT_MAX_WAIT_MIN",
    "Worklist",
    "DuplicateExamError",
    "EmptyWorklistError",
]

FIFO = "fifo"
PRIO = "prio"
PRIO_MAXWAIT = "prio-maxwait"
POLICIES = (FIFO, PRIO, PRIO_MAXWAIT)

#: Escalation threshold (minutes) used when none is configured. Sits above
#: the routine same-day waiting ceiling of the default calibration but below
#: the band reached by false-negative stragglers on heavy days, so the
#: escalating policy caps maximum turnaround without disturbing means.
DEFAULT_MAX_WAIT_MIN = 600.0

#: Effective rank of escalated exams; sorts ahead of rank 1.
ESCALATED_RANK = 0


class DuplicateExamError(ValueError):
    """The exam is already queued."""


class EmptyWorklistError(LookupError):
    """pop_next was called on an empty worklist."""


class Worklist:
    """Policy-ordered queue of unreported exams.

    FIFO keeps exams sorted by creation time (ties by id). PRIO sorts by
    (effective urgency rank, enqueue order), so a new exam goes behind all
    exams of similar or higher urgency and ahead of strictly less urgent
    ones. Escalated exams take effective rank 0 and keep their mutual
    enqueue order. A worklist belongs to exactly one simulation run, and a
    popped exam must not be re-inserted.
    """

    def __init__(self, policy: str = FIFO, max_wait_min: float = DEFAULT_MAX_WAIT_MIN):
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
        if max_wait_min <= 0:
            raise ValueError("max_wait_min must be positive")
        self.policy = policy
        self.max_wait_min = max_wait_min
        self._heap: list[tuple[float, float, int, Exam]] = []
        self._seq = itertools.count()
        self._queued: set[int] = set()
        # Escalation candidates ordered by creation time (PRIO_MAXWAIT only);
        # _aging[_aging_head:] are still live.
        self._aging: list[Exam] = []
        self._aging_head = 0

    def __len__(self) -> int:
        return len(self._queued)

    def __contains__(self, exam: Exam) -> bool:
        return exam.id in self._queued

    def _key(self, exam: Exam, seq: int) -> tuple[float, float, int, Exam]:
        if self.policy == FIFO:
            return (exam.created_at, float(exam.id), seq, exam)
        rank = ESCALATED_RANK if exam.escalated else exam.urgency
        return (float(rank), float(seq), seq, exam)

    def insert(self, exam: Exam) -> None:
        """Queue an exam according to the policy ordering."""
        if exam.id in self._queued:
            raise DuplicateExamError(f"exam {exam.id} is already queued")
        self._queued.add(exam.id)
        heapq.heappush(self._heap, self._key(exam, next(self._seq)))
        if self.policy == PRIO_MAXWAIT and not exam.escalated:
            aging = self._aging
            if aging and exam.created_at < aging[-1].created_at:
                bisect.insort(
                    aging, exam, lo=self._aging_head,
                    key=lambda e: (e.created_at, e.id),
                )
            else:
                aging.append(exam)

    def escalate_overdue(self, now: float) -> list[int]:
        """Escalate every queued exam that has waited longer than max_wait.

        Escalated exams move ahead of all non-escalated ones, keeping their
        mutual enqueue order. Returns the escalated exam ids (empty unless
        the policy is PRIO_MAXWAIT).
        """
        if self.policy != PRIO_MAXWAIT:
            return []
        escalated: list[int] = []
        aging = self._aging
        head = self._aging_head
        while head < len(aging):
            exam = aging[head]
            if exam.id not in self._queued or exam.escalated:
                head += 1
                continue
            if now - exam.created_at <= self.max_wait_min:
                break
            head += 1
            exam.escalated = True
            # The pre-escalation heap entry goes stale; pop_next skips it.
            heapq.heappush(self._heap, self._key(exam, next(self._seq)))
            escalated.append(exam.id)
        if head > 64 and head * 2 > len(aging):
            del aging[:head]
            head = 0
        self._aging_head = head
        return escalated

    def pop_next(self) -> Exam:
        """Remove and return the head of the policy ordering."""
        while self._heap:
            rank, _, _, exam = heapq.heappop(self._heap)
            if exam.id not in self._queued:
                continue  # already popped through a newer entry
            if self.policy != FIFO and exam.escalated and rank != ESCALATED_RANK:
                continue  # superseded by the escalated entry
            self._queued.remove(exam.id)
            return exam
        raise EmptyWorklistError("worklist is empty")
