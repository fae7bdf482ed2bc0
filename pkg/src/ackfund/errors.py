"""Exception types and the diagnostics collector shared across the pipeline."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

logger = logging.getLogger("ackfund")


class AckfundError(Exception):
    """Base class for all package errors."""


class ValidationError(AckfundError, ValueError):
    """Input data violates a documented invariant (duplicate ids, bad ranges...)."""


class UndefinedMetricError(AckfundError, ArithmeticError):
    """A metric was requested whose denominator is zero."""


class NotFoundError(AckfundError, KeyError):
    pass


class UsageError(AckfundError, ValueError):
    pass


@dataclass
class Diagnostics:
    """Collects non-fatal problems (skipped lines, unmatched names, ...).

    Messages are grouped by ``code`` so that counts can be merged regardless of
    the order in which records were processed.
    """

    messages: list[tuple[str, str]] = field(default_factory=list)

    def add(self, code: str, message: str) -> None:
        self.messages.append((code, message))
        logger.debug("%s: %s", code, message)

    def counts(self) -> Counter:
        return Counter(code for code, _ in self.messages)

    def merge(self, other: Diagnostics) -> Diagnostics:
        return Diagnostics(self.messages + other.messages)

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self):
        return iter(self.messages)
