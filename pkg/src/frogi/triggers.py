"""Application managers: a cron timer and a shell-command dispatcher.

Deployed components are launched by resident managers keyed off service
signatures: the cron manager invokes the ``java.lang.Runnable`` contract of
every service carrying a ``cron.pattern`` property whose 7-field pattern
(second minute hour day-of-month month day-of-week year) matches the current
virtual-clock second; the shell manager routes a command line to the
``org.ungoverned.osgi.shell.Command`` service whose ``command.name`` property
equals the first token.

The clock is virtual (explicit advancement) so runs are reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from frogi import kernels
from frogi.errors import CronParseError, OutOfRange, UnknownCommand, WrongFieldCount
from frogi.filters import Equals, Present
from frogi.registry import ServiceRegistry

RUNNABLE_SIGNATURE = "java.lang.Runnable"
COMMAND_SIGNATURE = "org.ungoverned.osgi.shell.Command"
CRON_PROPERTY = "cron.pattern"
COMMAND_NAME_PROPERTY = "command.name"

# (field name, low, high); day-of-week is 0=Sunday .. 6=Saturday
_FIELDS = (
    ("second", 0, 59),
    ("minute", 0, 59),
    ("hour", 0, 23),
    ("day-of-month", 1, 31),
    ("month", 1, 12),
    ("day-of-week", 0, 6),
    ("year", 1970, 9999),
)


@dataclass(frozen=True)
class CronPattern:
    """Seven fields, each None (wildcard) or a frozenset of permitted values."""

    fields: tuple

    def matches(self, timestamp: int) -> bool:
        return kernels.cron_match(self.fields, time_parts(timestamp))


def parse_cron(text: str) -> CronPattern:
    tokens = text.split()
    if len(tokens) != 7:
        raise WrongFieldCount(f"expected 7 cron fields, got {len(tokens)}")
    fields = []
    for token, (name, low, high) in zip(tokens, _FIELDS):
        if token == "*":
            fields.append(None)
            continue
        values = set()
        for piece in token.split(","):
            if not piece or not piece.isdigit():
                raise CronParseError(f"{name} field has a non-integer entry {piece!r}")
            value = int(piece)
            if not low <= value <= high:
                raise OutOfRange(f"{name} value {value} outside {low}..{high}")
            values.add(value)
        fields.append(frozenset(values))
    return CronPattern(tuple(fields))


def time_parts(timestamp: int) -> tuple:
    """Broken-down UTC time as (sec, min, hour, dom, month, dow, year)."""
    tm = time.gmtime(timestamp)
    dow = (tm.tm_wday + 1) % 7  # tm_wday is Monday=0; cron wants Sunday=0
    return (tm.tm_sec, tm.tm_min, tm.tm_hour, tm.tm_mday, tm.tm_mon, dow, tm.tm_year)


class CronManager:
    """Invokes run() on every matching Runnable service each virtual second."""

    def __init__(self, registry: ServiceRegistry):
        self.registry = registry

    def tick(self, now: int) -> list[tuple[str, str]]:
        """One virtual second; returns (pid, result) in service-id order.

        The registry is snapshotted up front: a service unregistered by a
        reconfiguration triggered from one invocation is not invoked later
        in the same tick.
        """
        snapshot = self.registry.query(RUNNABLE_SIGNATURE, Present(CRON_PROPERTY))
        invocations: list[tuple[str, str]] = []
        for registration in snapshot:
            pattern_text = registration.properties.get(CRON_PROPERTY)
            pid = registration.pid or f"service-{registration.service_id}"
            try:
                pattern = parse_cron(str(pattern_text))
            except CronParseError as exc:
                invocations.append((pid, f"ERROR {exc.code}: {exc}"))
                continue
            if not pattern.matches(now):
                continue
            if self.registry.get(registration.service_id) is None:
                continue  # withdrawn by an earlier invocation this tick
            provider = registration.provider
            try:
                result = provider.invoke(RUNNABLE_SIGNATURE, "")
            except Exception as exc:  # behavior failures surface in results
                result = f"ERROR {type(exc).__name__}: {exc}"
            invocations.append((pid, result))
        return invocations


class ShellDispatcher:
    """Routes one command line to the matching Command service."""

    def __init__(self, registry: ServiceRegistry):
        self.registry = registry

    def dispatch(self, line: str) -> str:
        parts = line.split(None, 1)
        if not parts:
            raise UnknownCommand("")
        name = parts[0]
        remainder = parts[1] if len(parts) > 1 else ""
        hits = self.registry.query(COMMAND_SIGNATURE, Equals(COMMAND_NAME_PROPERTY, name))
        if not hits:
            raise UnknownCommand(name)
        return hits[0].provider.invoke(COMMAND_SIGNATURE, remainder)
