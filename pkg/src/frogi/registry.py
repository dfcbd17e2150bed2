"""Thread-safe service registry with filter queries and synchronous events.

Providers publish under one or more interface signatures with a property map
and an optional persistent ``service.pid``; consumers query by signature plus
filter and subscribe to change notifications. Events are delivered inside the
mutating call, after state has been updated (UNREGISTERING: before removal
takes effect), with no state lock held so listeners may re-enter the registry.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Callable, Mapping

from frogi.errors import (
    DuplicatePid,
    InvalidProperties,
    UnknownService,
    UnknownSubscription,
)
from frogi.filters import FilterNode, eval_filter

#: Keys the registry assigns itself; rejected in caller-supplied maps.
RESERVED_KEYS = ("service.id", "service.pid", "objectClass")


def normalize_properties(properties: Mapping | None) -> dict:
    """Validate and copy a property map (values: str | int | list of str)."""
    result: dict = {}
    for name, value in (properties or {}).items():
        if not isinstance(name, str) or not name:
            raise InvalidProperties(f"attribute name must be a non-empty string: {name!r}")
        if name in RESERVED_KEYS:
            raise InvalidProperties(f"attribute {name!r} is registry-assigned")
        if isinstance(value, bool) or not isinstance(value, (str, int, list, tuple)):
            raise InvalidProperties(f"unsupported value type for {name!r}: {type(value).__name__}")
        if isinstance(value, (list, tuple)):
            if not all(isinstance(el, str) for el in value):
                raise InvalidProperties(f"list value for {name!r} must contain only strings")
            value = tuple(value)
        result[name] = value
    return result


@dataclass(frozen=True)
class ServiceRegistration:
    """Immutable snapshot of one published service."""

    service_id: int
    pid: str | None
    signatures: tuple[str, ...]
    properties: Mapping
    provider: object = field(compare=False, default=None)

    def __post_init__(self):
        # Freeze the public mapping; keep the raw dict for the eval kernel.
        raw = dict(self.properties)
        object.__setattr__(self, "_eval_props", raw)
        object.__setattr__(self, "properties", MappingProxyType(raw))

    def matches(self, signature: str | None, filter: FilterNode | None) -> bool:
        if signature is not None and signature not in self.signatures:
            return False
        return filter is None or eval_filter(filter, self._eval_props)


class ServiceEventKind(Enum):
    REGISTERED = "REGISTERED"
    MODIFIED = "MODIFIED"
    UNREGISTERING = "UNREGISTERING"


@dataclass(frozen=True)
class ServiceEvent:
    kind: ServiceEventKind
    registration: ServiceRegistration


Listener = Callable[[ServiceEvent], None]


@dataclass(frozen=True)
class Subscription:
    token: int
    signature: str | None
    filter: FilterNode | None
    listener: Listener = field(compare=False)


class ServiceRegistry:
    """The brokerage substrate: publish, query, notify."""

    def __init__(self):
        self._lock = threading.Lock()
        self._delivery = threading.RLock()
        self._by_id: dict[int, ServiceRegistration] = {}
        self._ids = itertools.count(1)
        self._tokens = itertools.count(1)
        self._subs: dict[int, Subscription] = {}
        self._dying: set[int] = set()

    # -- publication ---------------------------------------------------------

    def register(
        self,
        signatures: list[str] | tuple[str, ...],
        pid: str | None = None,
        properties: Mapping | None = None,
        provider: object = None,
    ) -> ServiceRegistration:
        """Publish a service; REGISTERED is delivered before this returns."""
        sigs = tuple(signatures)
        if not sigs or not all(isinstance(s, str) and s for s in sigs):
            raise InvalidProperties("signatures must be a non-empty list of strings")
        props = normalize_properties(properties)
        with self._delivery:
            with self._lock:
                if pid is not None:
                    for reg in self._by_id.values():
                        if reg.pid == pid:
                            raise DuplicatePid(pid)
                service_id = next(self._ids)
                full = dict(props)
                full["service.id"] = service_id
                full["objectClass"] = sigs
                if pid is not None:
                    full["service.pid"] = pid
                registration = ServiceRegistration(
                    service_id=service_id,
                    pid=pid,
                    signatures=sigs,
                    properties=full,
                    provider=provider,
                )
                self._by_id[service_id] = registration
                targets = self._matching_listeners(registration)
            self._dispatch(ServiceEventKind.REGISTERED, registration, targets)
        return registration

    def modify(self, service_id: int, properties: Mapping) -> ServiceRegistration:
        """Replace a registration's caller properties; dispatches MODIFIED."""
        props = normalize_properties(properties)
        with self._delivery:
            with self._lock:
                old = self._by_id.get(service_id)
                if old is None or service_id in self._dying:
                    raise UnknownService(service_id)
                full = dict(props)
                full["service.id"] = old.service_id
                full["objectClass"] = old.signatures
                if old.pid is not None:
                    full["service.pid"] = old.pid
                registration = ServiceRegistration(
                    service_id=old.service_id,
                    pid=old.pid,
                    signatures=old.signatures,
                    properties=full,
                    provider=old.provider,
                )
                self._by_id[service_id] = registration
                targets = self._matching_listeners(registration, previous=old)
            self._dispatch(ServiceEventKind.MODIFIED, registration, targets)
        return registration

    def unregister(self, service_id: int) -> None:
        """Withdraw a service; UNREGISTERING fires before removal."""
        with self._delivery:
            with self._lock:
                registration = self._by_id.get(service_id)
                if registration is None or service_id in self._dying:
                    raise UnknownService(service_id)
                self._dying.add(service_id)
                targets = self._matching_listeners(registration)
            try:
                self._dispatch(ServiceEventKind.UNREGISTERING, registration, targets)
            finally:
                with self._lock:
                    self._by_id.pop(service_id, None)
                    self._dying.discard(service_id)

    # -- lookup --------------------------------------------------------------

    def query(
        self, signature: str | None = None, filter: FilterNode | None = None
    ) -> list[ServiceRegistration]:
        """Live registrations matching signature and filter, by ascending id."""
        with self._lock:
            hits = [r for r in self._by_id.values() if r.matches(signature, filter)]
        hits.sort(key=lambda r: r.service_id)
        return hits

    def get(self, service_id: int) -> ServiceRegistration | None:
        with self._lock:
            return self._by_id.get(service_id)

    def get_by_pid(self, pid: str) -> ServiceRegistration | None:
        with self._lock:
            for reg in self._by_id.values():
                if reg.pid == pid:
                    return reg
        return None

    # -- notification --------------------------------------------------------

    def subscribe(
        self,
        signature: str | None = None,
        filter: FilterNode | None = None,
        listener: Listener = None,
    ) -> Subscription:
        if listener is None:
            raise TypeError("listener is required")
        with self._lock:
            sub = Subscription(next(self._tokens), signature, filter, listener)
            self._subs[sub.token] = sub
        return sub

    def unsubscribe(self, handle: Subscription) -> None:
        with self._lock:
            if self._subs.pop(handle.token, None) is None:
                raise UnknownSubscription(f"stale subscription {handle.token}")

    def _matching_listeners(
        self, registration: ServiceRegistration, previous: ServiceRegistration | None = None
    ) -> list[Listener]:
        # MODIFIED reaches listeners matching either the old or new snapshot,
        # so watchers see registrations drift out of their constraint.
        out = []
        for sub in self._subs.values():
            if registration.matches(sub.signature, sub.filter):
                out.append(sub.listener)
            elif previous is not None and previous.matches(sub.signature, sub.filter):
                out.append(sub.listener)
        return out

    def _dispatch(
        self,
        kind: ServiceEventKind,
        registration: ServiceRegistration,
        targets: list[Listener],
    ) -> None:
        event = ServiceEvent(kind, registration)
        for listener in targets:
            listener(event)
