"""Runtime assembly: brokered wiring, lifecycle policies, reconfiguration.

Every bundle-root instance is handed to the binder with one of two policies:

* autonomous - the binder subscribes to the registry, binds matching services
  and starts the instance as soon as its mandatory dependencies are present;
  on any arrival or departure the instance is first stopped, the (un)binding
  applied, then restarted if mandatory dependencies are still present. While
  stopped, an autonomous instance's provided services are withdrawn and are
  re-registered under the same persistent id on restart.
* composite - the instance is passive: its enclosing composite (deployed in
  another bundle) binds it through its published binding controller and
  starts it through its lifecycle controller.

A composite root additionally assembles its remote children: it waits for
their controller services, performs the declared bindings, starts children in
dependency order (providers first), and only then starts itself.

Registry events are delivered inline but queued so reconfigurations run
strictly one at a time.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from frogi.errors import FrogiError, MissingController, TargetNotFound
from frogi.filters import FilterNode, pid_filter, pid_of_filter
from frogi.model import (
    Cardinality,
    ComponentInstance,
    Contingency,
    FilterTarget,
    InterfaceDescriptor,
    Lifecycle,
    PidTarget,
    Role,
    ServiceTarget,
)
from frogi.registry import ServiceEventKind, ServiceRegistry

logger = logging.getLogger(__name__)

LC_SUFFIX = ".lc"
BC_SUFFIX = ".bc"


class Policy(Enum):
    COMPOSITE = "composite"
    AUTONOMOUS = "autonomous"


@dataclass
class DependencySpec:
    """One brokered requirement of a managed instance tree."""

    owner: ComponentInstance
    descriptor: InterfaceDescriptor
    filter: FilterNode
    kind: str = "bind"  # "bind" wires a client interface, "export" a delegation
    bound: list[ServiceTarget] = field(default_factory=list)

    @property
    def signature(self) -> str:
        return self.descriptor.signature

    @property
    def mandatory(self) -> bool:
        return self.descriptor.contingency is Contingency.MANDATORY

    @property
    def collection(self) -> bool:
        return self.descriptor.cardinality is Cardinality.COLLECTION

    @classmethod
    def from_target(cls, owner, descriptor, target, kind="bind") -> "DependencySpec":
        if isinstance(target, PidTarget):
            flt = pid_filter(target.pid)
        elif isinstance(target, FilterTarget):
            flt = target.filter
        else:
            raise TypeError(f"not a brokered target: {target!r}")
        return cls(owner=owner, descriptor=descriptor, filter=flt, kind=kind)


@dataclass
class ManagedChild:
    """A remote child of a composite, reachable through its controllers."""

    name: str
    pid: str


@dataclass
class ChildBinding:
    """A binding the composite must apply on a remote child's controller."""

    child_name: str
    child_pid: str
    interface: str
    filter: FilterNode


class RootRecord:
    """Binder-side state for one bundle-root instance."""

    def __init__(
        self,
        instance: ComponentInstance,
        policy: Policy,
        publication=None,
        deps: list[DependencySpec] | None = None,
        children: list[ManagedChild] | None = None,
        child_bindings: list[ChildBinding] | None = None,
    ):
        self.instance = instance
        self.policy = policy
        self.publication = publication
        self.deps = deps or []
        self.children = children or []
        self.child_bindings = child_bindings or []
        self.child_bound: dict[tuple[str, str], list[int]] = {}

    @property
    def pid(self) -> str:
        return self.instance.instance_id

    def controller_pids(self) -> set[str]:
        out = set()
        for child in self.children:
            out.add(child.pid + LC_SUFFIX)
            out.add(child.pid + BC_SUFFIX)
        return out


class Binder:
    """Drives bindings and lifecycle from registry availability."""

    def __init__(self, registry: ServiceRegistry):
        self.registry = registry
        self.records: dict[str, RootRecord] = {}
        self.trace: list[tuple] = []
        #: protocol steps: reactions that changed some instance's wiring/state
        self.steps = 0
        #: queue items handled (registry events plus evaluation requests)
        self.processed = 0
        self.events_seen = 0
        self._queue: deque = deque()
        self._draining = False
        self._subscription = registry.subscribe(listener=self._on_event)

    # -- management surface ---------------------------------------------------

    def manage(self, record: RootRecord) -> None:
        self.records[record.pid] = record
        # A new root can complete some composite's picture: look at everything.
        for pid in self.records:
            self._queue.append(("evaluate", pid))
        self._drain()

    def unmanage(self, pid: str) -> None:
        self.records.pop(pid, None)

    def quiesce(self) -> None:
        """Re-evaluate everything; a fixpoint must already hold."""
        for pid in list(self.records):
            self._queue.append(("evaluate", pid))
        self._drain()

    # -- event intake ------------------------------------------------------------

    def _on_event(self, event) -> None:
        self.events_seen += 1
        self._queue.append(("event", event))
        self._drain()

    def _drain(self) -> None:
        if self._draining:
            return
        self._draining = True
        try:
            while self._queue:
                kind, payload = self._queue.popleft()
                self.processed += 1
                if kind == "event":
                    self._process_event(payload)
                else:
                    record = self.records.get(payload)
                    if record is not None:
                        self._evaluate(record, frozenset())
        finally:
            self._draining = False
        violations = self.safety_violations()
        if violations:
            raise RuntimeError("binder safety violated: " + "; ".join(violations))

    def _process_event(self, event) -> None:
        exclude = (
            frozenset({event.registration.service_id})
            if event.kind is ServiceEventKind.UNREGISTERING
            else frozenset()
        )
        for record in list(self.records.values()):
            if self.records.get(record.pid) is not record:
                continue
            if self._touches(record, event):
                self._evaluate(record, exclude)

    def _touches(self, record: RootRecord, event) -> bool:
        reg = event.registration
        for dep in record.deps:
            if any(t.service_id == reg.service_id for t in dep.bound):
                return True
            if reg.matches(dep.signature, dep.filter):
                return True
        if reg.pid is not None and reg.pid in record.controller_pids():
            return True
        for cb in record.child_bindings:
            if reg.service_id in record.child_bound.get((cb.child_pid, cb.interface), []):
                return True
            if reg.matches(None, cb.filter):
                return True
        return False

    # -- reconciliation -----------------------------------------------------------

    def _evaluate(self, record: RootRecord, exclude: frozenset) -> None:
        before = len(self.trace)
        if record.policy is Policy.AUTONOMOUS:
            self._reconcile_own(record, exclude)
        if record.children or record.child_bindings:
            self._reconcile_children(record, exclude)
        if record.policy is Policy.AUTONOMOUS:
            self._try_start_root(record)
        if len(self.trace) != before:
            self.steps += 1

    def _matching(self, signature: str, flt: FilterNode, exclude: frozenset) -> list:
        return [
            r for r in self.registry.query(signature, flt)
            if r.service_id not in exclude
        ]

    @staticmethod
    def _diff(bound_ids: list[int], live, collection: bool):
        """-> (ids to drop, registrations to add); singletons keep a live provider."""
        live_ids = [r.service_id for r in live]
        if collection:
            to_drop = [sid for sid in bound_ids if sid not in live_ids]
            to_add = [r for r in live if r.service_id not in bound_ids]
            return to_drop, to_add
        if bound_ids and bound_ids[0] in live_ids:
            return [], []
        to_drop = list(bound_ids)
        to_add = live[:1]  # lowest service_id wins
        return to_drop, to_add

    def _reconcile_own(self, record: RootRecord, exclude: frozenset) -> None:
        plans = []
        for dep in record.deps:
            live = self._matching(dep.signature, dep.filter, exclude)
            drop_ids, to_add = self._diff(
                [t.service_id for t in dep.bound], live, dep.collection
            )
            to_drop = [t for t in dep.bound if t.service_id in drop_ids]
            if to_drop or to_add:
                plans.append((dep, to_drop, to_add))
        if not plans:
            return

        instance = record.instance
        if instance.lifecycle is Lifecycle.STARTED:
            self._stop_root(record)
        for dep, to_drop, to_add in plans:
            name = dep.descriptor.name
            for target in to_drop:
                self._apply_unbind(record, dep, target)
                self.trace.append(("unbind", record.pid, name, target.service_id))
            for reg in to_add:
                target = ServiceTarget(reg.service_id, reg.pid)
                self._apply_bind(record, dep, target)
                self.trace.append(("bind", record.pid, name, reg.service_id))

    def _apply_bind(self, record, dep: DependencySpec, target: ServiceTarget) -> None:
        if dep.kind == "export":
            dep.owner.exports[dep.descriptor.name] = target
        else:
            dep.owner.bind_fc(dep.descriptor.name, target)
        dep.bound.append(target)

    def _apply_unbind(self, record, dep: DependencySpec, target: ServiceTarget) -> None:
        if dep.kind == "export":
            if dep.owner.exports.get(dep.descriptor.name) == target:
                dep.owner.exports[dep.descriptor.name] = None
        else:
            try:
                dep.owner.unbind_fc(dep.descriptor.name, target)
            except FrogiError:
                logger.warning("unbind of %s.%s failed", record.pid, dep.descriptor.name)
        dep.bound = [t for t in dep.bound if t is not target]

    def _stop_root(self, record: RootRecord) -> None:
        record.instance.stop_fc()
        self.trace.append(("stop", record.pid))
        if record.publication is not None:
            record.publication.unpublish_functional()

    def _mandatory_satisfied(self, record: RootRecord) -> bool:
        return all(dep.bound for dep in record.deps if dep.mandatory)

    def _composite_children_ready(self, record: RootRecord) -> bool:
        for child in self.children_under_composite_policy(record):
            child_record = self.records.get(child.pid)
            if child_record is None:
                return False
            if child_record.instance.lifecycle is not Lifecycle.STARTED:
                return False
        return True

    def children_under_composite_policy(self, record: RootRecord) -> list[ManagedChild]:
        out = []
        for child in record.children:
            child_record = self.records.get(child.pid)
            if child_record is None or child_record.policy is Policy.COMPOSITE:
                out.append(child)
        return out

    def _try_start_root(self, record: RootRecord) -> None:
        instance = record.instance
        if instance.lifecycle is Lifecycle.STARTED:
            return
        if not self._mandatory_satisfied(record):
            return
        if not self._composite_children_ready(record):
            return
        try:
            instance.start_fc()
        except FrogiError as exc:
            logger.info("start of %s deferred: %s", record.pid, exc)
            return
        self.trace.append(("start", record.pid))
        if record.publication is not None:
            record.publication.publish_functional()

    # -- composite child management -------------------------------------------------

    def _handles(self, pid: str, exclude: frozenset = frozenset()):
        lc = self.registry.get_by_pid(pid + LC_SUFFIX)
        bc = self.registry.get_by_pid(pid + BC_SUFFIX)
        if lc is None or bc is None:
            return None
        if lc.service_id in exclude or bc.service_id in exclude:
            return None  # mid-withdrawal: the child is going away
        return lc.provider, bc.provider

    def _reconcile_children(self, record: RootRecord, exclude: frozenset) -> None:
        for child in self.children_under_composite_policy(record):
            child_record = self.records.get(child.pid)
            handles = self._handles(child.pid, exclude)
            if handles is None or child_record is None:
                # child bundle gone: forget what we wired on its old instance
                for key in [k for k in record.child_bound if k[0] == child.pid]:
                    record.child_bound.pop(key, None)
                continue
            lc, bc = handles
            bindings = [cb for cb in record.child_bindings if cb.child_pid == child.pid]
            plans = []
            for cb in bindings:
                described = bc.describe(cb.interface)
                if described is None:
                    continue
                collection = described["cardinality"] == Cardinality.COLLECTION.value
                live = self._matching(described["signature"], cb.filter, exclude)
                bound = record.child_bound.setdefault((cb.child_pid, cb.interface), [])
                to_drop, to_add = self._diff(bound, live, collection)
                if to_drop or to_add:
                    plans.append((cb, to_drop, to_add))
            if plans:
                if lc.state() == Lifecycle.STARTED.value:
                    lc.stop()
                    self.trace.append(("stop", child.pid))
                for cb, to_drop, to_add in plans:
                    bound = record.child_bound[(cb.child_pid, cb.interface)]
                    for sid in to_drop:
                        try:
                            bc.unbind_service(cb.interface, sid)
                        except FrogiError:
                            logger.warning("unbind %s.%s[%s] failed", child.pid, cb.interface, sid)
                        bound.remove(sid)
                        self.trace.append(("unbind", child.pid, cb.interface, sid))
                    for reg in to_add:
                        bc.bind(cb.interface, ServiceTarget(reg.service_id, reg.pid))
                        bound.append(reg.service_id)
                        self.trace.append(("bind", child.pid, cb.interface, reg.service_id))
        self._start_children(record, exclude)

    def _start_children(self, record: RootRecord, exclude: frozenset = frozenset()) -> None:
        pending = []
        for child in self.children_under_composite_policy(record):
            child_record = self.records.get(child.pid)
            handles = self._handles(child.pid, exclude)
            if child_record is None or handles is None:
                continue
            if child_record.instance.lifecycle is not Lifecycle.STARTED:
                pending.append((child, handles[0]))
        for child, lc in self._provider_order(record, pending):
            try:
                lc.start()
            except FrogiError as exc:
                logger.info("start of %s deferred: %s", child.pid, exc)
                continue
            self.trace.append(("start", child.pid))

    def _provider_order(self, record: RootRecord, pending):
        """Providers before consumers, by the pid-targeted child bindings."""
        edges: dict[str, set[str]] = {}
        pids = {child.pid for child, _ in pending}
        for cb in record.child_bindings:
            target_pid = pid_of_filter(cb.filter)
            if target_pid in pids and cb.child_pid in pids:
                edges.setdefault(cb.child_pid, set()).add(target_pid)
        ordered = []
        placed: set[str] = set()
        remaining = list(pending)
        while remaining:
            progressed = False
            for item in list(remaining):
                child, _ = item
                if edges.get(child.pid, set()) <= placed:
                    ordered.append(item)
                    placed.add(child.pid)
                    remaining.remove(item)
                    progressed = True
            if not progressed:
                ordered.extend(remaining)
                break
        return ordered

    # -- one-shot assembly (imperative form) --------------------------------------

    def composite_assemble(self, record: RootRecord) -> None:
        """Bind and start all managed children, then the composite itself.

        Unlike the event-driven path this raises when a child's controllers
        are absent or a mandatory target cannot be found, and nothing is
        started in that case.
        """
        staged = []
        for child in self.children_under_composite_policy(record):
            if self._handles(child.pid) is None:
                raise MissingController(child.pid)
        for cb in record.child_bindings:
            lc_bc = self._handles(cb.child_pid)
            if lc_bc is None:
                continue  # binding on an autonomous child: its own business
            _, bc = lc_bc
            described = bc.describe(cb.interface)
            if described is None:
                raise TargetNotFound(f"{cb.child_pid} declares no interface {cb.interface!r}")
            hits = self.registry.query(described["signature"], cb.filter)
            if not hits and described["contingency"] == Contingency.MANDATORY.value:
                raise TargetNotFound(
                    f"no provider for {cb.child_pid}.{cb.interface} "
                    f"matching its filter"
                )
            staged.append((cb, bc, hits, described))
        for dep in record.deps:
            if dep.mandatory and not self._desired(dep, frozenset()):
                raise TargetNotFound(
                    f"no provider for {record.pid}.{dep.descriptor.name}"
                )
        for cb, bc, hits, described in staged:
            collection = described["cardinality"] == Cardinality.COLLECTION.value
            chosen = hits if collection else hits[:1]
            bound = record.child_bound.setdefault((cb.child_pid, cb.interface), [])
            for reg in chosen:
                if reg.service_id in bound:
                    continue
                bc.bind(cb.interface, ServiceTarget(reg.service_id, reg.pid))
                bound.append(reg.service_id)
                self.trace.append(("bind", cb.child_pid, cb.interface, reg.service_id))
        self._start_children(record)
        self._reconcile_own(record, frozenset())
        self._try_start_root(record)

    # -- invariants -----------------------------------------------------------------

    def safety_violations(self) -> list[str]:
        """STARTED instances with an unbound mandatory client interface."""
        out = []
        for record in self.records.values():
            for node in record.instance.walk():
                if node.lifecycle is not Lifecycle.STARTED:
                    continue
                for itf in node.type.interfaces:
                    if itf.role is Role.CLIENT and itf.contingency is Contingency.MANDATORY:
                        if not node.bindings.get(itf.name):
                            out.append(f"{node.instance_id}.{itf.name} unbound while STARTED")
        return out
