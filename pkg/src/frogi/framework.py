"""The deployment runtime: install, resolve, activate, update, refresh.

Bundles move through INSTALLED -> RESOLVED -> ACTIVE -> RESOLVED -> ... ->
UNINSTALLED. Resolution wires each imported package to the best exporter
(highest version, then lowest bundle id). Activation instantiates the
bundle's root components, publishes their controller services (and, under
the composite-managed policy, their functional services) in the registry,
and hands each root to the binder under its lifecycle policy.

Updating or uninstalling an exporter refreshes the transitive closure of
bundles wired to it: they are stopped, re-wired, and restarted, republishing
their services under unchanged persistent ids.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from enum import Enum

from frogi.adl import ArchitectureDefinition, ComponentNode, derive_pid
from frogi.binder import (
    Binder,
    ChildBinding,
    DependencySpec,
    ManagedChild,
    Policy,
    RootRecord,
)
from frogi.errors import (
    ActivatorFailure,
    BundleStateError,
    DuplicateSymbolicNameAndVersion,
    FrogiError,
    ResolutionFailed,
    UnknownBundle,
    UnknownService,
)
from frogi.filters import pid_filter
from frogi.model import (
    BehaviorRegistry,
    BindingSpec,
    ComponentInstance,
    ComponentType,
    FilterTarget,
    Lifecycle,
    LocalTarget,
    PidTarget,
    Role,
    ServerRef,
    ServiceTarget,
    collect_brokered_bindings,
    instantiate,
)
from frogi.packager import BundleDescriptor, read_bundle_archive
from frogi.registry import ServiceRegistry

logger = logging.getLogger(__name__)

LC_SIGNATURE = "frogi.api.LifecycleController"
BC_SIGNATURE = "frogi.api.BindingController"
CM_SIGNATURE = "frogi.cm.ManagedService"

BUNDLES_FILE = "bundles.list"


class BundleState(Enum):
    INSTALLED = "INSTALLED"
    RESOLVED = "RESOLVED"
    ACTIVE = "ACTIVE"
    UNINSTALLED = "UNINSTALLED"


# --- published service providers ------------------------------------------------

class ServiceEndpoint:
    """Functional provider: routes invocations into the instance."""

    def __init__(self, instance: ComponentInstance):
        self.instance = instance

    def invoke(self, selector: str, argument: str = "") -> str:
        return self.instance.invoke(selector, argument)


class LifecycleControllerHandle:
    def __init__(self, instance: ComponentInstance):
        self.instance = instance

    def start(self) -> None:
        self.instance.start_fc()

    def stop(self) -> None:
        self.instance.stop_fc()

    def state(self) -> str:
        return self.instance.lifecycle.value


class BindingControllerHandle:
    def __init__(self, instance: ComponentInstance):
        self.instance = instance

    def describe(self, interface: str) -> dict | None:
        itf = self.instance.type.interface(interface)
        if itf is None or itf.role is not Role.CLIENT:
            return None
        return {
            "name": itf.name,
            "signature": itf.signature,
            "cardinality": itf.cardinality.value,
            "contingency": itf.contingency.value,
            "bound": len(self.instance.bindings.get(itf.name, [])),
        }

    def describe_all(self) -> list[dict]:
        return [self.describe(name) for name in self.instance.list_fc()]

    def bind(self, interface: str, target) -> None:
        self.instance.bind_fc(interface, target)

    def unbind_service(self, interface: str, service_id: int) -> None:
        for target in self.instance.lookup_fc(interface):
            if isinstance(target, ServiceTarget) and target.service_id == service_id:
                self.instance.unbind_fc(interface, target)
                return
        raise FrogiError(f"{interface!r} is not bound to service {service_id}")

    def lookup(self, interface: str) -> list:
        return self.instance.lookup_fc(interface)


class ConfigurationHandle:
    """Generic configuration-update service over the attribute controller."""

    def __init__(self, instance: ComponentInstance):
        self.instance = instance

    def update(self, properties: dict) -> None:
        for name, value in properties.items():
            self.instance.attr_set(name, value)

    def current(self) -> dict:
        return dict(self.instance.attributes)


# --- per-root publication ----------------------------------------------------------

class RootHandle:
    """Registry publication duties for one bundle-root instance."""

    def __init__(self, registry: ServiceRegistry, bundle: "BundleRecord",
                 instance: ComponentInstance, policy: Policy):
        self.registry = registry
        self.bundle = bundle
        self.instance = instance
        self.policy = policy
        self.functional_sid: int | None = None
        self.controller_sids: list[int] = []

    @property
    def instance_id(self) -> str:
        return self.instance.instance_id

    def server_interfaces(self):
        return [i for i in self.instance.type.interfaces if i.role is Role.SERVER]

    def publish_controllers(self) -> None:
        pid = self.instance_id
        entries = [
            ([LC_SIGNATURE], pid + ".lc", LifecycleControllerHandle(self.instance)),
            ([BC_SIGNATURE], pid + ".bc", BindingControllerHandle(self.instance)),
            ([CM_SIGNATURE], pid + ".ac", ConfigurationHandle(self.instance)),
        ]
        for signatures, service_pid, provider in entries:
            reg = self.registry.register(signatures, service_pid, {}, provider)
            self.controller_sids.append(reg.service_id)
            self.bundle.live_registrations.append(reg.service_id)

    def publish_functional(self) -> None:
        if self.functional_sid is not None:
            return
        interfaces = self.server_interfaces()
        if not interfaces:
            return
        signatures: list[str] = []
        properties: dict = {}
        for itf in interfaces:
            if itf.signature not in signatures:
                signatures.append(itf.signature)
            properties.update(itf.properties)
        reg = self.registry.register(
            signatures, self.instance_id, properties, ServiceEndpoint(self.instance)
        )
        self.functional_sid = reg.service_id
        self.bundle.live_registrations.append(reg.service_id)

    def unpublish_functional(self) -> None:
        if self.functional_sid is None:
            return
        sid, self.functional_sid = self.functional_sid, None
        if sid in self.bundle.live_registrations:
            self.bundle.live_registrations.remove(sid)
        try:
            self.registry.unregister(sid)
        except UnknownService:
            pass

    def unpublish_all(self) -> None:
        self.unpublish_functional()
        sids, self.controller_sids = self.controller_sids, []
        for sid in sids:
            if sid in self.bundle.live_registrations:
                self.bundle.live_registrations.remove(sid)
            try:
                self.registry.unregister(sid)
            except UnknownService:
                pass


@dataclass
class BundleRecord:
    bundle_id: int
    path: str
    descriptor: BundleDescriptor
    state: BundleState = BundleState.INSTALLED
    wires: dict[str, int] = field(default_factory=dict)
    roots: list[RootHandle] = field(default_factory=list)
    live_registrations: list[int] = field(default_factory=list)
    last_missing: set = field(default_factory=set)

    @property
    def name(self) -> str:
        return self.descriptor.symbolic_name


class Framework:
    """Single control context owning registry, binder, behaviors and bundles."""

    def __init__(self, storage_dir: str | None = None,
                 behaviors: BehaviorRegistry | None = None):
        self.registry = ServiceRegistry()
        self.behaviors = behaviors if behaviors is not None else BehaviorRegistry()
        self.binder = Binder(self.registry)
        self.bundles: dict[int, BundleRecord] = {}
        self.transitions: list[tuple[int, str, str]] = []
        self.clock = 0
        self._next_id = 1
        self._storage = storage_dir
        if storage_dir:
            os.makedirs(storage_dir, exist_ok=True)
            self._load()

    # -- lookup -------------------------------------------------------------------

    def bundle(self, ref: int | str) -> BundleRecord:
        if isinstance(ref, int) or (isinstance(ref, str) and ref.isdigit()):
            record = self.bundles.get(int(ref))
            if record is None:
                raise UnknownBundle(ref)
            return record
        hits = [b for b in self.bundles.values()
                if b.name == ref and b.state is not BundleState.UNINSTALLED]
        if not hits:
            raise UnknownBundle(ref)
        if len(hits) > 1:
            raise UnknownBundle(f"{ref} (ambiguous: {[b.bundle_id for b in hits]})")
        return hits[0]

    def instance_by_pid(self, pid: str) -> ComponentInstance | None:
        for record in self.bundles.values():
            for root in record.roots:
                found = root.instance.find(pid)
                if found is not None:
                    return found
        return None

    def _provider(self, service_id: int):
        reg = self.registry.get(service_id)
        return reg.provider if reg is not None else None

    # -- install ---------------------------------------------------------------------

    def install(self, path: str) -> int:
        descriptor = read_bundle_archive(path)
        self._check_duplicate(descriptor, ignore=None)
        record = BundleRecord(self._next_id, path, descriptor)
        self._next_id += 1
        self.bundles[record.bundle_id] = record
        self.transitions.append((record.bundle_id, "", BundleState.INSTALLED.value))
        self._persist()
        return record.bundle_id

    def _check_duplicate(self, descriptor, ignore: int | None) -> None:
        for other in self.bundles.values():
            if other.bundle_id == ignore or other.state is BundleState.UNINSTALLED:
                continue
            if (other.descriptor.symbolic_name == descriptor.symbolic_name
                    and other.descriptor.version == descriptor.version):
                raise DuplicateSymbolicNameAndVersion(
                    f"{descriptor.symbolic_name} {descriptor.version} is already installed "
                    f"as bundle {other.bundle_id}"
                )

    # -- resolution --------------------------------------------------------------------

    def resolve(self, ref) -> bool:
        record = self.bundle(ref)
        if record.state is BundleState.UNINSTALLED:
            raise BundleStateError(f"bundle {record.bundle_id} is uninstalled")
        return self._resolve(record, set())

    def missing_imports(self, ref) -> set:
        return set(self.bundle(ref).last_missing)

    def _resolve(self, record: BundleRecord, stack: set[int]) -> bool:
        if record.state in (BundleState.RESOLVED, BundleState.ACTIVE):
            return True
        if record.bundle_id in stack:
            return True
        stack = stack | {record.bundle_id}
        missing: set = set()
        chosen: dict[str, BundleRecord] = {}
        for package, min_version in record.descriptor.imports:
            candidates = []
            for other in self.bundles.values():
                if other.state is BundleState.UNINSTALLED:
                    continue
                for exported, version in other.descriptor.exports:
                    if exported == package and version >= min_version:
                        candidates.append((version, -other.bundle_id, other))
            if not candidates:
                missing.add((package, min_version))
                continue
            candidates.sort(key=lambda c: (c[0], c[1]), reverse=True)
            chosen[package] = candidates[0][2]
        if missing:
            record.last_missing = missing
            return False
        for exporter in {b.bundle_id: b for b in chosen.values()}.values():
            if exporter is record:
                continue
            if not self._resolve(exporter, stack):
                record.last_missing = set(exporter.last_missing)
                return False
        record.wires = {pkg: b.bundle_id for pkg, b in chosen.items()}
        record.last_missing = set()
        self._set_state(record, BundleState.RESOLVED)
        return True

    # -- activation -----------------------------------------------------------------------

    def start_bundle(self, ref) -> None:
        record = self.bundle(ref)
        if record.state is BundleState.ACTIVE:
            raise BundleStateError(f"bundle {record.bundle_id} is already active")
        if record.state is BundleState.UNINSTALLED:
            raise BundleStateError(f"bundle {record.bundle_id} is uninstalled")
        if record.state is BundleState.INSTALLED and not self._resolve(record, set()):
            raise ResolutionFailed(record.last_missing)
        self._activate(record)
        self._set_state(record, BundleState.ACTIVE)
        self._persist()

    def stop_bundle(self, ref) -> None:
        record = self.bundle(ref)
        if record.state is not BundleState.ACTIVE:
            raise BundleStateError(f"bundle {record.bundle_id} is not active")
        self._deactivate(record)
        self._set_state(record, BundleState.RESOLVED)
        self._persist()

    def _activate(self, record: BundleRecord) -> None:
        built: list[tuple[RootHandle, RootRecord]] = []
        try:
            for path in record.descriptor.root_components:
                built.append(self._activate_root(record, path))
            self._wire_cross_root(record, built)
            for handle, _ in built:
                if handle.policy is Policy.COMPOSITE:
                    handle.publish_functional()
            for _, root_record in built:
                self.binder.manage(root_record)
        except FrogiError as exc:
            for handle, root_record in built:
                self.binder.unmanage(root_record.pid)
                handle.unpublish_all()
            if isinstance(exc, ActivatorFailure):
                raise
            raise ActivatorFailure(str(exc)) from exc
        record.roots = [handle for handle, _ in built]

    def _deactivate(self, record: BundleRecord) -> None:
        for root in record.roots:
            self.binder.unmanage(root.instance_id)
        for root in record.roots:
            if root.instance.lifecycle is Lifecycle.STARTED:
                root.instance.stop_fc()
        for root in record.roots:
            root.unpublish_all()
        for sid in list(record.live_registrations):
            try:
                self.registry.unregister(sid)
            except UnknownService:
                pass
        record.live_registrations = []
        record.roots = []

    def _activate_root(self, record: BundleRecord, path: str) -> tuple[RootHandle, RootRecord]:
        descriptor = record.descriptor
        fragment = descriptor.adl_fragment
        if fragment is None:
            raise ActivatorFailure(f"bundle {record.name} carries no fragment")
        defname = fragment.name
        if path == defname:
            scope = fragment
            content_ref = None
            bindings = list(fragment.bindings)
            scope_path = ""
        else:
            node = _node_at(fragment, path)
            if node is None:
                raise ActivatorFailure(f"Frogi-Root {path!r} not found in fragment")
            scope = node
            content_ref = node.content_ref
            bindings = list(node.bindings)
            for spec in fragment.bindings:
                owner, _, itf = spec.client_ref.partition(".")
                if owner == node.name and not isinstance(spec.target, ServerRef):
                    bindings.append(BindingSpec(f"this.{itf}", spec.target, spec.line))
            scope_path = path
        root_type, children, child_bindings = _convert_scope(
            defname,
            path.rsplit(".", 1)[-1] if path != defname else defname,
            scope.interfaces,
            scope.components,
            bindings,
            content_ref,
            scope_path,
        )
        instance_id = derive_pid(defname, path)
        instance = instantiate(root_type, instance_id, self.behaviors)
        for node_instance in instance.walk():
            node_instance.service_resolver = self._provider
        policy = self._policy_for(descriptor, path, defname)
        handle = RootHandle(self.registry, record, instance, policy)
        handle.publish_controllers()
        deps = [
            DependencySpec.from_target(
                owner, desc, target,
                kind="export" if desc.role is Role.SERVER else "bind",
            )
            for owner, desc, target in collect_brokered_bindings(instance)
        ]
        root_record = RootRecord(
            instance, policy, publication=handle, deps=deps,
            children=children, child_bindings=child_bindings,
        )
        return handle, root_record

    def _policy_for(self, descriptor: BundleDescriptor, path: str, defname: str) -> Policy:
        if descriptor.policy:
            return Policy(descriptor.policy)
        return Policy.AUTONOMOUS if path == defname else Policy.COMPOSITE

    def _wire_cross_root(self, record, built) -> None:
        """Direct wires between two roots of the same bundle."""
        fragment = record.descriptor.adl_fragment
        by_name = {}
        for _, root_record in built:
            name = root_record.instance.type.name
            by_name[name] = root_record.instance
        for spec in fragment.bindings:
            if not isinstance(spec.target, ServerRef):
                continue
            c_owner, _, c_itf = spec.client_ref.partition(".")
            s_owner, _, s_itf = spec.target.ref.partition(".")
            if c_owner in by_name and s_owner in by_name and c_owner != s_owner:
                by_name[c_owner].bind_fc(c_itf, LocalTarget(by_name[s_owner], s_itf))

    # -- update / uninstall / refresh ----------------------------------------------------

    def update(self, ref, new_archive: str) -> None:
        record = self.bundle(ref)
        if record.state is BundleState.UNINSTALLED:
            raise BundleStateError(f"bundle {record.bundle_id} is uninstalled")
        new_descriptor = read_bundle_archive(new_archive)
        self._check_duplicate(new_descriptor, ignore=record.bundle_id)
        prior_state = record.state
        closure = self._dependents_closure({record.bundle_id})
        previously_active = [b for b in closure if b.state is BundleState.ACTIVE]
        self._stop_in_order(previously_active)
        record.descriptor = new_descriptor
        record.path = new_archive
        self._unwire(closure)
        if prior_state is BundleState.RESOLVED and record not in previously_active:
            self._resolve(record, set())
        self._restart_in_order(previously_active)
        self._persist()

    def refresh(self, refs) -> list[int]:
        records = [self.bundle(r) for r in refs]
        if not records:
            return []
        closure = self._dependents_closure({r.bundle_id for r in records})
        previously_active = [b for b in closure if b.state is BundleState.ACTIVE]
        resolved = [b for b in closure if b.state is BundleState.RESOLVED]
        self._stop_in_order(previously_active)
        self._unwire(closure)
        for record in resolved:
            self._resolve(record, set())
        self._restart_in_order(previously_active)
        self._persist()
        return [b.bundle_id for b in closure]

    def uninstall(self, ref) -> None:
        record = self.bundle(ref)
        if record.state is BundleState.UNINSTALLED:
            raise BundleStateError(f"bundle {record.bundle_id} is already uninstalled")
        dependents = [
            b for b in self._dependents_closure({record.bundle_id})
            if b is not record
        ]
        # Dependents are refreshed before the exporter goes away so no
        # RESOLVED/ACTIVE bundle ever holds a wire to an uninstalled one.
        previously_active = [b for b in dependents if b.state is BundleState.ACTIVE]
        self._stop_in_order(previously_active)
        self._unwire(dependents)
        if record.state is BundleState.ACTIVE:
            self._deactivate(record)
        record.wires = {}
        self._set_state(record, BundleState.UNINSTALLED)
        self._restart_in_order(previously_active)
        self._persist()

    def _dependents_closure(self, seed_ids: set[int]) -> list[BundleRecord]:
        member_ids = set(seed_ids)
        changed = True
        while changed:
            changed = False
            for record in self.bundles.values():
                if record.bundle_id in member_ids:
                    continue
                if record.state is BundleState.UNINSTALLED:
                    continue
                if any(exporter in member_ids for exporter in record.wires.values()):
                    member_ids.add(record.bundle_id)
                    changed = True
        return [self.bundles[i] for i in sorted(member_ids) if i in self.bundles]

    def _stop_in_order(self, records: list[BundleRecord]) -> None:
        for record in reversed(self._provider_order(records)):
            if record.state is BundleState.ACTIVE:
                self._deactivate(record)
                self._set_state(record, BundleState.RESOLVED)

    def _unwire(self, records: list[BundleRecord]) -> None:
        for record in records:
            if record.state in (BundleState.RESOLVED, BundleState.ACTIVE):
                record.wires = {}
                self._set_state(record, BundleState.INSTALLED)
            else:
                record.wires = {}

    def _restart_in_order(self, records: list[BundleRecord]) -> None:
        for record in records:
            if record.state is BundleState.UNINSTALLED:
                continue
            if not self._resolve(record, set()):
                logger.warning("bundle %s no longer resolves after refresh", record.name)
        for record in self._provider_order(records):
            if record.state is not BundleState.RESOLVED:
                continue
            try:
                self._activate(record)
                self._set_state(record, BundleState.ACTIVE)
            except FrogiError as exc:
                logger.warning("restart of bundle %s failed: %s", record.name, exc)

    def _provider_order(self, records: list[BundleRecord]) -> list[BundleRecord]:
        pending = list(records)
        placed: set[int] = set()
        ordered: list[BundleRecord] = []
        ids = {r.bundle_id for r in records}
        while pending:
            progressed = False
            for record in list(pending):
                internal = {w for w in record.wires.values() if w in ids}
                if internal <= placed:
                    ordered.append(record)
                    placed.add(record.bundle_id)
                    pending.remove(record)
                    progressed = True
            if not progressed:
                ordered.extend(pending)
                break
        return ordered

    # -- state + persistence ---------------------------------------------------------------

    def _set_state(self, record: BundleRecord, state: BundleState) -> None:
        if record.state is state:
            return
        old = record.state
        record.state = state
        self.transitions.append((record.bundle_id, old.value, state.value))

    def _persist(self) -> None:
        if not self._storage:
            return
        lines = []
        for record in sorted(self.bundles.values(), key=lambda r: r.bundle_id):
            if record.state is BundleState.UNINSTALLED:
                continue
            lines.append(f"{record.bundle_id}\t{record.path}\t{record.state.value}")
        with open(os.path.join(self._storage, BUNDLES_FILE), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))

    def _load(self) -> None:
        path = os.path.join(self._storage, BUNDLES_FILE)
        if not os.path.isfile(path):
            return
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    bundle_id, archive, _state = raw.split("\t")
                    descriptor = read_bundle_archive(archive)
                    record = BundleRecord(int(bundle_id), archive, descriptor)
                    self.bundles[record.bundle_id] = record
                    self._next_id = max(self._next_id, record.bundle_id + 1)
                except (ValueError, FrogiError) as exc:
                    logger.warning("skipping bundles.list entry %r: %s", raw, exc)


# --- fragment -> component types ----------------------------------------------------

def _node_at(fragment: ArchitectureDefinition, path: str) -> ComponentNode | None:
    node_list = fragment.components
    node = None
    for name in path.split("."):
        node = next((c for c in node_list if c.name == name), None)
        if node is None:
            return None
        node_list = node.components
    return node


def _convert_scope(
    defname: str,
    name: str,
    interfaces,
    components,
    bindings,
    content_ref: str | None,
    scope_path: str,
) -> tuple[ComponentType, list[ManagedChild], list[ChildBinding]]:
    """Turn a fragment scope into a component type plus remote-child duties."""
    children_types: list[ComponentType] = []
    managed: list[ManagedChild] = []
    child_bindings: list[ChildBinding] = []
    stub_pids: dict[str, str] = {}
    for comp in components:
        comp_path = f"{scope_path}.{comp.name}" if scope_path else comp.name
        if comp.is_stub or (comp.bundle is not None and comp.content_ref is None
                            and not comp.components and not comp.interfaces):
            pid = derive_pid(defname, comp_path)
            managed.append(ManagedChild(comp.name, pid))
            stub_pids[comp.name] = pid
            continue
        sub_type, sub_managed, sub_bindings = _convert_scope(
            defname, comp.name, comp.interfaces, comp.components,
            comp.bindings, comp.content_ref, comp_path,
        )
        children_types.append(sub_type)
        managed.extend(sub_managed)
        child_bindings.extend(sub_bindings)
    local_bindings: list[BindingSpec] = []
    for spec in bindings:
        owner, _, itf = spec.client_ref.partition(".")
        if owner in stub_pids:
            if isinstance(spec.target, ServerRef):
                logger.warning("dropping unmanageable local binding %r", spec)
                continue
            flt = (
                spec.target.filter if isinstance(spec.target, FilterTarget)
                else pid_filter(spec.target.pid)
            )
            child_bindings.append(
                ChildBinding(owner, stub_pids[owner], itf, flt)
            )
        else:
            local_bindings.append(spec)
    component_type = ComponentType(
        name=name,
        interfaces=list(interfaces),
        implementation_ref=content_ref,
        children=children_types,
        internal_bindings=local_bindings,
    )
    return component_type, managed, child_bindings
