"""The hierarchical component model: typed components, controllers, behaviors.

Component types declare named functional interfaces (server = provided,
client = required); instances carry lifecycle state, bindings and attributes.
Implementations are plug-in behaviors registered by reference string; a
behavior exposes ``invoke(interface_name, argument) -> str`` plus declared
attributes, and reaches its own dependencies through the context it is
attached to.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator

from frogi.errors import (
    AlreadyBound,
    ChildBound,
    IllegalLifecycleState,
    NoSuchAttribute,
    NoSuchInterface,
    NotBound,
    NotComposite,
    UnboundInterface,
    UnknownImplementation,
    UnresolvedMandatoryDependency,
)
from frogi.filters import FilterNode

Version = tuple[int, int, int]
DEFAULT_VERSION: Version = (0, 0, 0)

#: contract_bundle value meaning "provided by the platform, never packaged"
EXTERNAL_CONTRACT = ""


def parse_version(text: str) -> Version:
    parts = text.split(".")
    if len(parts) != 3 or not all(p.isdigit() for p in parts):
        raise ValueError(f"version must be three dot-separated integers: {text!r}")
    return (int(parts[0]), int(parts[1]), int(parts[2]))


def format_version(version: Version) -> str:
    return ".".join(str(p) for p in version)


class Role(Enum):
    SERVER = "server"
    CLIENT = "client"


class Cardinality(Enum):
    SINGLETON = "singleton"
    COLLECTION = "collection"


class Contingency(Enum):
    MANDATORY = "mandatory"
    OPTIONAL = "optional"


class Lifecycle(Enum):
    CREATED = "CREATED"
    STARTED = "STARTED"
    STOPPED = "STOPPED"


@dataclass
class InterfaceDescriptor:
    name: str
    role: Role
    signature: str
    cardinality: Cardinality = Cardinality.SINGLETON
    contingency: Contingency = Contingency.MANDATORY
    version: Version = DEFAULT_VERSION
    contract_bundle: str | None = None
    properties: dict = field(default_factory=dict)
    line: int = field(default=0, compare=False)


# -- binding targets ----------------------------------------------------------

@dataclass(frozen=True)
class ServerRef:
    """Architecture-level endpoint: 'this.<itf>' or '<child>.<itf>'."""
    ref: str


@dataclass(frozen=True)
class PidTarget:
    """Rigid target: the provider registered under this persistent id."""
    pid: str


@dataclass(frozen=True)
class FilterTarget:
    """Brokered target: any provider whose properties satisfy the filter."""
    filter: FilterNode


BindingTarget = ServerRef | PidTarget | FilterTarget


@dataclass(frozen=True)
class BindingSpec:
    client_ref: str
    target: BindingTarget
    line: int = field(default=0, compare=False)


# -- runtime bind targets (values stored in an instance's binding lists) ------

@dataclass(frozen=True, eq=False)
class LocalTarget:
    """Direct wire to a sibling instance's server interface."""
    instance: "ComponentInstance"
    interface: str


@dataclass(frozen=True, eq=False)
class DelegateTarget:
    """Outward wire: a child's client interface delegates to its composite."""
    instance: "ComponentInstance"
    interface: str


@dataclass(frozen=True)
class ServiceTarget:
    """Wire to a published service, resolved through the registry."""
    service_id: int
    pid: str | None = None


@dataclass
class ComponentType:
    name: str
    interfaces: list[InterfaceDescriptor] = field(default_factory=list)
    implementation_ref: str | None = None
    children: list["ComponentType"] = field(default_factory=list)
    internal_bindings: list[BindingSpec] = field(default_factory=list)

    def __post_init__(self):
        if self.implementation_ref is not None and self.children:
            raise ValueError(f"component type {self.name!r} is both primitive and composite")
        names = [i.name for i in self.interfaces]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate interface name in type {self.name!r}")
        child_names = [c.name for c in self.children]
        if len(child_names) != len(set(child_names)):
            raise ValueError(f"duplicate child name in type {self.name!r}")

    @property
    def is_composite(self) -> bool:
        return self.implementation_ref is None

    def interface(self, name: str) -> InterfaceDescriptor | None:
        for itf in self.interfaces:
            if itf.name == name:
                return itf
        return None

    def child(self, name: str) -> "ComponentType | None":
        for c in self.children:
            if c.name == name:
                return c
        return None


class Behavior:
    """Base plug-in implementation; subclasses override :meth:`invoke`.

    ``attributes`` holds the declared attribute names with their defaults.
    """

    attributes: dict = {}

    def __init__(self):
        self.context: "BehaviorContext | None" = None

    def attach(self, context: "BehaviorContext") -> None:
        self.context = context

    def invoke(self, interface: str, argument: str) -> str:
        raise NotImplementedError

    def on_attribute_changed(self, name: str, value) -> None:
        pass


class BehaviorRegistry:
    """Maps implementation references to behavior factories."""

    def __init__(self):
        self._factories: dict[str, Callable[[], Behavior]] = {}

    def register(self, ref: str, factory: Callable[[], Behavior]) -> None:
        self._factories[ref] = factory

    def resolves(self, ref: str) -> bool:
        return ref in self._factories

    def create(self, ref: str) -> Behavior:
        factory = self._factories.get(ref)
        if factory is None:
            raise UnknownImplementation(ref)
        return factory()


class BehaviorContext:
    """Hands a behavior access to the bindings of its own instance."""

    def __init__(self, instance: "ComponentInstance"):
        self.instance = instance

    def call(self, client_itf: str, argument: str = "") -> str:
        return self.instance.call(client_itf, argument)

    def call_all(self, client_itf: str, argument: str = "") -> list[str]:
        return self.instance.call_all(client_itf, argument)

    def attribute(self, name: str):
        return self.instance.attr_get(name)


class ComponentInstance:
    """A runtime instance: lifecycle, bindings, attributes, children."""

    def __init__(self, instance_id: str, type: ComponentType, behavior: Behavior | None):
        self.instance_id = instance_id
        self.type = type
        self.behavior = behavior
        self.lifecycle = Lifecycle.CREATED
        self.bindings: dict[str, list] = {}
        self.attributes: dict = dict(behavior.attributes) if behavior else {}
        self.children: list[ComponentInstance] = []
        self.exports: dict[str, object | None] = {}
        self.observer: Callable | None = None
        self.service_resolver: Callable[[int], object] | None = None
        self._invoke_lock = threading.RLock()

    def __repr__(self):
        return f"<instance {self.instance_id} {self.lifecycle.value}>"

    # -- lifecycle controller --------------------------------------------

    def start_fc(self) -> None:
        if self.lifecycle is Lifecycle.STARTED:
            raise IllegalLifecycleState(f"{self.instance_id} is already STARTED")
        self._check_startable()
        self._do_start()

    def stop_fc(self) -> None:
        if self.lifecycle is not Lifecycle.STARTED:
            raise IllegalLifecycleState(f"{self.instance_id} is not STARTED")
        self._set_state(Lifecycle.STOPPED)
        for child in self.children:
            if child.lifecycle is Lifecycle.STARTED:
                child.stop_fc()

    def _check_startable(self) -> None:
        for itf in self.type.interfaces:
            if itf.role is Role.CLIENT and itf.contingency is Contingency.MANDATORY:
                if not self.bindings.get(itf.name):
                    raise UnresolvedMandatoryDependency(itf.name)
        for child in self.children:
            if child.lifecycle is not Lifecycle.STARTED:
                child._check_startable()

    def _do_start(self) -> None:
        for child in self._start_order():
            if child.lifecycle is not Lifecycle.STARTED:
                child._do_start()
        self._set_state(Lifecycle.STARTED)

    def _start_order(self) -> list["ComponentInstance"]:
        # Providers first: a child wired to a sibling starts after it.
        remaining = list(self.children)
        ordered: list[ComponentInstance] = []
        placed: set[int] = set()
        while remaining:
            progressed = False
            for child in list(remaining):
                deps = {
                    id(t.instance)
                    for targets in child.bindings.values()
                    for t in targets
                    if isinstance(t, LocalTarget)
                }
                if deps <= placed | {id(child)}:
                    ordered.append(child)
                    placed.add(id(child))
                    remaining.remove(child)
                    progressed = True
            if not progressed:  # binding cycle: fall back to declaration order
                ordered.extend(remaining)
                break
        return ordered

    def _set_state(self, state: Lifecycle) -> None:
        old = self.lifecycle
        self.lifecycle = state
        if self.observer is not None:
            self.observer(self, old, state)

    # -- binding controller ------------------------------------------------

    def _client_interface(self, name: str) -> InterfaceDescriptor:
        itf = self.type.interface(name)
        if itf is None or itf.role is not Role.CLIENT:
            raise NoSuchInterface(f"{self.instance_id} has no client interface {name!r}")
        return itf

    def bind_fc(self, client_itf: str, target) -> None:
        if self.lifecycle is Lifecycle.STARTED:
            raise IllegalLifecycleState(f"cannot bind while {self.instance_id} is STARTED")
        itf = self._client_interface(client_itf)
        bound = self.bindings.setdefault(client_itf, [])
        if itf.cardinality is Cardinality.SINGLETON and bound:
            raise AlreadyBound(f"{self.instance_id}.{client_itf} is a bound singleton")
        bound.append(target)

    def unbind_fc(self, client_itf: str, target) -> None:
        if self.lifecycle is Lifecycle.STARTED:
            raise IllegalLifecycleState(f"cannot unbind while {self.instance_id} is STARTED")
        self._client_interface(client_itf)
        bound = self.bindings.get(client_itf, [])
        if target not in bound:
            raise NotBound(f"{self.instance_id}.{client_itf} is not bound to {target!r}")
        bound.remove(target)

    def list_fc(self) -> list[str]:
        return [i.name for i in self.type.interfaces if i.role is Role.CLIENT]

    def lookup_fc(self, client_itf: str) -> list:
        self._client_interface(client_itf)
        return list(self.bindings.get(client_itf, []))

    # -- content controller --------------------------------------------------

    def content_add(self, child: "ComponentInstance") -> None:
        if not self.type.is_composite:
            raise NotComposite(f"{self.instance_id} is primitive")
        if self.lifecycle is Lifecycle.STARTED:
            raise IllegalLifecycleState(f"cannot edit content of STARTED {self.instance_id}")
        self.children.append(child)

    def content_remove(self, child: "ComponentInstance") -> None:
        if not self.type.is_composite:
            raise NotComposite(f"{self.instance_id} is primitive")
        if self.lifecycle is Lifecycle.STARTED:
            raise IllegalLifecycleState(f"cannot edit content of STARTED {self.instance_id}")
        if child not in self.children:
            raise ValueError(f"{child.instance_id} is not a child of {self.instance_id}")
        if any(targets for targets in child.bindings.values()):
            raise ChildBound(f"{child.instance_id} still holds bindings")
        if self._referenced(child):
            raise ChildBound(f"{child.instance_id} is still a binding target")
        self.children.remove(child)

    def _referenced(self, child: "ComponentInstance") -> bool:
        holders = [self] + [c for c in self.children if c is not child]
        for holder in holders:
            for targets in holder.bindings.values():
                for t in targets:
                    if isinstance(t, (LocalTarget, DelegateTarget)) and t.instance is child:
                        return True
            for t in holder.exports.values():
                if isinstance(t, (LocalTarget, DelegateTarget)) and t.instance is child:
                    return True
        return False

    # -- attribute controller --------------------------------------------------

    def attr_get(self, name: str):
        if name not in self.attributes:
            raise NoSuchAttribute(f"{self.instance_id} declares no attribute {name!r}")
        return self.attributes[name]

    def attr_set(self, name: str, value) -> None:
        if name not in self.attributes:
            raise NoSuchAttribute(f"{self.instance_id} declares no attribute {name!r}")
        self.attributes[name] = value
        if self.lifecycle is Lifecycle.STARTED and self.behavior is not None:
            self.behavior.on_attribute_changed(name, value)

    # -- invocation -------------------------------------------------------------

    def invoke(self, selector: str, argument: str = "") -> str:
        """Invoke a server interface by name or by signature."""
        itf = self.type.interface(selector)
        if itf is None or itf.role is not Role.SERVER:
            itf = next(
                (i for i in self.type.interfaces
                 if i.role is Role.SERVER and i.signature == selector),
                None,
            )
        if itf is None:
            raise NoSuchInterface(f"{self.instance_id} provides no interface {selector!r}")
        with self._invoke_lock:
            if self.type.is_composite:
                target = self.exports.get(itf.name)
                if target is None:
                    raise UnboundInterface(f"export {self.instance_id}.{itf.name} is unwired")
                return self._invoke_target(target, itf.signature, argument)
            return self.behavior.invoke(itf.name, argument)

    def call(self, client_itf: str, argument: str = "") -> str:
        results = self.call_all(client_itf, argument)
        if not results:
            raise UnboundInterface(f"{self.instance_id}.{client_itf} has no bound target")
        return results[0]

    def call_all(self, client_itf: str, argument: str = "") -> list[str]:
        self._client_interface(client_itf)
        itf = self.type.interface(client_itf)
        out = []
        for target in self.bindings.get(client_itf, []):
            if isinstance(target, DelegateTarget):
                out.extend(target.instance.call_all(target.interface, argument))
            else:
                out.append(self._invoke_target(target, itf.signature, argument))
        return out

    def _invoke_target(self, target, signature: str, argument: str) -> str:
        if isinstance(target, LocalTarget):
            return target.instance.invoke(target.interface, argument)
        if isinstance(target, DelegateTarget):
            return target.instance.call(target.interface, argument)
        if isinstance(target, ServiceTarget):
            if self.service_resolver is None:
                raise UnboundInterface(f"{self.instance_id} cannot resolve services")
            provider = self.service_resolver(target.service_id)
            if provider is None:
                raise UnboundInterface(f"service {target.service_id} is gone")
            return provider.invoke(signature, argument)
        raise TypeError(f"unsupported runtime target {target!r}")

    # -- helpers ---------------------------------------------------------------

    def walk(self) -> Iterator["ComponentInstance"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def find(self, instance_id: str) -> "ComponentInstance | None":
        for node in self.walk():
            if node.instance_id == instance_id:
                return node
        return None


def _collect_refs(t: ComponentType) -> Iterator[str]:
    if t.implementation_ref is not None:
        yield t.implementation_ref
    for child in t.children:
        yield from _collect_refs(child)


def instantiate(
    t: ComponentType,
    instance_id_prefix: str,
    behaviors: BehaviorRegistry,
    observer: Callable | None = None,
) -> ComponentInstance:
    """Create the instance tree for a type; ids chain as ``prefix.child``.

    All implementation references are resolved up front so a failure cannot
    leave a half-built tree behind.
    """
    for ref in _collect_refs(t):
        if not behaviors.resolves(ref):
            raise UnknownImplementation(ref)
    return _build(t, instance_id_prefix, behaviors, observer)


def _build(
    t: ComponentType,
    instance_id: str,
    behaviors: BehaviorRegistry,
    observer: Callable | None,
) -> ComponentInstance:
    behavior = behaviors.create(t.implementation_ref) if t.implementation_ref else None
    instance = ComponentInstance(instance_id, t, behavior)
    instance.observer = observer
    if behavior is not None:
        behavior.attach(BehaviorContext(instance))
    for child_type in t.children:
        child = _build(child_type, f"{instance_id}.{child_type.name}", behaviors, observer)
        instance.children.append(child)
    _apply_internal_bindings(instance)
    return instance


def _apply_internal_bindings(composite: ComponentInstance) -> None:
    """Wire the structural (same-tree) bindings of a freshly built composite.

    Brokered targets (pid / filter) are dependency specs for the runtime
    assembler and are left untouched here.
    """
    for spec in composite.type.internal_bindings:
        if not isinstance(spec.target, ServerRef):
            continue
        c_owner, c_itf = _endpoint(composite, spec.client_ref)
        s_owner, s_itf = _endpoint(composite, spec.target.ref)
        c_desc = c_owner.type.interface(c_itf)
        if c_owner is composite and c_desc is not None and c_desc.role is Role.SERVER:
            composite.exports[c_itf] = LocalTarget(s_owner, s_itf)
        elif s_owner is composite:
            c_owner.bind_fc(c_itf, DelegateTarget(composite, s_itf))
        else:
            c_owner.bind_fc(c_itf, LocalTarget(s_owner, s_itf))


def _endpoint(composite: ComponentInstance, ref: str) -> tuple[ComponentInstance, str]:
    owner_name, _, itf = ref.partition(".")
    if owner_name == "this":
        return composite, itf
    for child in composite.children:
        if child.type.name == owner_name:
            return child, itf
    raise NoSuchInterface(f"binding endpoint {ref!r} does not resolve in {composite.instance_id}")


def collect_brokered_bindings(
    instance: ComponentInstance,
) -> list[tuple[ComponentInstance, InterfaceDescriptor, BindingTarget]]:
    """All pid/filter bindings in a tree, paired with their owning instance.

    Export delegations (client_ref naming a server interface of the
    composite) are included: the owning instance is the composite and the
    descriptor is the exported server interface.
    """
    found = []
    for node in instance.walk():
        for spec in node.type.internal_bindings:
            if isinstance(spec.target, ServerRef):
                continue
            owner, itf_name = _endpoint(node, spec.client_ref)
            desc = owner.type.interface(itf_name)
            if desc is None:
                raise NoSuchInterface(f"brokered binding names unknown endpoint {spec.client_ref!r}")
            found.append((owner, desc, spec.target))
    return found
