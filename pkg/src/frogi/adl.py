"""Architecture description files: parsing, validation, normalization, printing.

The concrete syntax is XML (extension ``.fractal``). A definition declares
interfaces, components (primitive ``<content class=...>`` or nested
composites), per-node ``<bundle>`` assignments that drive packaging, and
bindings. The ``server`` attribute of a binding can be replaced by
``serverfilter`` (accepted synonym: ``filterserver``), whose value is a
search-filter expression the target service's properties must satisfy.

Unknown elements and attributes are errors, not ignored.
"""

from __future__ import annotations

import xml.parsers.expat
from dataclasses import dataclass, field

from frogi.errors import AdlParseError, FilterParseError
from frogi.filters import parse_filter, pid_of_filter, render_filter
from frogi.model import (
    DEFAULT_VERSION,
    EXTERNAL_CONTRACT,
    BindingSpec,
    Cardinality,
    Contingency,
    FilterTarget,
    InterfaceDescriptor,
    PidTarget,
    Role,
    ServerRef,
    Version,
    format_version,
    parse_version,
)

_ALLOWED = {
    "definition": {"name"},
    "bundle": {"name", "version"},
    "interface": {"name", "role", "signature", "version", "bundle",
                  "cardinality", "contingency"},
    "property": {"name", "value", "type"},
    "component": {"name"},
    "content": {"class"},
    "binding": {"client", "server", "serverfilter", "filterserver"},
}

_PROPERTY_TYPES = {"java.lang.String", "java.lang.Integer"}


@dataclass
class BundleAssignment:
    name: str
    version: Version = DEFAULT_VERSION
    line: int = field(default=0, compare=False)


@dataclass
class ComponentNode:
    name: str
    bundle: BundleAssignment | None = None
    interfaces: list[InterfaceDescriptor] = field(default_factory=list)
    content_ref: str | None = None
    components: list["ComponentNode"] = field(default_factory=list)
    bindings: list[BindingSpec] = field(default_factory=list)
    line: int = field(default=0, compare=False)

    @property
    def is_stub(self) -> bool:
        """A packaging cut: name and bundle only, body lives elsewhere."""
        return (self.content_ref is None and not self.components
                and not self.interfaces and not self.bindings)


@dataclass
class ArchitectureDefinition:
    name: str
    bundle: BundleAssignment | None = None
    interfaces: list[InterfaceDescriptor] = field(default_factory=list)
    components: list[ComponentNode] = field(default_factory=list)
    bindings: list[BindingSpec] = field(default_factory=list)
    line: int = field(default=0, compare=False)

    def component(self, name: str) -> ComponentNode | None:
        for c in self.components:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class Diagnostic:
    code: str
    path: str
    line: int
    detail: str

    def __str__(self):
        return f"{self.code} at {self.path} (line {self.line}): {self.detail}"


# --- XML loading -------------------------------------------------------------

class _Element:
    __slots__ = ("tag", "attrs", "children", "line")

    def __init__(self, tag, attrs, line):
        self.tag = tag
        self.attrs = attrs
        self.children = []
        self.line = line


def _load_xml(text: str) -> _Element:
    root: list[_Element] = []
    stack: list[_Element] = []
    parser = xml.parsers.expat.ParserCreate()

    def start(tag, attrs):
        el = _Element(tag, attrs, parser.CurrentLineNumber)
        if stack:
            stack[-1].children.append(el)
        else:
            root.append(el)
        stack.append(el)

    def end(tag):
        stack.pop()

    def chars(data):
        if data.strip():
            raise AdlParseError(
                f"unexpected text content {data.strip()!r}", parser.CurrentLineNumber
            )

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        parser.Parse(text, True)
    except xml.parsers.expat.ExpatError as exc:
        raise AdlParseError(f"malformed XML: {exc}", getattr(exc, "lineno", 0)) from exc
    if not root:
        raise AdlParseError("empty document")
    return root[0]


def _check_attrs(el: _Element):
    allowed = _ALLOWED.get(el.tag)
    if allowed is None:
        raise AdlParseError(f"unknown element <{el.tag}>", el.line)
    for attr in el.attrs:
        if attr not in allowed:
            raise AdlParseError(f"unknown attribute {attr!r} on <{el.tag}>", el.line)


def _require(el: _Element, attr: str) -> str:
    value = el.attrs.get(attr)
    if value is None:
        raise AdlParseError(f"<{el.tag}> requires attribute {attr!r}", el.line)
    return value


# --- parsing -----------------------------------------------------------------

def parse_adl(text: str) -> ArchitectureDefinition:
    """Parse definition text; defaults are applied before returning."""
    root = _load_xml(text)
    if root.tag != "definition":
        raise AdlParseError(f"root element must be <definition>, got <{root.tag}>", root.line)
    _check_attrs(root)
    definition = ArchitectureDefinition(name=_require(root, "name"), line=root.line)
    _fill_container(root, definition, allow_content=False)
    _apply_contract_defaults(definition)
    return definition


def _fill_container(el: _Element, node, allow_content: bool):
    seen_names: set[tuple[str, str]] = set()
    for child in el.children:
        _check_attrs(child)
        if child.tag == "bundle":
            if node.bundle is not None:
                raise AdlParseError("duplicate <bundle> element", child.line)
            version = child.attrs.get("version")
            node.bundle = BundleAssignment(
                name=_require(child, "name"),
                version=_parse_version_attr(version, child.line),
                line=child.line,
            )
        elif child.tag == "interface":
            itf = _parse_interface(child)
            if ("interface", itf.name) in seen_names:
                raise AdlParseError(f"duplicate interface name {itf.name!r}", child.line)
            seen_names.add(("interface", itf.name))
            node.interfaces.append(itf)
        elif child.tag == "component":
            comp = _parse_component(child)
            if ("component", comp.name) in seen_names:
                raise AdlParseError(f"duplicate component name {comp.name!r}", child.line)
            seen_names.add(("component", comp.name))
            node.components.append(comp)
        elif child.tag == "binding":
            node.bindings.append(_parse_binding(child))
        elif child.tag == "content":
            if not allow_content:
                raise AdlParseError("<content> is not allowed here", child.line)
            if node.content_ref is not None:
                raise AdlParseError("duplicate <content> element", child.line)
            if child.children:
                raise AdlParseError("<content> must be empty", child.line)
            node.content_ref = _require(child, "class")
        else:
            raise AdlParseError(f"<{child.tag}> is not allowed inside <{el.tag}>", child.line)


def _parse_component(el: _Element) -> ComponentNode:
    comp = ComponentNode(name=_require(el, "name"), line=el.line)
    _fill_container(el, comp, allow_content=True)
    if comp.content_ref is not None and comp.components:
        raise AdlParseError(
            f"component {comp.name!r} has both <content> and nested components", el.line
        )
    return comp


def _parse_interface(el: _Element) -> InterfaceDescriptor:
    role_text = _require(el, "role")
    try:
        role = Role(role_text)
    except ValueError:
        raise AdlParseError(f"role must be server or client, got {role_text!r}", el.line)
    cardinality = Cardinality(el.attrs.get("cardinality", "singleton")) \
        if el.attrs.get("cardinality", "singleton") in ("singleton", "collection") \
        else None
    if cardinality is None:
        raise AdlParseError(f"bad cardinality {el.attrs['cardinality']!r}", el.line)
    contingency_text = el.attrs.get("contingency", "mandatory")
    if contingency_text not in ("mandatory", "optional"):
        raise AdlParseError(f"bad contingency {contingency_text!r}", el.line)

    properties: dict = {}
    for sub in el.children:
        _check_attrs(sub)
        if sub.tag != "property":
            raise AdlParseError(f"<{sub.tag}> is not allowed inside <interface>", sub.line)
        name = _require(sub, "name")
        value: str | int = _require(sub, "value")
        ptype = sub.attrs.get("type", "java.lang.String")
        if ptype not in _PROPERTY_TYPES:
            raise AdlParseError(f"unsupported property type {ptype!r}", sub.line)
        if ptype == "java.lang.Integer":
            try:
                value = int(value)
            except ValueError:
                raise AdlParseError(f"property {name!r} is not an integer", sub.line)
        if name in properties:
            raise AdlParseError(f"duplicate property name {name!r}", sub.line)
        properties[name] = value

    return InterfaceDescriptor(
        name=_require(el, "name"),
        role=role,
        signature=_require(el, "signature"),
        cardinality=cardinality,
        contingency=Contingency(contingency_text),
        version=_parse_version_attr(el.attrs.get("version"), el.line),
        contract_bundle=el.attrs.get("bundle"),
        properties=properties,
        line=el.line,
    )


def _parse_binding(el: _Element) -> BindingSpec:
    if el.children:
        raise AdlParseError("<binding> must be empty", el.line)
    client = _require(el, "client")
    server = el.attrs.get("server")
    filter_text = el.attrs.get("serverfilter", el.attrs.get("filterserver"))
    if (server is None) == (filter_text is None):
        raise AdlParseError(
            "<binding> requires exactly one of server= or serverfilter=", el.line
        )
    if server is not None:
        target = ServerRef(server)
    else:
        try:
            target = FilterTarget(parse_filter(filter_text))
        except FilterParseError as exc:
            raise AdlParseError(f"bad serverfilter: {exc}", el.line) from exc
    return BindingSpec(client_ref=client, target=target, line=el.line)


def _parse_version_attr(text: str | None, line: int) -> Version:
    if text is None:
        return DEFAULT_VERSION
    try:
        return parse_version(text)
    except ValueError as exc:
        raise AdlParseError(str(exc), line) from exc


def _apply_contract_defaults(definition: ArchitectureDefinition) -> None:
    """Interfaces without an explicit bundle are packaged with their component."""

    def walk(node, enclosing: str | None):
        effective = node.bundle.name if node.bundle else enclosing
        for itf in node.interfaces:
            if itf.contract_bundle is None:
                itf.contract_bundle = effective
        for comp in getattr(node, "components", []):
            walk(comp, effective)

    walk(definition, None)


# --- component paths and pid derivation --------------------------------------

def component_paths(definition: ArchitectureDefinition) -> dict[str, ComponentNode | None]:
    """Path -> node for every component; the definition itself maps its name."""
    paths: dict[str, ComponentNode | None] = {definition.name: None}

    def walk(node: ComponentNode, prefix: str):
        path = f"{prefix}.{node.name}" if prefix else node.name
        paths[path] = node
        for sub in node.components:
            walk(sub, path)

    for comp in definition.components:
        walk(comp, "")
    return paths


def derive_pid(definition_name: str, component_path: str) -> str:
    """Deterministic persistent id: definition name dot component path."""
    if component_path in ("", definition_name):
        return definition_name.lower()
    return f"{definition_name}.{component_path}".lower()


# --- validation ---------------------------------------------------------------

class _Scope:
    """One binding scope: a composite with its interfaces and direct children."""

    def __init__(self, owner_name, path, interfaces, components, bindings, bundle):
        self.owner_name = owner_name
        self.path = path  # '' for the definition scope
        self.interfaces = {i.name: i for i in interfaces}
        self.components = {c.name: c for c in components}
        self.bindings = bindings
        self.bundle = bundle


def _scopes(definition: ArchitectureDefinition):
    root_bundle = definition.bundle.name if definition.bundle else None
    yield _Scope(definition.name, "", definition.interfaces,
                 definition.components, definition.bindings, root_bundle)

    def walk(node: ComponentNode, path: str, enclosing: str | None):
        effective = node.bundle.name if node.bundle else enclosing
        if node.components or node.bindings:
            yield _Scope(node.name, path, node.interfaces,
                         node.components, node.bindings, effective)
        for sub in node.components:
            sub_path = f"{path}.{sub.name}" if path else sub.name
            yield from walk(sub, sub_path, effective)

    for comp in definition.components:
        yield from walk(comp, comp.name, root_bundle)


def _effective_bundle(definition, path_map, path: str) -> str | None:
    """Nearest self-or-ancestor bundle assignment for a component path."""
    parts = [] if path in ("", definition.name) else path.split(".")
    assignment = definition.bundle.name if definition.bundle else None
    node_list = definition.components
    for name in parts:
        node = next((c for c in node_list if c.name == name), None)
        if node is None:
            return assignment
        if node.bundle:
            assignment = node.bundle.name
        node_list = node.components
    return assignment


def validate(definition: ArchitectureDefinition) -> list[Diagnostic]:
    """Semantic checks; an empty list means the definition is wirable."""
    diagnostics: list[Diagnostic] = []
    path_map = component_paths(definition)
    pid_to_path = {derive_pid(definition.name, p): p for p in path_map}

    for itf in definition.interfaces:
        _check_properties_placement(diagnostics, definition.name, itf)
    for comp_path, node in path_map.items():
        if node is None:
            continue
        for itf in node.interfaces:
            _check_properties_placement(diagnostics, comp_path, itf)

    for scope in _scopes(definition):
        for binding in scope.bindings:
            _validate_binding(diagnostics, definition, path_map, pid_to_path, scope, binding)
    return diagnostics


def _check_properties_placement(diagnostics, where, itf: InterfaceDescriptor):
    if itf.properties and itf.role is not Role.SERVER:
        diagnostics.append(Diagnostic(
            "PROPERTY_ON_CLIENT_INTERFACE",
            f"{where}.{itf.name}",
            itf.line,
            "registration properties are only meaningful on server interfaces",
        ))


def _resolve_endpoint(scope: _Scope, ref: str):
    """-> (kind, interface | None, component | None); kind in {this, child, bad}."""
    owner, _, itf_name = ref.partition(".")
    if not itf_name:
        return "bad", None, None
    if owner == "this":
        return "this", scope.interfaces.get(itf_name), None
    comp = scope.components.get(owner)
    if comp is None:
        return "bad", None, None
    itf = next((i for i in comp.interfaces if i.name == itf_name), None)
    return "child", itf, comp


def _validate_binding(diagnostics, definition, path_map, pid_to_path, scope, binding):
    where = scope.path or definition.name

    def diag(code, detail):
        diagnostics.append(Diagnostic(code, where, binding.line, detail))

    kind, client_itf, client_comp = _resolve_endpoint(scope, binding.client_ref)
    if kind == "bad":
        diag("UNRESOLVED_ENDPOINT", f"client endpoint {binding.client_ref!r} does not resolve")
        return
    if client_itf is None and not (client_comp is not None and client_comp.is_stub):
        diag("UNRESOLVED_ENDPOINT", f"client endpoint {binding.client_ref!r} names no interface")
        return

    if isinstance(binding.target, ServerRef):
        s_kind, server_itf, server_comp = _resolve_endpoint(scope, binding.target.ref)
        if s_kind == "bad":
            diag("UNRESOLVED_ENDPOINT", f"server endpoint {binding.target.ref!r} does not resolve")
            return
        if server_itf is None and not (server_comp is not None and server_comp.is_stub):
            diag("UNRESOLVED_ENDPOINT", f"server endpoint {binding.target.ref!r} names no interface")
            return
        # Role rules: inside the composite the internal face of an interface
        # inverts its role, so this.<server itf> is a legal client endpoint
        # (an export) and this.<client itf> a legal server endpoint.
        if client_itf is not None:
            expected = Role.SERVER if kind == "this" else Role.CLIENT
            if client_itf.role is not expected:
                diag("ROLE_MISMATCH",
                     f"client endpoint {binding.client_ref!r} must have role {expected.value}")
        if server_itf is not None:
            expected = Role.CLIENT if s_kind == "this" else Role.SERVER
            if server_itf.role is not expected:
                diag("ROLE_MISMATCH",
                     f"server endpoint {binding.target.ref!r} must have role {expected.value}")
        if client_itf is not None and server_itf is not None \
                and client_itf.signature != server_itf.signature:
            diag("SIGNATURE_MISMATCH",
                 f"{client_itf.signature!r} vs {server_itf.signature!r}")
        return

    if isinstance(binding.target, (FilterTarget, PidTarget)):
        if client_itf is not None and client_itf.role is not Role.CLIENT \
                and not (kind == "this" and client_itf.role is Role.SERVER):
            diag("ROLE_MISMATCH",
                 f"client endpoint {binding.client_ref!r} of a brokered binding "
                 "must have role client")
        pid = binding.target.pid if isinstance(binding.target, PidTarget) \
            else pid_of_filter(binding.target.filter)
        if pid is not None and pid in pid_to_path:
            target_bundle = _effective_bundle(definition, path_map, pid_to_path[pid])
            client_path = scope.path if kind == "this" else (
                f"{scope.path}.{client_comp.name}" if scope.path else client_comp.name)
            client_bundle = _effective_bundle(definition, path_map, client_path)
            if target_bundle is not None and target_bundle == client_bundle:
                diag("FILTER_ON_LOCAL_BINDING",
                     "brokered binding targets a provider in the same bundle; "
                     "use server= for intra-bundle bindings")


# --- normalization -------------------------------------------------------------

def normalize_bindings(definition: ArchitectureDefinition) -> ArchitectureDefinition:
    """Rewrite cross-bundle ``server=`` targets into rigid pid filters.

    Intra-bundle server references and explicit filters pass through;
    the input definition is left untouched.
    """
    import copy

    out = copy.deepcopy(definition)
    for scope in _scopes(out):
        normalized = [normalize_binding(out, b, scope.path) for b in scope.bindings]
        if scope.path == "":
            out.bindings[:] = normalized
        else:
            scope.bindings[:] = normalized
    return out


def normalize_binding(
    definition: ArchitectureDefinition, binding: BindingSpec, scope_path: str = ""
) -> BindingSpec:
    """Normalize one binding declared in the scope at ``scope_path``."""
    if not isinstance(binding.target, ServerRef):
        return binding
    path_map = component_paths(definition)

    def endpoint_path(ref: str) -> str:
        owner, _, _ = ref.partition(".")
        if owner == "this":
            return scope_path or definition.name
        return f"{scope_path}.{owner}" if scope_path else owner

    client_path = endpoint_path(binding.client_ref)
    server_path = endpoint_path(binding.target.ref)
    client_bundle = _effective_bundle(definition, path_map, client_path)
    server_bundle = _effective_bundle(definition, path_map, server_path)
    if client_bundle == server_bundle:
        return binding
    pid = derive_pid(definition.name, server_path)
    return BindingSpec(binding.client_ref, PidTarget(pid), binding.line)


# --- canonical printing ---------------------------------------------------------

def _xml_escape(value: str) -> str:
    return (value.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def print_adl(definition: ArchitectureDefinition) -> str:
    """Canonical form: 2-space indent, fixed attribute order, defaults omitted."""
    lines: list[str] = []
    root_bundle = definition.bundle.name if definition.bundle else None
    lines.append(f'<definition name="{_xml_escape(definition.name)}">')
    if definition.bundle:
        lines.append("  " + _bundle_line(definition.bundle))
    for itf in definition.interfaces:
        lines.extend(_interface_lines(itf, root_bundle, indent="  "))
    for comp in definition.components:
        lines.extend(_component_lines(comp, root_bundle, indent="  "))
    for binding in definition.bindings:
        lines.append("  " + _binding_line(binding))
    lines.append("</definition>")
    return "\n".join(lines) + "\n"


def _bundle_line(bundle: BundleAssignment) -> str:
    attrs = f'name="{_xml_escape(bundle.name)}"'
    if bundle.version != DEFAULT_VERSION:
        attrs += f' version="{format_version(bundle.version)}"'
    return f"<bundle {attrs}/>"


def _interface_lines(itf: InterfaceDescriptor, enclosing: str | None, indent: str) -> list[str]:
    attrs = [f'name="{_xml_escape(itf.name)}"', f'role="{itf.role.value}"',
             f'signature="{_xml_escape(itf.signature)}"']
    if itf.version != DEFAULT_VERSION:
        attrs.append(f'version="{format_version(itf.version)}"')
    if itf.contract_bundle is not None and itf.contract_bundle != enclosing:
        attrs.append(f'bundle="{_xml_escape(itf.contract_bundle)}"')
    if itf.cardinality is Cardinality.COLLECTION:
        attrs.append(f'cardinality="{itf.cardinality.value}"')
    if itf.contingency is Contingency.OPTIONAL:
        attrs.append(f'contingency="{itf.contingency.value}"')
    head = f"{indent}<interface " + " ".join(attrs)
    if not itf.properties:
        return [head + "/>"]
    lines = [head + ">"]
    for name, value in itf.properties.items():
        p_attrs = [f'name="{_xml_escape(name)}"', f'value="{_xml_escape(str(value))}"']
        if isinstance(value, int):
            p_attrs.append('type="java.lang.Integer"')
        lines.append(f"{indent}  <property " + " ".join(p_attrs) + "/>")
    lines.append(f"{indent}</interface>")
    return lines


def _component_lines(comp: ComponentNode, enclosing: str | None, indent: str) -> list[str]:
    effective = comp.bundle.name if comp.bundle else enclosing
    head = f'{indent}<component name="{_xml_escape(comp.name)}"'
    if comp.is_stub and comp.bundle is None:
        return [head + "/>"]
    lines = [head + ">"]
    if comp.bundle:
        lines.append(indent + "  " + _bundle_line(comp.bundle))
    for itf in comp.interfaces:
        lines.extend(_interface_lines(itf, effective, indent + "  "))
    if comp.content_ref is not None:
        lines.append(f'{indent}  <content class="{_xml_escape(comp.content_ref)}"/>')
    for sub in comp.components:
        lines.extend(_component_lines(sub, effective, indent + "  "))
    for binding in comp.bindings:
        lines.append(indent + "  " + _binding_line(binding))
    lines.append(f"{indent}</component>")
    return lines


def _binding_line(binding: BindingSpec) -> str:
    client = f'client="{_xml_escape(binding.client_ref)}"'
    target = binding.target
    if isinstance(target, ServerRef):
        return f'<binding {client} server="{_xml_escape(target.ref)}"/>'
    if isinstance(target, PidTarget):
        filter_text = f"(service.pid={target.pid})"
        return f'<binding {client} serverfilter="{_xml_escape(filter_text)}"/>'
    return f'<binding {client} serverfilter="{_xml_escape(render_filter(target.filter))}"/>'
