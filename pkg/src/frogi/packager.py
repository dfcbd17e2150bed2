"""Partition a validated architecture into deployable bundle archives.

Each distinct ``<bundle>`` assignment becomes one archive; the recursion into
a composite is cut where a differently-named ``<bundle>`` appears, leaving a
stub (name + bundle) in the enclosing fragment. Interfaces carrying a
``bundle="..."`` attribute put their signature's package into that contract
bundle at the declared version; every component bundle then imports the
contract packages it uses plus the runtime API.

Archive layout (directory): ``<name>/MANIFEST.MF`` and ``<name>/frogi.fractal``
(the fragment in canonical print). Manifest headers, in order:
Bundle-SymbolicName, Bundle-Version, Import-Package, Export-Package,
Frogi-Root, then Frogi-Policy when a lifecycle policy is pinned.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field

from frogi.adl import (
    ArchitectureDefinition,
    BundleAssignment,
    ComponentNode,
    component_paths,
    normalize_binding,
    parse_adl,
    print_adl,
    validate,
    _effective_bundle,
    _scopes,
)
from frogi.errors import (
    ConflictingContractVersion,
    MalformedArchive,
    NoBundleForRoot,
)
from frogi.model import (
    DEFAULT_VERSION,
    EXTERNAL_CONTRACT,
    BindingSpec,
    FilterTarget,
    PidTarget,
    ServerRef,
    Version,
    format_version,
    parse_version,
)

RUNTIME_API_PACKAGE = "frogi.api"
RUNTIME_BUNDLE_NAME = "frogi-runtime"
RUNTIME_BUNDLE_VERSION: Version = (1, 0, 0)
RUNTIME_EXPORTS: tuple = ((RUNTIME_API_PACKAGE, (1, 0, 0)), ("frogi.cm", (1, 0, 0)))

DEFAULT_SYSTEM_PACKAGES = ("java.lang",)

MANIFEST_NAME = "MANIFEST.MF"
FRAGMENT_NAME = "frogi.fractal"


@dataclass
class BundleDescriptor:
    symbolic_name: str
    version: Version
    exports: list[tuple[str, Version]] = field(default_factory=list)
    imports: list[tuple[str, Version]] = field(default_factory=list)
    system_imports: list[str] = field(default_factory=list)
    root_components: list[str] = field(default_factory=list)
    adl_fragment: ArchitectureDefinition | None = None
    external_bindings: list[BindingSpec] = field(default_factory=list)
    policy: str | None = None

    @property
    def definition_name(self) -> str:
        return self.adl_fragment.name if self.adl_fragment else self.symbolic_name


@dataclass
class BundlePlan:
    bundles: list[BundleDescriptor]
    contract_bundles: list[tuple[str, list[tuple[str, Version]]]]

    def bundle(self, name: str) -> BundleDescriptor | None:
        for b in self.bundles:
            if b.symbolic_name == name:
                return b
        return None


def signature_package(signature: str) -> str:
    """'y.Y' -> 'y'; a dotless signature is its own package."""
    package, _, _ = signature.rpartition(".")
    return package or signature


# --- partitioning -------------------------------------------------------------

def partition(
    definition: ArchitectureDefinition,
    system_packages: tuple[str, ...] = DEFAULT_SYSTEM_PACKAGES,
) -> BundlePlan:
    diagnostics = validate(definition)
    if diagnostics:
        raise ValueError(f"definition has {len(diagnostics)} diagnostics; first: {diagnostics[0]}")
    if definition.bundle is None:
        raise NoBundleForRoot(f"definition {definition.name!r} declares no <bundle>")

    cuts = _cut_points(definition)
    versions = _bundle_versions(definition, cuts)
    fragments, bindings_for = _build_fragments(definition, cuts)
    exports, imports, system_imports = _contract_assignment(
        definition, versions, system_packages
    )

    descriptors: dict[str, BundleDescriptor] = {}
    order: list[str] = []
    for name, roots in cuts.items():
        order.append(name)
        descriptors[name] = BundleDescriptor(
            symbolic_name=name,
            version=versions.get(name, DEFAULT_VERSION),
            root_components=roots,
        )
    for name in exports:
        if name not in descriptors:
            order.append(name)
            descriptors[name] = BundleDescriptor(
                symbolic_name=name,
                version=versions.get(name, DEFAULT_VERSION),
            )

    for name, descriptor in descriptors.items():
        descriptor.exports = sorted(exports.get(name, {}).items())
        pkg_imports = {
            pkg: ver for pkg, ver in imports.get(name, {}).items()
            if pkg not in exports.get(name, {})
        }
        if descriptor.root_components:
            pkg_imports.setdefault(RUNTIME_API_PACKAGE, DEFAULT_VERSION)
        descriptor.imports = sorted(pkg_imports.items())
        descriptor.system_imports = sorted(system_imports.get(name, set()))
        fragment = fragments.get(name)
        if fragment is None:
            fragment = ArchitectureDefinition(
                name=definition.name,
                bundle=BundleAssignment(name, versions.get(name, DEFAULT_VERSION)),
            )
        fragment.bindings.extend(bindings_for.get(name, []))
        descriptor.adl_fragment = fragment
        descriptor.external_bindings = _brokered(fragment)

    plan = BundlePlan(
        bundles=[descriptors[name] for name in order],
        contract_bundles=[
            (name, sorted(packages.items())) for name, packages in sorted(exports.items())
            if packages
        ],
    )
    _check_closure(plan)
    return plan


def _cut_points(definition: ArchitectureDefinition) -> dict[str, list[str]]:
    """Bundle name -> component paths rooted there (definition path first)."""
    root_bundle = definition.bundle.name
    cuts: dict[str, list[str]] = {root_bundle: [definition.name]}

    def walk(node: ComponentNode, path: str, enclosing: str):
        effective = enclosing
        if node.bundle is not None and node.bundle.name != enclosing:
            effective = node.bundle.name
            cuts.setdefault(effective, []).append(path)
        for sub in node.components:
            walk(sub, f"{path}.{sub.name}", effective)

    for comp in definition.components:
        walk(comp, comp.name, root_bundle)
    return cuts


def _bundle_versions(definition, cuts) -> dict[str, Version]:
    versions: dict[str, Version] = {}

    def record(name: str, version: Version, where: str):
        if name in versions and versions[name] != version:
            raise ValueError(
                f"bundle {name!r} declared at two versions "
                f"({format_version(versions[name])} vs {format_version(version)} at {where})"
            )
        versions.setdefault(name, version)

    record(definition.bundle.name, definition.bundle.version, definition.name)

    def walk(node: ComponentNode, path: str):
        if node.bundle is not None:
            record(node.bundle.name, node.bundle.version, path)
        for sub in node.components:
            walk(sub, f"{path}.{sub.name}")

    for comp in definition.components:
        walk(comp, comp.name)
    return versions


def _copy_for_fragment(node: ComponentNode, definition, enclosing: str, scope_path: str) -> ComponentNode:
    """Copy a cut subtree; deeper cuts collapse to stubs, bindings normalize."""
    out = ComponentNode(
        name=node.name,
        bundle=copy.deepcopy(node.bundle),
        interfaces=copy.deepcopy(node.interfaces),
        content_ref=node.content_ref,
        line=node.line,
    )
    for sub in node.components:
        sub_path = f"{scope_path}.{sub.name}" if scope_path else sub.name
        if sub.bundle is not None and sub.bundle.name != enclosing:
            out.components.append(ComponentNode(
                name=sub.name, bundle=copy.deepcopy(sub.bundle), line=sub.line))
        else:
            out.components.append(_copy_for_fragment(sub, definition, enclosing, sub_path))
    out.bindings = [
        normalize_binding(definition, b, scope_path) for b in node.bindings
    ]
    return out


def _build_fragments(definition, cuts):
    """Per-bundle fragment definitions plus redistributed scope bindings."""
    path_map = component_paths(definition)
    versions = _bundle_versions(definition, cuts)
    fragments: dict[str, ArchitectureDefinition] = {}
    bindings_for: dict[str, list[BindingSpec]] = {}

    for name, roots in cuts.items():
        fragment = ArchitectureDefinition(
            name=definition.name,
            bundle=BundleAssignment(name, versions.get(name, DEFAULT_VERSION)),
        )
        for path in roots:
            if path == definition.name:
                fragment.bundle = copy.deepcopy(definition.bundle)
                fragment.interfaces = copy.deepcopy(definition.interfaces)
                for comp in definition.components:
                    if comp.bundle is not None and comp.bundle.name != name:
                        fragment.components.append(ComponentNode(
                            name=comp.name, bundle=copy.deepcopy(comp.bundle), line=comp.line))
                    else:
                        fragment.components.append(
                            _copy_for_fragment(comp, definition, name, comp.name))
            else:
                node = path_map[path]
                fragment.components.append(
                    _copy_for_fragment(node, definition, name, path))
        fragments[name] = fragment

    # Scope bindings go to the scope owner's bundle; a brokered binding whose
    # client component is packaged elsewhere is copied there as well, so the
    # client can drive it under the autonomous policy.
    for scope in _scopes(definition):
        owner_bundle = _effective_bundle(definition, path_map, scope.path)
        for binding in scope.bindings:
            normalized = normalize_binding(definition, binding, scope.path)
            if scope.path == "":
                bindings_for.setdefault(owner_bundle, []).append(normalized)
            # nested-scope bindings were copied with their composite node
            owner_name, _, _ = binding.client_ref.partition(".")
            if owner_name == "this":
                continue
            client_path = f"{scope.path}.{owner_name}" if scope.path else owner_name
            client_bundle = _effective_bundle(definition, path_map, client_path)
            if client_bundle != owner_bundle:
                bindings_for.setdefault(client_bundle, []).append(normalized)
    return fragments, bindings_for


def _contract_assignment(definition, versions, system_packages):
    exports: dict[str, dict[str, Version]] = {}
    imports: dict[str, dict[str, Version]] = {}
    system_imports: dict[str, set[str]] = {}
    path_map = component_paths(definition)

    def handle(itf, user_bundle: str):
        package = signature_package(itf.signature)
        assigned = itf.contract_bundle
        defaulted = assigned == user_bundle
        if assigned == EXTERNAL_CONTRACT or (package in system_packages and defaulted):
            system_imports.setdefault(user_bundle, set()).add(package)
            return
        held = exports.setdefault(assigned, {})
        if package in held and held[package] != itf.version:
            raise ConflictingContractVersion(
                package, assigned,
                (format_version(held[package]), format_version(itf.version)),
            )
        held.setdefault(package, itf.version)
        if assigned != user_bundle:
            current = imports.setdefault(user_bundle, {})
            current[package] = max(current.get(package, DEFAULT_VERSION), itf.version)

    root_bundle = definition.bundle.name
    for itf in definition.interfaces:
        handle(itf, root_bundle)
    for path, node in path_map.items():
        if node is None:
            continue
        user_bundle = _effective_bundle(definition, path_map, path)
        for itf in node.interfaces:
            handle(itf, user_bundle)
    return exports, imports, system_imports


def _brokered(fragment: ArchitectureDefinition) -> list[BindingSpec]:
    found = [b for b in fragment.bindings if not isinstance(b.target, ServerRef)]

    def walk(node: ComponentNode):
        found.extend(b for b in node.bindings if not isinstance(b.target, ServerRef))
        for sub in node.components:
            walk(sub)

    for comp in fragment.components:
        walk(comp)
    return found


def _check_closure(plan: BundlePlan) -> None:
    available: dict[str, list[Version]] = {}
    for pkg, ver in RUNTIME_EXPORTS:
        available.setdefault(pkg, []).append(ver)
    for b in plan.bundles:
        for pkg, ver in b.exports:
            available.setdefault(pkg, []).append(ver)
    for b in plan.bundles:
        for pkg, min_version in b.imports:
            if not any(v >= min_version for v in available.get(pkg, [])):
                raise ValueError(
                    f"plan is not closed: {b.symbolic_name} imports "
                    f"{pkg}>={format_version(min_version)} with no exporter"
                )


# --- manifest format ------------------------------------------------------------

def _package_list(entries: list[tuple[str, Version]]) -> str:
    parts = []
    for package, version in entries:
        if version != DEFAULT_VERSION:
            parts.append(f"{package};specification-version={format_version(version)}")
        else:
            parts.append(package)
    return ", ".join(parts)


def manifest_text(descriptor: BundleDescriptor) -> str:
    lines = [
        f"Bundle-SymbolicName: {descriptor.symbolic_name}",
        f"Bundle-Version: {format_version(descriptor.version)}",
        _header("Import-Package", _package_list(descriptor.imports)),
        _header("Export-Package", _package_list(descriptor.exports)),
        _header("Frogi-Root", ", ".join(descriptor.root_components)),
    ]
    if descriptor.policy:
        lines.append(f"Frogi-Policy: {descriptor.policy}")
    return "\n".join(lines) + "\n"


def _header(name: str, value: str) -> str:
    return f"{name}: {value}" if value else f"{name}:"


def parse_manifest(text: str) -> dict[str, str]:
    headers: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        name, sep, value = raw.partition(":")
        if not sep or not name.strip():
            raise MalformedArchive(f"bad manifest line {lineno}: {raw!r}")
        headers[name.strip()] = value.strip()
    for required in ("Bundle-SymbolicName", "Bundle-Version"):
        if required not in headers:
            raise MalformedArchive(f"manifest lacks {required}")
    return headers


def _parse_package_list(value: str) -> list[tuple[str, Version]]:
    out = []
    for chunk in filter(None, (c.strip() for c in value.split(","))):
        package, _, param = chunk.partition(";")
        version = DEFAULT_VERSION
        if param:
            key, _, v = param.partition("=")
            if key.strip() != "specification-version":
                raise MalformedArchive(f"unknown package parameter {param!r}")
            try:
                version = parse_version(v.strip())
            except ValueError as exc:
                raise MalformedArchive(str(exc)) from exc
        out.append((package.strip(), version))
    return out


# --- archive I/O -----------------------------------------------------------------

def emit_bundle(descriptor: BundleDescriptor, out_dir: str) -> str:
    """Write the archive directory; byte-identical across runs."""
    archive = os.path.join(out_dir, descriptor.symbolic_name)
    os.makedirs(archive, exist_ok=True)
    with open(os.path.join(archive, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        fh.write(manifest_text(descriptor))
    with open(os.path.join(archive, FRAGMENT_NAME), "w", encoding="utf-8") as fh:
        fh.write(print_adl(descriptor.adl_fragment))
    return archive


def runtime_descriptor() -> BundleDescriptor:
    fragment = ArchitectureDefinition(
        name=RUNTIME_BUNDLE_NAME,
        bundle=BundleAssignment(RUNTIME_BUNDLE_NAME, RUNTIME_BUNDLE_VERSION),
    )
    return BundleDescriptor(
        symbolic_name=RUNTIME_BUNDLE_NAME,
        version=RUNTIME_BUNDLE_VERSION,
        exports=list(RUNTIME_EXPORTS),
        adl_fragment=fragment,
    )


def emit_runtime_bundle(out_dir: str) -> str:
    return emit_bundle(runtime_descriptor(), out_dir)


def read_bundle_archive(path: str) -> BundleDescriptor:
    """Reconstruct a descriptor from an emitted archive directory."""
    manifest_path = os.path.join(path, MANIFEST_NAME)
    fragment_path = os.path.join(path, FRAGMENT_NAME)
    if not os.path.isfile(manifest_path) or not os.path.isfile(fragment_path):
        raise MalformedArchive(f"{path!r} is not a bundle archive")
    with open(manifest_path, encoding="utf-8") as fh:
        headers = parse_manifest(fh.read())
    with open(fragment_path, encoding="utf-8") as fh:
        try:
            fragment = parse_adl(fh.read())
        except Exception as exc:
            raise MalformedArchive(f"bad fragment in {path!r}: {exc}") from exc
    try:
        version = parse_version(headers["Bundle-Version"])
    except ValueError as exc:
        raise MalformedArchive(str(exc)) from exc
    roots = [r.strip() for r in headers.get("Frogi-Root", "").split(",") if r.strip()]
    policy = headers.get("Frogi-Policy") or None
    if policy is not None and policy not in ("composite", "autonomous"):
        raise MalformedArchive(f"unknown Frogi-Policy {policy!r}")
    return BundleDescriptor(
        symbolic_name=headers["Bundle-SymbolicName"],
        version=version,
        exports=_parse_package_list(headers.get("Export-Package", "")),
        imports=_parse_package_list(headers.get("Import-Package", "")),
        root_components=roots,
        adl_fragment=fragment,
        external_bindings=_brokered(fragment),
        policy=policy,
    )
