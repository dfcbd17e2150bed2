"""Exception hierarchy shared by the runtime and the toolchain."""

from __future__ import annotations


class FrogiError(Exception):
    """Base class for all errors raised by this package."""

    @property
    def code(self) -> str:
        return type(self).__name__


# --- filter / registry ------------------------------------------------------

class FilterParseError(FrogiError):
    """Malformed filter text; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class DuplicatePid(FrogiError):
    def __init__(self, pid: str):
        super().__init__(f"a live registration already holds service.pid {pid!r}")
        self.pid = pid


class UnknownService(FrogiError):
    def __init__(self, service_id: int):
        super().__init__(f"no live registration with service.id {service_id}")
        self.service_id = service_id


class UnknownSubscription(FrogiError):
    pass


class InvalidProperties(FrogiError):
    pass


# --- component model --------------------------------------------------------

class UnknownImplementation(FrogiError):
    def __init__(self, ref: str):
        super().__init__(f"no behavior registered for implementation {ref!r}")
        self.ref = ref


class NoSuchInterface(FrogiError):
    pass


class AlreadyBound(FrogiError):
    pass


class NotBound(FrogiError):
    pass


class IllegalLifecycleState(FrogiError):
    pass


class UnresolvedMandatoryDependency(FrogiError):
    def __init__(self, interface: str):
        super().__init__(f"mandatory client interface {interface!r} is unbound")
        self.interface = interface


class NotComposite(FrogiError):
    pass


class ChildBound(FrogiError):
    pass


class NoSuchAttribute(FrogiError):
    pass


class UnboundInterface(FrogiError):
    """Invocation routed through a client interface with no bound target."""


# --- adl / packager ---------------------------------------------------------

class AdlParseError(FrogiError):
    """Syntax or structural error in an architecture definition."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"{message} (line {line})" if line else message)
        self.line = line


class NoBundleForRoot(FrogiError):
    pass


class ConflictingContractVersion(FrogiError):
    def __init__(self, package: str, bundle: str, versions: tuple):
        super().__init__(
            f"package {package!r} assigned to bundle {bundle!r} "
            f"at conflicting versions {versions[0]} and {versions[1]}"
        )
        self.package = package
        self.bundle = bundle


# --- framework / binder -----------------------------------------------------

class MalformedArchive(FrogiError):
    pass


class DuplicateSymbolicNameAndVersion(FrogiError):
    pass


class UnknownBundle(FrogiError):
    def __init__(self, ref):
        super().__init__(f"unknown bundle {ref!r}")


class BundleStateError(FrogiError):
    """Operation not permitted in the bundle's current state."""


class ResolutionFailed(FrogiError):
    def __init__(self, missing):
        pretty = ", ".join(f"{p}>={v}" for p, v in sorted(missing))
        super().__init__(f"unresolved imports: {pretty}")
        self.missing = missing


class ActivatorFailure(FrogiError):
    pass


class MissingController(FrogiError):
    def __init__(self, instance_id: str):
        super().__init__(f"controller services for {instance_id!r} not present")
        self.instance_id = instance_id


class TargetNotFound(FrogiError):
    pass


# --- triggers / cli ---------------------------------------------------------

class CronParseError(FrogiError):
    pass


class WrongFieldCount(CronParseError):
    pass


class OutOfRange(CronParseError):
    pass


class UnknownCommand(FrogiError):
    def __init__(self, name: str):
        super().__init__(f"no shell command registered under {name!r}")
        self.name = name


class ScenarioError(FrogiError):
    pass
