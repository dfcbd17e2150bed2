"""Operator console: one-line commands over a running framework.

Commands: package <adl-file> <out-dir> [policy], install <archive>,
start <id|name>, stop <id|name>, update <id> <archive>, uninstall <id>,
refresh [ids], bundles, services [filter], inspect <pid>, tick <duration>,
call <pid> <itf> [arg], expect <predicate>.

Expect predicates: ``bundle-state <name> <state>``, ``service-present
<filter>``, ``service-absent <filter>``, ``instance-state <pid> <state>``,
``output-contains <text>`` (tested against the previous command's output).

Scenario mode executes a script of such lines; the first failed expectation
or errored command fails the scenario with its line number. Exit codes:
0 scenario passed, 1 failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from frogi import adl, demo, packager
from frogi.errors import FrogiError
from frogi.filters import parse_filter
from frogi.framework import Framework
from frogi.model import format_version
from frogi.triggers import CronManager, ShellDispatcher


class Console:
    def __init__(self, framework: Framework | None = None, storage: str | None = None):
        self.framework = framework or Framework(
            storage_dir=storage, behaviors=demo.default_behaviors()
        )
        self.cron = CronManager(self.framework.registry)
        self.shell = ShellDispatcher(self.framework.registry)
        self.last_output = ""

    # -- command dispatch ------------------------------------------------------

    def run_command(self, line: str) -> str:
        try:
            output = self._dispatch(line.strip())
        except FrogiError as exc:
            output = f"ERROR {exc.code}: {exc}"
        except (ValueError, OSError) as exc:
            output = f"ERROR {type(exc).__name__}: {exc}"
        self.last_output = output
        return output

    def _dispatch(self, line: str) -> str:
        if not line:
            return ""
        command, _, rest = line.partition(" ")
        rest = rest.strip()
        handler = getattr(self, f"_cmd_{command.replace('-', '_')}", None)
        if handler is None:
            return f"ERROR Usage: unknown command {command!r}"
        return handler(rest)

    # -- toolchain ----------------------------------------------------------------

    def _cmd_package(self, rest: str) -> str:
        parts = rest.split()
        if len(parts) not in (2, 3):
            return "ERROR Usage: package <adl-file> <out-dir> [policy]"
        adl_file, out_dir = parts[0], parts[1]
        policy = parts[2] if len(parts) == 3 else None
        if policy not in (None, "composite", "autonomous"):
            return f"ERROR Usage: unknown policy {policy!r}"
        with open(adl_file, encoding="utf-8") as fh:
            definition = adl.parse_adl(fh.read())
        diagnostics = adl.validate(definition)
        if diagnostics:
            return "\n".join(f"ERROR Invalid: {d}" for d in diagnostics)
        plan = packager.partition(definition)
        lines = []
        for descriptor in plan.bundles:
            descriptor.policy = policy
            lines.append(f"Wrote {packager.emit_bundle(descriptor, out_dir)}")
        lines.append(f"Wrote {packager.emit_runtime_bundle(out_dir)}")
        return "\n".join(lines)

    # -- deployment ------------------------------------------------------------------

    def _cmd_install(self, rest: str) -> str:
        if not rest:
            return "ERROR Usage: install <archive>"
        bundle_id = self.framework.install(rest)
        record = self.framework.bundle(bundle_id)
        return (f"Installed bundle {bundle_id} "
                f"({record.name} {format_version(record.descriptor.version)})")

    def _cmd_start(self, rest: str) -> str:
        if not rest:
            return "ERROR Usage: start <id|name>"
        record = self.framework.bundle(rest)
        self.framework.start_bundle(record.bundle_id)
        return f"Started bundle {record.bundle_id}"

    def _cmd_stop(self, rest: str) -> str:
        if not rest:
            return "ERROR Usage: stop <id|name>"
        record = self.framework.bundle(rest)
        self.framework.stop_bundle(record.bundle_id)
        return f"Stopped bundle {record.bundle_id}"

    def _cmd_update(self, rest: str) -> str:
        parts = rest.split()
        if len(parts) != 2:
            return "ERROR Usage: update <id> <archive>"
        record = self.framework.bundle(parts[0])
        self.framework.update(record.bundle_id, parts[1])
        return f"Updated bundle {record.bundle_id}"

    def _cmd_uninstall(self, rest: str) -> str:
        if not rest:
            return "ERROR Usage: uninstall <id>"
        record = self.framework.bundle(rest)
        self.framework.uninstall(record.bundle_id)
        return f"Uninstalled bundle {record.bundle_id}"

    def _cmd_refresh(self, rest: str) -> str:
        refs = rest.split()
        touched = self.framework.refresh(refs)
        return "Refreshed:" + ("".join(f" {i}" for i in touched) if touched else " (none)")

    # -- introspection ------------------------------------------------------------------

    def _cmd_bundles(self, rest: str) -> str:
        lines = ["ID  STATE  NAME  VERSION"]
        for record in sorted(self.framework.bundles.values(), key=lambda r: r.bundle_id):
            lines.append(
                f"{record.bundle_id}  {record.state.value}  {record.name}  "
                f"{format_version(record.descriptor.version)}"
            )
        return "\n".join(lines)

    def _cmd_services(self, rest: str) -> str:
        flt = parse_filter(rest) if rest else None
        lines = []
        for reg in self.framework.registry.query(None, flt):
            pid = reg.pid if reg.pid is not None else "-"
            lines.append(f"{reg.service_id} {pid} {','.join(reg.signatures)}")
        return "\n".join(lines)

    def _cmd_inspect(self, rest: str) -> str:
        if not rest:
            return "ERROR Usage: inspect <pid>"
        lines = []
        reg = self.framework.registry.get_by_pid(rest)
        if reg is not None:
            lines.append(f"service {reg.service_id} pid {rest}")
            lines.append(f"  signatures: {', '.join(reg.signatures)}")
            for name in sorted(reg.properties):
                if name in ("service.id", "service.pid", "objectClass"):
                    continue
                lines.append(f"  {name} = {reg.properties[name]}")
        instance = self.framework.instance_by_pid(rest)
        if instance is not None:
            lines.append(f"instance {rest} state {instance.lifecycle.value}")
            for itf_name in instance.list_fc():
                bound = instance.bindings.get(itf_name, [])
                lines.append(f"  {itf_name} bound to {len(bound)} target(s)")
        if not lines:
            return f"ERROR UnknownPid: no service or instance with pid {rest!r}"
        return "\n".join(lines)

    # -- triggers ------------------------------------------------------------------------

    def _cmd_tick(self, rest: str) -> str:
        if not rest or not rest.isdigit():
            return "ERROR Usage: tick <seconds>"
        duration = int(rest)
        lines = []
        for _ in range(duration):
            now = self.framework.clock
            for pid, result in self.cron.tick(now):
                lines.append(f"t={now} {pid}: {result}")
            self.framework.clock += 1
        lines.append(f"clock={self.framework.clock}")
        return "\n".join(lines)

    def _cmd_call(self, rest: str) -> str:
        parts = rest.split(None, 2)
        if len(parts) < 2:
            return "ERROR Usage: call <pid> <itf> [arg]"
        pid, interface = parts[0], parts[1]
        argument = parts[2] if len(parts) == 3 else ""
        reg = self.framework.registry.get_by_pid(pid)
        if reg is None:
            return f"ERROR UnknownPid: no service with pid {pid!r}"
        provider = reg.provider
        if not hasattr(provider, "invoke"):
            return f"ERROR NotInvocable: service {pid!r} is not invocable"
        return provider.invoke(interface, argument)

    def _cmd_shell(self, rest: str) -> str:
        if not rest:
            return "ERROR Usage: shell <command line>"
        return self.shell.dispatch(rest)

    # -- expectations ------------------------------------------------------------------------

    def _cmd_expect(self, rest: str) -> str:
        ok, detail = self._check(rest)
        return f"OK {rest}" if ok else f"FAIL {rest}: {detail}"

    def _check(self, predicate: str) -> tuple[bool, str]:
        kind, _, rest = predicate.partition(" ")
        rest = rest.strip()
        if kind == "bundle-state":
            name, _, state = rest.rpartition(" ")
            record = self.framework.bundle(name.strip())
            actual = record.state.value
            return actual == state, f"state is {actual}"
        if kind == "service-present":
            hits = self.framework.registry.query(None, parse_filter(rest))
            return bool(hits), "no matching service"
        if kind == "service-absent":
            hits = self.framework.registry.query(None, parse_filter(rest))
            return not hits, f"{len(hits)} matching service(s)"
        if kind == "instance-state":
            pid, _, state = rest.rpartition(" ")
            instance = self.framework.instance_by_pid(pid.strip())
            if instance is None:
                return False, f"no instance with pid {pid.strip()!r}"
            actual = instance.lifecycle.value
            return actual == state, f"state is {actual}"
        if kind == "output-contains":
            return rest in self.last_output, "previous output lacks the text"
        return False, f"unknown predicate {kind!r}"

    # -- scenarios ----------------------------------------------------------------------------

    def run_scenario(self, lines) -> tuple[bool, str, str]:
        """-> (passed, transcript, failure detail)."""
        transcript: list[str] = []
        for lineno, raw in enumerate(lines, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            transcript.append(f"> {line}")
            output = self.run_command(line)
            if output:
                transcript.append(output)
            first = output.splitlines()[0] if output else ""
            if first.startswith("ERROR"):
                return False, "\n".join(transcript) + "\n", f"line {lineno}: {first}"
            if first.startswith("FAIL"):
                return False, "\n".join(transcript) + "\n", f"line {lineno}: {first}"
        return True, "\n".join(transcript) + ("\n" if transcript else ""), ""


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="frogi", description="component bundle runtime console"
    )
    parser.add_argument("--scenario", help="script file to execute")
    parser.add_argument("--storage", help="framework state directory")
    parser.add_argument("--quiet", action="store_true", help="suppress transcript")
    args = parser.parse_args(argv)

    console = Console(storage=args.storage)
    if args.scenario:
        try:
            with open(args.scenario, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            print(f"ERROR: {exc}", file=sys.stderr)
            return 2
        passed, transcript, detail = console.run_scenario(lines)
        if not args.quiet:
            sys.stdout.write(transcript)
        if passed:
            print("scenario: PASS")
            return 0
        print(f"scenario: FAIL ({detail})")
        return 1

    while True:
        try:
            line = input("" if args.quiet else "frogi> ")
        except EOFError:
            break
        if line.strip() in ("quit", "exit"):
            break
        output = console.run_command(line)
        if output:
            print(output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
