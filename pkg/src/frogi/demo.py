"""Stock behaviors for the HelloWorld sample and the shell demo."""

from __future__ import annotations

from frogi.model import Behavior, BehaviorRegistry


class ClientImpl(Behavior):
    """Forwards its run() trigger through its required service."""

    def invoke(self, interface: str, argument: str) -> str:
        return self.context.call("cy2", argument)


class ServerImpl(Behavior):
    """Answers with its configurable greeting."""

    attributes = {"message": "hello world"}

    def invoke(self, interface: str, argument: str) -> str:
        return self.context.attribute("message")


class EchoCommand(Behavior):
    """Shell command: echoes its argument line."""

    def invoke(self, interface: str, argument: str) -> str:
        return argument


def install(behaviors: BehaviorRegistry) -> BehaviorRegistry:
    behaviors.register("ClientImpl", ClientImpl)
    behaviors.register("ServerImpl", ServerImpl)
    behaviors.register("EchoCommand", EchoCommand)
    return behaviors


def default_behaviors() -> BehaviorRegistry:
    return install(BehaviorRegistry())
