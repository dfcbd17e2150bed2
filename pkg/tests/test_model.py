import itertools
import random

import pytest

from conftest import ProbeBehavior, make_behaviors
from frogi.errors import (
    AlreadyBound,
    ChildBound,
    IllegalLifecycleState,
    NoSuchAttribute,
    NoSuchInterface,
    NotBound,
    NotComposite,
    UnknownImplementation,
    UnresolvedMandatoryDependency,
)
from frogi.model import (
    BindingSpec,
    Cardinality,
    ComponentType,
    Contingency,
    InterfaceDescriptor,
    Lifecycle,
    LocalTarget,
    Role,
    ServerRef,
    instantiate,
)


def itf(name, role=Role.CLIENT, signature="s.S", **kw):
    return InterfaceDescriptor(name=name, role=role, signature=signature, **kw)


def primitive(name, interfaces=(), ref="ProbeImpl"):
    return ComponentType(name=name, interfaces=list(interfaces), implementation_ref=ref)


def hello_type():
    client = ComponentType(
        name="client",
        interfaces=[
            itf("x1", Role.SERVER, "java.lang.Runnable"),
            itf("cy2", Role.CLIENT, "y.Y"),
        ],
        implementation_ref="ClientImpl",
    )
    server = ComponentType(
        name="server",
        interfaces=[
            itf("y2", Role.SERVER, "y.Y"),
            itf("cz3", Role.CLIENT, "z.Z",
                cardinality=Cardinality.COLLECTION,
                contingency=Contingency.OPTIONAL),
        ],
        implementation_ref="ServerImpl",
    )
    return ComponentType(
        name="HelloWorld",
        interfaces=[itf("x1", Role.SERVER, "java.lang.Runnable")],
        children=[client, server],
        internal_bindings=[
            BindingSpec("this.x1", ServerRef("client.x1")),
            BindingSpec("client.cy2", ServerRef("server.y2")),
        ],
    )


# --- instantiation ----------------------------------------------------------------


def test_instantiate_helloworld_ids():
    root = instantiate(hello_type(), "helloworld", make_behaviors())
    assert {i.instance_id for i in root.walk()} == {
        "helloworld", "helloworld.client", "helloworld.server"
    }


def test_instantiate_unknown_implementation():
    broken = ComponentType(name="x", implementation_ref="NoSuchImpl")
    with pytest.raises(UnknownImplementation):
        instantiate(broken, "x", make_behaviors())


def test_instantiate_wires_internal_bindings():
    root = instantiate(hello_type(), "helloworld", make_behaviors())
    client = root.find("helloworld.client")
    server = root.find("helloworld.server")
    export = root.exports["x1"]
    assert export.instance is client and export.interface == "x1"
    [target] = client.lookup_fc("cy2")
    assert target.instance is server and target.interface == "y2"


def test_ids_distinct_over_random_trees():
    rng = random.Random(5)

    def random_type(depth, counter=itertools.count()):
        name = f"c{next(counter)}"
        if depth == 0 or rng.random() < 0.5:
            return primitive(name)
        children = [random_type(depth - 1) for _ in range(rng.randint(1, 3))]
        return ComponentType(name=name, children=children)

    for _ in range(50):
        tree = random_type(3)
        root = instantiate(tree, "root", make_behaviors())
        ids = [i.instance_id for i in root.walk()]
        assert len(ids) == len(set(ids))  # oracle: exhaustive id collection


# --- binding controller ---------------------------------------------------------------


def test_bind_then_lookup():
    root = instantiate(hello_type(), "helloworld", make_behaviors())
    client = root.find("helloworld.client")
    [target] = client.lookup_fc("cy2")
    assert target.interface == "y2"


def test_singleton_rejects_second_bind():
    root = instantiate(hello_type(), "helloworld", make_behaviors())
    client = root.find("helloworld.client")
    with pytest.raises(AlreadyBound):
        client.bind_fc("cy2", LocalTarget(root.find("helloworld.server"), "y2"))


def test_collection_accepts_many_in_order():
    comp = primitive("c", [itf("deps", cardinality=Cardinality.COLLECTION,
                               contingency=Contingency.OPTIONAL)])
    inst = instantiate(comp, "c", make_behaviors())
    targets = [object(), object(), object()]
    for t in targets:
        inst.bind_fc("deps", t)
    assert inst.lookup_fc("deps") == targets


def test_bind_errors():
    inst = instantiate(primitive("c", [itf("dep")]), "c", make_behaviors())
    with pytest.raises(NoSuchInterface):
        inst.bind_fc("nope", object())
    with pytest.raises(NotBound):
        inst.unbind_fc("dep", object())
    inst.bind_fc("dep", "t")
    inst.start_fc()
    with pytest.raises(IllegalLifecycleState):
        inst.bind_fc("dep", "t2")
    with pytest.raises(IllegalLifecycleState):
        inst.unbind_fc("dep", "t")


def test_list_fc_names_client_interfaces():
    root = instantiate(hello_type(), "helloworld", make_behaviors())
    assert root.find("helloworld.server").list_fc() == ["cz3"]


# --- lifecycle --------------------------------------------------------------------------


def test_start_with_optional_unbound_succeeds():
    comp = primitive("c", [itf("opt", contingency=Contingency.OPTIONAL)])
    inst = instantiate(comp, "c", make_behaviors())
    inst.start_fc()
    assert inst.lifecycle is Lifecycle.STARTED


def test_start_with_mandatory_unbound_fails():
    inst = instantiate(primitive("c", [itf("dep")]), "c", make_behaviors())
    with pytest.raises(UnresolvedMandatoryDependency):
        inst.start_fc()
    assert inst.lifecycle is Lifecycle.CREATED


def test_restart_cycle_is_legal():
    inst = instantiate(primitive("c"), "c", make_behaviors())
    seen = [inst.lifecycle]
    inst.observer = lambda i, old, new: seen.append(new)
    inst.start_fc()
    inst.stop_fc()
    inst.start_fc()
    assert seen == [Lifecycle.CREATED, Lifecycle.STARTED, Lifecycle.STOPPED,
                    Lifecycle.STARTED]


def test_lifecycle_sequences_match_reference_automaton():
    # oracle: the 3-state machine CREATED->STARTED<->STOPPED
    transitions = {
        ("CREATED", "start"): "STARTED",
        ("STARTED", "stop"): "STOPPED",
        ("STOPPED", "start"): "STARTED",
    }
    for length in range(1, 7):
        for sequence in itertools.product(("start", "stop"), repeat=length):
            inst = instantiate(primitive("c"), "c", make_behaviors())
            state = "CREATED"
            for op in sequence:
                expected = transitions.get((state, op))
                call = inst.start_fc if op == "start" else inst.stop_fc
                if expected is None:
                    with pytest.raises(IllegalLifecycleState):
                        call()
                else:
                    call()
                    state = expected
                assert inst.lifecycle.value == state


def test_composite_children_start_before_parent():
    trace = []
    root = instantiate(hello_type(), "helloworld", make_behaviors())
    for node in root.walk():
        node.observer = lambda i, old, new: trace.append((i.instance_id, new))
    root.start_fc()
    started = [pid for pid, state in trace if state is Lifecycle.STARTED]
    assert started.index("helloworld") == len(started) - 1
    # client is wired to server, so the provider starts first
    assert started.index("helloworld.server") < started.index("helloworld.client")
    trace.clear()
    root.stop_fc()
    stopped = [pid for pid, state in trace if state is Lifecycle.STOPPED]
    assert stopped[0] == "helloworld"


# --- content controller -------------------------------------------------------------------


def test_content_add_remove_round_trip():
    composite = instantiate(ComponentType(name="shell"), "shell", make_behaviors())
    child = instantiate(primitive("extra"), "shell.extra", make_behaviors())
    before = list(composite.children)
    composite.content_add(child)
    composite.content_remove(child)
    assert composite.children == before


def test_content_remove_bound_child_rejected():
    composite = instantiate(ComponentType(name="shell"), "shell", make_behaviors())
    child = instantiate(primitive("extra", [itf("dep")]), "shell.extra", make_behaviors())
    composite.content_add(child)
    child.bind_fc("dep", "somewhere")
    with pytest.raises(ChildBound):
        composite.content_remove(child)


def test_content_remove_referenced_child_rejected():
    composite = instantiate(ComponentType(name="shell"), "shell", make_behaviors())
    provider = instantiate(primitive("p", [itf("srv", Role.SERVER)]), "shell.p",
                           make_behaviors())
    consumer = instantiate(primitive("q", [itf("dep")]), "shell.q", make_behaviors())
    composite.content_add(provider)
    composite.content_add(consumer)
    consumer.bind_fc("dep", LocalTarget(provider, "srv"))
    with pytest.raises(ChildBound):
        composite.content_remove(provider)


def test_content_edit_requires_not_started_and_composite():
    composite = instantiate(ComponentType(name="shell"), "shell", make_behaviors())
    child = instantiate(primitive("extra"), "shell.extra", make_behaviors())
    composite.start_fc()
    with pytest.raises(IllegalLifecycleState):
        composite.content_add(child)
    prim = instantiate(primitive("p"), "p", make_behaviors())
    with pytest.raises(NotComposite):
        prim.content_add(child)


# --- attribute controller ---------------------------------------------------------------------


def test_attr_round_trip_and_unknown_name():
    inst = instantiate(primitive("c"), "c", make_behaviors())
    inst.attr_set("knob", "turned")
    assert inst.attr_get("knob") == "turned"
    with pytest.raises(NoSuchAttribute):
        inst.attr_get("nope")
    with pytest.raises(NoSuchAttribute):
        inst.attr_set("nope", 1)


def test_behavior_sees_attribute_change_on_next_invocation():
    inst = instantiate(primitive("c", [itf("run", Role.SERVER)]), "c", make_behaviors())
    inst.start_fc()
    assert inst.invoke("run") == "probe:initial"
    inst.attr_set("knob", "tuned")
    assert inst.invoke("run") == "probe:tuned"
    probe = inst.behavior
    assert probe.attribute_changes == [("knob", "tuned")]


def test_behavior_not_notified_while_stopped():
    inst = instantiate(primitive("c"), "c", make_behaviors())
    inst.attr_set("knob", "quietly")
    assert inst.behavior.attribute_changes == []
    assert inst.attr_get("knob") == "quietly"


# --- invocation routing ------------------------------------------------------------------------


def test_invoke_routes_through_composite_exports():
    root = instantiate(hello_type(), "helloworld", make_behaviors())
    root.start_fc()
    assert root.invoke("x1") == "hello world"
    assert root.invoke("java.lang.Runnable") == "hello world"


def test_invoke_unknown_interface():
    root = instantiate(hello_type(), "helloworld", make_behaviors())
    with pytest.raises(NoSuchInterface):
        root.invoke("nope")
