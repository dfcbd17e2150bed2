import pytest

from conftest import HELLOWORLD
from frogi import adl
from frogi.errors import AdlParseError
from frogi.filters import Equals
from frogi.model import (
    Cardinality,
    Contingency,
    FilterTarget,
    PidTarget,
    Role,
    ServerRef,
)


@pytest.fixture
def hello():
    return adl.parse_adl(HELLOWORLD)


# --- parsing ---------------------------------------------------------------


def test_parse_sample_structure(hello):
    assert hello.name == "HelloWorld"
    assert hello.bundle.name == "B0"
    assert [(c.name, c.bundle.name) for c in hello.components] == [
        ("client", "B1"), ("server", "B2")
    ]
    client = hello.component("client")
    cy2 = next(i for i in client.interfaces if i.name == "cy2")
    assert cy2.version == (1, 0, 0)
    assert cy2.contract_bundle == "B3"
    assert cy2.role is Role.CLIENT


def test_parse_applies_defaults(hello):
    client = hello.component("client")
    x1 = next(i for i in client.interfaces if i.name == "x1")
    assert x1.version == (0, 0, 0)
    assert x1.cardinality is Cardinality.SINGLETON
    assert x1.contingency is Contingency.MANDATORY
    assert x1.contract_bundle == "B1"  # packaged with its component
    cz3 = next(i for i in hello.component("server").interfaces if i.name == "cz3")
    assert cz3.cardinality is Cardinality.COLLECTION
    assert cz3.contingency is Contingency.OPTIONAL


def test_parse_interface_properties(hello):
    x1 = hello.interfaces[0]
    assert x1.properties == {"cron.pattern": "* * 3 * * * *"}


def test_parse_minimal_definition():
    d = adl.parse_adl('<definition name="E"/>')
    assert d.name == "E"
    assert d.bundle is None
    assert d.components == [] and d.interfaces == [] and d.bindings == []


def test_parse_integer_property():
    d = adl.parse_adl(
        '<definition name="E"><interface name="s" role="server" signature="a.A">'
        '<property name="port" value="8080" type="java.lang.Integer"/>'
        "</interface></definition>"
    )
    assert d.interfaces[0].properties == {"port": 8080}


def test_parse_serverfilter_and_synonym():
    text = (
        '<definition name="E">'
        '<component name="c"><interface name="d" role="client" signature="a.A"/>'
        '<content class="X"/></component>'
        '<binding client="c.d" serverfilter="(language=fr)"/>'
        "</definition>"
    )
    d = adl.parse_adl(text)
    assert d.bindings[0].target == FilterTarget(Equals("language", "fr"))
    d2 = adl.parse_adl(text.replace("serverfilter", "filterserver"))
    assert d2.bindings[0].target == d.bindings[0].target


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("<definition>", "malformed XML"),
        ('<definition name="E"><mystery/></definition>', "unknown element"),
        ('<definition name="E" color="red"/>', "unknown attribute"),
        ('<definition name="E"><component name="a"/><component name="a"/></definition>',
         "duplicate component"),
        ('<definition name="E"><interface name="i" role="server" signature="s"/>'
         '<interface name="i" role="server" signature="s"/></definition>',
         "duplicate interface"),
        ('<definition name="E"><component name="c"><content class="A"/>'
         '<component name="n"/></component></definition>', "both <content>"),
        ('<definition name="E">text</definition>', "unexpected text"),
        ('<definition name="E"><interface name="i" role="boss" signature="s"/>'
         "</definition>", "role"),
        ('<definition name="E"><binding client="a.b"/></definition>',
         "exactly one of"),
        ('<definition name="E"><binding client="a.b" server="c.d" '
         'serverfilter="(x=1)"/></definition>', "exactly one of"),
        ('<definition name="E"><component name="c"><interface name="d" role="client" '
         'signature="a.A"/><content class="X"/></component>'
         '<binding client="c.d" serverfilter="(((broken)"/></definition>',
         "bad serverfilter"),
        ('<definition name="E"><interface name="i" role="server" signature="s" '
         'version="1.2"/></definition>', "version"),
    ],
)
def test_parse_rejects(text, fragment):
    with pytest.raises(AdlParseError) as err:
        adl.parse_adl(text)
    assert fragment in str(err.value)


def test_parse_error_carries_line():
    with pytest.raises(AdlParseError) as err:
        adl.parse_adl('<definition name="E">\n  <mystery/>\n</definition>')
    assert err.value.line == 2


# --- validation ----------------------------------------------------------------


def test_sample_validates_clean(hello):
    assert adl.validate(hello) == []


def wrap(binding, extra=""):
    return adl.parse_adl(
        '<definition name="E"><bundle name="BA"/>'
        '<interface name="top" role="server" signature="t.T"/>'
        '<component name="a"><bundle name="BA"/>'
        '<interface name="srv" role="server" signature="s.S"/>'
        '<interface name="dep" role="client" signature="s.S"/>'
        '<content class="X"/></component>'
        '<component name="b"><bundle name="BB"/>'
        '<interface name="srv" role="server" signature="s.S"/>'
        '<interface name="other" role="server" signature="o.O"/>'
        f'<content class="Y"/></component>{extra}'
        f"{binding}</definition>"
    )


def diag_codes(definition):
    return [d.code for d in adl.validate(definition)]


def test_unresolved_endpoint_diagnostic():
    d = wrap('<binding client="a.nope" server="b.srv"/>')
    assert diag_codes(d) == ["UNRESOLVED_ENDPOINT"]
    d = wrap('<binding client="missing.dep" server="b.srv"/>')
    assert diag_codes(d) == ["UNRESOLVED_ENDPOINT"]


def test_role_mismatch_diagnostics():
    d = wrap('<binding client="a.srv" server="b.srv"/>')  # server itf as client side
    assert "ROLE_MISMATCH" in diag_codes(d)
    d = wrap('<binding client="a.dep" server="this.top"/>')  # this.server as target
    assert "ROLE_MISMATCH" in diag_codes(d)


def test_signature_mismatch_diagnostic():
    d = wrap('<binding client="a.dep" server="b.other"/>')
    assert "SIGNATURE_MISMATCH" in diag_codes(d)


def test_filter_on_local_binding_diagnostic():
    d = wrap('<binding client="a.dep" serverfilter="(service.pid=e.a)"/>')
    assert diag_codes(d) == ["FILTER_ON_LOCAL_BINDING"]
    # cross-bundle rigid filters are fine
    d = wrap('<binding client="a.dep" serverfilter="(service.pid=e.b)"/>')
    assert diag_codes(d) == []
    # non-pid filters cannot be attributed statically
    d = wrap('<binding client="a.dep" serverfilter="(zone=fr)"/>')
    assert diag_codes(d) == []


def test_property_on_client_interface_diagnostic():
    d = adl.parse_adl(
        '<definition name="E"><component name="c">'
        '<interface name="d" role="client" signature="a.A">'
        '<property name="k" value="v"/></interface>'
        '<content class="X"/></component></definition>'
    )
    assert diag_codes(d) == ["PROPERTY_ON_CLIENT_INTERFACE"]


def test_diagnostics_carry_path_and_line(hello):
    d = wrap('<binding client="a.nope" server="b.srv"/>')
    [diagnostic] = adl.validate(d)
    assert diagnostic.path == "E"
    assert diagnostic.line > 0


# --- normalization ------------------------------------------------------------------


def test_normalize_cross_bundle_server_to_pid(hello):
    binding = next(b for b in hello.bindings if b.client_ref == "client.cy2")
    normalized = adl.normalize_binding(hello, binding)
    assert normalized.target == PidTarget("helloworld.server")


def test_normalize_export_delegation_to_pid(hello):
    binding = next(b for b in hello.bindings if b.client_ref == "this.x1")
    normalized = adl.normalize_binding(hello, binding)
    assert normalized.target == PidTarget("helloworld.client")


def test_normalize_keeps_filters(hello):
    binding = next(b for b in hello.bindings if b.client_ref == "server.cz3")
    assert adl.normalize_binding(hello, binding).target == FilterTarget(
        Equals("language", "fr")
    )


def test_normalize_keeps_intra_bundle_refs():
    d = wrap('<binding client="this.top" server="a.srv"/>')
    binding = d.bindings[0]
    assert adl.normalize_binding(d, binding).target == ServerRef("a.srv")


def test_normalize_bindings_whole_definition(hello):
    out = adl.normalize_bindings(hello)
    targets = {b.client_ref: b.target for b in out.bindings}
    assert targets["client.cy2"] == PidTarget("helloworld.server")
    assert targets["this.x1"] == PidTarget("helloworld.client")
    # the input is untouched
    assert all(isinstance(b.target, (ServerRef, FilterTarget)) for b in hello.bindings)


def test_derive_pid():
    assert adl.derive_pid("HelloWorld", "HelloWorld") == "helloworld"
    assert adl.derive_pid("HelloWorld", "server") == "helloworld.server"
    assert adl.derive_pid("App", "a.b") == "app.a.b"


# --- canonical printing ----------------------------------------------------------------


def test_print_parse_fixpoint(hello):
    printed = adl.print_adl(hello)
    reparsed = adl.parse_adl(printed)
    assert adl.print_adl(reparsed) == printed
    assert reparsed.name == hello.name
    assert [c.name for c in reparsed.components] == [c.name for c in hello.components]


def test_print_omits_defaults(hello):
    printed = adl.print_adl(hello)
    assert 'cardinality="singleton"' not in printed
    assert 'contingency="mandatory"' not in printed
    assert 'version="0.0.0"' not in printed


def test_defaults_idempotent(hello):
    once = adl.print_adl(hello)
    twice = adl.print_adl(adl.parse_adl(once))
    assert once == twice


def test_print_renders_pid_targets_as_rigid_filters(hello):
    normalized = adl.normalize_bindings(hello)
    printed = adl.print_adl(normalized)
    assert 'serverfilter="(service.pid=helloworld.server)"' in printed
    reparsed = adl.parse_adl(printed)
    target = next(b for b in reparsed.bindings if b.client_ref == "client.cy2").target
    assert target == FilterTarget(Equals("service.pid", "helloworld.server"))
