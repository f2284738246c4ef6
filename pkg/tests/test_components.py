from __future__ import annotations

import socket
import time

import pytest

from masbus import (
    AclMessage,
    AgentRegistry,
    Atom,
    Bus,
    Environment,
    ListTerm,
    Number,
    Performative,
    RouteBuilder,
    RouteDefinition,
    SimulatedClock,
    String,
    counter_template,
    tracker_template,
)
from masbus.components import register_builtin_components
from masbus.errors import (
    ConsumerUnsupportedError,
    MissingParamError,
    UnknownArtifactError,
)
from conftest import CollectorComponent, wait_for


@pytest.fixture
def stack():
    env = Environment()
    registry = AgentRegistry(env)
    bus = Bus()
    components = register_builtin_components(bus, registry, env)
    collector = CollectorComponent()
    bus.register_component("collect", collector)
    yield bus, registry, env, components, collector
    if bus.is_running:
        bus.stop()
    registry.stop()


def tell(sender, receiver, content):
    return AclMessage(sender, receiver, Performative.TELL, content)


# -- jason component -----------------------------------------------------------


def test_jason_consumer_builds_exchange_with_exact_headers(stack):
    bus, registry, _, _, collector = stack
    bus.add_route(RouteDefinition("r", "jason:DummyCustomerAgent", (), ("collect:y",)))
    bus.start()
    assert "DummyCustomerAgent" in registry.dummy_names()
    registry.spawn_agent("delivery_agent")
    registry.send_message(tell("delivery_agent", "DummyCustomerAgent", Atom("done")))
    assert bus.wait_until_idle()
    (ex,) = collector.exchanges()
    assert set(ex.headers) == {"performative", "sender", "receiver", "msgId"}
    assert ex.headers["performative"] == String("tell")
    assert ex.headers["sender"] == String("delivery_agent")
    assert ex.headers["receiver"] == String("DummyCustomerAgent")
    assert ex.body == Atom("done")


def test_jason_consumer_keeps_structured_content_as_body(stack):
    bus, registry, _, _, collector = stack
    bus.add_route(RouteDefinition("r", "jason:DummyCustomerAgent", (), ("collect:y",)))
    bus.start()
    registry.spawn_agent("delivery_agent")
    content = __import__("masbus").parse_term("production(done)")
    registry.send_message(tell("delivery_agent", "DummyCustomerAgent", content))
    assert bus.wait_until_idle()
    (ex,) = collector.exchanges()
    assert ex.body == content
    assert ex.body.functor == "production"


def test_jason_dummy_lifecycle_follows_route_lifecycle(stack):
    bus, registry, _, _, _ = stack
    bus.add_route(RouteDefinition("r1", "jason:DummyA", (), ("collect:y",)))
    bus.add_route(RouteDefinition("r2", "jason:DummyB", (), ("collect:y",)))
    assert registry.dummy_names() == ()
    bus.start()
    assert set(registry.dummy_names()) == {"DummyA", "DummyB"}
    bus.stop()
    assert registry.dummy_names() == ()
    registry.spawn_agent("a")
    from masbus.errors import UnknownReceiverError

    with pytest.raises(UnknownReceiverError):
        registry.send_message(tell("a", "DummyA", Atom("x")))


def test_two_routes_cannot_bind_the_same_dummy(stack):
    bus, registry, _, _, _ = stack
    bus.add_route(RouteDefinition("r1", "jason:Same", (), ("collect:y",)))
    bus.add_route(RouteDefinition("r2", "jason:Same", (), ("collect:y",)))
    from masbus.errors import DuplicateNameError

    with pytest.raises(DuplicateNameError):
        bus.start()
    # failed start rolls everything back, including the first binding
    assert not bus.is_running
    assert registry.dummy_names() == ()


def test_jason_producer_defaults_to_tell(stack):
    bus, registry, _, _, _ = stack
    registry.spawn_agent("delivery_agent")
    bus.add_route(RouteDefinition("r", "direct:in", (), ("jason:delivery_agent",)))
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=Atom("payload")))
    assert wait_for(lambda: registry.mailbox_size("delivery_agent") == 1)
    msg = registry.receive("delivery_agent")
    assert msg.performative is Performative.TELL
    assert msg.content == Atom("payload")
    # no sender header or param: the endpoint name stands in
    assert msg.sender == "delivery_agent"


def test_jason_producer_honours_headers_and_params(stack):
    bus, registry, _, _, _ = stack
    registry.spawn_agent("target")
    bus.add_route(
        RouteDefinition(
            "r", "direct:in", (), ("jason:target?performative=achieve&sender=gateway",)
        )
    )
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=Atom("goal")))
    assert wait_for(lambda: registry.mailbox_size("target") == 1)
    msg = registry.receive("target")
    assert msg.performative is Performative.ACHIEVE
    assert msg.sender == "gateway"
    # headers win over URI parameters
    bus.process_exchange(
        "r",
        bus.new_exchange(
            body=Atom("note"),
            headers={"performative": String("tell"), "sender": String("alice")},
        ),
    )
    assert wait_for(lambda: registry.mailbox_size("target") == 1)
    msg = registry.receive("target")
    assert msg.performative is Performative.TELL
    assert msg.sender == "alice"


def test_jason_producer_unknown_target_dead_letters(stack):
    bus, registry, _, _, _ = stack
    bus.add_route(RouteDefinition("r", "direct:in", (), ("jason:nobody",)))
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=Atom("x")))
    assert bus.wait_until_idle()
    (entry,) = bus.dead_letters()
    assert "nobody" in entry.error


def test_aa_loopback_transparency(stack):
    bus, registry, _, _, _ = stack
    registry.spawn_agent("a")
    registry.spawn_agent("b")
    bus.add_route(RouteDefinition("out", "jason:EchoDummy", (), ("direct:hop",)))
    bus.add_route(RouteDefinition("in", "direct:hop", (), ("jason:b",)))
    bus.start()
    content = ListTerm((Atom("x"), Number(4.5)))
    registry.send_message(AclMessage("a", "EchoDummy", Performative.ACHIEVE, content))
    registry.send_message(AclMessage("a", "b", Performative.ACHIEVE, content))
    assert wait_for(lambda: registry.mailbox_size("b") == 2)
    first, second = registry.receive("b"), registry.receive("b")
    assert (first.performative, first.content) == (second.performative, second.content)
    assert {first.sender, second.sender} == {"a"}


# -- artifact component -----------------------------------------------------------


def test_artifact_producer_dispatches_from_headers(stack):
    bus, _, env, _, _ = stack
    env.create_artifact("main", "TrackedArtifact", tracker_template((0.0, 1.0), 0.5))
    bus.add_route(
        RouteBuilder("r")
        .from_("direct:in")
        .set_header("ArtifactName", "TrackedArtifact")
        .set_header("OperationName", "giveDistance")
        .to("artifact:cartago")
        .build()
    )
    bus.start()
    body = ListTerm((Number(0.0), Number(0.0)))
    bus.process_exchange("r", bus.new_exchange(body=body))
    assert bus.wait_until_idle()
    (entry,) = env.operation_log()
    assert entry.artifact == "TrackedArtifact"
    assert entry.operation == "giveDistance"
    assert entry.params == (Number(0.0), Number(0.0))
    assert entry.origin.route_id == "r"
    assert env.artifact("TrackedArtifact").properties["distanceKm"].value == pytest.approx(
        111.19492664455873, abs=0.01
    )


def test_artifact_producer_scalar_body_becomes_single_param(stack):
    bus, _, env, _, _ = stack
    env.create_artifact("main", "c", counter_template())
    bus.add_route(
        RouteDefinition(
            "r", "direct:in", (), ("artifact:main?artifactName=c&operationName=increment",)
        )
    )
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=Number(5)))
    assert bus.wait_until_idle()
    assert env.artifact("c").properties["count"] == Number(5)
    (entry,) = env.operation_log()
    assert entry.params == (Number(5),)


def test_artifact_producer_missing_names_dead_letter(stack):
    bus, _, env, _, _ = stack
    env.create_artifact("main", "c", counter_template())
    bus.add_route(
        RouteDefinition("r", "direct:in", (), ("artifact:main?artifactName=c",))
    )
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=Number(1)))
    assert bus.wait_until_idle()
    (entry,) = bus.dead_letters()
    assert "OperationName" in entry.error


def test_artifact_producer_failed_op_dead_letters(stack):
    bus, _, env, _, _ = stack
    env.create_artifact("main", "t", tracker_template((0.0, 0.0), 1.0))
    bus.add_route(
        RouteDefinition(
            "r",
            "direct:in",
            (),
            ("artifact:cartago?artifactName=t&operationName=giveDistance",),
        )
    )
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=ListTerm((Number(95), Number(0)))))
    assert bus.wait_until_idle()
    (entry,) = bus.dead_letters()
    assert "bad_coordinates" in entry.error


def test_artifact_consumer_emits_outbound_payloads(stack):
    bus, _, env, _, collector = stack
    env.create_artifact("main", "erp", counter_template())
    env.artifact_send("erp", {"kind": Atom("note")}, Atom("queued"))
    bus.add_route(
        RouteDefinition("r", "artifact:main?artifactName=erp", (), ("collect:y",))
    )
    bus.start()
    env.artifact_send("erp", None, Atom("live"))
    assert wait_for(lambda: len(collector.exchanges()) == 2)
    first, second = collector.exchanges()
    assert first.body == Atom("queued")
    assert first.headers["ArtifactName"] == String("erp")
    assert first.headers["kind"] == Atom("note")
    assert second.body == Atom("live")


def test_artifact_consumer_unknown_artifact_fails_at_start(stack):
    bus, _, _, _, _ = stack
    bus.add_route(
        RouteDefinition("r", "artifact:main?artifactName=ghost", (), ("collect:y",))
    )
    with pytest.raises(UnknownArtifactError):
        bus.start()


def test_artifact_consumer_requires_artifact_name_param(stack):
    bus, _, _, _, _ = stack
    bus.add_route(RouteDefinition("r", "artifact:main", (), ("collect:y",)))
    with pytest.raises(MissingParamError):
        bus.start()


# -- mqttlite -------------------------------------------------------------------


def test_mqtt_publish_reaches_subscribed_route(stack):
    bus, _, _, components, collector = stack
    bus.add_route(
        RouteDefinition(
            "r",
            "mqttlite:foo?host=tcp://broker&subscribeTopicName=latLong",
            (),
            ("collect:y",),
        )
    )
    bus.start()
    broker = components["mqttlite"].broker("tcp://broker")
    broker.publish("latLong", "pos(1.0,2.0)")
    assert wait_for(lambda: collector.exchanges())
    (ex,) = collector.exchanges()
    assert ex.body == __import__("masbus").parse_term("pos(1.0,2.0)")


def test_mqtt_unparseable_payload_becomes_string_term(stack):
    bus, _, _, components, collector = stack
    bus.add_route(
        RouteDefinition(
            "r", "mqttlite:foo?host=h&subscribeTopicName=t", (), ("collect:y",)
        )
    )
    bus.start()
    components["mqttlite"].broker("h").publish("t", "Not A Term")
    assert wait_for(lambda: collector.exchanges())
    assert collector.exchanges()[0].body == String("Not A Term")


def test_mqtt_publish_without_subscribers_is_noop(stack):
    _, _, _, components, _ = stack
    broker = components["mqttlite"].broker("h")
    assert broker.publish("quiet", "x") == 0
    assert broker.retained("quiet") == "x"


def test_mqtt_fan_out_two_subscribers(stack):
    bus, _, _, components, collector = stack
    for i in (1, 2):
        bus.add_route(
            RouteDefinition(
                f"r{i}", "mqttlite:foo?host=h&subscribeTopicName=t", (), ("collect:y",)
            )
        )
    bus.start()
    components["mqttlite"].broker("h").publish("t", "1")
    assert wait_for(lambda: len(collector.exchanges()) == 2)
    assert len(collector.exchanges()) == 2


def test_mqtt_producer_publishes_rendered_body(stack):
    bus, _, _, components, _ = stack
    seen = []
    components["mqttlite"].broker("h").subscribe("out", seen.append)
    bus.add_route(
        RouteDefinition("r", "direct:in", (), ("mqttlite:foo?host=h&publishTopicName=out",))
    )
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=ListTerm((Number(1), Number(2)))))
    assert wait_for(lambda: seen)
    assert seen == ["[1,2]"]


def test_mqtt_missing_params_fail_route_start(stack):
    bus, _, _, _, _ = stack
    bus.add_route(RouteDefinition("r", "mqttlite:foo?host=h", (), ("collect:y",)))
    with pytest.raises(MissingParamError):
        bus.start()


# -- tcpline ---------------------------------------------------------------------


def test_tcpline_consumer_and_producer_round_trip(stack):
    bus, _, _, _, collector = stack
    bus.add_route(RouteDefinition("in", "tcpline:127.0.0.1:0", (), ("collect:y",)))
    bus.start()
    host, port = bus.consumer("in").address
    out_bus = Bus()
    register_builtin_components(out_bus)
    out_bus.add_route(
        RouteDefinition("out", "direct:src", (), (f"tcpline:127.0.0.1:{port}",))
    )
    out_bus.start()
    out_bus.process_exchange("out", out_bus.new_exchange(body=Atom("done")))
    assert wait_for(lambda: collector.exchanges())
    assert collector.exchanges()[0].body == Atom("done")
    out_bus.stop()


def test_tcpline_multiple_lines_one_connection(stack):
    bus, _, _, _, collector = stack
    bus.add_route(RouteDefinition("in", "tcpline:127.0.0.1:0", (), ("collect:y",)))
    bus.start()
    address = bus.consumer("in").address
    with socket.create_connection(address) as conn:
        conn.sendall(b"1\n2\n3\n")
    assert wait_for(lambda: len(collector.exchanges()) == 3)
    assert [ex.body for ex in collector.exchanges()] == [Number(1), Number(2), Number(3)]


def test_tcpline_producer_connection_refused_dead_letters(stack):
    bus, _, _, _, _ = stack
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        free_port = probe.getsockname()[1]
    bus.add_route(
        RouteDefinition("r", "direct:in", (), (f"tcpline:127.0.0.1:{free_port}",))
    )
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=Atom("x")))
    assert bus.wait_until_idle(10.0)
    (entry,) = bus.dead_letters()
    assert entry.kind == "producer"


def test_tcpline_bind_conflict_fails_start(stack):
    bus, _, _, _, _ = stack
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen()
    port = blocker.getsockname()[1]
    bus.add_route(RouteDefinition("in", f"tcpline:127.0.0.1:{port}", (), ("collect:y",)))
    try:
        with pytest.raises(OSError):
            bus.start()
        assert not bus.is_running
    finally:
        blocker.close()


# -- httplite --------------------------------------------------------------------


def test_httplite_consumer_maps_requests_to_exchanges(stack):
    import http.client

    bus, _, _, _, collector = stack
    bus.add_route(RouteDefinition("in", "httplite:127.0.0.1:0/hook", (), ("collect:y",)))
    bus.start()
    host, port = bus.consumer("in").address
    conn = http.client.HTTPConnection(host, port)
    conn.request("POST", "/hook", body=b"f(1)")
    response = conn.getresponse()
    assert response.status == 200
    response.read()
    conn.close()
    assert wait_for(lambda: collector.exchanges())
    (ex,) = collector.exchanges()
    assert ex.body == __import__("masbus").parse_term("f(1)")
    assert ex.headers["HttpMethod"] == String("POST")
    assert ex.headers["HttpPath"] == String("/hook")


def test_httplite_producer_posts_and_routes_reply(stack):
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
    import threading

    received = []

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def do_POST(self):
            length = int(self.headers.get("Content-Length") or 0)
            received.append(self.rfile.read(length).decode())
            body = b"ok"
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    port = server.server_address[1]

    bus, _, _, _, collector = stack
    bus.add_route(
        RouteDefinition(
            "r",
            "direct:in",
            (),
            (f"httplite:127.0.0.1:{port}/checkout?method=POST&replyTo=reply",),
        )
    )
    bus.add_route(RouteDefinition("reply", "direct:reply-src", (), ("collect:y",)))
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=Atom("order")))
    assert wait_for(lambda: collector.exchanges())
    assert received == ["order"]
    (reply_ex,) = collector.exchanges()
    assert reply_ex.body == Atom("ok")
    assert reply_ex.headers["HttpStatus"] == Number(200)
    server.shutdown()
    server.server_close()


def test_httplite_producer_connection_refused_dead_letters(stack):
    bus, _, _, _, _ = stack
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        free_port = probe.getsockname()[1]
    bus.add_route(
        RouteDefinition("r", "direct:in", (), (f"httplite:127.0.0.1:{free_port}/x",))
    )
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=Atom("x")))
    assert bus.wait_until_idle(10.0)
    assert len(bus.dead_letters()) == 1


# -- chatstub --------------------------------------------------------------------


def test_chatstub_records_transcript_row(stack):
    bus, _, _, components, _ = stack
    bus.add_route(
        RouteDefinition(
            "r", "direct:in", (), ("chatstub:bots/sometoken?chatId=-364531",)
        )
    )
    bus.start()
    bus.process_exchange("r", bus.new_exchange(body=Atom("arriving")))
    assert bus.wait_until_idle()
    (row,) = components["chatstub"].transcript()
    assert row.token == "sometoken"
    assert row.chat_id == "-364531"
    assert row.text == "arriving"
    exported = components["chatstub"].export_jsonl()
    assert '"chatId": "-364531"' in exported


def test_chatstub_consumer_unsupported(stack):
    bus, _, _, _, _ = stack
    bus.add_route(RouteDefinition("r", "chatstub:bots/t?chatId=1", (), ("collect:y",)))
    with pytest.raises(ConsumerUnsupportedError):
        bus.start()


# -- timer ------------------------------------------------------------------------


def test_timer_wall_clock_tick_band():
    bus = Bus()
    register_builtin_components(bus)
    collector = CollectorComponent()
    bus.register_component("collect", collector)
    bus.add_route(RouteDefinition("t", "timer:tick?periodMs=10", (), ("collect:y",)))
    bus.start()
    time.sleep(0.105)
    bus.stop()
    count = len(collector.exchanges())
    assert 8 <= count <= 12, f"got {count} ticks"
    bodies = [ex.body.value for ex in collector.exchanges()]
    assert bodies == list(range(count))


def test_timer_simulated_clock_is_exact():
    clock = SimulatedClock()
    bus = Bus(clock=clock)
    register_builtin_components(bus)
    collector = CollectorComponent()
    bus.register_component("collect", collector)
    bus.add_route(RouteDefinition("t", "timer:tick?periodMs=10", (), ("collect:y",)))
    bus.start()
    fired = clock.advance(0.1)
    assert fired == 10
    assert bus.wait_until_idle()
    assert [ex.body.value for ex in collector.exchanges()] == list(range(10))
    bus.stop()


def test_timer_requires_period(stack):
    bus, _, _, _, _ = stack
    bus.add_route(RouteDefinition("t", "timer:tick", (), ("collect:y",)))
    with pytest.raises(MissingParamError):
        bus.start()
