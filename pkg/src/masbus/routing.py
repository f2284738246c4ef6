"""The mediation engine: exchanges, routes, components and the delivery loop.

A :class:`Bus` owns a set of named components (keyed by URI scheme) and a set
of routes. Each route has one consumer endpoint that admits data and wraps it
in an :class:`Exchange`, an ordered processor chain, and one or more producer
endpoints that receive the processed exchange, in declaration order.

Delivery guarantees:

* exactly-once per (exchange, producer) pair absent errors;
* per-route FIFO: exchanges admitted by a route's consumer are processed in
  creation order by a single worker;
* failures never crash a route: a failing transform or producer diverts the
  exchange to the bus dead-letter log and the route keeps running.

Administrative calls (``add_route``/``start``/``stop``/``register_*``) are
mutually exclusive with exchange processing; distinct routes process
concurrently.
"""

from __future__ import annotations

import logging
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from queue import Queue

from .clock import WallClock
from .errors import (
    AlreadyRunningError,
    AlreadyStoppedError,
    BusRunningError,
    DuplicateRouteIdError,
    DuplicateSchemeError,
    RouteNotRunningError,
    UnknownRouteError,
    UnknownSchemeError,
    UnknownTransformError,
)
from .terms import Term, render_term
from .uris import EndpointUri, as_uri, format_uri

logger = logging.getLogger(__name__)

_SENTINEL = object()


@dataclass
class Exchange:
    """The universal envelope moved from a consumer to producers."""

    id: str
    headers: dict[str, Term]
    body: Term
    created_at: float
    trace: list[str] = field(default_factory=list)

    def snapshot(self) -> dict:
        """Plain-data copy for dead-letter records and reports."""
        return {
            "id": self.id,
            "headers": {k: render_term(v) for k, v in self.headers.items()},
            "body": render_term(self.body),
            "trace": list(self.trace),
        }


@dataclass(frozen=True)
class SetHeader:
    """Processor that stores a constant term under a header name."""

    name: str
    value: Term


@dataclass(frozen=True)
class Transform:
    """Processor that applies a bus-registered function to the exchange."""

    name: str


ProcessorSpec = SetHeader | Transform


@dataclass(frozen=True)
class RouteDefinition:
    """Declared path: one consumer endpoint, processors, producer endpoints."""

    route_id: str | None
    from_uri: EndpointUri
    processors: tuple[ProcessorSpec, ...] = ()
    to_uris: tuple[EndpointUri, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "from_uri", as_uri(self.from_uri))
        object.__setattr__(
            self, "to_uris", tuple(as_uri(u) for u in self.to_uris)
        )
        object.__setattr__(self, "processors", tuple(self.processors))
        if not self.to_uris:
            raise ValueError("a route needs at least one 'to' endpoint")
        for p in self.processors:
            if not isinstance(p, (SetHeader, Transform)):
                raise TypeError(f"not a processor spec: {p!r}")


@dataclass(frozen=True)
class DeliveryRecord:
    exchange_id: str
    route_id: str
    endpoint: str
    at: float


@dataclass(frozen=True)
class DeadLetter:
    route_id: str
    kind: str  # "transform" or "producer"
    endpoint: str | None
    error: str
    exchange: dict
    at: float


@dataclass(frozen=True)
class DroppedExchange:
    route_id: str
    exchange: dict


class _ReadWriteLock:
    """Writers (admin) exclude readers (exchange processing) and each other."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False
        self._writers_waiting = 0

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer or self._writers_waiting:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            self._writers_waiting += 1
            while self._readers or self._writer:
                self._cond.wait()
            self._writers_waiting -= 1
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


class RouteContext:
    """Per-endpoint view handed to components when they build endpoints.

    Consumers use :meth:`new_exchange` and :meth:`emit` to admit data into
    the route; producers mostly need ``route_id`` and ``bus``.
    """

    def __init__(self, bus: "Bus", route_id: str, uri: EndpointUri, runtime=None):
        self.bus = bus
        self.route_id = route_id
        self.uri = uri
        self._runtime = runtime

    def new_exchange(self, body: Term, headers: dict[str, Term] | None = None) -> Exchange:
        ex = self.bus.new_exchange(body=body, headers=headers)
        ex.trace.append(format_uri(self._runtime.definition.from_uri))
        return ex

    def emit(self, exchange: Exchange) -> bool:
        """Hand an exchange to the route; False when the route is shut down."""
        return self._runtime.emit(exchange)


class _RouteRuntime:
    def __init__(self, bus: "Bus", definition: RouteDefinition):
        self.bus = bus
        self.definition = definition
        self.route_id = definition.route_id
        self._queue: Queue = Queue()
        self._cond = threading.Condition()
        self._pending = 0
        self._in_flight: dict[str, Exchange] = {}
        self._accepting = False
        self._abort = False
        self.consumer = None
        self.producers: list = []
        self._transforms: dict[str, object] = {}
        self._thread: threading.Thread | None = None
        self.running = False

    def start(self):
        self._abort = False
        self._queue = Queue()
        try:
            for spec in self.definition.processors:
                if isinstance(spec, Transform):
                    self._transforms[spec.name] = self.bus.transform(spec.name)
            for uri in self.definition.to_uris:
                component = self.bus.component_for(uri.scheme)
                ctx = RouteContext(self.bus, self.route_id, uri, self)
                self.producers.append(component.create_producer(ctx))
            from_uri = self.definition.from_uri
            component = self.bus.component_for(from_uri.scheme)
            ctx = RouteContext(self.bus, self.route_id, from_uri, self)
            self.consumer = component.create_consumer(ctx)
        except Exception:
            self._stop_producers()
            self.consumer = None
            raise
        self._accepting = True
        self._thread = threading.Thread(
            target=self._work, name=f"route-{self.route_id}", daemon=True
        )
        self._thread.start()
        try:
            self.consumer.start()
        except Exception:
            self._accepting = False
            self._queue.put(_SENTINEL)
            self._thread.join(timeout=1.0)
            self._stop_producers()
            self.consumer = None
            raise
        self.running = True
        logger.debug("route %s started", self.route_id)

    def deactivate(self):
        """Stop admitting new exchanges; in-flight ones continue."""
        if self.consumer is not None:
            try:
                self.consumer.stop()
            except Exception:
                logger.exception("consumer stop failed on route %s", self.route_id)
        self._accepting = False

    def drain(self, deadline: float) -> bool:
        # deadline is wall time: draining bounds real waiting even when the
        # bus runs on a simulated clock
        with self._cond:
            while self._pending:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._cond.wait(min(remaining, 0.05))
        return True

    def shutdown(self, *, abort: bool):
        self._abort = abort
        self._queue.put(_SENTINEL)
        if self._thread is not None:
            self._thread.join(timeout=1.0)
        if abort:
            # anything still in flight (a worker stuck past the join bound)
            with self._cond:
                for ex in self._in_flight.values():
                    self.bus._record_dropped(self.route_id, ex)
                self._in_flight.clear()
                self._pending = 0
        self._stop_producers()
        self.consumer = None
        self.running = False
        logger.debug("route %s stopped", self.route_id)

    def _stop_producers(self):
        for producer in self.producers:
            try:
                producer.stop()
            except Exception:
                logger.exception("producer stop failed on route %s", self.route_id)
        self.producers = []

    def emit(self, exchange: Exchange) -> bool:
        if not self._accepting:
            return False
        with self._cond:
            self._pending += 1
            self._in_flight[exchange.id] = exchange
        self._queue.put(exchange)
        return True

    def idle(self) -> bool:
        with self._cond:
            return self._pending == 0

    def _work(self):
        while True:
            item = self._queue.get()
            if item is _SENTINEL:
                return
            if self._abort:
                self.bus._record_dropped(self.route_id, item)
                self._finish(item)
                continue
            try:
                with self.bus._rw.read():
                    self._process(item)
            finally:
                self._finish(item)

    def _finish(self, exchange: Exchange):
        with self._cond:
            self._in_flight.pop(exchange.id, None)
            self._pending -= 1
            self._cond.notify_all()

    def _process(self, exchange: Exchange):
        for spec in self.definition.processors:
            try:
                if isinstance(spec, SetHeader):
                    exchange.headers[spec.name] = spec.value
                else:
                    result = self._transforms[spec.name](exchange)
                    if result is not None:
                        exchange = result
            except Exception as err:
                self.bus._record_dead_letter(
                    self.route_id, "transform", None, err, exchange
                )
                return
        for producer in self.producers:
            endpoint = format_uri(producer.uri)
            try:
                producer.send(exchange)
            except Exception as err:
                self.bus._record_dead_letter(
                    self.route_id, "producer", endpoint, err, exchange
                )
                continue
            exchange.trace.append(endpoint)
            self.bus._record_delivery(exchange, self.route_id, endpoint)


class Bus:
    """Routing engine; safe to share across threads.

    Parameters
    ----------
    run_id:
        Prefix for exchange identifiers; fixed by default so repeated runs
        with the same inputs mint the same ids.
    clock:
        Time source (``WallClock`` by default); also drives timer consumers.
    drain_timeout:
        Bound, in seconds, on how long :meth:`stop` waits for in-flight
        exchanges before recording them as dropped.
    """

    def __init__(self, *, run_id: str = "bus", clock=None, drain_timeout: float = 5.0):
        self.run_id = run_id
        self.clock = clock if clock is not None else WallClock()
        self.drain_timeout = drain_timeout
        self._components: dict[str, object] = {}
        self._aliases: dict[str, str] = {}
        self._transforms: dict[str, object] = {}
        self._routes: dict[str, _RouteRuntime] = {}
        self._admin = threading.RLock()
        self._rw = _ReadWriteLock()
        self._running = False
        self._log_lock = threading.Lock()
        self._exchange_counter = 0
        self._dead_letters: list[DeadLetter] = []
        self._deliveries: list[DeliveryRecord] = []
        self._dropped: list[DroppedExchange] = []
        self._delivery_listeners: list = []

    # -- registration -------------------------------------------------

    @property
    def is_running(self) -> bool:
        return self._running

    @property
    def status(self) -> str:
        return "running" if self._running else "stopped"

    def register_component(self, scheme: str, component) -> None:
        with self._admin:
            if self._running:
                raise BusRunningError("cannot register components while running")
            EndpointUri(scheme, "")  # validates the scheme token
            if scheme in self._components or scheme in self._aliases:
                raise DuplicateSchemeError(f"scheme {scheme!r} already registered")
            self._components[scheme] = component

    def register_alias(self, scheme: str, target: str) -> None:
        """Let URIs written with ``scheme`` resolve to the ``target`` component."""
        with self._admin:
            if self._running:
                raise BusRunningError("cannot register aliases while running")
            EndpointUri(scheme, "")
            if scheme in self._components or scheme in self._aliases:
                raise DuplicateSchemeError(f"scheme {scheme!r} already registered")
            self._aliases[scheme] = target

    def register_transform(self, name: str, fn) -> None:
        with self._admin:
            self._transforms[name] = fn

    def component_for(self, scheme: str):
        resolved = self._aliases.get(scheme, scheme)
        try:
            return self._components[resolved]
        except KeyError:
            raise UnknownSchemeError(f"no component registered for scheme {scheme!r}") from None

    def transform(self, name: str):
        try:
            return self._transforms[name]
        except KeyError:
            raise UnknownTransformError(f"transform {name!r} is not registered") from None

    # -- routes ---------------------------------------------------------

    def add_route(self, definition: RouteDefinition) -> str:
        with self._admin:
            route_id = definition.route_id
            if route_id is None:
                route_id = self._next_route_id()
                definition = RouteDefinition(
                    route_id, definition.from_uri, definition.processors, definition.to_uris
                )
            if route_id in self._routes:
                raise DuplicateRouteIdError(f"route id {route_id!r} already in use")
            self.component_for(definition.from_uri.scheme)
            for uri in definition.to_uris:
                self.component_for(uri.scheme)
            runtime = _RouteRuntime(self, definition)
            if self._running:
                for spec in definition.processors:
                    if isinstance(spec, Transform):
                        self.transform(spec.name)
                with self._rw.write():
                    runtime.start()
            self._routes[route_id] = runtime
            return route_id

    def _next_route_id(self) -> str:
        n = len(self._routes) + 1
        while f"route-{n}" in self._routes:
            n += 1
        return f"route-{n}"

    def route_definition(self, route_id: str) -> RouteDefinition:
        try:
            return self._routes[route_id].definition
        except KeyError:
            raise UnknownRouteError(f"no route {route_id!r}") from None

    def consumer(self, route_id: str):
        """The live consumer endpoint of a running route (None when stopped)."""
        try:
            return self._routes[route_id].consumer
        except KeyError:
            raise UnknownRouteError(f"no route {route_id!r}") from None

    def route_ids(self) -> tuple[str, ...]:
        with self._admin:
            return tuple(self._routes)

    # -- lifecycle --------------------------------------------------------

    def start(self) -> None:
        with self._admin:
            if self._running:
                raise AlreadyRunningError("bus already running")
            started = []
            with self._rw.write():
                try:
                    for runtime in self._routes.values():
                        runtime.start()
                        started.append(runtime)
                except Exception:
                    for runtime in started:
                        runtime.deactivate()
                        runtime.shutdown(abort=True)
                    raise
            self._running = True
            logger.info("bus %s started with %d routes", self.run_id, len(self._routes))

    def stop(self, drain_timeout: float | None = None) -> None:
        timeout = self.drain_timeout if drain_timeout is None else drain_timeout
        with self._admin:
            if not self._running:
                raise AlreadyStoppedError("bus is not running")
            with self._rw.write():
                for runtime in self._routes.values():
                    runtime.deactivate()
            deadline = time.monotonic() + timeout
            drained = [runtime.drain(deadline) for runtime in self._routes.values()]
            for runtime, ok in zip(self._routes.values(), drained):
                runtime.shutdown(abort=not ok)
            self._running = False
            logger.info("bus %s stopped (drained=%s)", self.run_id, all(drained))

    # -- exchanges -------------------------------------------------------

    def new_exchange(self, body: Term, headers: dict[str, Term] | None = None) -> Exchange:
        with self._log_lock:
            self._exchange_counter += 1
            n = self._exchange_counter
        return Exchange(
            id=f"{self.run_id}-x{n}",
            headers=dict(headers or {}),
            body=body,
            created_at=self.clock.now(),
        )

    @property
    def exchanges_created(self) -> int:
        return self._exchange_counter

    def process_exchange(self, route_id: str, exchange: Exchange) -> None:
        """Inject an exchange into a running route, FIFO with consumer traffic."""
        try:
            runtime = self._routes[route_id]
        except KeyError:
            raise UnknownRouteError(f"no route {route_id!r}") from None
        if not runtime.running:
            raise RouteNotRunningError(f"route {route_id!r} is not running")
        if not exchange.trace:
            exchange.trace.append(format_uri(runtime.definition.from_uri))
        if not runtime.emit(exchange):
            raise RouteNotRunningError(f"route {route_id!r} is shutting down")

    def wait_until_idle(self, timeout: float = 5.0) -> bool:
        """Block until no route has queued or in-process exchanges."""
        deadline = time.monotonic() + timeout
        pause = threading.Event()
        while True:
            if all(rt.idle() for rt in self._routes.values()):
                return True
            if time.monotonic() >= deadline:
                return False
            pause.wait(0.002)

    # -- observability ----------------------------------------------------

    def add_delivery_listener(self, fn) -> None:
        """``fn(exchange, route_id, endpoint)`` after each successful delivery.

        Listeners run on route worker threads and must not call admin
        operations on the bus.
        """
        self._delivery_listeners.append(fn)

    def dead_letters(self) -> tuple[DeadLetter, ...]:
        with self._log_lock:
            return tuple(self._dead_letters)

    def deliveries(self) -> tuple[DeliveryRecord, ...]:
        with self._log_lock:
            return tuple(self._deliveries)

    def dropped(self) -> tuple[DroppedExchange, ...]:
        with self._log_lock:
            return tuple(self._dropped)

    def report(self) -> dict:
        with self._log_lock:
            return {
                "run_id": self.run_id,
                "status": self.status,
                "routes": sorted(self._routes),
                "exchanges_created": self._exchange_counter,
                "delivered": len(self._deliveries),
                "dropped": [
                    {"route_id": d.route_id, "exchange": d.exchange} for d in self._dropped
                ],
                "dead_letters": [
                    {
                        "route_id": d.route_id,
                        "kind": d.kind,
                        "endpoint": d.endpoint,
                        "error": d.error,
                        "exchange": d.exchange,
                    }
                    for d in self._dead_letters
                ],
            }

    def _record_delivery(self, exchange: Exchange, route_id: str, endpoint: str):
        record = DeliveryRecord(exchange.id, route_id, endpoint, self.clock.now())
        with self._log_lock:
            self._deliveries.append(record)
        for fn in self._delivery_listeners:
            try:
                fn(exchange, route_id, endpoint)
            except Exception:
                logger.exception("delivery listener failed")

    def _record_dead_letter(self, route_id, kind, endpoint, error, exchange):
        logger.warning(
            "dead letter on route %s (%s via %s): %s", route_id, kind, endpoint, error
        )
        entry = DeadLetter(
            route_id=route_id,
            kind=kind,
            endpoint=endpoint,
            error=f"{type(error).__name__}: {error}",
            exchange=exchange.snapshot(),
            at=self.clock.now(),
        )
        with self._log_lock:
            self._dead_letters.append(entry)

    def _record_dropped(self, route_id, exchange):
        with self._log_lock:
            self._dropped.append(DroppedExchange(route_id, exchange.snapshot()))
