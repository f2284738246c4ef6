"""Component SPI: how a URI scheme turns into consumers and producers.

A component is registered on the bus under a scheme. When a route starts,
the bus asks the ``from`` component for a consumer and each ``to`` component
for a producer, passing a :class:`~masbus.routing.RouteContext` that carries
the endpoint URI and, for consumers, the exchange-admission hooks.
"""

from __future__ import annotations

from ..errors import ConsumerUnsupportedError, MissingParamError, ProducerUnsupportedError
from ..uris import EndpointUri, format_uri


class Consumer:
    """Admits external data into a route; start/stop bracket its lifetime."""

    def __init__(self, ctx):
        self.ctx = ctx
        self.uri: EndpointUri = ctx.uri

    def start(self) -> None:
        pass

    def stop(self) -> None:
        pass


class Producer:
    """Emits exchanges to an endpoint; ``send`` raises to signal failure."""

    def __init__(self, ctx):
        self.ctx = ctx
        self.uri: EndpointUri = ctx.uri

    def send(self, exchange) -> None:
        raise NotImplementedError

    def stop(self) -> None:
        pass


class Component:
    def create_consumer(self, ctx) -> Consumer:
        raise ConsumerUnsupportedError(
            f"{type(self).__name__} cannot consume from {format_uri(ctx.uri)}"
        )

    def create_producer(self, ctx) -> Producer:
        raise ProducerUnsupportedError(
            f"{type(self).__name__} cannot produce to {format_uri(ctx.uri)}"
        )


def require_param(uri: EndpointUri, key: str) -> str:
    value = uri.params.get(key)
    if not value:
        raise MissingParamError(key, format_uri(uri))
    return value
