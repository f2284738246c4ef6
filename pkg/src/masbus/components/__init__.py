"""Endpoint components and the standard registration helper."""

from __future__ import annotations

from .artifact import ArtifactComponent
from .base import Component, Consumer, Producer
from .chatstub import ChatStubComponent, TranscriptRow
from .direct import DirectComponent
from .httplite import HttpLiteComponent
from .jason import JasonComponent
from .mqttlite import Broker, MqttLiteComponent
from .tcpline import TcpLineComponent
from .timer import TimerComponent

BUILTIN_SCHEMES = (
    "direct",
    "timer",
    "tcpline",
    "mqttlite",
    "httplite",
    "chatstub",
    "jason",
    "artifact",
)


def register_builtin_components(bus, registry=None, environment=None) -> dict:
    """Register the standard component set on a bus.

    ``jason`` needs an agent registry and ``artifact`` an environment; they
    are skipped when the corresponding collaborator is not given. Returns
    the scheme-to-component mapping for direct access (broker handles,
    transcripts).
    """
    components = {
        "direct": DirectComponent(),
        "timer": TimerComponent(),
        "tcpline": TcpLineComponent(),
        "mqttlite": MqttLiteComponent(),
        "httplite": HttpLiteComponent(),
        "chatstub": ChatStubComponent(),
    }
    if registry is not None:
        components["jason"] = JasonComponent(registry)
    if environment is not None:
        components["artifact"] = ArtifactComponent(environment)
    for scheme, component in components.items():
        bus.register_component(scheme, component)
    return components


__all__ = [
    "ArtifactComponent",
    "Broker",
    "BUILTIN_SCHEMES",
    "ChatStubComponent",
    "Component",
    "Consumer",
    "DirectComponent",
    "HttpLiteComponent",
    "JasonComponent",
    "MqttLiteComponent",
    "Producer",
    "register_builtin_components",
    "TcpLineComponent",
    "TimerComponent",
    "TranscriptRow",
]
