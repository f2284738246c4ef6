"""Tick source: ``timer:<name>?periodMs=N`` emits a numbered exchange per period."""

from __future__ import annotations

from ..errors import MissingParamError
from ..terms import Number
from ..uris import format_uri
from .base import Component, Consumer, require_param


class _TimerConsumer(Consumer):
    def __init__(self, ctx):
        super().__init__(ctx)
        raw = require_param(ctx.uri, "periodMs")
        try:
            self.period = float(raw) / 1000.0
        except ValueError:
            raise MissingParamError("periodMs", format_uri(ctx.uri)) from None
        if self.period <= 0:
            raise MissingParamError("periodMs", format_uri(ctx.uri))
        self._handle = None
        self._ticks = 0

    def start(self):
        self._handle = self.ctx.bus.clock.schedule_repeating(self.period, self._tick)

    def stop(self):
        if self._handle is not None:
            self._handle.cancel()
            self._handle = None

    def _tick(self):
        index = self._ticks
        self._ticks += 1
        self.ctx.emit(self.ctx.new_exchange(body=Number(index)))


class TimerComponent(Component):
    def create_consumer(self, ctx):
        return _TimerConsumer(ctx)
