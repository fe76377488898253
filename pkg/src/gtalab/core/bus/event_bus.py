import logging
from collections import defaultdict
from collections.abc import Callable
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from gtalab.core.bus.events import BaseEvent


logger = logging.getLogger(__name__)


class EventBus:
    """
    A simple event bus that allows for the registration of event handlers
    and the publishing of events to those handlers.

    Each run owns its bus, so concurrently running experiments never see
    each other's handlers. Handlers are called synchronously in
    subscription order.
    """

    def __init__(self):
        self._handlers: dict[type["BaseEvent"], list[Callable]] = defaultdict(list)

    def subscribe(self, event_type: type["BaseEvent"], handler: Callable) -> None:
        """
        Subscribe a handler to an event type.

        The handler will be called with the event when it is published.
        """
        self._handlers[event_type].append(handler)

    def publish(self, event: "BaseEvent") -> None:
        """
        Publish an event to all registered handlers for its type.
        """
        handlers = self._handlers.get(type(event), [])
        if handlers:
            msg = f"Publishing {event!r} to {len(handlers)} handler(s)"
            logger.debug(msg)
        for handler in handlers:
            handler(event)
