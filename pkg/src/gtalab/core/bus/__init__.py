from gtalab.core.bus.event_bus import EventBus
from gtalab.core.bus.events import BaseEvent, EvalEvent, RunFinishedEvent, RunStartedEvent, StepEvent

__all__ = ["BaseEvent", "EvalEvent", "EventBus", "RunFinishedEvent", "RunStartedEvent", "StepEvent"]
