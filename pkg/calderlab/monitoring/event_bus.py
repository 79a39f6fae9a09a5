"""Publish/subscribe bus for run events (experiment.started, assertion.checked, ...)."""
import logging
import threading
from collections import defaultdict
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Union

Handler = Callable[[str, Dict[str, Any]], None]

EXPERIMENT_STARTED = 'experiment.started'
EXPERIMENT_COMPLETED = 'experiment.completed'
EXPERIMENT_FAILED = 'experiment.failed'
ASSERTION_CHECKED = 'assertion.checked'
FUNCTION_STARTED = 'function.started'
FUNCTION_COMPLETED = 'function.completed'
FUNCTION_FAILED = 'function.failed'

RUN_EVENTS = (EXPERIMENT_STARTED, ASSERTION_CHECKED, EXPERIMENT_COMPLETED, EXPERIMENT_FAILED)
FUNCTION_EVENTS = (FUNCTION_STARTED, FUNCTION_COMPLETED, FUNCTION_FAILED)

logger = logging.getLogger(__name__)


class EventBus:
    """Thread-safe broker between experiment runs and whoever listens to them.

    Handlers are called synchronously in subscription order; a handler that raises is
    logged and skipped so one broken listener cannot abort a run.
    """

    def __init__(self):
        self._handlers: Dict[str, List[Handler]] = defaultdict(list)
        self._lock = threading.RLock()

    def publish(self, event_type: str, data: Dict[str, Any]) -> None:
        with self._lock:
            handlers = list(self._handlers.get(event_type, ()))
        for handler in handlers:
            try:
                handler(event_type, data)
            except Exception as e:
                run_id = data.get('run_id', '-') if isinstance(data, dict) else '-'
                logger.error(f"[{run_id}] Handler {getattr(handler, '__name__', handler)} failed on {event_type}: {e}")

    def subscribe(self, event_type: str, handler: Handler) -> None:
        with self._lock:
            self._handlers[event_type].append(handler)

    def unsubscribe(self, event_type: str, handler: Handler) -> None:
        with self._lock:
            handlers = self._handlers.get(event_type)
            if handlers and handler in handlers:
                handlers.remove(handler)

    @contextmanager
    def listening(self, event_types: Union[str, Iterable[str]], handler: Handler) -> Iterator[Handler]:
        """Subscribe ``handler`` to ``event_types`` for the duration of a with-block."""
        types = [event_types] if isinstance(event_types, str) else list(event_types)
        for event_type in types:
            self.subscribe(event_type, handler)
        try:
            yield handler
        finally:
            for event_type in types:
                self.unsubscribe(event_type, handler)

    def get_subscriber_count(self, event_type: str) -> int:
        with self._lock:
            return len(self._handlers.get(event_type, ()))

    def clear_subscribers(self, event_type: Optional[str] = None) -> None:
        with self._lock:
            if event_type is None:
                self._handlers.clear()
            else:
                self._handlers.pop(event_type, None)


event_bus = EventBus()
