"""Run-tracking system initialization and management."""
import atexit
import logging
from typing import Optional

from ..config import ExperimentConfig, config_manager
from ..logging_setup import setup_logging
from .database import RunHistory
from .event_bus import RUN_EVENTS, event_bus


class MonitoringSystem:
    """Owns the logging handlers and the run history database."""

    def __init__(self):
        self.logger: Optional[logging.Logger] = None
        self.history: Optional[RunHistory] = None
        self.initialized = False
        self._atexit_registered = False

    def initialize(self, config: Optional[ExperimentConfig] = None) -> None:
        config = config or config_manager.get_config()
        if self.initialized and self.history is not None and self.history.db_path == config.database_path:
            return

        try:
            self.logger = setup_logging(config)
            self.history = RunHistory(config.database_path)
            if not self._atexit_registered:
                atexit.register(self.shutdown)
                self._atexit_registered = True
            self.initialized = True
            self.logger.debug(f"Run tracking initialized with history at {config.database_path}")
        except Exception as e:
            logging.getLogger(__name__).error(f"Failed to initialize run tracking: {e}")
            raise

    def shutdown(self) -> None:
        """Shutdown gracefully; safe to call twice."""
        if not self.initialized:
            return
        try:
            event_bus.clear_subscribers()
            self.initialized = False
            self.history = None
            if self.logger:
                self.logger.debug("Run tracking shut down")
        except Exception as e:
            if self.logger:
                self.logger.error(f"Error during run tracking shutdown: {e}")

    def is_initialized(self) -> bool:
        return self.initialized

    def get_status(self) -> dict:
        if not self.initialized or self.history is None:
            return {'status': 'not_initialized'}

        try:
            config = config_manager.get_config()
            return {
                'status': 'running',
                'database_stats': self.history.get_database_stats(),
                'config': {
                    'log_level': config.log_level,
                    'database_path': self.history.db_path,
                },
                'event_bus_subscribers': {
                    event_type: event_bus.get_subscriber_count(event_type) for event_type in RUN_EVENTS
                },
            }
        except Exception as e:
            return {'status': 'error', 'error': str(e)}


# Global monitoring system instance
monitoring_system = MonitoringSystem()


def ensure_initialized(config: Optional[ExperimentConfig] = None) -> None:
    """Initialize run tracking on first use; later calls keep the open history."""
    if not monitoring_system.is_initialized():
        monitoring_system.initialize(config)
