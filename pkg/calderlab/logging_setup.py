"""Logging setup for experiment runs."""
import logging
import logging.handlers
from pathlib import Path
from typing import Optional

from .config import ExperimentConfig, config_manager


def setup_logging(config: Optional[ExperimentConfig] = None) -> logging.Logger:
    """Configure the root logger with a console handler and a rotating file handler."""
    config = config or config_manager.get_config()
    level = getattr(logging, config.log_level.upper(), logging.INFO)

    log_path = Path(config.log_file_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)

    logger = logging.getLogger()
    logger.setLevel(level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    ))
    logger.addHandler(console_handler)

    file_handler = logging.handlers.RotatingFileHandler(
        config.log_file_path,
        maxBytes=config.max_log_file_size,
        backupCount=5
    )
    file_handler.setFormatter(logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
    ))
    logger.addHandler(file_handler)

    logging.getLogger('calderlab').setLevel(level)
    return logger


def update_log_level(new_level: str) -> None:
    """Update logging level dynamically."""
    level = getattr(logging, new_level.upper(), logging.INFO)
    logging.getLogger().setLevel(level)
    logging.getLogger('calderlab').setLevel(level)
    logging.info(f"Log level updated to {new_level}")


def _on_config_change(config: ExperimentConfig) -> None:
    update_log_level(config.log_level)


config_manager.register_callback(_on_config_change)
