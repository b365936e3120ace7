import logging
import os
from datetime import datetime, timedelta
from pathlib import Path
from typing import List, Optional

import appdirs

from utils.custom_formatter import CustomFormatter

APP_NAME = "ansteckung"



def _level_from_env() -> int:
    level = logging.getLevelName(os.environ.get("ANSTECKUNG_LOG_LEVEL", "INFO").upper())
    return level if isinstance(level, int) else logging.INFO


_console_level: int = _level_from_env()
_log_to_file: bool = os.environ.get("ANSTECKUNG_LOG_TO_FILE", "1") != "0"
_log_dir: Optional[Path] = None


def _cleanup_old_logs(log_dir: Path, logger: logging.Logger) -> None:
    """
    Clean up log files that are older than 30 days if there are more than 10 log files.

    Args:
        log_dir: Path object pointing to the directory containing log files
        logger: Logger instance to use for logging cleanup operations
    """
    try:
        log_files: List[Path] = list(log_dir.glob(f'{APP_NAME}_*.log'))
        if len(log_files) <= 10:
            return

        cutoff_date: datetime = datetime.now() - timedelta(days=30)

        for log_file in log_files:
            try:
                # Filename format: ansteckung_YYYY-MM-DD.log
                date_str: str = log_file.stem.split('_')[-1]
                file_date: datetime = datetime.strptime(date_str, '%Y-%m-%d')
            except (ValueError, IndexError):
                file_date = datetime.fromtimestamp(log_file.stat().st_mtime)

            if file_date < cutoff_date:
                log_file.unlink()
                logger.debug(f"Deleted old log file: {log_file}")
    except Exception as e:
        logger.error(f"Error cleaning up old log files: {e}")


def get_log_dir() -> Path:
    global _log_dir
    if _log_dir is None:
        _log_dir = Path(appdirs.user_log_dir(APP_NAME, appauthor=False))
    return _log_dir


def _add_file_handler(logger: logging.Logger) -> None:
    try:
        log_dir = get_log_dir()
        log_dir.mkdir(parents=True, exist_ok=True)
        _cleanup_old_logs(log_dir, logger)
        date_str: str = datetime.now().strftime("%Y-%m-%d")
        fh = logging.FileHandler(log_dir / f'{APP_NAME}_{date_str}.log', mode='a', encoding='utf-8')
        fh.setLevel(logging.DEBUG)
        fh.setFormatter(CustomFormatter(use_color=False))
        logger.addHandler(fh)
    except OSError as e:
        # Read-only home directories still get console logging
        logger.warning(f"File logging disabled: {e}")


def get_logger(module_name: str) -> logging.Logger:
    """
    Get a logger instance for a specific module.

    Args:
        module_name: The name of the module requesting the logger

    Returns:
        A configured logger instance for the module
    """
    if module_name.startswith(f"{APP_NAME}."):
        name = module_name
    else:
        name = f"{APP_NAME}.{module_name.split('.')[-1]}"
    logger: logging.Logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    if logger.handlers:
        return logger

    ch = logging.StreamHandler()
    ch.setLevel(_console_level)
    ch.setFormatter(CustomFormatter())
    logger.addHandler(ch)

    if _log_to_file:
        _add_file_handler(logger)

    return logger


def configure_logging(level: Optional[str] = None, log_to_file: Optional[bool] = None) -> None:
    """Apply console level and file logging choices to every logger created so far and later."""
    global _console_level, _log_to_file
    if level is not None:
        resolved = logging.getLevelName(level.upper())
        if not isinstance(resolved, int):
            raise ValueError(f"Unknown log level: {level}")
        _console_level = resolved
    if log_to_file is not None:
        _log_to_file = log_to_file

    for name, logger in logging.Logger.manager.loggerDict.items():
        if not name.startswith(APP_NAME) or not isinstance(logger, logging.Logger):
            continue
        for handler in list(logger.handlers):
            if isinstance(handler, logging.FileHandler):
                if not _log_to_file:
                    logger.removeHandler(handler)
                    handler.close()
            elif isinstance(handler, logging.StreamHandler):
                handler.setLevel(_console_level)
        if _log_to_file and not any(isinstance(h, logging.FileHandler) for h in logger.handlers):
            _add_file_handler(logger)
