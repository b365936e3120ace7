"""Utility modules for the Ansteckung application."""

from utils.config import config
from utils.custom_formatter import CustomFormatter
from utils.globals import Globals
from utils.job_queue import JobQueue
from utils.logging_setup import get_logger
from utils.utils import Utils

__all__ = [
    'config',
    'CustomFormatter',
    'Globals',
    'get_logger',
    'JobQueue',
    'Utils',
]
