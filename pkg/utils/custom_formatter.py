import logging
import sys


class CustomFormatter(logging.Formatter):

    grey = "\x1b[38;20m"
    yellow = "\x1b[33;20m"
    red = "\x1b[31;20m"
    blue = "\x1b[34;20m"
    bold_red = "\x1b[31;1m"
    reset = "\x1b[0m"
    format_string = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    FORMATS = {
        logging.DEBUG: blue + format_string + reset,
        logging.INFO: grey + format_string + reset,
        logging.WARNING: yellow + format_string + reset,
        logging.ERROR: red + format_string + reset,
        logging.CRITICAL: bold_red + format_string + reset
    }

    def __init__(self, use_color=None):
        super().__init__(CustomFormatter.format_string)
        # Plain output for log files and redirected streams
        self.use_color = sys.stderr.isatty() if use_color is None else use_color

    def format(self, record):
        if self.use_color:
            log_fmt = self.FORMATS.get(record.levelno, CustomFormatter.format_string)
        else:
            log_fmt = CustomFormatter.format_string
        formatter = logging.Formatter(log_fmt)
        return formatter.format(record)
