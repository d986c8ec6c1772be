import logging

LOG_FORMAT = "[%(levelname)s] %(message)s"


def configure_logging(level="INFO"):
    """Route every module logger to stderr with the `[LEVEL] message` tags."""
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
