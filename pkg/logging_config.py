"""
logging_config.py

This module defines the logger objects of the package.
"""
import logging

FORMAT = '%(asctime)s-%(name)s-%(levelname)s: %(message)s'


def get_logger(name):
    """
    Return the logger of a module, with a single stream handler attached on first use.

    input:
            :name: str, module name
    output:
            :logger: logger object to do logging
    """
    logger = logging.getLogger(name)

    if not logger.handlers:
        logger.propagate = False
        logger.setLevel(logging.DEBUG)
        # stream handler
        ch = logging.StreamHandler()
        ch.setLevel(logging.INFO)
        ch.setFormatter(logging.Formatter(FORMAT))
        logger.addHandler(ch)
    return logger


def set_verbosity(verbose):
    """
    Let DEBUG records through the handlers of every package logger when verbose, INFO otherwise.
    """
    level = logging.DEBUG if verbose else logging.INFO
    for name in list(logging.root.manager.loggerDict):
        if name.startswith('src.') or name in ('__main__', 'main', 'main_tune'):
            for handler in logging.getLogger(name).handlers:
                handler.setLevel(level)
