# Copyright (c) Facebook, Inc. and its affiliates. All Rights Reserved.
# Modified by Jiayuan Gu
import logging
import os
import sys

FORMAT = '%(asctime)s %(name)s %(levelname)s: %(message)s'


def setup_logger(name, save_dir, comment='', level=logging.DEBUG):
    """Logger writing to stdout and, with ``save_dir``, to ``log.<comment>.txt``.

    Handlers installed by an earlier call with the same name are replaced, so
    repeated runs in one process do not duplicate lines.
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    formatter = logging.Formatter(FORMAT)

    ch = logging.StreamHandler(stream=sys.stdout)
    ch.setLevel(level)
    ch.setFormatter(formatter)
    logger.addHandler(ch)

    if save_dir:
        filename = 'log'
        if comment:
            filename += '.' + comment
        fh = logging.FileHandler(os.path.join(save_dir, filename + '.txt'))
        fh.setLevel(level)
        fh.setFormatter(formatter)
        logger.addHandler(fh)

    return logger
