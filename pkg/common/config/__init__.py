from yacs.config import CfgNode


def purge_cfg(cfg: CfgNode, prefix=''):
    """Drop the option groups a ``TYPE`` key does not select.

    Under a node with ``TYPE = 'X'``, child nodes other than ``X`` belong to
    unused alternatives (``OPTIMIZER.SGD`` next to ``OPTIMIZER.Adam``) and are
    deleted, which keeps logged configs short. Returns the dotted names of the
    removed groups.
    """
    selected = cfg.get('TYPE', None)
    removed = []
    for key in list(cfg.keys()):
        value = cfg[key]
        if not isinstance(value, CfgNode):
            continue
        name = prefix + key
        if selected is not None and key != selected:
            del cfg[key]
            removed.append(name)
        else:
            removed.extend(purge_cfg(value, name + '.'))
    return removed
