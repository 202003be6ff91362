import numpy as np
from tabulate import tabulate

from common.utils.metric_logger import AverageMeter
from retro3d.chem import SmilesParseError, canonical_key, validity_check


class TokenAccuracy(AverageMeter):
    """Next-token accuracy on ground-truth prefixes over non-pad positions"""
    name = 'tok_acc'

    def __init__(self, pad_index=0):
        super(TokenAccuracy, self).__init__()
        self.pad_index = pad_index

    def update_dict(self, preds, labels):
        if isinstance(preds, (list, tuple)):
            preds = preds[0]
        logits = preds['logits']  # (b, t, v)
        tgt_out = labels['tgt_out']  # (b, t)
        pred_ids = logits.detach().argmax(-1)

        mask = tgt_out != self.pad_index
        tp_mask = pred_ids[mask].eq(tgt_out[mask])
        self.update(tp_mask.sum().item(), tp_mask.numel())


def _safe_key(smiles):
    try:
        return canonical_key(smiles)
    except (SmilesParseError, ValueError):
        return None


def candidate_flags(predictions, ground_truth):
    """Per-candidate (valid, hit) flags; a hit needs a valid candidate with the reference canonical key."""
    target = _safe_key(ground_truth)
    valid = [p is not None and validity_check(p) for p in predictions]
    hits = [v and target is not None and _safe_key(p) == target for p, v in zip(predictions, valid)]
    return valid, hits


def topk_metrics(predictions, ground_truth, topk=(1, 3, 5, 10)):
    """Top-k exact match and validity of one example.

    Args:
        predictions (list of str or None): candidate SMILES, best first;
            None marks a candidate that could not be detokenized.
        ground_truth (str): reference reactants SMILES.
        topk (sequence of int): cut-offs.

    Returns:
        dict: k -> {'hit': bool, 'validity': float}

    """
    valid, hits = candidate_flags(predictions, ground_truth)
    results = dict()
    for k in topk:
        head = valid[:k]
        results[k] = {
            'hit': any(hits[:k]),
            'validity': float(np.mean(head)) if head else 0.0,
        }
    return results


class TopKAccuracy(object):
    """Accumulates top-k accuracy and validity over a test set"""
    name = 'topk'

    def __init__(self, topk=(1, 3, 5, 10)):
        self.topk = tuple(topk)
        self.reset()

    def reset(self):
        self.num_examples = 0
        self.hits = {k: 0 for k in self.topk}
        self.validity = {k: 0.0 for k in self.topk}

    def update(self, predictions, ground_truth):
        results = topk_metrics(predictions, ground_truth, self.topk)
        self.num_examples += 1
        for k in self.topk:
            self.hits[k] += int(results[k]['hit'])
            self.validity[k] += results[k]['validity']
        return results

    def accuracy(self, k):
        return 100.0 * self.hits[k] / self.num_examples if self.num_examples else float('nan')

    def mean_validity(self, k):
        return 100.0 * self.validity[k] / self.num_examples if self.num_examples else float('nan')

    @property
    def global_avg(self):
        return self.accuracy(self.topk[0])

    def __str__(self):
        return ' '.join('top{}={:.2f}'.format(k, self.accuracy(k)) for k in self.topk)

    @property
    def summary_str(self):
        return str(self)

    def table(self):
        headers = ['metric'] + ['top-{}'.format(k) for k in self.topk]
        rows = [['accuracy'] + ['{:.2f}'.format(self.accuracy(k)) for k in self.topk],
                ['validity'] + ['{:.2f}'.format(self.mean_validity(k)) for k in self.topk]]
        return tabulate(rows, headers=headers, tablefmt='psql')
