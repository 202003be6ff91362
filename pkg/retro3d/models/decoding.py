"""Greedy and beam-search decoding.

Both decoders are written against a step function

    step_fn(prefixes) -> numpy array (len(prefixes), V) of log-probabilities

where every prefix is a list of token ids starting with BOS. ``model_step_fn``
builds one from a trained model; tests drive the same code with hand-set
tables.
"""
import contextlib
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import torch


@dataclass
class DecodeResult:
    """Candidates as (token ids without BOS, total log-probability), best first."""
    candidates: List[Tuple[List[int], float]] = field(default_factory=list)

    @property
    def sequences(self):
        return [seq for seq, _ in self.candidates]

    @property
    def scores(self):
        return [score for _, score in self.candidates]


def _blocked(log_probs, tokens):
    log_probs = np.array(log_probs, dtype=np.float64)
    log_probs[..., list(tokens)] = -np.inf
    return log_probs


def greedy_core(step_fn, bos, eos, pad, max_len):
    """Argmax decoding; ties go to the lowest token id."""
    seq = [bos]
    score = 0.0
    while len(seq) - 1 < max_len:
        log_probs = _blocked(step_fn([seq]), (pad, bos))[0]
        token = int(np.argmax(log_probs))
        score += float(log_probs[token])
        seq.append(token)
        if token == eos:
            break
    return DecodeResult([(seq[1:], score)])


def beam_search_core(step_fn, bos, eos, pad, beam, max_len):
    """Length-wise beam search with a pool of finished hypotheses.

    Each step expands every active beam, ranks the expansions by
    (-score, token ids) and keeps the best ``2 * beam``. An EOS expansion is
    retired to the finished pool if it ranks within the first ``beam``; the
    other expansions refill the active beams. Search stops once ``beam``
    hypotheses are finished and none of the active ones can beat the worst
    of them, or at ``max_len`` generated tokens.

    Returns:
        DecodeResult: at most ``beam`` candidates, score non-increasing.

    """
    if beam < 1:
        raise ValueError('beam must be >= 1, got {}'.format(beam))
    active = [([bos], 0.0)]
    finished = []
    for _ in range(max_len):
        log_probs = _blocked(step_fn([seq for seq, _ in active]), (pad, bos))
        expansions = []
        for (seq, score), row in zip(active, log_probs):
            for token in np.nonzero(np.isfinite(row))[0]:
                expansions.append((seq + [int(token)], score + float(row[token])))
        expansions.sort(key=lambda c: (-c[1], c[0]))
        expansions = expansions[:2 * beam]

        active = []
        for rank, (seq, score) in enumerate(expansions):
            if seq[-1] == eos:
                if rank < beam:
                    finished.append((seq, score))
            elif len(active) < beam:
                active.append((seq, score))

        finished.sort(key=lambda c: (-c[1], c[0]))
        if not active:
            break
        if len(finished) >= beam and finished[beam - 1][1] >= active[0][1]:
            break

    if len(finished) < beam:
        finished.extend(active)
    finished.sort(key=lambda c: (-c[1], c[0]))
    return DecodeResult([(seq[1:], score) for seq, score in finished[:beam]])


@contextlib.contextmanager
def eval_mode(model):
    was_training = model.training
    model.eval()
    try:
        yield model
    finally:
        model.train(was_training)


def model_step_fn(model, data_batch):
    """Step function of ``model`` for the single example in ``data_batch``.

    The source is encoded once; every call recomputes the decoder over the
    full prefixes, which must have equal length. The model runs in eval mode
    and gets its previous mode back after every call.
    """
    with eval_mode(model), torch.no_grad():
        enc = model.encode(data_batch)
    memory, src_pad = enc['memory'], enc['src_pad']

    def step_fn(prefixes):
        n = len(prefixes)
        prefix = torch.as_tensor(prefixes, dtype=torch.long)
        with eval_mode(model), torch.no_grad():
            logits, _ = model.decode_step(prefix, memory.expand(n, -1, -1), src_pad.expand(n, -1))
            log_probs = torch.log_softmax(logits, dim=-1)
        return log_probs.numpy()

    return step_fn


def greedy_decode(model, data_batch, max_len):
    return greedy_core(model_step_fn(model, data_batch), model.bos_index, model.eos_index,
                       model.pad_index, max_len)


def beam_search(model, data_batch, beam, max_len):
    return beam_search_core(model_step_fn(model, data_batch), model.bos_index, model.eos_index,
                            model.pad_index, beam, max_len)
