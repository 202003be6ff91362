import itertools
import math

import numpy as np
import pytest
import torch

from retro3d.data import assemble, build_vocab, collate, parse_reaction_line
from retro3d.models import Retro3D, beam_search, beam_search_core, greedy_core, greedy_decode

PAD, BOS, EOS, A, B = 0, 1, 2, 4, 5
VOCAB_SIZE = 6

# next-token probabilities keyed by the last token of the prefix
TABLE = {
    BOS: {EOS: 0.4, A: 0.35, B: 0.25},
    A: {EOS: 0.9, A: 0.05, B: 0.05},
    B: {EOS: 0.1, A: 0.6, B: 0.3},
}


def table_step(prefixes):
    out = np.full((len(prefixes), VOCAB_SIZE), -np.inf)
    for row, prefix in enumerate(prefixes):
        for token, p in TABLE[prefix[-1]].items():
            out[row, token] = math.log(p)
    return out


def test_greedy_on_table():
    result = greedy_core(table_step, BOS, EOS, PAD, max_len=10)
    assert result.sequences == [[EOS]]
    assert result.scores[0] == pytest.approx(math.log(0.4))


def enumerate_table(max_len):
    """Every hypothesis of at most `max_len` tokens, best first.

    A hypothesis is finished at its first EOS or unfinished at `max_len`.
    """
    hypotheses = []
    for length in range(1, max_len + 1):
        for tokens in itertools.product(sorted(TABLE[BOS]), repeat=length):
            if EOS in tokens[:-1] or (tokens[-1] != EOS and length < max_len):
                continue
            prefix, score = [BOS], 0.0
            for token in tokens:
                p = TABLE[prefix[-1]].get(token, 0.0)
                score = score + math.log(p) if p > 0 else -math.inf
                prefix.append(token)
            if math.isfinite(score):
                hypotheses.append((list(tokens), score))
    hypotheses.sort(key=lambda c: (-c[1], c[0]))
    return hypotheses


def test_beam_two_matches_exhaustive_enumeration():
    best = enumerate_table(max_len=4)[:2]
    result = beam_search_core(table_step, BOS, EOS, PAD, beam=2, max_len=4)
    assert result.sequences == [seq for seq, _ in best]
    assert result.scores == pytest.approx([score for _, score in best])
    assert result.sequences == [[EOS], [A, EOS]]
    assert result.scores[1] == pytest.approx(math.log(0.35 * 0.9))


def test_beam_one_equals_greedy_on_table():
    greedy = greedy_core(table_step, BOS, EOS, PAD, max_len=10)
    beam = beam_search_core(table_step, BOS, EOS, PAD, beam=1, max_len=10)
    assert greedy.candidates == beam.candidates


def test_beam_scores_are_sorted_and_bounded():
    for beam in (1, 2, 3, 5):
        result = beam_search_core(table_step, BOS, EOS, PAD, beam=beam, max_len=6)
        assert len(result.candidates) <= beam
        assert result.scores == sorted(result.scores, reverse=True)
        for seq in result.sequences:
            assert len(seq) <= 6
            assert BOS not in seq and PAD not in seq


def test_max_len_truncates_unfinished_hypotheses():
    always_a = {BOS: {A: 0.9, EOS: 0.1}, A: {A: 0.9, EOS: 0.1}}

    def step(prefixes):
        out = np.full((len(prefixes), VOCAB_SIZE), -np.inf)
        for row, prefix in enumerate(prefixes):
            for token, p in always_a[prefix[-1]].items():
                out[row, token] = math.log(p)
        return out

    result = greedy_core(step, BOS, EOS, PAD, max_len=3)
    assert result.sequences == [[A, A, A]]
    result = beam_search_core(step, BOS, EOS, PAD, beam=2, max_len=3)
    assert all(len(seq) <= 3 for seq in result.sequences)
    with pytest.raises(ValueError):
        beam_search_core(step, BOS, EOS, PAD, beam=0, max_len=3)


def test_beam_one_equals_greedy_on_model():
    text = '[CH3:1][C:2](=[O:3])Cl.[NH2:4][CH3:5]>>[CH3:1][C:2](=[O:3])[NH:4][CH3:5]\tr1'
    record = parse_reaction_line(text, 1)
    vocab = build_vocab([record])
    batch = collate([assemble(record, vocab, on_missing='synthetic')])
    torch.manual_seed(0)
    model = Retro3D(len(vocab), dim=16, num_encoder_layers=1, num_decoder_layers=1, num_heads=2,
                    spatial_heads=1, ffn_dim=16, num_kernels=4, max_length=32, comenet_layers=1)
    greedy = greedy_decode(model, batch, max_len=12)
    beam = beam_search(model, batch, beam=1, max_len=12)
    assert greedy.sequences == beam.sequences
    assert greedy.scores[0] == pytest.approx(beam.scores[0])

    wide = beam_search(model, batch, beam=3, max_len=12)
    assert len(wide.candidates) == 3
    assert wide.scores == sorted(wide.scores, reverse=True)


def test_decoding_restores_training_mode():
    text = '[CH3:1][C:2](=[O:3])Cl.[NH2:4][CH3:5]>>[CH3:1][C:2](=[O:3])[NH:4][CH3:5]\tr1'
    record = parse_reaction_line(text, 1)
    vocab = build_vocab([record])
    batch = collate([assemble(record, vocab, on_missing='synthetic')])
    torch.manual_seed(0)
    model = Retro3D(len(vocab), dim=16, num_encoder_layers=1, num_decoder_layers=1, num_heads=2,
                    spatial_heads=1, ffn_dim=16, num_kernels=4, max_length=32, comenet_layers=1)
    model.train()
    first = beam_search(model, batch, beam=2, max_len=8)
    assert model.training
    # dropout stays off while decoding, so results repeat
    second = beam_search(model, batch, beam=2, max_len=8)
    assert first.candidates == second.candidates
    greedy_decode(model, batch, max_len=8)
    assert model.training

    model.eval()
    greedy_decode(model, batch, max_len=8)
    assert not model.training
