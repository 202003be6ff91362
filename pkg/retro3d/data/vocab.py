"""Token vocabulary.

The vocabulary file holds one token text per line; the line number is the id.
Ids 0-3 are PAD, BOS, EOS and UNK. The remaining tokens are sorted, so the
file depends only on the set of tokens in the corpus.
"""
import logging

from retro3d.chem import strip_atom_maps, tokenize

logger = logging.getLogger(__name__)

PAD = '<pad>'
BOS = '<bos>'
EOS = '<eos>'
UNK = '<unk>'
SPECIALS = (PAD, BOS, EOS, UNK)
PAD_INDEX, BOS_INDEX, EOS_INDEX, UNK_INDEX = range(4)


def class_token(reaction_class):
    return '<RX_{:d}>'.format(reaction_class)


class Vocab(object):
    def __init__(self, tokens):
        tokens = list(tokens)
        if tuple(tokens[:len(SPECIALS)]) != SPECIALS:
            raise ValueError('vocabulary must start with {}'.format(SPECIALS))
        if len(set(tokens)) != len(tokens):
            raise ValueError('vocabulary has duplicate tokens')
        self.itos = tokens
        self.stoi = {t: i for i, t in enumerate(tokens)}

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def encode(self, texts):
        return [self.stoi.get(t, UNK_INDEX) for t in texts]

    def decode(self, ids, strip_specials=True):
        """Token texts of ``ids``; decoding stops at the first EOS."""
        texts = []
        for i in ids:
            i = int(i)
            if i == EOS_INDEX:
                break
            if strip_specials and i in (PAD_INDEX, BOS_INDEX):
                continue
            texts.append(self.itos[i] if 0 <= i < len(self.itos) else UNK)
        return texts

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write('\n'.join(self.itos) + '\n')

    @classmethod
    def load(cls, path):
        with open(path, 'r', encoding='utf-8') as f:
            tokens = [line.rstrip('\n') for line in f if line.rstrip('\n')]
        return cls(tokens)


def reaction_tokens(record):
    """Model-side token texts of one reaction: unmapped product and reactants."""
    texts = set()
    for smiles in (record.product, record.reactants):
        if smiles:
            texts.update(t.text for t in tokenize(strip_atom_maps(smiles)))
    return texts


def build_vocab(records, with_classes=False):
    """Vocabulary over the token texts of ``records``.

    Args:
        records (iterable of ReactionRecord): reactions to collect tokens from.
        with_classes (bool): add one token per reaction class seen.

    Returns:
        Vocab

    """
    texts = set()
    classes = set()
    for record in records:
        texts.update(reaction_tokens(record))
        if with_classes and record.reaction_class is not None:
            classes.add(record.reaction_class)
    tokens = list(SPECIALS) + sorted(texts - set(SPECIALS)) + [class_token(c) for c in sorted(classes)]
    logger.info('vocabulary: %d tokens (%d classes)', len(tokens), len(classes))
    return Vocab(tokens)
