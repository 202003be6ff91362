from .reaction_io import DataError, ReactionRecord, parse_reaction_line, read_reactions, write_reactions
from .vocab import (Vocab, build_vocab, class_token, PAD, BOS, EOS, UNK, SPECIALS,
                    PAD_INDEX, BOS_INDEX, EOS_INDEX, UNK_INDEX)
from .example import TokenizedReaction, assemble, clean_reaction, encode_source, product_example
from .dataset import ReactionDataset, collate, example_rng, num_threads
from .build import build_dataloader, build_dataset, load_conformers, load_vocab
