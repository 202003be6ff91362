"""Reaction files.

One reaction per line: ``reactants>reagents>product`` with atom maps,
optionally followed by a tab-separated id and a reaction class. Blank lines
are skipped.
"""
import logging
from dataclasses import dataclass
from typing import Optional

from retro3d.chem import SmilesParseError, split_reaction

logger = logging.getLogger(__name__)


class DataError(ValueError):
    """Bad input data, located by file path and 1-based line number when known."""

    def __init__(self, message, path=None, line=None, reason=None):
        location = ''
        if path is not None:
            location = '{}:{}: '.format(path, line) if line is not None else '{}: '.format(path)
        super(DataError, self).__init__(location + message)
        self.path = path
        self.line = line
        self.reason = reason


@dataclass
class ReactionRecord:
    reaction: str
    id: str
    reaction_class: Optional[int] = None
    line: int = 0

    @property
    def reactants(self):
        return split_reaction(self.reaction)[0]

    @property
    def product(self):
        return split_reaction(self.reaction)[1]


def parse_reaction_line(text, line=0, path=None):
    fields = text.rstrip('\r\n').split('\t')
    reaction = fields[0].strip()
    try:
        split_reaction(reaction)
    except SmilesParseError as e:
        raise DataError(e.reason, path, line)
    record_id = fields[1].strip() if len(fields) > 1 and fields[1].strip() else str(line)
    reaction_class = None
    if len(fields) > 2 and fields[2].strip():
        try:
            reaction_class = int(fields[2])
        except ValueError:
            raise DataError('reaction class must be an integer, got {!r}'.format(fields[2]), path, line)
    return ReactionRecord(reaction, record_id, reaction_class, line)


def read_reactions(path):
    """Read a reaction file.

    Returns:
        list of ReactionRecord: ids default to the line number.

    """
    records = []
    seen = set()
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, text in enumerate(f, 1):
            if not text.strip():
                continue
            record = parse_reaction_line(text, line_no, path)
            if record.id in seen:
                raise DataError('duplicate reaction id {!r}'.format(record.id), path, line_no)
            seen.add(record.id)
            records.append(record)
    logger.debug('read %d reactions from %s', len(records), path)
    return records


def write_reactions(path, records):
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            fields = [record.reaction, record.id]
            if record.reaction_class is not None:
                fields.append(str(record.reaction_class))
            f.write('\t'.join(fields) + '\n')
