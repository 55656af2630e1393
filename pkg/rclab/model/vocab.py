"""
rclab/model/vocab.py

    closed character-level vocabulary shared by the policy model and the task generators
"""


from typing import List, Dict, Iterable, Sequence

from rclab.typing import TokenIds


BOS = "<bos>"
EOS = "<eos>"
PAD = "<pad>"
_SPECIALS = (BOS, EOS, PAD)


class UnknownToken(ValueError):
    """ raised by encode when the text contains a character outside of the vocabulary """

    def __init__(self, position: int, char: str):
        self.position = position
        self.char = char
        super().__init__(f"encode: character {char!r} at position {position} is not in the vocabulary")


class Vocab:
    """
    ordered list of single-character tokens followed by the BOS, EOS and PAD specials,
    token ids are dense indices into ``tokens``
    """

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if len(tokens) > 128:
            raise ValueError(f"Vocab: at most 128 tokens are supported, got {len(tokens)}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("Vocab: tokens must be unique")
        for sp in _SPECIALS:
            if sp not in tokens:
                raise ValueError(f"Vocab: missing special token {sp}")
        for tok in tokens:
            if tok not in _SPECIALS and len(tok) != 1:
                raise ValueError(f"Vocab: non-special tokens must be single characters, got {tok!r}")
        self.tokens: List[str] = tokens
        self.id_of: Dict[str, int] = {tok: i for i, tok in enumerate(tokens)}
        self.bos: int = self.id_of[BOS]
        self.eos: int = self.id_of[EOS]
        self.pad: int = self.id_of[PAD]
        self._special_ids = frozenset((self.bos, self.eos, self.pad))

    def __len__(self) -> int :
        return len(self.tokens)

    def __eq__(self, other: object) -> bool :
        return isinstance(other, Vocab) and self.tokens == other.tokens

    def __repr__(self) -> str :
        return f"Vocab(size={len(self)})"

    def is_special(self, token_id: int) -> bool :
        return token_id in self._special_ids

    @staticmethod
    def from_chars(chars: Iterable[str]) -> "Vocab" :
        """ build a vocabulary from a set of characters (kept in first-seen order) plus the specials """
        seen = []
        for c in chars:
            if c not in seen:
                seen.append(c)
        return Vocab(seen + list(_SPECIALS))

    @staticmethod
    def default() -> "Vocab" :
        """ newline, the 95 printable ASCII characters and the three specials (99 tokens) """
        return Vocab.from_chars(["\n"] + [chr(c) for c in range(32, 127)])


def encode(text: str, vocab: Vocab) -> TokenIds :
    """
    map text to token ids one character at a time

    Raises
    ------
    UnknownToken
        for the first character that is not in the vocabulary
    """
    ids = []
    for i, c in enumerate(text):
        tid = vocab.id_of.get(c)
        if tid is None or vocab.is_special(tid):
            raise UnknownToken(i, c)
        ids.append(tid)
    return ids


def encode_prompt(text: str, vocab: Vocab) -> TokenIds :
    """ encode a prompt, which always starts with BOS """
    return [vocab.bos] + encode(text, vocab)


def decode(ids: Iterable[int], vocab: Vocab) -> str :
    """ inverse of encode, special tokens are dropped """
    return "".join(vocab.tokens[i] for i in ids if not vocab.is_special(i))
