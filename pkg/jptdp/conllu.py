"""CoNLL-U treebank reading and writing.

Only syntactic words become tokens. Comments, multiword-token ranges
("1-2") and empty nodes ("1.1") stay in ``Sentence.raw_lines`` and are
written back verbatim.
"""
import re
import itertools

from typing import List, Optional, Tuple
from dataclasses import dataclass, field, replace

from .tagsets import EMPTY
from .utils import JptdpError

ID, FORM, LEMMA, UPOS, XPOS, FEATS, HEAD, DEPREL, DEPS, MISC = range(10)

WORD_ID = re.compile(r"^[1-9][0-9]*$")
RANGE_ID = re.compile(r"^[1-9][0-9]*-[1-9][0-9]*$")
EMPTY_NODE_ID = re.compile(r"^[0-9]+\.[1-9][0-9]*$")


class ConlluError(JptdpError):

    def __init__(self, message: str, line_number: int = None,
                 path: str = None):
        self.line_number = line_number
        self.path = path

        location = ""
        if path:
            location = f"{path}:"
        if line_number is not None:
            location = f"{location}{line_number}: "
        elif location:
            location = f"{location} "

        super().__init__(f"{location}{message}")


class StructureError(JptdpError):
    """Heads do not form a tree rooted at 0"""


@dataclass
class Token:
    id: int
    form: str
    lemma: str = EMPTY
    upos: str = EMPTY
    xpos: str = EMPTY
    feats: str = EMPTY
    head: Optional[int] = None
    deprel: str = EMPTY
    deps: str = EMPTY
    misc: str = EMPTY

    def to_line(self) -> str:
        head = EMPTY if self.head is None else str(self.head)

        return "\t".join((
            str(self.id), self.form, self.lemma, self.upos, self.xpos,
            self.feats, head, self.deprel, self.deps, self.misc
        ))


@dataclass
class Sentence:
    tokens: List[Token]
    raw_lines: List[str] = field(default_factory=list)
    blank_lines_after: int = 1

    def __len__(self):
        return len(self.tokens)

    @property
    def forms(self) -> List[str]:
        return [t.form for t in self.tokens]

    @property
    def heads(self) -> List[Optional[int]]:
        return [t.head for t in self.tokens]

    def has_heads(self) -> bool:
        return all(t.head is not None for t in self.tokens)

    def with_predictions(self,
                         upos: List[str],
                         heads: List[int],
                         deprels: List[str]) -> "Sentence":
        """Copy of the sentence with columns 4, 7 and 8 replaced"""
        tokens = [
            replace(token, upos=tag, head=head, deprel=rel)
            for token, tag, head, rel in zip(self.tokens, upos, heads, deprels)
        ]

        return Sentence(tokens=tokens,
                        raw_lines=list(self.raw_lines),
                        blank_lines_after=self.blank_lines_after)


@dataclass
class Treebank:
    sentences: List[Sentence]
    source_path: str = ""

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)


def parse_token(line: str, line_number: int, path: str = None) -> Token:
    columns = line.split("\t")

    if len(columns) != 10:
        raise ConlluError(f"expected 10 tab-separated columns, "
                          f"found {len(columns)}", line_number, path)

    head = columns[HEAD]
    if head == EMPTY:
        head = None
    else:
        try:
            head = int(head)
        except ValueError:
            raise ConlluError(f"non-integer head '{head}'",
                              line_number, path)

        if head < 0:
            raise ConlluError(f"negative head '{head}'", line_number, path)

    return Token(
        id=int(columns[ID]),
        form=columns[FORM],
        lemma=columns[LEMMA],
        upos=columns[UPOS],
        xpos=columns[XPOS],
        feats=columns[FEATS],
        head=head,
        deprel=columns[DEPREL],
        deps=columns[DEPS],
        misc=columns[MISC]
    )


def parse_sentence(lines: List[Tuple[int, str]],
                   blank_lines_after: int,
                   path: str = None) -> Sentence:
    tokens = []
    token_lines = []

    for line_number, line in lines:
        if line.startswith("#"):
            continue

        token_id = line.split("\t", 1)[0]

        if RANGE_ID.match(token_id) or EMPTY_NODE_ID.match(token_id):
            if line.count("\t") != 9:
                raise ConlluError(f"expected 10 tab-separated columns, "
                                  f"found {line.count(chr(9)) + 1}",
                                  line_number, path)
            continue

        if not WORD_ID.match(token_id):
            raise ConlluError(f"invalid token id '{token_id}'",
                              line_number, path)

        token = parse_token(line, line_number, path)

        expected = len(tokens) + 1
        if token.id != expected:
            if token.id <= len(tokens):
                message = f"duplicate token id {token.id}"
            else:
                message = f"missing token id {expected}"
            raise ConlluError(message, line_number, path)

        tokens.append(token)
        token_lines.append(line_number)

    if not tokens:
        raise ConlluError("sentence without syntactic words",
                          lines[0][0], path)

    n = len(tokens)
    for line_number, token in zip(token_lines, tokens):
        if token.head is not None and token.head > n:
            raise ConlluError(f"head {token.head} out of range for a "
                              f"sentence of {n} words", line_number, path)

    return Sentence(tokens=tokens,
                    raw_lines=[line for _, line in lines],
                    blank_lines_after=blank_lines_after)


def parse_conllu(text: str, path: str = None) -> Treebank:
    sentences = []
    block = []
    blank_lines = 0

    lines = text.split("\n")

    # A trailing "\n" leaves one empty string that is not a blank line
    terminated = lines[-1] == ""
    if terminated:
        lines.pop()

    for line_number, line in enumerate(lines, start=1):
        if line == "":
            if not block:
                raise ConlluError("blank line before the first sentence",
                                  line_number, path)
            blank_lines += 1
            continue

        if block and blank_lines:
            sentences.append(parse_sentence(block, blank_lines, path))
            block = []
            blank_lines = 0

        block.append((line_number, line))

    if block:
        sentences.append(parse_sentence(block, blank_lines, path))

        if not terminated:
            # Mark an unterminated last line
            sentences[-1].blank_lines_after = -1

    return Treebank(sentences=sentences, source_path=path or "")


def read_conllu(path: str) -> Treebank:
    with open(path, "r", encoding="utf-8", newline="") as f:
        content = f.read()

    return parse_conllu(content, path)


def format_sentence(sentence: Sentence) -> str:
    words = iter(sentence.tokens)

    lines = []
    for line in sentence.raw_lines:
        token_id = line.split("\t", 1)[0]

        if WORD_ID.match(token_id):
            lines.append(next(words).to_line())
        else:
            lines.append(line)

    # Sentences built in memory carry no raw lines
    lines.extend(token.to_line() for token in words)

    if sentence.blank_lines_after < 0:
        return "\n".join(lines)

    return "\n".join(lines) + "\n" + "\n" * sentence.blank_lines_after


def format_treebank(treebank: Treebank) -> str:
    return "".join(format_sentence(s) for s in treebank.sentences)


def write_conllu(treebank: Treebank, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(format_treebank(treebank))


def check_tree(heads: List[Optional[int]]) -> None:
    """Raise StructureError unless heads (1-based modifiers) form a tree"""
    n = len(heads)

    for m, h in enumerate(heads, start=1):
        if h is None:
            raise StructureError(f"token {m} has no head")
        if not 0 <= h <= n:
            raise StructureError(f"head {h} of token {m} out of range")
        if h == m:
            raise StructureError(f"token {m} is its own head")

    # 0 = unvisited, 1 = on current path, 2 = reaches ROOT
    state = [0] * (n + 1)
    state[0] = 2

    for start in range(1, n + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]

        if state[node] == 1:
            raise StructureError(f"cycle through token {node}")

        for visited in path:
            state[visited] = 2


def arcs_cross(h1: int, m1: int, h2: int, m2: int) -> bool:
    lo, hi = min(h1, m1), max(h1, m1)

    inside = [lo < p < hi for p in (h2, m2)]
    outside = [p < lo or p > hi for p in (h2, m2)]

    return (inside[0] and outside[1]) or (inside[1] and outside[0])


def heads_are_projective(heads: List[int]) -> bool:
    check_tree(heads)

    arcs = [(h, m) for m, h in enumerate(heads, start=1)]

    return not any(
        arcs_cross(h1, m1, h2, m2)
        for (h1, m1), (h2, m2) in itertools.combinations(arcs, 2)
    )


def is_projective(sentence: Sentence) -> bool:
    return heads_are_projective(sentence.heads)


def nonprojective_rate(treebank: Treebank) -> float:
    checked = [s for s in treebank.sentences if s.has_heads()]

    if not checked:
        return 0.0

    return sum(not is_projective(s) for s in checked) / len(checked)


def split_treebank(treebank: Treebank,
                   ratio: float = 0.8) -> Tuple[Treebank, Treebank]:
    total = len(treebank.sentences)

    if total < 2:
        raise ConlluError(f"cannot split a treebank of {total} sentence(s)",
                          path=treebank.source_path)

    first = min(max(int(total * ratio), 1), total - 1)

    return (
        Treebank(treebank.sentences[:first], treebank.source_path),
        Treebank(treebank.sentences[first:], treebank.source_path)
    )


__all__ = ("Token", "Sentence", "Treebank", "ConlluError", "StructureError",
           "read_conllu", "parse_conllu", "write_conllu", "format_sentence",
           "format_treebank", "is_projective", "heads_are_projective", "arcs_cross",
           "check_tree", "nonprojective_rate", "split_treebank")
