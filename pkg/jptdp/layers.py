"""Embedding tables with word dropout, LSTMs, BiLSTMs and one-hidden-layer MLPs"""
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .autodiff import *
from .conllu import Treebank
from .tagsets import ROOT_FORM, UNK_WORD_FORM, ROOT_WORD_FORM, UNK_CHAR_FORM
from .utils import JptdpError

UNK_WORD = 0
ROOT_WORD = 1
UNK_CHAR = 0


class ConfigurationError(JptdpError):
    pass


@dataclass
class Vocab:
    word_to_id: Dict[str, int]
    char_to_id: Dict[str, int]
    tag_to_id: Dict[str, int]
    rel_to_id: Dict[str, int]
    word_freq: Dict[str, int] = field(default_factory=dict)

    @property
    def words(self) -> List[str]:
        return sorted(self.word_to_id, key=self.word_to_id.get)

    @property
    def chars(self) -> List[str]:
        return sorted(self.char_to_id, key=self.char_to_id.get)

    @property
    def tags(self) -> List[str]:
        return sorted(self.tag_to_id, key=self.tag_to_id.get)

    @property
    def rels(self) -> List[str]:
        return sorted(self.rel_to_id, key=self.rel_to_id.get)

    def word_id(self, word: str) -> int:
        return self.word_to_id.get(normalize_word(word), UNK_WORD)

    def char_id(self, char: str) -> int:
        return self.char_to_id.get(char, UNK_CHAR)

    def frequency(self, word: str) -> int:
        return self.word_freq.get(normalize_word(word), 0)


def normalize_word(form: str) -> str:
    # Word vocabulary is lowercased, characters keep their case
    return form.lower()


def _index(items) -> Dict[str, int]:
    index = {}
    for item in items:
        index.setdefault(item, len(index))
    return index


def build_vocab(treebank: Treebank) -> Vocab:
    tokens = [t for s in treebank.sentences for t in s.tokens]

    if not tokens:
        raise ConfigurationError(f"cannot build a vocabulary from the empty "
                                 f"treebank '{treebank.source_path}'")

    word_freq = Counter(normalize_word(t.form) for t in tokens)

    words = [UNK_WORD_FORM, ROOT_WORD_FORM]
    words.extend(w for w in word_freq if w not in words)

    chars = [UNK_CHAR_FORM]
    chars.extend(ROOT_FORM)
    for t in tokens:
        chars.extend(t.form)

    return Vocab(
        word_to_id=_index(words),
        char_to_id=_index(chars),
        tag_to_id=_index(t.upos for t in tokens),
        rel_to_id=_index(t.deprel for t in tokens),
        word_freq=dict(word_freq)
    )


def glorot_uniform(rng: Optional[np.random.Generator], shape) -> np.ndarray:
    """Uniform in ±√(6 / (fan_in + fan_out)); zeros without an RNG"""
    if rng is None:
        return np.zeros(shape, dtype=float_type())

    fan_out, fan_in = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))

    return rng.uniform(-bound, bound, size=shape).astype(float_type())


@dataclass
class EmbeddingTable:
    matrix: Parameter

    @classmethod
    def create(cls, name: str, size: int, dim: int,
               rng: np.random.Generator = None) -> "EmbeddingTable":
        if rng is None:
            rows = np.zeros((size, dim), dtype=float_type())
        else:
            # Every row is initialized as its own 1 x dim matrix
            bound = np.sqrt(6.0 / (1 + dim))
            rows = rng.uniform(-bound, bound,
                               size=(size, dim)).astype(float_type())

        return cls(Parameter(name, rows, sparse=True))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def lookup(self, index: int) -> Node:
        return pick_row(self.matrix.node, index)

    def parameters(self) -> List[Parameter]:
        return [self.matrix]


def word_dropout_lookup(table: EmbeddingTable,
                        vocab: Vocab,
                        word: str,
                        training: bool,
                        alpha: float,
                        rng: np.random.Generator = None) -> Node:
    if alpha < 0:
        raise ConfigurationError(f"negative word dropout alpha {alpha}")

    index = vocab.word_id(word)

    if training and index != UNK_WORD and alpha > 0:
        freq = vocab.frequency(word)
        if rng.random() < alpha / (alpha + freq):
            index = UNK_WORD

    return table.lookup(index)


@dataclass
class LSTMParams:
    """Gate rows are stacked as input, forget, output, candidate"""
    input_weights: Parameter
    recurrent_weights: Parameter
    bias: Parameter
    hidden_dim: int

    @classmethod
    def create(cls, name: str, input_dim: int, hidden_dim: int,
               rng: np.random.Generator = None) -> "LSTMParams":
        gates = 4 * hidden_dim

        return cls(
            input_weights=Parameter(f"{name}.input_weights",
                                    glorot_uniform(rng, (gates, input_dim))),
            recurrent_weights=Parameter(f"{name}.recurrent_weights",
                                        glorot_uniform(rng,
                                                       (gates, hidden_dim))),
            bias=Parameter(f"{name}.bias",
                           np.zeros(gates, dtype=float_type())),
            hidden_dim=hidden_dim
        )

    @property
    def input_dim(self) -> int:
        return self.input_weights.shape[1]

    def parameters(self) -> List[Parameter]:
        return [self.input_weights, self.recurrent_weights, self.bias]


def _lstm_cell(params: LSTMParams, projected_x: Node,
               h_prev: Node, c_prev: Node) -> Tuple[Node, Node]:
    hd = params.hidden_dim

    if h_prev.shape != (hd,) or c_prev.shape != (hd,):
        raise DimensionError("lstm_step", h_prev.shape, c_prev.shape, (hd,))

    z = add(add(projected_x, matvec(params.recurrent_weights.node, h_prev)),
            params.bias.node)

    i = logistic(slice_vector(z, 0, hd))
    f = logistic(slice_vector(z, hd, 2 * hd))
    o = logistic(slice_vector(z, 2 * hd, 3 * hd))
    g = tanh(slice_vector(z, 3 * hd, 4 * hd))

    c = add(elementwise_mul(f, c_prev), elementwise_mul(i, g))
    h = elementwise_mul(o, tanh(c))

    return h, c


def lstm_step(params: LSTMParams, x: Node,
              h_prev: Node, c_prev: Node) -> Tuple[Node, Node]:
    return _lstm_cell(params, matvec(params.input_weights.node, x),
                      h_prev, c_prev)


def _run_lstm(params: LSTMParams, inputs: Sequence[Node],
              reverse: bool = False) -> List[Node]:
    # Input projections of all positions in one product
    projected = linear_rows(stack(inputs), params.input_weights.node)

    h = zeros(params.hidden_dim)
    c = zeros(params.hidden_dim)

    positions = range(len(inputs))
    if reverse:
        positions = reversed(positions)

    states = [None] * len(inputs)
    for t in positions:
        h, c = _lstm_cell(params, pick_row(projected, t), h, c)
        states[t] = h

    return states


def bilstm_transduce(layers: Sequence[Tuple[LSTMParams, LSTMParams]],
                     inputs: Sequence[Node]) -> List[Node]:
    if not inputs:
        raise ContractError("bilstm_transduce: empty input sequence")

    sequence = list(inputs)

    for fwd, bwd in layers:
        forward_states = _run_lstm(fwd, sequence)
        backward_states = _run_lstm(bwd, sequence, reverse=True)

        sequence = [concat(hf, hb)
                    for hf, hb in zip(forward_states, backward_states)]

    return sequence


def bilstm_final(fwd: LSTMParams, bwd: LSTMParams,
                 inputs: Sequence[Node]) -> Node:
    if not inputs:
        raise ContractError("bilstm_final: empty input sequence")

    forward_states = _run_lstm(fwd, inputs)
    backward_states = _run_lstm(bwd, inputs, reverse=True)

    # The backward direction ends at the first position
    return concat(forward_states[-1], backward_states[0])


@dataclass
class MLPParams:
    W1: Parameter
    b1: Parameter
    W2: Parameter
    b2: Parameter

    @classmethod
    def create(cls, name: str, in_dim: int, hidden: int, out_dim: int,
               rng: np.random.Generator = None) -> "MLPParams":
        return cls(
            W1=Parameter(f"{name}.W1", glorot_uniform(rng, (hidden, in_dim))),
            b1=Parameter(f"{name}.b1", np.zeros(hidden, dtype=float_type())),
            W2=Parameter(f"{name}.W2", glorot_uniform(rng, (out_dim, hidden))),
            b2=Parameter(f"{name}.b2", np.zeros(out_dim, dtype=float_type()))
        )

    @property
    def in_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[0]

    def parameters(self) -> List[Parameter]:
        return [self.W1, self.b1, self.W2, self.b2]


def mlp_apply(params: MLPParams, x: Node) -> Node:
    hidden = tanh(add(matvec(params.W1.node, x), params.b1.node))

    return add(matvec(params.W2.node, hidden), params.b2.node)


@dataclass
class LinearParams:
    W: Parameter
    b: Parameter

    @classmethod
    def create(cls, name: str, in_dim: int, out_dim: int,
               rng: np.random.Generator = None) -> "LinearParams":
        return cls(
            W=Parameter(f"{name}.W", glorot_uniform(rng, (out_dim, in_dim))),
            b=Parameter(f"{name}.b", np.zeros(out_dim, dtype=float_type()))
        )

    def parameters(self) -> List[Parameter]:
        return [self.W, self.b]


def linear_apply(params: LinearParams, x: Node) -> Node:
    return add(matvec(params.W.node, x), params.b.node)


__all__ = ("Vocab", "EmbeddingTable", "LSTMParams", "MLPParams",
           "LinearParams", "ConfigurationError", "UNK_WORD", "ROOT_WORD",
           "UNK_CHAR", "normalize_word", "build_vocab", "glorot_uniform",
           "word_dropout_lookup", "lstm_step", "bilstm_transduce",
           "bilstm_final", "mlp_apply", "linear_apply")
