"""The joint tagging and parsing network.

Shared BiLSTM features v_0..v_n (v_0 for ROOT) feed a linear tagging head,
an arc-scoring MLP and a relation-scoring MLP.
"""
from dataclasses import dataclass, fields
from typing import Dict, List, Optional, Tuple

import numpy as np

from .autodiff import *
from .conllu import Sentence, check_tree, StructureError
from .eisner import ScoreMatrix, ParseTree, eisner_decode, loss_augment
from .layers import *
from .tagsets import ROOT_FORM
from .utils import JptdpError

ARC_LOSS_MODES = ("position", "global")


class DataError(JptdpError):
    pass


@dataclass
class Hyperparams:
    char_dim: int = 64
    word_dim: int = 128
    ctx_state_dim: int = 128
    ctx_layers: int = 2
    mlp_hidden: int = 100
    word_dropout_alpha: float = 0.25
    noise_sigma: float = 0.2
    margin: float = 1.0
    epochs: int = 30
    seed: int = 1
    use_chars: bool = True
    char_state_dim: int = 64
    single_root: bool = True
    arc_loss: str = "position"
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        for name in ("char_dim", "word_dim", "ctx_state_dim", "ctx_layers",
                     "mlp_hidden", "epochs", "char_state_dim"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"hyperparameter '{name}' must be "
                                         f"positive, got {getattr(self, name)}")

        for name in ("word_dropout_alpha", "noise_sigma", "margin"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"hyperparameter '{name}' must not "
                                         f"be negative")

        if self.seed < 0:
            raise ConfigurationError(f"seed must not be negative, "
                                     f"got {self.seed}")

        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ConfigurationError("learning rate and epsilon must be "
                                     "positive")

        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("Adam betas must lie in [0, 1)")

        if self.arc_loss not in ARC_LOSS_MODES:
            raise ConfigurationError(f"unknown arc loss '{self.arc_loss}', "
                                     f"expected one of "
                                     f"{', '.join(ARC_LOSS_MODES)}")

    @classmethod
    def from_dict(cls, values: Dict) -> "Hyperparams":
        known = {f.name for f in fields(cls)}

        if unknown := set(values) - known:
            raise ConfigurationError(f"unknown hyperparameters: "
                                     f"{', '.join(sorted(unknown))}")

        return cls(**values)

    @property
    def input_dim(self) -> int:
        if self.use_chars:
            return self.word_dim + 2 * self.char_state_dim
        return self.word_dim

    @property
    def feature_dim(self) -> int:
        return 2 * self.ctx_state_dim


@dataclass
class ModelParams:
    vocab: Vocab
    hyper: Hyperparams
    word_table: EmbeddingTable
    ctx_bilstm: List[Tuple[LSTMParams, LSTMParams]]
    tag_projection: LinearParams
    mlp_arc: MLPParams
    mlp_rel: MLPParams
    char_table: Optional[EmbeddingTable] = None
    char_bilstm: Optional[Tuple[LSTMParams, LSTMParams]] = None

    @classmethod
    def create(cls, vocab: Vocab, hyper: Hyperparams,
               rng: np.random.Generator = None) -> "ModelParams":
        """Randomly initialized parameters; all zeros without an RNG"""
        word_table = EmbeddingTable.create("word_table",
                                           len(vocab.word_to_id),
                                           hyper.word_dim, rng)

        char_table = char_bilstm = None
        if hyper.use_chars:
            char_table = EmbeddingTable.create("char_table",
                                               len(vocab.char_to_id),
                                               hyper.char_dim, rng)
            char_bilstm = (
                LSTMParams.create("char_bilstm.fwd", hyper.char_dim,
                                  hyper.char_state_dim, rng),
                LSTMParams.create("char_bilstm.bwd", hyper.char_dim,
                                  hyper.char_state_dim, rng)
            )

        ctx_bilstm = []
        input_dim = hyper.input_dim
        for layer in range(hyper.ctx_layers):
            ctx_bilstm.append((
                LSTMParams.create(f"ctx_bilstm.{layer}.fwd", input_dim,
                                  hyper.ctx_state_dim, rng),
                LSTMParams.create(f"ctx_bilstm.{layer}.bwd", input_dim,
                                  hyper.ctx_state_dim, rng)
            ))
            input_dim = hyper.feature_dim

        pair_dim = 2 * hyper.feature_dim

        return cls(
            vocab=vocab,
            hyper=hyper,
            word_table=word_table,
            char_table=char_table,
            char_bilstm=char_bilstm,
            ctx_bilstm=ctx_bilstm,
            tag_projection=LinearParams.create("tag_projection",
                                               hyper.feature_dim,
                                               len(vocab.tag_to_id), rng),
            mlp_arc=MLPParams.create("mlp_arc", pair_dim, hyper.mlp_hidden,
                                     1, rng),
            mlp_rel=MLPParams.create("mlp_rel", pair_dim, hyper.mlp_hidden,
                                     len(vocab.rel_to_id), rng)
        )

    def parameters(self) -> List[Parameter]:
        params = self.word_table.parameters()

        if self.char_table is not None:
            params += self.char_table.parameters()
            for lstm in self.char_bilstm:
                params += lstm.parameters()

        for fwd, bwd in self.ctx_bilstm:
            params += fwd.parameters() + bwd.parameters()

        params += self.tag_projection.parameters()
        params += self.mlp_arc.parameters()
        params += self.mlp_rel.parameters()

        return params

    def tensors(self) -> Dict[str, np.ndarray]:
        return named_values(self.parameters())

    def load_tensors(self, tensors: Dict[str, np.ndarray]) -> None:
        params = {p.name: p for p in self.parameters()}

        if missing := set(params) - set(tensors):
            raise DataError(f"missing tensors: {', '.join(sorted(missing))}")
        if unknown := set(tensors) - set(params):
            raise DataError(f"unexpected tensors: "
                            f"{', '.join(sorted(unknown))}")

        for name, value in tensors.items():
            params[name].assign(value)


@dataclass
class JointPrediction:
    tags: List[int]
    tree: ParseTree


def gold_tags(model: ModelParams, sentence: Sentence) -> List[int]:
    tags = []
    for token in sentence.tokens:
        if token.upos not in model.vocab.tag_to_id:
            raise DataError(f"unknown POS tag '{token.upos}' "
                            f"on token {token.id}")
        tags.append(model.vocab.tag_to_id[token.upos])
    return tags


def gold_tree(model: ModelParams, sentence: Sentence) -> ParseTree:
    try:
        check_tree(sentence.heads)
    except StructureError as e:
        raise DataError(f"gold heads are not a tree: {e}")

    labels = []
    for token in sentence.tokens:
        if token.deprel not in model.vocab.rel_to_id:
            raise DataError(f"unknown relation '{token.deprel}' "
                            f"on token {token.id}")
        labels.append(model.vocab.rel_to_id[token.deprel])

    return ParseTree(heads=list(sentence.heads), labels=labels)


def encode(model: ModelParams,
           sentence: Sentence,
           training: bool = False,
           rng: np.random.Generator = None) -> List[Node]:
    if not sentence.tokens:
        raise DataError("cannot encode an empty sentence")
    if training and rng is None:
        raise ConfigurationError("training mode needs a random generator")

    hyper = model.hyper
    char_vectors = {}

    def char_vector(form: str) -> Node:
        if form not in char_vectors:
            chars = [model.char_table.lookup(model.vocab.char_id(c))
                     for c in form] or \
                    [model.char_table.lookup(UNK_CHAR)]
            char_vectors[form] = bilstm_final(*model.char_bilstm, chars)
        return char_vectors[form]

    inputs = []

    # ROOT first, then the words
    words = [(model.word_table.lookup(ROOT_WORD), ROOT_FORM)]
    for token in sentence.tokens:
        words.append((
            word_dropout_lookup(model.word_table, model.vocab, token.form,
                                training, hyper.word_dropout_alpha, rng),
            token.form
        ))

    for word, form in words:
        if hyper.use_chars:
            e = concat(word, char_vector(form))
        else:
            e = word
        inputs.append(gaussian_noise(e, hyper.noise_sigma, training, rng))

    return bilstm_transduce(model.ctx_bilstm, inputs)


def tag_logits(model: ModelParams, v: Node) -> Node:
    return linear_apply(model.tag_projection, v)


def tagging_loss(model: ModelParams, v: List[Node],
                 gold: List[int]) -> Node:
    if len(v) != len(gold) + 1:
        raise DataError(f"{len(gold)} gold tags for {len(v) - 1} tokens")

    losses = []
    for features, tag in zip(v[1:], gold):
        if not 0 <= tag < len(model.vocab.tag_to_id):
            raise DataError(f"unknown tag id {tag}")
        losses.append(neg_log_softmax(tag_logits(model, features), tag))

    return esum(losses)


def score_all_arcs(model: ModelParams, v: List[Node]) -> ScoreMatrix:
    """Arc MLP output on concat(v[h], v[m]) for every (h, m), batched.

    W1 splits into the columns reading v_h and the columns reading v_m,
    so the hidden layer of every pair is a sum of two projected rows.
    """
    mlp = model.mlp_arc
    d = model.hyper.feature_dim
    size = len(v)

    V = stack(v)
    heads = linear_rows(V, columns(mlp.W1.node, 0, d))
    modifiers = linear_rows(V, columns(mlp.W1.node, d, 2 * d))

    hidden = tanh(add(pairwise_sum(heads, modifiers), mlp.b1.node))
    scores = add(linear_rows(hidden, mlp.W2.node), mlp.b2.node)
    scores = reshape(scores, (size, size))

    return ScoreMatrix(scores=scores.value, node=scores)


def arc_loss(model: ModelParams, scores: ScoreMatrix,
             gold: ParseTree) -> Node:
    hyper = model.hyper

    augmented = loss_augment(scores, gold, hyper.margin)
    predicted = eisner_decode(augmented, single_root=hyper.single_root)

    violations = []
    for m, (p, g) in enumerate(zip(predicted.heads, gold.heads), start=1):
        if p != g:
            # Loss-augmented difference: wrong arc + margin - gold arc
            violations.append(add(
                sub(pick_cell(scores.node, p, m), pick_cell(scores.node, g, m)),
                constant([hyper.margin])
            ))

    if not violations:
        return zeros(1)

    loss = esum(violations)

    if hyper.arc_loss == "global":
        loss = maximum(loss, 0.0)

    return loss


def rel_loss(model: ModelParams, v: List[Node], gold: ParseTree) -> Node:
    if gold.labels is None:
        raise DataError("relation loss needs a labeled gold tree")

    margin = model.hyper.margin
    relations = len(model.vocab.rel_to_id)

    losses = []
    for (h, m), label in zip(gold.arcs(), gold.labels):
        if not 0 <= label < relations:
            raise DataError(f"unknown relation id {label}")

        if relations < 2:
            continue

        u = mlp_apply(model.mlp_rel, concat(v[h], v[m]))

        others = u.value.copy()
        others[label] = -np.inf
        wrong = int(np.argmax(others))

        losses.append(maximum(
            add(sub(pick(u, wrong), pick(u, label)), constant([margin])),
            0.0
        ))

    return esum(losses)


def loss_components(model: ModelParams,
                    sentence: Sentence,
                    training: bool = True,
                    rng: np.random.Generator = None) -> Tuple[Node, Node, Node]:
    """Tagging, arc and relation losses over one shared encoding"""
    tags = gold_tags(model, sentence)
    tree = gold_tree(model, sentence)

    v = encode(model, sentence, training, rng)

    return (
        tagging_loss(model, v, tags),
        arc_loss(model, score_all_arcs(model, v), tree),
        rel_loss(model, v, tree)
    )


def joint_loss(model: ModelParams,
               sentence: Sentence,
               training: bool = True,
               rng: np.random.Generator = None) -> Node:
    return esum(loss_components(model, sentence, training, rng))


def predict(model: ModelParams, sentence: Sentence) -> JointPrediction:
    v = encode(model, sentence, training=False)

    tags = [int(np.argmax(tag_logits(model, features).value))
            for features in v[1:]]

    tree = eisner_decode(score_all_arcs(model, v),
                         single_root=model.hyper.single_root)

    tree.labels = [
        int(np.argmax(mlp_apply(model.mlp_rel, concat(v[h], v[m])).value))
        for h, m in tree.arcs()
    ]

    return JointPrediction(tags=tags, tree=tree)


def annotate(model: ModelParams, sentence: Sentence) -> Sentence:
    prediction = predict(model, sentence)

    tags = model.vocab.tags
    rels = model.vocab.rels

    return sentence.with_predictions(
        upos=[tags[t] for t in prediction.tags],
        heads=prediction.tree.heads,
        deprels=[rels[r] for r in prediction.tree.labels]
    )


__all__ = ("Hyperparams", "ModelParams", "JointPrediction", "DataError",
           "ARC_LOSS_MODES", "gold_tags", "gold_tree", "encode",
           "tag_logits", "tagging_loss", "score_all_arcs", "arc_loss",
           "rel_loss", "loss_components", "joint_loss", "predict",
           "annotate")
