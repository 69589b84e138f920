"""Per-sentence training with dev-set model selection, and checkpoint files.

Checkpoint layout (little-endian throughout)::

    magic "JPTDPCKP" | u32 format_version
    str hyperparameters (JSON)
    4 x (u32 count, count x str)   words, chars, tags, rels ordered by id
    u32 count, count x u32          word frequencies, aligned with words
    f64 best_dev_mixed | i32 epoch_of_best
    u32 tensors, tensors x (str name, u8 dtype, u8 rank, rank x u32, data)
    64 bytes sha512 of everything before

``str`` is a u32 byte length followed by UTF-8 bytes.
"""
import json
import time
import struct
import hashlib
import dataclasses

from typing import Dict, List, Optional, Tuple
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (backward, adam_update, clear_gradients, set_precision,
                       NumericalError)
from .conllu import Treebank, read_conllu, split_treebank
from .evaluation import Metrics, evaluate
from .events import annotate_treebank
from .layers import Vocab, ConfigurationError, build_vocab
from .model import Hyperparams, ModelParams, joint_loss
from .tagsets import UNIVERSAL_POS_TAGS
from .utils import *

MAGIC = b"JPTDPCKP"
FORMAT_VERSION = 1

_DTYPES = {
    0: np.dtype("<f8"),
    1: np.dtype("<f4")
}
_DTYPE_CODES = {dtype: code for code, dtype in _DTYPES.items()}


class TrainingError(JptdpError):
    pass


class IntegrityError(JptdpError):
    pass


class IncompatibleCheckpointError(JptdpError):
    pass


@dataclass
class TrainConfig:
    train_path: str
    model_out_path: str
    dev_path: Optional[str] = None
    hyper: Hyperparams = field(default_factory=Hyperparams)
    shuffle: bool = True
    concurrency: int = 1
    quiet: bool = False


@dataclass
class Checkpoint:
    hyper: Hyperparams
    vocab: Vocab
    tensors: Dict[str, np.ndarray]
    best_dev_mixed: float = 0.0
    epoch_of_best: int = 0
    format_version: int = FORMAT_VERSION

    def precision(self) -> str:
        """Float precision the tensors were stored with"""
        if self.tensors and all(t.dtype.itemsize == 4
                                for t in self.tensors.values()):
            return "float32"
        return "float64"

    def model(self) -> ModelParams:
        # Precision is process-wide: restore it before building any node
        set_precision(self.precision())

        model = ModelParams.create(self.vocab, self.hyper)
        model.load_tensors(self.tensors)
        return model


def _pack_str(value: str) -> bytes:
    data = value.encode("utf-8")
    return struct.pack("<I", len(data)) + data


def _pack_strings(values: List[str]) -> bytes:
    return struct.pack("<I", len(values)) + \
        b"".join(_pack_str(v) for v in values)


def serialize(checkpoint: Checkpoint, path: str) -> None:
    vocab = checkpoint.vocab
    words = vocab.words

    parts = [
        MAGIC,
        struct.pack("<I", checkpoint.format_version),
        _pack_str(json.dumps(dataclasses.asdict(checkpoint.hyper),
                             sort_keys=True)),
        _pack_strings(words),
        _pack_strings(vocab.chars),
        _pack_strings(vocab.tags),
        _pack_strings(vocab.rels),
        struct.pack("<I", len(words)),
        struct.pack(f"<{len(words)}I", *(vocab.word_freq.get(w, 0)
                                         for w in words)),
        struct.pack("<di", checkpoint.best_dev_mixed,
                    checkpoint.epoch_of_best),
        struct.pack("<I", len(checkpoint.tensors))
    ]

    for name in sorted(checkpoint.tensors):
        tensor = np.asarray(checkpoint.tensors[name])
        dtype = tensor.dtype.newbyteorder("<")

        if dtype not in _DTYPE_CODES:
            raise ConfigurationError(f"cannot store tensor '{name}' "
                                     f"of type {tensor.dtype}")

        parts.append(_pack_str(name))
        parts.append(struct.pack("<BB", _DTYPE_CODES[dtype], tensor.ndim))
        parts.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        parts.append(tensor.astype(dtype).tobytes())

    content = b"".join(parts)

    with open(path, "wb") as f:
        f.write(content)
        f.write(hashlib.sha512(content).digest())


class _Reader:

    def __init__(self, data: bytes, path: str):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise IntegrityError(f"checkpoint '{self.path}' is truncated")

        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        size, = self.unpack("I")
        try:
            return self.take(size).decode("utf-8")
        except UnicodeDecodeError:
            raise IntegrityError(f"checkpoint '{self.path}' holds invalid "
                                 f"UTF-8")

    def strings(self) -> List[str]:
        count, = self.unpack("I")
        return [self.string() for _ in range(count)]


def deserialize(path: str) -> Checkpoint:
    with open(path, "rb") as f:
        data = f.read()

    digest_size = hashlib.sha512().digest_size

    if len(data) < len(MAGIC) + 4 + digest_size \
            or not data.startswith(MAGIC):
        raise IntegrityError(f"'{path}' is not a checkpoint or is truncated")

    content, digest = data[:-digest_size], data[-digest_size:]
    if hashlib.sha512(content).digest() != digest:
        raise IntegrityError(f"checkpoint '{path}' is corrupted "
                             f"(checksum mismatch)")

    reader = _Reader(content, path)
    reader.take(len(MAGIC))

    version, = reader.unpack("I")
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpointError(
            f"checkpoint '{path}' has format version {version}, this "
            f"version of jptdp reads version {FORMAT_VERSION}")

    hyper = Hyperparams.from_dict(json.loads(reader.string()))

    words = reader.strings()
    chars = reader.strings()
    tags = reader.strings()
    rels = reader.strings()

    count, = reader.unpack("I")
    if count != len(words):
        raise IntegrityError(f"checkpoint '{path}': {count} frequencies "
                             f"for {len(words)} words")
    freqs = reader.unpack(f"{count}I")

    vocab = Vocab(
        word_to_id={w: i for i, w in enumerate(words)},
        char_to_id={c: i for i, c in enumerate(chars)},
        tag_to_id={t: i for i, t in enumerate(tags)},
        rel_to_id={r: i for i, r in enumerate(rels)},
        word_freq={w: f for w, f in zip(words, freqs) if f > 0}
    )

    best_dev_mixed, epoch_of_best = reader.unpack("di")

    tensors = {}
    count, = reader.unpack("I")
    for _ in range(count):
        name = reader.string()
        code, rank = reader.unpack("BB")

        if code not in _DTYPES:
            raise IntegrityError(f"checkpoint '{path}': unknown dtype code "
                                 f"{code} for tensor '{name}'")

        shape = reader.unpack(f"{rank}I")
        dtype = _DTYPES[code]
        size = int(np.prod(shape)) * dtype.itemsize

        tensors[name] = np.frombuffer(reader.take(size),
                                      dtype=dtype).reshape(shape).copy()

    if reader.offset != len(content):
        raise IntegrityError(f"checkpoint '{path}' has trailing data")

    return Checkpoint(hyper=hyper,
                      vocab=vocab,
                      tensors=tensors,
                      best_dev_mixed=best_dev_mixed,
                      epoch_of_best=epoch_of_best,
                      format_version=version)


def load_model(path: str) -> ModelParams:
    return deserialize(path).model()


def load_treebanks(config: TrainConfig) -> Tuple[Treebank, Treebank]:
    train_set = read_conllu(config.train_path)

    if not train_set.sentences:
        raise ConfigurationError(f"training treebank '{config.train_path}' "
                                 f"is empty")

    if config.dev_path:
        dev_set = read_conllu(config.dev_path)
    else:
        report(PW, "No development set given: splitting the training set "
                   "4:1", config.quiet)
        train_set, dev_set = split_treebank(train_set)

    if not dev_set.sentences:
        raise ConfigurationError("development treebank is empty")

    return train_set, dev_set


def evaluate_model(model: ModelParams,
                   treebank: Treebank,
                   concurrency: int = 1) -> Metrics:
    """Inference-mode evaluation: no parameter or RNG state is touched"""
    return evaluate(treebank, annotate_treebank(model, treebank, concurrency))


def train_epoch(model: ModelParams,
                treebank: Treebank,
                rng: np.random.Generator,
                epoch: int,
                shuffle: bool = True) -> float:
    hyper = model.hyper
    params = model.parameters()

    order = np.arange(len(treebank.sentences))
    if shuffle:
        order = rng.permutation(order)

    total_loss = 0.0

    for index in order:
        sentence = treebank.sentences[index]

        loss = joint_loss(model, sentence, training=True, rng=rng)
        value = loss.scalar()

        if not np.isfinite(value):
            raise TrainingError(f"non-finite loss at epoch {epoch}, "
                                f"sentence {index}")

        backward(loss)

        try:
            adam_update(params, hyper.learning_rate, hyper.beta1,
                        hyper.beta2, hyper.epsilon)
        except NumericalError as e:
            clear_gradients(params)
            raise TrainingError(f"epoch {epoch}, sentence {index}: {e}")

        total_loss += value

    return total_loss / len(order)


def train(config: TrainConfig) -> Checkpoint:
    hyper = config.hyper
    quiet = config.quiet

    train_set, dev_set = load_treebanks(config)

    vocab = build_vocab(train_set)
    rng = np.random.default_rng(hyper.seed)
    model = ModelParams.create(vocab, hyper, rng)

    report(PT, f"{len(train_set)} training sentences "
               f"({train_set.token_count} tokens), {len(dev_set)} "
               f"development sentences; {len(vocab.word_to_id)} words, "
               f"{len(vocab.tag_to_id)} tags, {len(vocab.rel_to_id)} "
               f"relations", quiet)

    if unknown := set(vocab.tag_to_id) - UNIVERSAL_POS_TAGS:
        report(PW, f"Tags outside the universal POS set: "
                   f"{', '.join(sorted(unknown))}", quiet)

    best_mixed = -1.0
    best_epoch = 0
    best_tensors = None

    for epoch in range(1, hyper.epochs + 1):
        started = time.perf_counter()

        loss = train_epoch(model, train_set, rng, epoch, config.shuffle)
        metrics = evaluate_model(model, dev_set, config.concurrency)

        print(f"epoch {epoch} loss={loss:.4f} upos={metrics.upos_acc:.4f} "
              f"uas={metrics.uas:.4f} las={metrics.las:.4f} "
              f"mixed={metrics.mixed:.4f}", flush=True)

        # Ties keep the earlier epoch
        if metrics.mixed > best_mixed:
            best_mixed = metrics.mixed
            best_epoch = epoch
            best_tensors = model.tensors()
            report(PB, f"New best development mixed accuracy "
                       f"{best_mixed:.4f} at epoch {epoch}", quiet)

        report(PE, f"Epoch {epoch} took "
                   f"{time.perf_counter() - started:.1f}s", quiet)

    checkpoint = Checkpoint(hyper=hyper,
                            vocab=vocab,
                            tensors=best_tensors,
                            best_dev_mixed=best_mixed,
                            epoch_of_best=best_epoch)

    serialize(checkpoint, config.model_out_path)

    print(f"best epoch {best_epoch} mixed={best_mixed:.4f}", flush=True)
    report(PT, f"Model saved to '{config.model_out_path}'", quiet)

    return checkpoint


__all__ = ("TrainConfig", "Checkpoint", "TrainingError", "IntegrityError",
           "IncompatibleCheckpointError", "FORMAT_VERSION", "serialize",
           "deserialize", "load_model", "load_treebanks", "evaluate_model",
           "train_epoch", "train")
