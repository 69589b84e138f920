import asyncio

from functools import partial

from jptdp import *
from jptdp.events import *


class Collector:

    def __init__(self):
        self.chunks = []

    async def write(self, text):
        self.chunks.append(text)


def test_output_keeps_input_order(model, treebank):
    sentences = treebank.sentences * 4
    stats = PredictionStats()
    collector = Collector()

    predicted = asyncio.run(predict_treebank(
        model,
        Treebank(sentences),
        concurrency=3,
        consumers=[partial(on_prediction_save_conllu, collector),
                   partial(on_prediction_count_words, stats)]
    ))

    assert [s.forms for s in predicted] == [s.forms for s in sentences]
    assert stats.sentences == 8
    assert stats.words == 28
    assert len(collector.chunks) == 8
    assert collector.chunks[0].startswith("# sent_id = 1\n")


def test_concurrency_does_not_change_predictions(model, treebank):
    serial = annotate_treebank(model, treebank, concurrency=1)
    parallel = annotate_treebank(model, treebank, concurrency=4)

    assert format_treebank(serial) == format_treebank(parallel)


def test_stop_keyword_ends_the_consumer():
    seen = []

    async def consumer(sentence):
        seen.append(sentence)

    async def run():
        queue = asyncio.Queue()
        await queue.put("first")
        await queue.put(STOP_KEYWORD)
        await queue.put("never")
        await on_prediction_event(queue, [consumer])

    asyncio.run(run())

    assert seen == ["first"]
