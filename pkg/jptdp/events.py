import asyncio

from typing import Callable, List
from concurrent.futures import ThreadPoolExecutor

from .conllu import Sentence, Treebank, format_sentence
from .model import ModelParams, annotate

STOP_KEYWORD = "########STOP########"


class PredictionStats:

    def __init__(self):
        self.sentences = 0
        self.words = 0


async def on_prediction_save_conllu(output_file, sentence: Sentence):
    await output_file.write(format_sentence(sentence))


async def on_prediction_count_words(stats: PredictionStats,
                                    sentence: Sentence):
    stats.sentences += 1
    stats.words += len(sentence)


async def on_prediction_event(prediction_queue: asyncio.Queue,
                              consumers: List[Callable]):
    while True:

        sentence = await prediction_queue.get()

        if sentence == STOP_KEYWORD:
            return

        for c in consumers:
            await c(sentence)


async def predict_treebank(model: ModelParams,
                           treebank: Treebank,
                           concurrency: int = 1,
                           consumers: List[Callable] = None) -> Treebank:
    """Annotate every sentence; consumers see them in input order"""
    loop = asyncio.get_running_loop()
    sem = asyncio.Semaphore(concurrency)
    prediction_queue = asyncio.Queue()

    async def annotate_sentence(executor, sentence: Sentence) -> Sentence:
        async with sem:
            return await loop.run_in_executor(executor, annotate, model,
                                              sentence)

    consumer_task = asyncio.create_task(
        on_prediction_event(prediction_queue, consumers or [])
    )

    predicted = []

    with ThreadPoolExecutor(max_workers=concurrency) as executor:
        tasks = [
            asyncio.create_task(annotate_sentence(executor, sentence))
            for sentence in treebank.sentences
        ]

        try:
            #
            # Awaiting in input order keeps the output aligned with the input
            #
            for task in tasks:
                sentence = await task
                predicted.append(sentence)
                await prediction_queue.put(sentence)
        finally:
            for task in tasks:
                task.cancel()
            await prediction_queue.put(STOP_KEYWORD)

    await consumer_task

    return Treebank(sentences=predicted, source_path=treebank.source_path)


def annotate_treebank(model: ModelParams,
                      treebank: Treebank,
                      concurrency: int = 1) -> Treebank:
    return asyncio.run(predict_treebank(model, treebank, concurrency))


__all__ = ("STOP_KEYWORD", "PredictionStats", "on_prediction_event",
           "on_prediction_save_conllu", "on_prediction_count_words",
           "predict_treebank", "annotate_treebank")
