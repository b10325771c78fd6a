"""
Background batch preparation.

BatchPrefetcher collates batches on one worker thread into a bounded queue;
the training thread consumes them in submission order. Worker exceptions are
re-raised in the consumer.
"""

import logging
import queue
import threading
from typing import Callable, Iterator, List, Sequence

logger = logging.getLogger("Prefetch")

_DONE = object()


class _Failure:
    def __init__(self, exc: BaseException):
        self.exc = exc


class BatchPrefetcher:
    def __init__(self, chunks: Sequence[List], build: Callable, maxsize: int = 2):
        self.chunks = list(chunks)
        self.build = build
        self.queue: "queue.Queue" = queue.Queue(maxsize=maxsize)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="batch-prefetch", daemon=True)

    def _put(self, item) -> bool:
        while not self._stop.is_set():
            try:
                self.queue.put(item, timeout=0.1)
                return True
            except queue.Full:
                continue
        return False

    def _run(self) -> None:
        try:
            for chunk in self.chunks:
                if not self._put(self.build(chunk)):
                    return
        except BaseException as exc:
            logger.exception("Batch preparation failed")
            self._put(_Failure(exc))
            return
        self._put(_DONE)

    def __iter__(self) -> Iterator:
        self._thread.start()
        try:
            while True:
                item = self.queue.get()
                if item is _DONE:
                    return
                if isinstance(item, _Failure):
                    raise item.exc
                yield item
        finally:
            self.close()

    def close(self) -> None:
        self._stop.set()
        if self._thread.is_alive():
            self._thread.join(timeout=5.0)
