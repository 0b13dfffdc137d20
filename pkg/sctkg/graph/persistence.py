"""Durability for the graph store: an append-only journal of committed batches.

File format: a sequence of records, each a 4-byte big-endian unsigned length followed by that many
bytes of UTF-8 JSON ``{"batch_id": str, "deltas": [...]}``. Deltas carry their operation name
under the serde key. A truncated trailing record (a crash mid-write) is ignored on replay.
"""
import abc
import json
import logging
import os
import pathlib
import struct
import threading
from typing import TYPE_CHECKING, Iterator, List, Sequence, Tuple, Union

from sctkg.core import serde

if TYPE_CHECKING:
    from sctkg.graph.records import GraphDelta

logger = logging.getLogger(__name__)

_LENGTH = struct.Struct(">I")


class BaseGraphJournal(abc.ABC):
    """Basic interface for batch durability. ``append`` is called while the store holds its lock,
    after a batch has been applied in memory and before it is released; raising from it rolls the
    batch back."""

    @abc.abstractmethod
    def append(self, batch_id: str, deltas: Sequence["GraphDelta"]):
        """Durably records one committed batch."""
        pass

    @abc.abstractmethod
    def replay(self) -> Iterator[Tuple[str, List["GraphDelta"]]]:
        """Yields ``(batch_id, deltas)`` for every recorded batch, in commit order."""
        pass

    def close(self):
        pass


class DevNullJournal(BaseGraphJournal):
    """In-memory mode: records nothing."""

    def append(self, batch_id: str, deltas: Sequence["GraphDelta"]):
        return

    def replay(self) -> Iterator[Tuple[str, List["GraphDelta"]]]:
        return iter(())


class FileJournal(BaseGraphJournal):
    """Length-prefixed JSON records in one append-only file."""

    def __init__(self, path: Union[str, os.PathLike], fsync: bool = False):
        """
        :param path: Journal file, created if absent
        :param fsync: Whether to fsync after every batch
        """
        self.path = pathlib.Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.fsync = fsync
        self._lock = threading.Lock()
        self._handle = None

    def _open(self):
        if self._handle is None:
            self._handle = open(self.path, "ab")
        return self._handle

    @staticmethod
    def encode(batch_id: str, deltas: Sequence["GraphDelta"]) -> bytes:
        payload = json.dumps(
            {"batch_id": batch_id, "deltas": [delta.serialize() for delta in deltas]},
            ensure_ascii=False,
            separators=(",", ":"),
        ).encode("utf-8")
        return _LENGTH.pack(len(payload)) + payload

    def append(self, batch_id: str, deltas: Sequence["GraphDelta"]):
        record = self.encode(batch_id, deltas)
        with self._lock:
            handle = self._open()
            offset = handle.tell()
            try:
                handle.write(record)
                handle.flush()
                if self.fsync:
                    os.fsync(handle.fileno())
            except OSError:
                # a partial record would hide every later batch from replay
                handle.truncate(offset)
                raise

    def replay(self) -> Iterator[Tuple[str, List["GraphDelta"]]]:
        if not self.path.exists():
            return
        with open(self.path, "rb") as f:
            data = f.read()
        position = 0
        while position < len(data):
            header = data[position : position + _LENGTH.size]
            if len(header) < _LENGTH.size:
                logger.warning(
                    "Ignoring truncated journal header at byte %d of %s", position, self.path
                )
                return
            (length,) = _LENGTH.unpack(header)
            start = position + _LENGTH.size
            payload = data[start : start + length]
            if len(payload) < length:
                logger.warning(
                    "Ignoring truncated journal record at byte %d of %s", position, self.path
                )
                return
            record = json.loads(payload.decode("utf-8"))
            yield record["batch_id"], serde.deserialize(record["deltas"])
            position = start + length

    def close(self):
        with self._lock:
            if self._handle is not None:
                self._handle.close()
                self._handle = None

    def __del__(self):
        if getattr(self, "_handle", None) is not None:
            self._handle.close()
