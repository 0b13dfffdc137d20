import datetime
import json
import threading
import time
from typing import Any, Callable, Literal, Optional, Sequence

from sctkg.lifecycle.base import PostCommitBatchHook, PreCommitBatchHook


def safe_json(obj: Any) -> str:
    return json.dumps(obj, default=str, sort_keys=True)


class CommitLogger(PostCommitBatchHook, PreCommitBatchHook):
    """Logs every batch outcome (ids, attempts, sizes, timing, error) to a jsonl file."""

    def __init__(
        self,
        jsonl_path: str,
        mode: Literal["append", "w"] = "append",
        json_dump: Callable[[dict], str] = safe_json,
    ):
        """Initializes the logger.

        :param jsonl_path: Path to the jsonl file
        :param mode: Mode to open the file in. Either "append" or "w"
        :param json_dump: Function to use to dump the json. Default is safe_json
        """
        if not str(jsonl_path).endswith(".jsonl"):
            raise ValueError(f"jsonl_path must end with .jsonl. Got: {jsonl_path}")
        self.jsonl_path = str(jsonl_path)
        open_mode = "a" if mode == "append" else "w"
        self.f = open(self.jsonl_path, mode=open_mode, encoding="utf-8")
        self.started = {}  # batch_id -> first attempt time
        self.json_dump = json_dump
        self._lock = threading.Lock()

    def pre_commit_batch(self, *, batch_id: str, attempt: int, **future_kwargs: Any):
        with self._lock:
            self.started.setdefault(batch_id, datetime.datetime.now())

    def post_commit_batch(
        self,
        *,
        batch_id: str,
        attempts: int,
        nodes: Sequence,
        edges: Sequence,
        exception: Optional[Exception],
        **future_kwargs: Any,
    ):
        with self._lock:
            start = self.started.pop(batch_id, None)
            entry = {
                "batch_id": batch_id,
                "attempts": attempts,
                "nodes": len(nodes),
                "edges": len(edges),
                "exception": str(exception) if exception is not None else None,
                "start_time": start.isoformat() if start is not None else None,
                "end_time": datetime.datetime.now().isoformat(),
            }
            self.f.write(self.json_dump(entry) + "\n")
            self.f.flush()

    def close(self):
        self.f.close()

    def __del__(self):
        if hasattr(self, "f"):
            # possible something fails beforehand
            self.f.close()


class SlowDownHook(PostCommitBatchHook, PreCommitBatchHook):
    """Slows down commits. You'll only want to use this for debugging or to widen race windows
    in concurrency tests."""

    def __init__(self, pre_sleep_time: float = 0.5, post_sleep_time: float = 0.5):
        """Initializes the hook.

        :param pre_sleep_time: Time to sleep before each commit attempt
        :param post_sleep_time: Time to sleep after each batch resolves
        """
        self.post_sleep_time = post_sleep_time
        self.pre_sleep_time = pre_sleep_time

    def post_commit_batch(self, **future_kwargs: Any):
        time.sleep(self.post_sleep_time)

    def pre_commit_batch(self, **future_kwargs: Any):
        time.sleep(self.pre_sleep_time)
