"""File-backed conversation persistence.

One JSON document per conversation in a data directory, written with an
atomic temp-file rename so a crash never leaves a torn document. Safe for
concurrent readers; writers serialize per conversation at the service
layer.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .dialogue import Conversation

SCHEMA_VERSION = 1


class ConversationNotFound(KeyError):
    pass


class ConversationStore:
    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, conversation_id: str) -> Path:
        if not conversation_id or "/" in conversation_id or conversation_id.startswith("."):
            raise ConversationNotFound(conversation_id)
        return self.data_dir / f"{conversation_id}.json"

    def save(self, conversation: Conversation) -> None:
        document = {
            "schema_version": SCHEMA_VERSION,
            "conversation": conversation.to_json_obj(),
        }
        blob = json.dumps(document, ensure_ascii=False, indent=2) + "\n"
        fd, tmp_name = tempfile.mkstemp(
            dir=self.data_dir, prefix=".tmp-", suffix=".json"
        )
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(blob)
            os.replace(tmp_name, self._path(conversation.id))
        except BaseException:
            try:
                os.unlink(tmp_name)
            except FileNotFoundError:
                pass
            raise

    def load(self, conversation_id: str) -> Conversation:
        path = self._path(conversation_id)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConversationNotFound(conversation_id) from None
        if document.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema version {document.get('schema_version')!r} "
                f"in {path}"
            )
        return Conversation.from_json_obj(document["conversation"])

    def exists(self, conversation_id: str) -> bool:
        try:
            return self._path(conversation_id).exists()
        except ConversationNotFound:
            return False

    def ids(self) -> list[str]:
        return sorted(
            p.stem for p in self.data_dir.glob("*.json") if not p.name.startswith(".")
        )
