"""Persistent shared memory for generated documentation.

Three record stores (component, module, repository) plus a cache of
external search results and an internal cache of raw source lookups.
Every mutation is appended to a line-delimited log and flushed to disk
before the in-memory state changes, so a killed run can be restored by
replaying the log; a truncated trailing line is skipped with a warning.

Retrieval is memory-first: the read counters kept here are how the rest
of the system (and the tests) observe that no codebase target is fetched
twice.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace

from .errors import MemoryConflictError, OrderingViolationError

logger = logging.getLogger(__name__)

PERSIST_FILENAME = "repomemory.log"

_STORE_COMPONENT = "component"
_STORE_MODULE = "module"
_STORE_REPO = "repo"
_STORE_SEARCH = "search"
_STORE_SOURCE = "source"


@dataclass(frozen=True)
class ComponentRecord:
    id: str
    path: str
    document: str
    claims: tuple[str, ...]
    depends_on: tuple[str, ...]
    source_code: str
    kind: str
    verification_score: float
    below_threshold: bool = False
    seq: int = 0

    @property
    def key(self) -> str:
        return self.id


@dataclass(frozen=True)
class ModuleRecord:
    path: str
    document: str
    claims: tuple[str, ...]
    child_units: tuple[str, ...]
    verification_score: float
    below_threshold: bool = False
    seq: int = 0

    @property
    def key(self) -> str:
        return self.path


@dataclass(frozen=True)
class RepoRecord:
    name: str
    path: str
    document: str
    claims: tuple[str, ...]
    child_units: tuple[str, ...]
    verification_score: float
    below_threshold: bool = False
    seq: int = 0

    @property
    def key(self) -> str:
        return self.name


_RECORD_TYPES = {
    _STORE_COMPONENT: ComponentRecord,
    _STORE_MODULE: ModuleRecord,
    _STORE_REPO: RepoRecord,
}


@dataclass
class Counters:
    codebase_reads: int = 0
    memory_hits: int = 0
    codebase_read_targets: set[str] = field(default_factory=set)


class MemoryStore:
    """The shared memory: three record stores plus two caches.

    When constructed with a log path, every commit and cache insert is
    appended there durably before it is acknowledged. Restore with
    MemoryStore.restore(path), which keeps appending to the same file.
    """

    def __init__(self, log_path: str | None = None):
        self.components: dict[str, ComponentRecord] = {}
        self.modules: dict[str, ModuleRecord] = {}
        self.repos: dict[str, RepoRecord] = {}
        self.search_cache: dict[str, str] = {}
        self.source_cache: dict[str, str] = {}
        self.counters = Counters()
        self.restore_skipped = 0
        self._seq = 0
        self._log_path = log_path
        self._log_fh = None
        if log_path is not None:
            os.makedirs(os.path.dirname(os.path.abspath(log_path)), exist_ok=True)
            self._log_fh = open(log_path, "a", encoding="utf-8")

    # -- log plumbing -------------------------------------------------

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None

    def __enter__(self) -> "MemoryStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _append(self, payload: dict) -> None:
        if self._log_fh is None:
            return
        self._log_fh.write(json.dumps(payload, ensure_ascii=False) + "\n")
        self._log_fh.flush()
        os.fsync(self._log_fh.fileno())

    # -- commits ------------------------------------------------------

    def _store_for(self, record) -> tuple[str, dict]:
        if isinstance(record, ComponentRecord):
            return _STORE_COMPONENT, self.components
        if isinstance(record, ModuleRecord):
            return _STORE_MODULE, self.modules
        if isinstance(record, RepoRecord):
            return _STORE_REPO, self.repos
        raise TypeError(f"not a memory record: {type(record).__name__}")

    def commit(self, record, revision: bool = False):
        """Durably store one record.

        A key that already exists is a conflict unless revision=True.
        The stored copy carries the next commit sequence number; the
        log line hits the disk before the store is updated, so an
        acknowledged commit survives a hard kill.
        """
        store_name, store = self._store_for(record)
        if record.key in store and not revision:
            raise MemoryConflictError(
                f"{store_name} record already committed: {record.key}"
            )
        self._seq += 1
        stamped = replace(record, seq=self._seq)
        self._append({"store": store_name, "key": record.key, "record": asdict(stamped)})
        store[record.key] = stamped
        return stamped

    # -- reads --------------------------------------------------------

    def get_component(self, unit_id: str) -> ComponentRecord | None:
        return self._get(self.components, unit_id)

    def get_module(self, path: str) -> ModuleRecord | None:
        return self._get(self.modules, path)

    def get_repo(self, name: str) -> RepoRecord | None:
        return self._get(self.repos, name)

    def _get(self, store: dict, key: str):
        record = store.get(key)
        if record is not None:
            self.counters.memory_hits += 1
        return record

    def get_document(self, unit_id: str):
        """Record for a unit id regardless of granularity, else None."""
        for store in (self.components, self.modules, self.repos):
            if unit_id in store:
                self.counters.memory_hits += 1
                return store[unit_id]
        return None

    def peek(self, unit_id: str):
        """Like get_document but without touching the retrieval counters.

        Internal machinery (verification, resume checks) uses this so
        the counters keep meaning what the agent actually read.
        """
        for store in (self.components, self.modules, self.repos):
            if unit_id in store:
                return store[unit_id]
        return None

    def children_docs(self, child_ids: tuple[str, ...] | list[str]) -> list:
        """Records for every child of a module/repo unit, in order.

        A missing child means something upstream broke the traversal
        contract, so this raises OrderingViolationError.
        """
        out = []
        for child in child_ids:
            record = self.get_document(child)
            if record is None:
                raise OrderingViolationError(
                    f"child unit has no committed record yet: {child}"
                )
            out.append(record)
        return out

    # -- caches -------------------------------------------------------

    def search_lookup(self, query: str) -> str | None:
        result = self.search_cache.get(query)
        if result is not None:
            self.counters.memory_hits += 1
        return result

    def search_put(self, query: str, result: str) -> None:
        self._append({"store": _STORE_SEARCH, "key": query, "record": result})
        self.search_cache[query] = result

    def source_lookup(self, unit_id: str) -> str | None:
        note = self.source_cache.get(unit_id)
        if note is not None:
            self.counters.memory_hits += 1
        return note

    def source_put(self, unit_id: str, note: str) -> None:
        """Record a codebase retrieval and remember its result."""
        self._append({"store": _STORE_SOURCE, "key": unit_id, "record": note})
        self.source_cache[unit_id] = note
        self.counters.codebase_reads += 1
        self.counters.codebase_read_targets.add(unit_id)

    def note_codebase_read(self, unit_id: str) -> None:
        """Count a retrieval that bypasses the cache (memory ablation)."""
        self.counters.codebase_reads += 1
        self.counters.codebase_read_targets.add(unit_id)

    # -- bulk persistence ---------------------------------------------

    def __len__(self) -> int:
        return len(self.components) + len(self.modules) + len(self.repos)

    def committed_keys(self) -> set[str]:
        return set(self.components) | set(self.modules) | set(self.repos)

    def persist(self, path: str) -> None:
        """Write a fresh snapshot of the current state to path."""
        with open(path, "w", encoding="utf-8") as fh:
            for store_name, store in (
                (_STORE_COMPONENT, self.components),
                (_STORE_MODULE, self.modules),
                (_STORE_REPO, self.repos),
            ):
                for key, record in store.items():
                    fh.write(
                        json.dumps(
                            {"store": store_name, "key": key, "record": asdict(record)},
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
            for key, value in self.search_cache.items():
                fh.write(
                    json.dumps({"store": _STORE_SEARCH, "key": key, "record": value})
                    + "\n"
                )
            for key, value in self.source_cache.items():
                fh.write(
                    json.dumps({"store": _STORE_SOURCE, "key": key, "record": value})
                    + "\n"
                )
            fh.flush()
            os.fsync(fh.fileno())

    @classmethod
    def restore(cls, path: str, attach: bool = True) -> "MemoryStore":
        """Rebuild a store by replaying a log file.

        Later lines win for a repeated key. Lines that do not parse or
        do not match a known store layout are skipped with a warning
        (restore_skipped counts them). With attach=True the restored
        store keeps appending to the same file.
        """
        store = cls(log_path=None)
        max_seq = 0
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        payload = json.loads(line)
                        store_name = payload["store"]
                        key = payload["key"]
                        record = payload["record"]
                        if store_name == _STORE_SEARCH:
                            store.search_cache[key] = record
                        elif store_name == _STORE_SOURCE:
                            store.source_cache[key] = record
                        else:
                            record_type = _RECORD_TYPES[store_name]
                            fields = {
                                k: tuple(v) if isinstance(v, list) else v
                                for k, v in record.items()
                            }
                            restored = record_type(**fields)
                            getattr(store, store_name + "s")[key] = restored
                            max_seq = max(max_seq, restored.seq)
                    except (KeyError, TypeError, ValueError) as exc:
                        store.restore_skipped += 1
                        logger.warning(
                            "skipping corrupt memory log line %d in %s: %s",
                            lineno,
                            path,
                            exc,
                        )
        store._seq = max_seq
        if attach:
            store._log_path = path
            store._log_fh = open(path, "a", encoding="utf-8")
        return store
