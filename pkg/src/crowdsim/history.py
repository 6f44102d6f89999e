"""Historical task, worker-task and worker tables: CSV loading, validation and emission."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping

from .domain import Task, TaskState, WorkerTaskRecord
from .reports import write_csv

logger = logging.getLogger(__name__)

TASKS_FILE = "tasks.csv"
WORKER_TASKS_FILE = "worker_tasks.csv"
WORKERS_FILE = "workers.csv"

TASK_COLUMNS = (
    "task_id", "project_id", "reg_start", "sub_deadline", "award", "task_type",
    "technologies", "requirement", "status", "repost_of",
)
TASK_REQUIRED = ("task_id", "project_id", "reg_start", "sub_deadline")
WORKER_TASK_COLUMNS = ("worker_id", "task_id", "reg_time", "sub_time", "score", "reg_order")
WORKER_TASK_REQUIRED = ("worker_id", "task_id", "reg_time")
WORKER_COLUMNS = ("worker_id", "rating", "reliability", "member_since", "skills")
WORKER_REQUIRED = ("worker_id",)

LIST_SEP = ";"


class HistoryError(ValueError):
    """A history file cannot be used at all (missing file or column, strict-mode row error)."""


@dataclass(frozen=True)
class WorkerProfile:
    worker_id: str
    rating: float | None = None
    reliability: float | None = None
    member_since: float | None = None
    skills: frozenset[str] = frozenset()


@dataclass
class HistoryTables:
    tasks: dict[str, Task] = field(default_factory=dict)
    worker_tasks: list[WorkerTaskRecord] = field(default_factory=list)
    workers: dict[str, WorkerProfile] = field(default_factory=dict)
    anchor: datetime | None = None
    diagnostics: list[str] = field(default_factory=list)

    def same_tables(self, other: "HistoryTables") -> bool:
        return (
            self.tasks == other.tasks
            and self.worker_tasks == other.worker_tasks
            and self.workers == other.workers
            and self.anchor == other.anchor
        )


def _read_rows(path: Path, required: Iterable[str]) -> tuple[list[str], list[tuple[int, dict[str, str]]]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HistoryError(f"{path}: empty file, header row required") from None
        names = [h.strip().lower() for h in header]
        missing = [c for c in required if c not in names]
        if missing:
            raise HistoryError(f"{path}: missing required column(s) {', '.join(missing)}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not any(cell.strip() for cell in raw):
                continue
            rows.append((lineno, {n: (raw[i].strip() if i < len(raw) else "") for i, n in enumerate(names)}))
    return names, rows


def _parse_time(text: str) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise ValueError(f"not an ISO-8601 timestamp: {text!r}") from None


def _opt_float(text: str) -> float | None:
    return float(text) if text != "" else None


def _split(text: str) -> frozenset[str]:
    return frozenset(p.strip() for p in text.split(LIST_SEP) if p.strip())


def _offset(ts: datetime, anchor: datetime) -> float:
    return (ts - anchor) / timedelta(days=1)


def _stamp(offset: float, anchor: datetime) -> str:
    micros = round(offset * 86_400_000_000)
    return (anchor + timedelta(microseconds=micros)).isoformat()


def _status_flags(state: TaskState) -> tuple[bool, bool]:
    if state is TaskState.COMPLETED:
        return True, False
    if state in (TaskState.FAILED, TaskState.STARVED, TaskState.DROPPED):
        return False, True
    return False, False


def load_history(source: str | Path | Mapping[str, str | Path], *, strict: bool = False) -> HistoryTables:
    """Load ``tasks.csv`` plus optional ``worker_tasks.csv`` and ``workers.csv``.

    ``source`` is a directory holding those names or a mapping from
    ``"tasks"``/``"worker_tasks"``/``"workers"`` to paths. Timestamps become
    day offsets from the earliest task or registration timestamp. Bad rows
    are skipped with a diagnostic, or raise in ``strict`` mode.
    """
    if isinstance(source, Mapping):
        paths = {k: Path(v) for k, v in source.items()}
    else:
        base = Path(source)
        paths = {"tasks": base / TASKS_FILE, "worker_tasks": base / WORKER_TASKS_FILE, "workers": base / WORKERS_FILE}
    if not paths.get("tasks") or not paths["tasks"].exists():
        raise HistoryError(f"tasks table not found: {paths.get('tasks')}")

    diagnostics: list[str] = []

    def reject(where: str, msg: str) -> None:
        text = f"{where}: {msg}"
        if strict:
            raise HistoryError(text)
        diagnostics.append(text)
        logger.warning("skipping row %s", text)

    _, task_rows = _read_rows(paths["tasks"], TASK_REQUIRED)
    wt_rows: list[tuple[int, dict[str, str]]] = []
    w_rows: list[tuple[int, dict[str, str]]] = []
    if paths.get("worker_tasks") and paths["worker_tasks"].exists():
        _, wt_rows = _read_rows(paths["worker_tasks"], WORKER_TASK_REQUIRED)
    if paths.get("workers") and paths["workers"].exists():
        _, w_rows = _read_rows(paths["workers"], WORKER_REQUIRED)

    # first pass: parse timestamps so the anchor is known
    parsed_tasks = []
    for lineno, row in task_rows:
        where = f"{paths['tasks'].name}:{lineno}"
        try:
            start, end = _parse_time(row["reg_start"]), _parse_time(row["sub_deadline"])
            award = float(row.get("award") or 0.0)
            state = TaskState(row["status"]) if row.get("status") else TaskState.ARRIVED
        except ValueError as exc:
            reject(where, str(exc))
            continue
        if not row["task_id"]:
            reject(where, "empty task_id")
            continue
        if end <= start:
            reject(where, "sub_deadline must follow reg_start")
            continue
        parsed_tasks.append((where, row, start, end, award, state))

    parsed_wt = []
    for lineno, row in wt_rows:
        where = f"{paths['worker_tasks'].name}:{lineno}"
        try:
            reg = _parse_time(row["reg_time"])
            sub = _parse_time(row["sub_time"]) if row.get("sub_time") else None
            score = _opt_float(row.get("score", ""))
            order = int(row["reg_order"]) if row.get("reg_order") else None
        except ValueError as exc:
            reject(where, str(exc))
            continue
        if sub is not None and sub < reg:
            reject(where, "submission precedes registration")
            continue
        parsed_wt.append((where, row, reg, sub, score, order))

    parsed_w = []
    for lineno, row in w_rows:
        where = f"{paths['workers'].name}:{lineno}"
        try:
            since = _parse_time(row["member_since"]) if row.get("member_since") else None
            rating = _opt_float(row.get("rating", ""))
            rel = _opt_float(row.get("reliability", ""))
        except ValueError as exc:
            reject(where, str(exc))
            continue
        parsed_w.append((where, row, since, rating, rel))

    # membership dates may predate the observed window, so they get negative offsets instead
    stamps = [p[2] for p in parsed_tasks] + [p[2] for p in parsed_wt]
    stamps += [p[3] for p in parsed_wt if p[3] is not None]
    if not stamps:
        stamps = [p[2] for p in parsed_w if p[2] is not None]
    try:
        anchor = min(stamps) if stamps else None
    except TypeError:
        raise HistoryError("mixed timezone-aware and naive timestamps") from None

    tables = HistoryTables(anchor=anchor, diagnostics=diagnostics)
    for where, row, start, end, award, state in parsed_tasks:
        tid = row["task_id"]
        if tid in tables.tasks:
            reject(where, f"duplicate task_id {tid}")
            continue
        done, failed = _status_flags(state)
        tables.tasks[tid] = Task(
            id=tid,
            project_id=row["project_id"],
            reg_start=_offset(start, anchor),
            sub_deadline=_offset(end, anchor),
            award=award,
            task_type=row.get("task_type", ""),
            technologies=_split(row.get("technologies", "")),
            requirement_text=row.get("requirement", ""),
            state=state,
            repost_of=row.get("repost_of") or None,
            completed_flag=done,
            failed_flag=failed,
        )

    seen: set[tuple[str, str]] = set()
    pending = []
    for where, row, reg, sub, score, order in parsed_wt:
        key = (row["worker_id"], row["task_id"])
        if row["task_id"] not in tables.tasks:
            reject(where, f"unknown task_id {row['task_id']}")
            continue
        if key in seen:
            reject(where, f"duplicate registration {key}")
            continue
        seen.add(key)
        pending.append((where, row, _offset(reg, anchor), None if sub is None else _offset(sub, anchor), score, order))

    by_task: dict[str, list[tuple]] = {}
    for item in pending:
        by_task.setdefault(item[1]["task_id"], []).append(item)
    implied: dict[tuple[str, str], int] = {}
    for tid, items in by_task.items():
        for rank, item in enumerate(sorted(items, key=lambda it: (it[2], it[1]["worker_id"])), start=1):
            implied[(item[1]["worker_id"], tid)] = rank
    for where, row, reg, sub, score, order in pending:
        key = (row["worker_id"], row["task_id"])
        if order is None:
            order = implied[key]
        elif order != implied[key]:
            diagnostics.append(f"{where}: reg_order {order} disagrees with timestamp rank {implied[key]}")
        tables.worker_tasks.append(WorkerTaskRecord(row["worker_id"], row["task_id"], reg, sub, order, score))

    for where, row, since, rating, rel in parsed_w:
        wid = row["worker_id"]
        if wid in tables.workers:
            reject(where, f"duplicate worker_id {wid}")
            continue
        tables.workers[wid] = WorkerProfile(
            worker_id=wid,
            rating=rating,
            reliability=rel,
            member_since=None if since is None else _offset(since, anchor),
            skills=_split(row.get("skills", "")),
        )
    if tables.workers:
        for rec in tables.worker_tasks:
            if rec.worker_id not in tables.workers:
                diagnostics.append(f"worker {rec.worker_id} has no profile row")
    return tables


def _num(x: float | None) -> str:
    if x is None:
        return ""
    return repr(float(x))


def emit_history(tables: HistoryTables, out_dir: str | Path) -> dict[str, Path]:
    """Write the three tables back as ISO-timestamped CSV; reloading gives equal tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    anchor = tables.anchor or datetime(1970, 1, 1)

    def stamp(x: float | None) -> str:
        return "" if x is None else _stamp(x, anchor)

    paths = {"tasks": out / TASKS_FILE, "worker_tasks": out / WORKER_TASKS_FILE, "workers": out / WORKERS_FILE}
    write_csv(
        paths["tasks"],
        TASK_COLUMNS,
        (
            (
                t.id, t.project_id, stamp(t.reg_start), stamp(t.sub_deadline), _num(t.award), t.task_type,
                LIST_SEP.join(sorted(t.technologies)), t.requirement_text, t.state.value, t.repost_of or "",
            )
            for t in tables.tasks.values()
        ),
    )
    write_csv(
        paths["worker_tasks"],
        WORKER_TASK_COLUMNS,
        (
            (r.worker_id, r.task_id, stamp(r.reg_time), stamp(r.sub_time), _num(r.score), r.reg_order)
            for r in tables.worker_tasks
        ),
    )
    write_csv(
        paths["workers"],
        WORKER_COLUMNS,
        (
            (w.worker_id, _num(w.rating), _num(w.reliability), stamp(w.member_since), LIST_SEP.join(sorted(w.skills)))
            for w in tables.workers.values()
        ),
    )
    return paths
