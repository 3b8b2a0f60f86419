"""Evaluation service core: teams, quota-gated submissions, leaderboards.

All state mutations append to a durable JSON-lines event log and update an
in-memory view under one lock; restart replays the log, so leaderboards
survive crashes exactly. Scoring runs outside the lock (it is pure); the
quota check plus event append is the atomic commit step.

Progress results are visible immediately. Test results are stored but never
leave the service except through explicitly published snapshots.
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Callable

import numpy as np

from ..metrics import CostParams, DEFAULT_PARAMS, ScoreReport, score_submission
from ..submission import ScoreFileError, ValidationReport, parse_scores_bytes, validate
from ..trialset import TrialSetManifest


class ServiceError(Exception):
    """API-level failure with a machine-readable code."""

    def __init__(self, code: str, message: str, http_status: int = 400, detail=None):
        self.code = code
        self.http_status = http_status
        self.detail = detail
        super().__init__(message)


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


@dataclass
class Team:
    team_id: str
    name: str
    token: str
    registered_at: str


@dataclass
class SubsetScores:
    actual: float
    min_cost: float
    cells: list[dict]

    @classmethod
    def from_report(cls, report: ScoreReport) -> "SubsetScores":
        cells = [
            {
                "source": cell.source,
                "gender": cell.gender,
                "n_enroll": cell.n_enroll,
                "p_miss": r.p_miss,
                "p_fa": r.p_fa,
                "c_norm": r.c_norm,
                "n_target": r.n_target,
                "n_nontarget": r.n_nontarget,
            }
            for cell, r in report.actual.per_cell.items()
        ]
        return cls(actual=report.final_actual, min_cost=report.final_min, cells=cells)


@dataclass
class SubmissionRecord:
    submission_id: str
    team_id: str
    received_at: str
    status: str  # "scored" | "rejected"
    progress: SubsetScores | None = None
    test: SubsetScores | None = None
    rejection: dict | None = None

    def public_view(self) -> dict:
        """Owner-facing payload; test-subset scores are never included."""
        return {
            "submission_id": self.submission_id,
            "team_id": self.team_id,
            "received_at": self.received_at,
            "status": self.status,
            "progress": asdict(self.progress) if self.progress else None,
            "rejection": self.rejection,
        }


@dataclass
class LeaderboardEntry:
    team_id: str
    name: str
    best_actual: float
    best_min: float
    best_submission_id: str
    n_submissions: int


@dataclass
class Snapshot:
    snapshot_id: str
    published_at: str
    rows: list[dict]


class EventLog:
    """Append-only JSON-lines log, fsynced per append."""

    def __init__(self, path: str):
        self.path = path
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        self._f = open(path, "a", encoding="utf-8")

    def replay(self) -> list[dict]:
        events = []
        if os.path.exists(self.path):
            with open(self.path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if line:
                        events.append(json.loads(line))
        return events

    def append(self, event: dict) -> None:
        self._f.write(json.dumps(event, separators=(",", ":")) + "\n")
        self._f.flush()
        os.fsync(self._f.fileno())

    def close(self) -> None:
        self._f.close()


class EvalService:
    def __init__(
        self,
        manifest: TrialSetManifest,
        data_dir: str,
        params: CostParams = DEFAULT_PARAMS,
        quota_per_day: int = 3,
        admin_token: str = "",
        clock: Callable[[], datetime] = _utcnow,
    ):
        self.manifest = manifest
        self.params = params
        self.quota_per_day = quota_per_day
        self.admin_token = admin_token or secrets.token_hex(16)
        self.clock = clock
        self.data_dir = data_dir
        self.uploads_dir = os.path.join(data_dir, "uploads")
        os.makedirs(self.uploads_dir, exist_ok=True)

        self._progress = manifest.filter(subset="progress")
        self._test = manifest.filter(subset="test")
        self._lock = threading.Lock()
        self._log = EventLog(os.path.join(data_dir, "events.log"))

        self._teams: dict[str, Team] = {}
        self._teams_by_token: dict[str, Team] = {}
        self._teams_by_name: dict[str, Team] = {}
        self._submissions: dict[str, SubmissionRecord] = {}
        self._by_team: dict[str, list[str]] = {}
        self._attempts: dict[tuple[str, str], int] = {}  # (team_id, utc date) -> count
        self._snapshots: dict[str, Snapshot] = {}
        self._snapshot_order: list[str] = []
        for event in self._log.replay():
            self._apply(event)

    # ------------------------------------------------------------------ state

    def _apply(self, event: dict) -> None:
        kind = event["type"]
        if kind == "team":
            team = Team(event["team_id"], event["name"], event["token"], event["registered_at"])
            self._teams[team.team_id] = team
            self._teams_by_token[team.token] = team
            self._teams_by_name[team.name] = team
        elif kind == "submission":
            rec = SubmissionRecord(
                submission_id=event["submission_id"],
                team_id=event["team_id"],
                received_at=event["received_at"],
                status=event["status"],
                progress=SubsetScores(**event["progress"]) if event.get("progress") else None,
                test=SubsetScores(**event["test"]) if event.get("test") else None,
                rejection=event.get("rejection"),
            )
            self._submissions[rec.submission_id] = rec
            self._by_team.setdefault(rec.team_id, []).append(rec.submission_id)
            day = rec.received_at[:10]
            self._attempts[(rec.team_id, day)] = self._attempts.get((rec.team_id, day), 0) + 1
        elif kind == "snapshot":
            snap = Snapshot(event["snapshot_id"], event["published_at"], event["rows"])
            self._snapshots[snap.snapshot_id] = snap
            self._snapshot_order.append(snap.snapshot_id)
        else:
            raise ValueError(f"unknown event type {kind!r} in log")

    def _commit(self, event: dict) -> None:
        self._log.append(event)
        self._apply(event)

    # ------------------------------------------------------------------ teams

    def register_team(self, name: str) -> Team:
        name = name.strip()
        if not name:
            raise ServiceError("VALIDATION_FAILED", "team name must be non-empty", 422)
        with self._lock:
            if name in self._teams_by_name:
                raise ServiceError("DUPLICATE_TEAM", f"team name {name!r} already registered", 409)
            team_id = f"team-{len(self._teams) + 1:04d}"
            team = Team(team_id, name, secrets.token_hex(16), _iso(self.clock()))
            self._commit({"type": "team", **asdict(team)})
            return team

    def _auth(self, token: str) -> Team:
        team = self._teams_by_token.get(token or "")
        if team is None:
            raise ServiceError("UNAUTHORIZED", "unknown or missing api token", 401)
        return team

    # ------------------------------------------------------------- submissions

    def _check_quota(self, team_id: str, day: str) -> None:
        if self._attempts.get((team_id, day), 0) >= self.quota_per_day:
            raise ServiceError(
                "QUOTA_EXCEEDED",
                f"daily submission quota of {self.quota_per_day} reached for {day} (UTC)",
                429,
            )

    def submit(self, token: str, file_bytes: bytes, filename: str = "scores.tsv") -> SubmissionRecord:
        """Validate, score, and commit one submission.

        Parse failures are free (no quota slot, nothing logged). Validation
        failures consume a quota slot and are logged. Accepted submissions
        are scored on both subsets; only progress scores are exposed.
        """
        team = self._auth(token)
        try:
            raw = parse_scores_bytes(file_bytes, path=filename)
        except ScoreFileError as e:
            raise ServiceError("PARSE_FAILED", str(e), 400) from None

        received = self.clock()
        day = _iso(received)[:10]
        outcome = validate(raw, self.manifest, team_id=team.team_id, received_at=received)

        if isinstance(outcome, ValidationReport):
            with self._lock:
                self._check_quota(team.team_id, day)
                submission_id = f"sub-{len(self._submissions) + 1:06d}"
                rejection = {
                    "summary": outcome.summary(),
                    "missing": [list(p) for p in outcome.missing],
                    "extra": [list(p) for p in outcome.extra],
                    "n_missing": outcome.n_missing,
                    "n_extra": outcome.n_extra,
                }
                self._commit(
                    {
                        "type": "submission",
                        "submission_id": submission_id,
                        "team_id": team.team_id,
                        "received_at": _iso(received),
                        "status": "rejected",
                        "rejection": rejection,
                    }
                )
            raise ServiceError(
                "VALIDATION_FAILED",
                f"submission rejected: {outcome.summary()}",
                422,
                detail=rejection,
            )

        # scoring is pure; run it outside the lock
        llr_all = outcome.align(self.manifest)
        progress = SubsetScores.from_report(
            score_submission(llr_all[self.manifest.subset_code == 0], self._progress, self.params)
        )
        test = SubsetScores.from_report(
            score_submission(llr_all[self.manifest.subset_code == 1], self._test, self.params)
        )

        with self._lock:
            self._check_quota(team.team_id, day)
            submission_id = f"sub-{len(self._submissions) + 1:06d}"
            self._commit(
                {
                    "type": "submission",
                    "submission_id": submission_id,
                    "team_id": team.team_id,
                    "received_at": _iso(received),
                    "status": "scored",
                    "progress": asdict(progress),
                    "test": asdict(test),
                }
            )
        with open(os.path.join(self.uploads_dir, f"{submission_id}.tsv"), "wb") as f:
            f.write(file_bytes)
        return self._submissions[submission_id]

    def get_submission(self, token: str, submission_id: str) -> SubmissionRecord:
        team = self._auth(token)
        rec = self._submissions.get(submission_id)
        if rec is None or rec.team_id != team.team_id:
            raise ServiceError("NOT_FOUND", f"no submission {submission_id!r}", 404)
        return rec

    def list_submissions(self, token: str) -> list[SubmissionRecord]:
        team = self._auth(token)
        with self._lock:
            ids = list(self._by_team.get(team.team_id, []))
        return [self._submissions[i] for i in ids]

    def submission_scores(self, token: str, submission_id: str) -> np.ndarray:
        """Stored progress-subset LLRs of an owned, scored submission."""
        rec = self.get_submission(token, submission_id)
        if rec.status != "scored":
            raise ServiceError("NOT_FOUND", "submission was not scored", 404)
        path = os.path.join(self.uploads_dir, f"{submission_id}.tsv")
        if not os.path.exists(path):
            raise ServiceError("NOT_FOUND", "stored score file is missing", 404)
        with open(path, "rb") as f:
            raw = parse_scores_bytes(f.read(), path=path)
        outcome = validate(raw, self.manifest)
        llr_all = outcome.align(self.manifest)
        return llr_all[self.manifest.subset_code == 0]

    @property
    def progress_manifest(self) -> TrialSetManifest:
        return self._progress

    # ------------------------------------------------------------ leaderboards

    def _board_rows(self, subset_of: Callable[[SubmissionRecord], SubsetScores | None]) -> list[LeaderboardEntry]:
        entries = []
        for team_id, sub_ids in self._by_team.items():
            best_actual = None
            best_min = None  # team's best min cost across submissions (independent of best_actual)
            best_key = None  # (actual, own min) of the submission held as best
            best_id = None
            n = 0
            for sid in sub_ids:  # chronological; ties keep the earliest
                rec = self._submissions[sid]
                scores = subset_of(rec)
                if rec.status != "scored" or scores is None:
                    continue
                n += 1
                if best_min is None or scores.min_cost < best_min:
                    best_min = scores.min_cost
                key = (scores.actual, scores.min_cost)
                if best_key is None or key < best_key:
                    best_key = key
                    best_actual = scores.actual
                    best_id = sid
            if best_actual is not None:
                entries.append(
                    LeaderboardEntry(
                        team_id=team_id,
                        name=self._teams[team_id].name,
                        best_actual=best_actual,
                        best_min=best_min,
                        best_submission_id=best_id,
                        n_submissions=n,
                    )
                )
        entries.sort(key=lambda e: (e.best_actual, e.best_min, e.best_submission_id))
        return entries

    def progress_leaderboard(self) -> list[LeaderboardEntry]:
        """Live board over all scored submissions, ascending by best actual cost."""
        with self._lock:
            return self._board_rows(lambda rec: rec.progress)

    def publish_test_snapshot(self, admin_token: str) -> Snapshot:
        if admin_token != self.admin_token:
            raise ServiceError("UNAUTHORIZED", "admin token required", 401)
        with self._lock:
            rows = [asdict(e) for e in self._board_rows(lambda rec: rec.test)]
            snapshot_id = f"snap-{len(self._snapshots) + 1:04d}"
            self._commit(
                {
                    "type": "snapshot",
                    "snapshot_id": snapshot_id,
                    "published_at": _iso(self.clock()),
                    "rows": rows,
                }
            )
            return self._snapshots[snapshot_id]

    def test_leaderboard(self, snapshot_id: str | None = None) -> Snapshot | None:
        with self._lock:
            if snapshot_id is None:
                if not self._snapshot_order:
                    return None
                snapshot_id = self._snapshot_order[-1]
            snap = self._snapshots.get(snapshot_id)
        if snap is None:
            raise ServiceError("NOT_FOUND", f"no snapshot {snapshot_id!r}", 404)
        return snap

    def close(self) -> None:
        self._log.close()
