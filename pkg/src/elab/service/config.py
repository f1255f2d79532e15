"""Service configuration, read from one JSON file.

Every knob has a default so a bare Workbench works out of the box; a
config file only needs the keys it wants to change.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Milestone:
    milestone_id: str
    title: str


# Stands in for the study guide's milestone list; deployments swap in
# their own through the config file.
DEFAULT_MILESTONES = (
    Milestone("question", "Pose a research question"),
    Milestone("plan", "Plan the investigation"),
    Milestone("data", "Collect or select data"),
    Milestone("analysis", "Run and interpret an analysis"),
    Milestone("conclusion", "Draw conclusions"),
    Milestone("poster", "Publish a poster"),
)


@dataclass(frozen=True)
class ServiceConfig:
    port: int = 8080
    storage_root: str = "elab-data"
    page_size: int = 25
    workers: int = 2
    session_idle_hours: float = 8.0
    # Directory of built UI files to serve at /; empty string disables it.
    static_root: str = ""
    milestones: tuple[Milestone, ...] = DEFAULT_MILESTONES

    def milestone(self, milestone_id: str) -> Milestone | None:
        for m in self.milestones:
            if m.milestone_id == milestone_id:
                return m
        return None


def load_config(path: str | Path) -> ServiceConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    defaults = ServiceConfig()
    if "milestones" in raw:
        milestones = tuple(Milestone(m["id"], m["title"]) for m in raw["milestones"])
    else:
        milestones = defaults.milestones
    return ServiceConfig(
        port=int(raw.get("port", defaults.port)),
        storage_root=str(raw.get("storage_root", defaults.storage_root)),
        page_size=int(raw.get("page_size", defaults.page_size)),
        workers=int(raw.get("workers", defaults.workers)),
        session_idle_hours=float(raw.get("session_idle_hours", defaults.session_idle_hours)),
        static_root=str(raw.get("static_root", defaults.static_root)),
        milestones=milestones,
    )
