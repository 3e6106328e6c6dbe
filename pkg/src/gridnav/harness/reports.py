"""Mission reports, decay-experiment summaries, and their file formats.

Emitted artifacts are deterministic byte-for-byte given the same inputs:
floats are written with ``repr`` (shortest round-trip form), rows keep a
fixed column order, and JSON keys are sorted.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from ..mapping import GridCoord
from ..world import World

MISSION_CSV_COLUMNS = (
    "method",
    "domain",
    "weather",
    "distance_m",
    "time_s",
    "completed",
    "obstacles",
    "predictions",
    "corrections",
    "random",
)

DECAY_CSV_COLUMNS = ("rule", "update", "min", "q1", "median", "q3", "max")

REPORT_SCHEMA_VERSION = 1


@dataclass
class MissionReport:
    completed: bool
    distance_m: float
    time_s: int
    obstacles: int
    predictions: int
    corrections: int
    random: int
    route: list[GridCoord] = field(default_factory=list)
    method: str = ""
    domain: str = ""
    weather_kind: str = "clear"
    weather_intensity: float = 0.0

    @property
    def decisions(self) -> int:
        return self.predictions + self.corrections + self.random

    @property
    def weather_label(self) -> str:
        if self.weather_intensity == 0.0:
            return self.weather_kind
        return f"{self.weather_kind}{int(round(self.weather_intensity * 100))}"


@dataclass
class DecayExperimentResult:
    rule: str
    initial_value: float
    #: (updates + 1, 5) array of (min, q1, median, q3, max) per update index,
    #: row 0 being the state before any update.
    summary: np.ndarray

    @property
    def updates(self) -> int:
        return self.summary.shape[0] - 1


def mission_reports_to_csv(reports: list[MissionReport]) -> str:
    if not reports:
        raise ValueError("no reports to emit")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MISSION_CSV_COLUMNS)
    for r in reports:
        writer.writerow(
            [
                r.method,
                r.domain,
                r.weather_label,
                repr(float(r.distance_m)),
                r.time_s,
                int(r.completed),
                r.obstacles,
                r.predictions,
                r.corrections,
                r.random,
            ]
        )
    return buf.getvalue()


def mission_reports_to_json(reports: list[MissionReport]) -> str:
    if not reports:
        raise ValueError("no reports to emit")
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "reports": [
            {
                "completed": r.completed,
                "distance_m": float(r.distance_m),
                "time_s": r.time_s,
                "obstacles": r.obstacles,
                "predictions": r.predictions,
                "corrections": r.corrections,
                "random": r.random,
                "route": [[c.row, c.col] for c in r.route],
                "method": r.method,
                "domain": r.domain,
                "weather_kind": r.weather_kind,
                "weather_intensity": r.weather_intensity,
            }
            for r in reports
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def mission_reports_from_json(text: str) -> list[MissionReport]:
    doc = json.loads(text)
    if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema {doc.get('schema_version')}")
    return [
        MissionReport(
            completed=bool(r["completed"]),
            distance_m=float(r["distance_m"]),
            time_s=int(r["time_s"]),
            obstacles=int(r["obstacles"]),
            predictions=int(r["predictions"]),
            corrections=int(r["corrections"]),
            random=int(r["random"]),
            route=[GridCoord(int(a), int(b)) for a, b in r["route"]],
            method=r["method"],
            domain=r["domain"],
            weather_kind=r["weather_kind"],
            weather_intensity=float(r["weather_intensity"]),
        )
        for r in doc["reports"]
    ]


def decay_results_to_csv(results: list[DecayExperimentResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DECAY_CSV_COLUMNS)
    for res in results:
        for update in range(res.summary.shape[0]):
            row = res.summary[update]
            writer.writerow([res.rule, update] + [repr(float(v)) for v in row])
    return buf.getvalue()


def route_trace_svg(report: MissionReport, world: World,
                    start: GridCoord | None = None,
                    goal: GridCoord | None = None) -> str:
    """Vector trace of one mission: obstacles, route, start/goal markers.

    Cells revisited several times are drawn darker: the overlay square of a
    cell visited n times carries fill-opacity min(1, 0.25 n) plus a
    ``data-visits`` attribute for tooling.  Start and goal default to the
    route endpoints when not given explicitly.
    """
    width = world.spec.width_m
    height = world.spec.height_m
    if start is None and report.route:
        start = report.route[0]
    if goal is None and report.route:
        goal = report.route[-1]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#202820"/>',
    ]
    for obs in world.obstacles:
        parts.append(
            f'<circle cx="{obs.x:.3f}" cy="{obs.y:.3f}" r="{obs.radius:.3f}" fill="red"/>'
        )

    visits: dict[GridCoord, int] = {}
    for cell in report.route:
        visits[cell] = visits.get(cell, 0) + 1
    for cell, count in sorted(visits.items()):
        opacity = min(1.0, 0.25 * count)
        parts.append(
            f'<rect x="{cell.col}" y="{cell.row}" width="1" height="1" fill="white" '
            f'fill-opacity="{opacity:.2f}" data-visits="{count}"/>'
        )
    if report.route:
        points = " ".join(f"{c.col + 0.5},{c.row + 0.5}" for c in report.route)
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="white" '
            f'stroke-width="0.2" stroke-opacity="0.8"/>'
        )
    if start is not None:
        parts.append(
            f'<circle cx="{start.col + 0.5}" cy="{start.row + 0.5}" r="0.7" '
            f'fill="none" stroke="cyan" stroke-width="0.25" data-marker="start"/>'
        )
    if goal is not None:
        parts.append(
            f'<circle cx="{goal.col + 0.5}" cy="{goal.row + 0.5}" r="0.7" '
            f'fill="none" stroke="yellow" stroke-width="0.25" data-marker="goal"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(reports: list[MissionReport], out_dir, stem: str = "missions") -> dict:
    """Write the CSV + JSON pair for a batch of mission reports.

    Returns the written paths keyed by format.
    """
    import os

    if not reports:
        raise ValueError("no reports to emit")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    json_path = os.path.join(out_dir, f"{stem}.json")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(mission_reports_to_csv(reports))
    with open(json_path, "w", encoding="utf-8") as fh:
        fh.write(mission_reports_to_json(reports))
    return {"csv": csv_path, "json": json_path}
