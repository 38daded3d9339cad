"""Prototype review service: serve projected prototypes for blinded human
rating and aggregate Likert scores.

Reviewers see each prototype as a rendered 12-lead ECG labeled only by its
diagnostic class; similarity scores, head weights, model predictions, and
test cases are never exposed. Ratings land in an append-only NDJSON log
(one JSON object per line) so the summary can always be recomputed from
the raw trail; per (reviewer, prototype) the latest submission wins, and a
prototype flagged as a label error by any reviewer drops out of every
summary denominator. Confidence intervals are the normal approximation
mean +- 1.96 s/sqrt(n).
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from .errors import ConfigurationError
from .explain import latent_window_to_seconds
from .prototypes import PrototypeBank, PrototypeKind
from .render import RenderSpec, render

CRITERIA = ("representativeness", "clarity")
Z_95 = 1.96


class RatingStore:
    """Append-only NDJSON log; writes serialized through one lock."""

    def __init__(self, log_path):
        self.log_path = Path(log_path)
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def append(self, event: dict) -> None:
        line = json.dumps(event, separators=(",", ":"))
        with self._lock:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def events(self) -> list[dict]:
        if not self.log_path.exists():
            return []
        with open(self.log_path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]


def active_state(events: list[dict]) -> tuple[dict, set]:
    """Latest rating per (reviewer, prototype) and globally excluded ids."""
    ratings: dict[tuple[str, int], dict] = {}
    exclusion: dict[tuple[str, int], bool] = {}
    for ev in events:
        key = (ev["reviewer_id"], ev["prototype_id"])
        if ev["type"] == "rating":
            ratings[key] = ev
            exclusion[key] = bool(ev.get("excluded", False))
        elif ev["type"] == "exclude":
            exclusion[key] = bool(ev.get("excluded", True))
    excluded = {proto for (_, proto), flag in exclusion.items() if flag}
    return ratings, excluded


def summarize(events: list[dict]) -> list[dict]:
    """Per (reviewer, criterion): n, mean, and 95% CI over active ratings of
    non-excluded prototypes. Zero-variance samples collapse to the point."""
    ratings, excluded = active_state(events)
    by_reviewer: dict[str, dict[str, list[float]]] = {}
    for (reviewer, proto), ev in ratings.items():
        if proto in excluded:
            continue
        for criterion in CRITERIA:
            value = ev.get(criterion)
            if value is None:
                continue
            by_reviewer.setdefault(reviewer, {}).setdefault(criterion, []).append(float(value))
    rows = []
    for reviewer in sorted(by_reviewer):
        for criterion in CRITERIA:
            values = by_reviewer[reviewer].get(criterion, [])
            if not values:
                continue
            arr = np.asarray(values)
            mean = float(arr.mean())
            if len(arr) > 1:
                half = Z_95 * float(arr.std(ddof=1)) / np.sqrt(len(arr))
            else:
                half = 0.0
            rows.append({
                "reviewer": reviewer,
                "criterion": criterion,
                "n": len(arr),
                "mean": mean,
                "ci": [mean - half, mean + half],
            })
    return rows


class RatingIn(BaseModel):
    reviewer_id: str
    prototype_id: int
    representativeness: int | None = Field(None, ge=1, le=5)
    clarity: int | None = Field(None, ge=1, le=5)
    excluded: bool = False


class ExcludeIn(BaseModel):
    reviewer_id: str
    excluded: bool = True


def prototype_table(banks: list[PrototypeBank]) -> list[dict]:
    """Stable listing of every prototype across banks, blinded to scores."""
    rows = []
    next_id = 0
    for bank in banks:
        if not bank.is_projected():
            raise ConfigurationError(
                f"{bank.kind.value} bank lacks provenance; the review service "
                "serves projected prototypes only"
            )
        for j in range(bank.n_prototypes):
            prov = bank.provenance[j]
            rows.append({
                "prototype_id": next_id,
                "class_code": bank.class_codes[int(bank.class_of[j])],
                "kind": bank.kind.value,
                "source_record_id": prov["record_id"],
                "start": prov["start"],
                "width": prov["width"],
            })
            next_id += 1
    return rows


def _render_prototype(row: dict, records: dict, out_path) -> None:
    record = records[row["source_record_id"]]
    kind = PrototypeKind(row["kind"])
    if kind is PrototypeKind.PARTIAL_2D:
        window = latent_window_to_seconds(row["start"], row["width"])
        spec = RenderSpec(highlight_seconds=window, cutout=True,
                          title=row["class_code"])
    elif kind is PrototypeKind.GLOBAL_1D:
        spec = RenderSpec(emphasize_rhythm_strip=True, title=row["class_code"])
    else:
        spec = RenderSpec(title=row["class_code"])
    render(record.signal, spec, out_path)


def create_app(banks: list[PrototypeBank], records: dict, log_path,
               render_dir=None) -> FastAPI:
    table = prototype_table(banks)
    store = RatingStore(log_path)
    render_dir = Path(render_dir) if render_dir else Path(log_path).parent / "renders"
    render_dir.mkdir(parents=True, exist_ok=True)
    known_ids = {row["prototype_id"] for row in table}
    app = FastAPI(title="prototype-review", version="1")

    @app.get("/prototypes")
    def list_prototypes(page: int = 0, page_size: int = 50):
        if page < 0 or page_size < 1:
            raise HTTPException(422, "page and page_size must be nonnegative")
        start = page * page_size
        items = [
            {
                "prototype_id": row["prototype_id"],
                "class_code": row["class_code"],
                "kind": row["kind"],
                "render_url": f"/prototypes/{row['prototype_id']}/render",
            }
            for row in table[start : start + page_size]
        ]
        return {"version": 1, "page": page, "page_size": page_size,
                "total": len(table), "items": items}

    @app.get("/prototypes/{prototype_id}/render")
    def render_prototype(prototype_id: int):
        if prototype_id not in known_ids:
            raise HTTPException(404, f"no prototype {prototype_id}")
        path = render_dir / f"proto_{prototype_id}.svg"
        if not path.exists():
            _render_prototype(table[prototype_id], records, path)
        return Response(path.read_bytes(), media_type="image/svg+xml")

    @app.post("/ratings")
    def submit_rating(rating: RatingIn):
        if rating.prototype_id not in known_ids:
            raise HTTPException(404, f"no prototype {rating.prototype_id}")
        if not rating.excluded and (rating.representativeness is None
                                    or rating.clarity is None):
            raise HTTPException(422, "both scores are required unless excluding")
        store.append({
            "version": 1,
            "type": "rating",
            "reviewer_id": rating.reviewer_id,
            "prototype_id": rating.prototype_id,
            "representativeness": rating.representativeness,
            "clarity": rating.clarity,
            "excluded": rating.excluded,
            "ts": time.time(),
        })
        return {"status": "ok"}

    @app.post("/prototypes/{prototype_id}/exclude")
    def exclude_prototype(prototype_id: int, body: ExcludeIn):
        if prototype_id not in known_ids:
            raise HTTPException(404, f"no prototype {prototype_id}")
        store.append({
            "version": 1,
            "type": "exclude",
            "reviewer_id": body.reviewer_id,
            "prototype_id": prototype_id,
            "excluded": body.excluded,
            "ts": time.time(),
        })
        return {"status": "ok"}

    @app.get("/summary")
    def summary():
        return {"version": 1, "rows": summarize(store.events())}

    app.state.store = store
    app.state.table = table
    return app
