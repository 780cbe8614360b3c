#!/usr/bin/env python3
"""Record real service responses as JSON fixtures for the UI contract tests.

Run from the repository root after installing the Python package:

    python3 frontend/scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from matchaudit.service import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def dump(name: str, obj) -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / f"{name}.json").write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {name}.json")


def wait_for_job(client, job_id: str) -> dict:
    while True:
        status = client.get(f"/jobs/{job_id}").json()
        if status["state"] in ("done", "failed"):
            return status
        time.sleep(0.05)


def main() -> None:
    app = create_app(root=tempfile.mkdtemp(prefix="fixture-rec-"))
    with TestClient(app) as client:
        demo = client.post("/demo/datasets", json={"profile": "scores", "seed": 5}).json()
        sid = demo["session_id"]
        dump("demo_session", demo)
        dump("catalog", client.get(f"/sessions/{sid}/matchers").json())

        audit = client.post(
            f"/sessions/{sid}/audit",
            json={
                "measures": ["tprp", "ppvp", "accuracy-parity"],
                "tau_match": 0.5,
                "theta_fair": 0.2,
                "mode": "subtraction",
            },
        ).json()
        dump("audit", audit)

        dump(
            "multiworkload",
            client.post(
                f"/sessions/{sid}/audit/multiworkload",
                json={"k": 25, "seed": 2, "alpha_sig": 0.05},
            ).json(),
        )
        dump(
            "explain",
            client.post(
                f"/sessions/{sid}/explain",
                json={"matcher_id": "external:biased", "group": "gamma",
                      "measure_id": "tprp", "sample_size": 3, "seed": 1},
            ).json(),
        )

        resolution = client.post(
            f"/sessions/{sid}/resolve", json={"measure_id": "tprp", "seed": 5}
        ).json()
        dump("resolution", resolution)

        frontier_point = resolution["points"][resolution["frontier_indices"][0]]
        dump(
            "strategy",
            client.post(
                f"/sessions/{sid}/resolve/strategy",
                json={"assignment": frontier_point["assignment"]},
            ).json(),
        )

        faculty = client.post("/demo/datasets", json={"profile": "faculty", "seed": 11}).json()
        job = client.post(
            f"/sessions/{faculty['session_id']}/match",
            json={"matcher_ids": ["threshold", "decision-stump"], "seed": 11},
        ).json()
        dump("job_done", wait_for_job(client, job["job_id"]))


if __name__ == "__main__":
    main()
