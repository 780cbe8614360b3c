"""Per-session artifact directories shared by the CLI and the HTTP service.

A session is a directory of canonicalized input copies plus JSON/CSV
artifacts, one per workflow step. Artifacts carry no timestamps and are
written with a fixed key order, so rerunning a pipeline with the same
seeds reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

from . import audit as audit_mod
from . import ingest as ingest_mod
from . import matchers as matchers_mod
from . import resolve as resolve_mod
from .explain import AuditContext, ExplanationQuery, explain
from .stats import multiworkload_analysis

STATES = ("created", "ingested", "matched", "audited", "resolved")
MODES = ("match-and-evaluate", "evaluate-only")


class SessionError(ValueError):
    pass


class WorkflowError(SessionError):
    """A step was requested before its prerequisites ran."""


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _request_hash(obj) -> str:
    canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _safe_name(matcher_id: str) -> str:
    return matcher_id.replace(":", "__")


class Session:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._dataset: ingest_mod.Dataset | None = None

    # -- creation / loading -------------------------------------------------

    @classmethod
    def create(cls, root: str | Path) -> "Session":
        session = cls(root)
        session.root.mkdir(parents=True, exist_ok=True)
        if session.state_path.exists():
            raise SessionError(f"session already exists at {session.root}")
        for sub in ("data", "groups", "matchers", "scores", "reports"):
            (session.root / sub).mkdir(exist_ok=True)
        session._write_state({"state": "created", "mode": None, "matchers": [], "last_audit": None})
        return session

    @classmethod
    def open(cls, root: str | Path) -> "Session":
        session = cls(root)
        if not session.state_path.exists():
            raise SessionError(f"no session at {session.root}")
        return session

    @property
    def state_path(self) -> Path:
        return self.root / "state.json"

    def state(self) -> dict:
        return json.loads(self.state_path.read_text(encoding="utf-8"))

    def _write_state(self, state: dict) -> None:
        self.state_path.write_text(_dump_json(state), encoding="utf-8")

    def _require(self, minimum: str) -> dict:
        state = self.state()
        if STATES.index(state["state"]) < STATES.index(minimum):
            raise WorkflowError(
                f"step requires state >= {minimum!r}, session is {state['state']!r}"
            )
        return state

    # -- step 1: ingest ------------------------------------------------------

    def ingest(
        self,
        table_a: str | Path,
        table_b: str | Path,
        train: str | Path | None = None,
        valid: str | Path | None = None,
        test: str | Path | None = None,
        sensitive: ingest_mod.SensitiveAttributeSpec | dict | None = None,
        mode: str = "match-and-evaluate",
        scores: str | Path | None = None,
        scores_name: str = "scores",
        pairs: str | Path | None = None,
        split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
        split_seed: int = 0,
        subgroup_cap: int = ingest_mod.DEFAULT_SUBGROUP_CAP,
    ) -> dict:
        """Load, validate, encode, and persist the dataset for this session."""
        state = self.state()
        if state["state"] != "created":
            raise WorkflowError("session already has a dataset")
        if mode not in MODES:
            raise SessionError(f"unknown mode {mode!r}")
        if mode == "evaluate-only" and scores is None:
            raise SessionError("evaluate-only ingest needs a score file")
        if isinstance(sensitive, dict):
            sensitive = ingest_mod.SensitiveAttributeSpec.from_json(sensitive)
        if sensitive is None:
            raise SessionError("a sensitive-attribute spec is required")

        used_split_seed = None
        if pairs is not None:
            if any(p is not None for p in (train, valid, test)):
                raise SessionError("pass either one pair file to split or three split files")
            all_pairs = ingest_mod._load_pairs(pairs, "all")
            left = ingest_mod._load_table(table_a, "left")
            right = ingest_mod._load_table(table_b, "right")
            train_set, valid_set, test_set = ingest_mod.split_pairs(
                all_pairs.pairs, split_ratios, split_seed
            )
            used_split_seed = split_seed
            dataset = ingest_mod.Dataset(
                left=left,
                right=right,
                splits={"train": train_set, "valid": valid_set, "test": test_set},
            )
            for split in dataset.splits.values():
                for pair in split.pairs:
                    if pair.left_id not in left or pair.right_id not in right:
                        raise ingest_mod.IngestError(
                            f"pair ({pair.left_id}, {pair.right_id}) references unknown ids",
                            pairs,
                        )
        else:
            if any(p is None for p in (train, valid, test)):
                raise SessionError("ingest needs train, valid, and test pair files")
            dataset = ingest_mod.load_dataset(table_a, table_b, (train, valid, test))

        subgroups, encodings = ingest_mod.extract_groups(dataset, sensitive, cap=subgroup_cap)
        dataset = dataset.with_groups(sensitive, subgroups, encodings)
        self._dataset = dataset

        data_dir = self.root / "data"
        (data_dir / "tableA.csv").write_text(
            ingest_mod.serialize_table(dataset.left), encoding="utf-8"
        )
        (data_dir / "tableB.csv").write_text(
            ingest_mod.serialize_table(dataset.right), encoding="utf-8"
        )
        for tag in ("train", "valid", "test"):
            (data_dir / f"{tag}.csv").write_text(
                ingest_mod.serialize_pairs(dataset.splits[tag]), encoding="utf-8"
            )
        (self.root / "groups" / "subgroups.json").write_text(
            _dump_json(
                [
                    {"name": sg.name, "index": sg.index, "parents": sorted(sg.parents)}
                    for sg in subgroups
                ]
            ),
            encoding="utf-8",
        )
        (self.root / "groups" / "encodings.json").write_text(
            _dump_json(
                {
                    side: {eid: enc.bitstring() for eid, enc in side_enc.items()}
                    for side, side_enc in encodings.items()
                }
            ),
            encoding="utf-8",
        )
        manifest = {
            "files": {
                "table_a": str(table_a),
                "table_b": str(table_b),
                "train": str(train) if train else None,
                "valid": str(valid) if valid else None,
                "test": str(test) if test else None,
                "pairs": str(pairs) if pairs else None,
            },
            "sensitive": sensitive.to_json(),
            "split_seed": used_split_seed,
            "mode": mode,
        }
        (self.root / "manifest.json").write_text(_dump_json(manifest), encoding="utf-8")

        state.update(state="ingested", mode=mode)
        self._write_state(state)
        if scores is not None:
            self.add_external_scores(scores, scores_name)
        return self.summary()

    # -- dataset access ------------------------------------------------------

    def dataset(self) -> ingest_mod.Dataset:
        if self._dataset is not None:
            return self._dataset
        self._require("ingested")
        data_dir = self.root / "data"
        dataset = ingest_mod.load_dataset(
            data_dir / "tableA.csv",
            data_dir / "tableB.csv",
            (data_dir / "train.csv", data_dir / "valid.csv", data_dir / "test.csv"),
        )
        manifest = json.loads((self.root / "manifest.json").read_text(encoding="utf-8"))
        sensitive = ingest_mod.SensitiveAttributeSpec.from_json(manifest["sensitive"])
        raw_groups = json.loads(
            (self.root / "groups" / "subgroups.json").read_text(encoding="utf-8")
        )
        subgroups = tuple(
            ingest_mod.Subgroup(
                name=g["name"], index=g["index"], parents=frozenset(g["parents"])
            )
            for g in raw_groups
        )
        raw_enc = json.loads(
            (self.root / "groups" / "encodings.json").read_text(encoding="utf-8")
        )
        encodings = {
            side: {
                eid: ingest_mod.GroupEncoding.from_bitstring(bits)
                for eid, bits in side_enc.items()
            }
            for side, side_enc in raw_enc.items()
        }
        self._dataset = dataset.with_groups(sensitive, subgroups, encodings)
        return self._dataset

    def subgroups(self) -> tuple[ingest_mod.Subgroup, ...]:
        return self.dataset().subgroups

    # -- step 2: matchers ----------------------------------------------------

    def add_external_scores(self, path: str | Path, name: str = "scores") -> str:
        self._require("ingested")
        table = matchers_mod.load_external_scores(path, self.dataset(), name)
        self._save_scores(table)
        state = self.state()
        if not any(m["id"] == table.matcher_id for m in state["matchers"]):
            state["matchers"].append(
                {"id": table.matcher_id, "kind": "external",
                 "score_file": f"scores/{_safe_name(table.matcher_id)}.csv"}
            )
        if STATES.index(state["state"]) < STATES.index("matched"):
            state["state"] = "matched"
        self._write_state(state)
        return table.matcher_id

    def train(self, kinds: list[str], seed: int = 0) -> list[str]:
        """Train built-in matchers on this session's splits and score the test pairs."""
        self._require("ingested")
        dataset = self.dataset()
        if not dataset.splits["train"].pairs:
            raise SessionError("training needs a non-empty train split")
        exclude = [a.name for a in dataset.sensitive.attributes]
        schema = matchers_mod.build_feature_schema(dataset.left, dataset.right, exclude=exclude)
        train_pairs = dataset.splits["train"].pairs
        valid_pairs = dataset.splits["valid"].pairs or train_pairs
        test_pairs = dataset.splits["test"].pairs
        train_X = matchers_mod.features_for_pairs(schema, dataset, train_pairs)
        valid_X = matchers_mod.features_for_pairs(schema, dataset, valid_pairs)
        test_X = matchers_mod.features_for_pairs(schema, dataset, test_pairs)
        train_y = [p.label for p in train_pairs]
        valid_y = [p.label for p in valid_pairs]

        state = self.state()
        trained = []
        for kind in kinds:
            if kind not in matchers_mod.BUILTIN_KINDS:
                raise SessionError(f"unknown matcher kind {kind!r}")
            matcher = matchers_mod.train_matcher(
                kind, train_X, train_y, valid_X, valid_y, seed=seed,
                feature_names=schema.feature_names,
            )
            matchers_mod.save_matcher(matcher, self.root / "matchers" / f"{_safe_name(kind)}.json")
            self._save_scores(matchers_mod.predict(matcher, test_pairs, test_X))
            if not any(m["id"] == kind for m in state["matchers"]):
                state["matchers"].append(
                    {"id": kind, "kind": kind,
                     "score_file": f"scores/{_safe_name(kind)}.csv",
                     "params_file": f"matchers/{_safe_name(kind)}.json",
                     "seed": seed}
                )
            trained.append(kind)
        if STATES.index(state["state"]) < STATES.index("matched"):
            state["state"] = "matched"
        self._write_state(state)
        return trained

    def _save_scores(self, table: matchers_mod.ScoreTable) -> None:
        path = self.root / "scores" / f"{_safe_name(table.matcher_id)}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("id1", "id2", "score"))
            for left_id, right_id, score in table.rows:
                writer.writerow((left_id, right_id, repr(score)))

    def matcher_ids(self) -> list[str]:
        return sorted(m["id"] for m in self.state()["matchers"])

    def _load_scores(self, matcher_id: str) -> matchers_mod.ScoreTable:
        path = self.root / "scores" / f"{_safe_name(matcher_id)}.csv"
        if not path.exists():
            raise SessionError(f"no scores for matcher {matcher_id!r}")
        rows = []
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader)
            for left_id, right_id, score in reader:
                rows.append((left_id, right_id, float(score)))
        return matchers_mod.ScoreTable(matcher_id=matcher_id, rows=tuple(rows))

    def workloads(self, tau: float) -> dict[str, audit_mod.Workload]:
        self._require("matched")
        dataset = self.dataset()
        return {
            mid: audit_mod.build_workload(
                self._load_scores(mid), dataset.splits["test"], dataset, tau
            )
            for mid in self.matcher_ids()
        }

    # -- step 3: audit -------------------------------------------------------

    def run_audit(self, config: audit_mod.AuditConfig) -> dict:
        self._require("matched")
        subgroups = self.subgroups()
        workloads = self.workloads(config.tau_match)
        entries: list[dict] = []
        overall: dict[str, dict] = {}
        for mid in self.matcher_ids():
            report = audit_mod.audit(workloads[mid], config, subgroups)
            entries.extend(audit_mod.report_to_json(report))
            overall[mid] = report.overall
        artifact = {"config": config.to_json(), "entries": entries, "overall": overall}
        self._write_report("audit", config.to_json(), artifact)
        state = self.state()
        state["last_audit"] = config.to_json()
        if STATES.index(state["state"]) < STATES.index("audited"):
            state["state"] = "audited"
        self._write_state(state)
        return artifact

    def last_audit_config(self) -> audit_mod.AuditConfig:
        state = self._require("audited")
        return audit_mod.AuditConfig.from_json(state["last_audit"])

    def run_multiworkload(self, k: int, seed: int, alpha_sig: float) -> dict:
        config = self.last_audit_config()
        subgroups = self.subgroups()
        workloads = self.workloads(config.tau_match)
        rows: list[dict] = []
        for mid in self.matcher_ids():
            rows.extend(
                multiworkload_analysis(workloads[mid], config, subgroups, k, seed, alpha_sig)
            )
        artifact = {
            "k": k, "seed": seed, "alpha_sig": alpha_sig,
            "config": config.to_json(), "rows": rows,
        }
        self._write_report("multiworkload", {"k": k, "seed": seed, "alpha_sig": alpha_sig}, artifact)
        return artifact

    def run_explain(self, query: ExplanationQuery, split: str = "train") -> dict:
        config = self.last_audit_config()
        ctx = AuditContext(
            dataset=self.dataset(), workloads=self.workloads(config.tau_match), config=config
        )
        artifact = explain(query, ctx, split=split)
        self._write_report(
            "explain",
            {"matcher": query.matcher_id, "group": query.group, "measure": query.measure_id,
             "paradigm": query.paradigm, "sample_size": query.sample_size,
             "seed": query.seed, "split": split},
            artifact,
        )
        return artifact

    # -- step 4: resolution --------------------------------------------------

    def run_resolve(self, config: resolve_mod.ResolutionConfig) -> dict:
        audit_config = self.last_audit_config()
        workloads = self.workloads(audit_config.tau_match)
        resolution = resolve_mod.resolve(workloads, self.subgroups(), config)
        artifact = resolve_mod.resolution_to_json(resolution)
        self._write_report("resolution", config.to_json(), artifact)
        state = self.state()
        state["state"] = "resolved"
        self._write_state(state)
        return artifact

    def run_strategy(self, assignment: dict[str, str]) -> dict:
        self._require("resolved")
        audit_config = self.last_audit_config()
        workloads = self.workloads(audit_config.tau_match)
        report = resolve_mod.audit_strategy(
            assignment, workloads, audit_config, self.subgroups()
        )
        artifact = {
            "assignment": dict(sorted(assignment.items())),
            "config": report.config.to_json(),
            "entries": audit_mod.report_to_json(report),
            "overall": report.overall,
        }
        self._write_report("strategy", artifact["assignment"], artifact)
        return artifact

    # -- reporting helpers ---------------------------------------------------

    def _write_report(self, kind: str, request: dict, artifact: dict) -> Path:
        path = self.root / "reports" / f"{kind}-{_request_hash(request)}.json"
        path.write_text(_dump_json(artifact), encoding="utf-8")
        return path

    def cached_report(self, kind: str, request: dict) -> dict | None:
        path = self.root / "reports" / f"{kind}-{_request_hash(request)}.json"
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return None

    def summary(self) -> dict:
        state = self.state()
        dataset = self.dataset()
        return {
            "state": state["state"],
            "mode": state["mode"],
            "tables": {"left": len(dataset.left.rows), "right": len(dataset.right.rows)},
            "splits": {
                tag: {"pairs": len(split.pairs), "matches": split.match_count()}
                for tag, split in dataset.splits.items()
            },
            "subgroups": [sg.name for sg in dataset.subgroups],
            "matchers": self.matcher_ids(),
        }
