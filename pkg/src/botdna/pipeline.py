"""End-to-end pipeline with persisted, hashed stage artifacts."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .alignment import AlignmentScoring, align_family, write_fasta
from .clustering import BadK, FamilyAssignment, average_linkage, cut_tree, validation_metrics
from .evolution import (
    EventStudyConfig,
    between_family_density,
    event_study,
    family_mutation_set,
    family_shared_matrix,
    scan_mutations,
    transfer_analysis,
)
from .ingestion import NoValidRows, SequenceEncoder, filter_years, parse_trace_file
from .mutations import detect_family_mutations, mutation_stats, write_events_csv
from .profile import profile_families, write_segment_csv
from .similarity import (
    BlockVectorizer,
    SimilarityMatrix,
    cosine_matrix,
    to_dissimilarity,
    write_matrix_binary,
    write_matrix_csv,
)

log = logging.getLogger(__name__)

STAGES = ("ingest", "encode", "similarity", "cluster", "profile", "align", "mutations", "evolution")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"stage {stage!r} failed: {exc}")
        self.stage = stage
        self.__cause__ = exc


@dataclass
class PipelineConfig:
    input: str = ""
    input_format: str | None = None
    year_range: tuple[int, int] = (2009, 2020)
    k: int = 4
    family_names: dict[str, str] = field(default_factory=dict)
    match: int = 2
    partial: int = 1
    mismatch: int = -1
    gap: int = -2
    trend_threshold: float = 0.01
    transfer_group_size: int = 10
    validation_k_max: int = 8
    events: list[dict] = field(default_factory=lambda: [
        EventStudyConfig.preset("christmas").to_dict(),
        EventStudyConfig.preset("halloween").to_dict(),
    ])
    output_dir: str = "out"
    seed: int = 0
    threads: int = 1

    def validate(self):
        if self.input_format not in (None, "jsonl", "csv"):
            raise ConfigError(f"input_format must be jsonl or csv, not {self.input_format!r}")
        lo, hi = self.year_range
        if lo > hi:
            raise ConfigError("year_range start after end")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not self.match > self.partial or self.gap >= 0:
            raise ConfigError("scoring requires match > partial and a negative gap")
        if self.trend_threshold < 0:
            raise ConfigError("trend_threshold must be >= 0")
        if self.transfer_group_size < 1 or self.validation_k_max < 2:
            raise ConfigError("transfer_group_size >= 1 and validation_k_max >= 2 required")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for e in self.events:
            try:
                EventStudyConfig(**_event_kwargs(e))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad event config: {exc}") from None
        return self

    @property
    def scoring(self):
        return AlignmentScoring(self.match, self.partial, self.mismatch, self.gap)

    def to_dict(self):
        d = asdict(self)
        d["year_range"] = list(self.year_range)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "year_range" in d:
            d["year_range"] = tuple(d["year_range"])
        return cls(**d).validate()

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        Path(path).write_text(_dumps(self.to_dict()) + "\n", encoding="utf-8")


def _event_kwargs(e):
    e = dict(e)
    e["emojis"] = tuple(e.get("emojis", ()))
    return e


def _dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, ensure_ascii=False, indent=1)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# fields that may not influence any artifact byte
RUNTIME_FIELDS = ("input", "output_dir", "threads")


class Run:
    """Mutable state of one pipeline run; artifacts land in ``out``."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        params = {k: v for k, v in cfg.to_dict().items() if k not in RUNTIME_FIELDS}
        self.manifest = {"config": params, "stages": []}
        self.report = {}
        # each stage hash covers its own params and artifacts plus the previous hash
        self._upstream = hashlib.sha256(b"botdna-manifest").hexdigest()

    def record(self, stage, params, files):
        entry = {
            "stage": stage,
            "params": _plain(params),
            "artifacts": {f: sha256(self.out / f) for f in files},
            "upstream": self._upstream,
        }
        entry["hash"] = hashlib.sha256(_dumps(entry).encode()).hexdigest()
        self._upstream = entry["hash"]
        self.manifest["stages"].append(entry)

    def write_json(self, name, obj):
        (self.out / name).write_text(_dumps(obj) + "\n", encoding="utf-8")

    # -- stages ------------------------------------------------------------

    def ingest(self):
        cfg = self.cfg
        corpus = parse_trace_file(cfg.input, cfg.input_format)
        corpus = filter_years(corpus, *cfg.year_range)
        if not corpus.accounts:
            raise NoValidRows("no records inside year_range")
        self.corpus = corpus
        self.report["skip_report"] = corpus.report.to_dict()
        with open(self.out / "corpus.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for rec in corpus.records():
                fh.write(json.dumps(asdict(rec), sort_keys=True, ensure_ascii=False) + "\n")
        self.write_json("skip_report.json", corpus.report.to_dict())
        self.record("ingest", {"year_range": cfg.year_range, "input_format": cfg.input_format,
                               "input_sha256": sha256(cfg.input)},
                    ["corpus.jsonl", "skip_report.json"])

    def encode(self):
        self.sequences = SequenceEncoder().fit_transform(self.corpus)
        with open(self.out / "sequences.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for s in self.sequences:
                fh.write(json.dumps({"account_id": s.account_id, "blocks": list(s.blocks)}) + "\n")
        self.record("encode", {}, ["sequences.jsonl"])

    def similarity(self):
        counts = BlockVectorizer().fit_transform(self.sequences)
        self.counts = counts
        ids = [s.account_id for s in self.sequences]
        self.sim = SimilarityMatrix(ids, cosine_matrix(counts, self.cfg.threads))
        write_matrix_csv(self.sim, self.out / "similarity.csv")
        write_matrix_binary(self.sim, self.out / "similarity.bin")
        self.record("similarity", {"k_mer": 7, "overlap": False}, ["similarity.csv", "similarity.bin"])

    def cluster(self):
        cfg = self.cfg
        m = len(self.sequences)
        if not 1 <= cfg.k <= m:
            raise BadK(f"k={cfg.k} outside 1..{m}")
        D = to_dissimilarity(self.sim)
        self.dendrogram = dg = average_linkage(D)
        names = {int(k): v for k, v in cfg.family_names.items()}
        self.assignment = FamilyAssignment(list(self.sim.account_ids), cut_tree(dg, cfg.k), cfg.k, names)
        self.assignment.write_csv(self.out / "families.csv")
        (self.out / "dendrogram.nwk").write_text(
            dg.to_newick(self.assignment.account_ids) + "\n", encoding="utf-8")
        k_range = range(2, min(cfg.validation_k_max, m - 1) + 1)
        metrics = validation_metrics(D, self.counts, dg, k_range) if len(k_range) else {}
        self.write_json("validation.json", {"k": cfg.k, "names": names, "metrics": metrics})
        self.record("cluster", {"k": cfg.k, "linkage": "average", "family_names": cfg.family_names,
                                "validation_k_max": cfg.validation_k_max},
                    ["families.csv", "dendrogram.nwk", "validation.json"])

    def _family_sequences(self):
        by_id = {s.account_id: s for s in self.sequences}
        return {f: [by_id[a] for a in self.assignment.members(f)] for f in self.assignment.families}

    def profile(self):
        profiles = profile_families(self._family_sequences(), self.cfg.trend_threshold)
        self.profiles = profiles
        self.report["short_sequences"] = sum(p.n_short for p in profiles.values())
        self.write_json("profiles.json", {f: p.to_dict() for f, p in profiles.items()})
        write_segment_csv(profiles, self.out / "segments.csv")
        self.record("profile", {"trend_threshold": self.cfg.trend_threshold, "top_n": 10},
                    ["profiles.json", "segments.csv"])

    def align(self):
        scoring = self.cfg.scoring
        self.aligned = {
            f: align_family(f, seqs, scoring, self.cfg.threads)
            for f, seqs in self._family_sequences().items()
        }
        write_fasta(self.aligned, self.out / "alignment.fasta")
        self.record("align", asdict(scoring), ["alignment.fasta"])

    def mutations(self):
        events, stats = [], {}
        for f, af in self.aligned.items():
            ev = detect_family_mutations(af)
            events.extend(ev)
            stats[f] = mutation_stats(ev, af).to_dict()
        self.events = events
        self.report["unclassified"] = sum(1 for e in events if e.type.value == "Unclassified")
        write_events_csv(events, self.out / "mutation_events.csv")
        self.write_json("mutation_stats.json", stats)
        self.record("mutations", {"min_equal_letters": 4, "pairs": "ordered"},
                    ["mutation_events.csv", "mutation_stats.json"])

    def evolution(self):
        cfg = self.cfg
        fam_seqs = self._family_sequences()
        scans = {s.account_id: scan_mutations(s) for s in self.sequences}
        shared, family_sets, transfers = {}, {}, {}
        files = []
        for f, seqs in fam_seqs.items():
            ids = [s.account_id for s in seqs]
            family_sets[f] = family_mutation_set(scans[a] for a in ids)
            if len(ids) >= 2:
                mat = family_shared_matrix(f, {a: scans[a] for a in ids})
                shared[f] = mat.summary
                name = f"shared_matrix_f{f}.csv"
                _write_square_csv(self.out / name, ids, mat.values)
                files.append(name)
                res = transfer_analysis(f, ids, scans, self.sim, cfg.transfer_group_size)
                transfers[f] = {
                    "most_related": res["most_related"].to_dict(),
                    "least_related": res["least_related"].to_dict(),
                    "most": res["most"], "least": res["least"],
                }
        density = []
        for a, b in combinations(sorted(family_sets), 2):
            n_shared, d = between_family_density(family_sets[a], family_sets[b])
            density.append({"families": [a, b], "first": len(family_sets[a]),
                            "second": len(family_sets[b]), "shared": n_shared, "density": d})
        self.evolution_report = {"shared_within": shared, "density_between": density,
                                 "transfers": transfers}
        self.write_json("evolution.json", self.evolution_report)
        files.insert(0, "evolution.json")
        files += self.event_study()
        self.record("evolution", {"transfer_group_size": cfg.transfer_group_size,
                                  "events": cfg.events}, files)

    def event_study(self):
        reports = {}
        monthly_rows, daily_rows = [], []
        for e in self.cfg.events:
            ecfg = EventStudyConfig(**_event_kwargs(e))
            rep = event_study(self.corpus, self.assignment, ecfg, self.sim)
            reports[ecfg.name] = rep
            for fam, r in rep.items():
                for month, n in enumerate(r["monthly"], start=1):
                    monthly_rows.append([ecfg.name, fam, month, n])
                for acc, counts in r["daily"].items():
                    for off, n in zip(range(-ecfg.window, ecfg.window + 1), counts):
                        daily_rows.append([ecfg.name, fam, acc, off, n])
        self.events_report = reports
        self.write_json("events.json", reports)
        _write_rows(self.out / "event_monthly.csv", ["event", "family", "month", "count"], monthly_rows)
        _write_rows(self.out / "event_daily.csv",
                    ["event", "family", "account_id", "day_offset", "count"], daily_rows)
        return ["events.json", "event_monthly.csv", "event_daily.csv"]


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_square_csv(path, ids, values):
    _write_rows(path, ["account_id", *ids],
                [[a, *(repr(float(x)) for x in row)] for a, row in zip(ids, values)])


def run_pipeline(cfg: PipelineConfig, until: str = "evolution", events_only: bool = False) -> Run:
    """Run stages in order up to and including ``until``; write ``manifest.json``.

    With ``events_only`` the evolution stage is replaced by the event study.
    """
    cfg.validate()
    if until not in STAGES:
        raise ConfigError(f"unknown stage {until!r}")
    run = Run(cfg)
    run.out.mkdir(parents=True, exist_ok=True)
    for stage in STAGES[: STAGES.index(until) + 1]:
        log.info("stage %s", stage)
        try:
            if stage == "evolution" and events_only:
                files = run.event_study()
                run.record("events", {"events": cfg.events}, files)
            else:
                getattr(run, stage)()
        except (OSError, ValueError) as exc:
            if isinstance(exc, OSError) or stage == "ingest":
                raise
            raise StageError(stage, exc) from exc
    run.manifest["report"] = run.report
    (run.out / "manifest.json").write_text(_dumps(run.manifest) + "\n", encoding="utf-8")
    return run
