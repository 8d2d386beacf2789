"""Manifests, result rows and their on-disk formats.

A persisted run is a directory holding ``manifest.txt`` (``key = value``
lines, ``#`` comments), ``results.csv`` and ``metadata.json``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass

from .. import levy_models as lm

SCHEMA_VERSION = 1
EXPERIMENT_KINDS = ("clt", "lil", "bm_lil", "validate")
MANIFEST_KEYS = ("kind", "model", "theta", "lambda", "jump", "rate", "n_grid",
                 "replicates", "master_seed", "epsilon", "schema_version")
# bm_lil also needs the kernel exponent and the grid step
EXTRA_KEYS = ("alpha", "step")
CSV_COLUMNS = ("n", "raw", "centering", "normalization", "normalized", "replicate", "stream_id")
NA = "-"


class ManifestError(ValueError):
    pass


class SchemaVersionError(ManifestError):
    def __init__(self, found, expected):
        super().__init__(f"schema_version mismatch: file has {found}, this build reads {expected}")
        self.found = found
        self.expected = expected


def parse_number_list(text: str) -> list[float]:
    """``1e3,1e4`` or ``geo:1e3:1e6:4`` (k points, geometric, endpoints included)."""
    text = str(text).strip()
    if not text:
        raise ValueError("empty number list")
    if text.startswith("geo:"):
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"geometric range must be geo:start:stop:count, got {text!r}")
        a, b, k = float(parts[1]), float(parts[2]), int(parts[3])
        if not (a > 0 and b >= a and k >= 1):
            raise ValueError(f"bad geometric range {text!r}")
        if k == 1:
            return [a]
        r = (b / a) ** (1.0 / (k - 1))
        out = [a * r ** j for j in range(k)]
        out[-1] = b
        # snap values that are integers up to rounding
        return [float(round(v)) if abs(v - round(v)) < 1e-9 * v else v for v in out]
    return [float(tok) for tok in text.split(",") if tok.strip()]


def parse_int_grid(text: str) -> list[int]:
    vals = parse_number_list(text)
    out = []
    for v in vals:
        n = int(round(v))
        if n < 1:
            raise ValueError(f"grid entry {v} is not a positive integer")
        if not out or n != out[-1]:
            out.append(n)
    return out


def _fmt(x) -> str:
    if x is None:
        return NA
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _opt_float(s: str):
    return None if s == NA else float(s)


@dataclass(frozen=True)
class ExperimentManifest:
    """Everything needed to reproduce one experiment bit for bit.

    ``model`` is the model kind (``gamma``, ``gammalike``, ``cp``) or, for
    ``bm_lil``, the kernel kind (``power``, ``power_log``).  ``jump`` encodes
    a compound-Poisson jump law as ``exp`` (with ``rate``), ``det:a`` or
    ``table:v1/p1;v2/p2``.  ``epsilon`` of ``None`` means "choose
    automatically".
    """

    kind: str
    model: str
    n_grid: str
    replicates: int
    master_seed: int
    theta: float | None = None
    lam: float | None = None
    jump: str | None = None
    rate: float | None = None
    epsilon: float | None = None
    schema_version: int = SCHEMA_VERSION
    alpha: float | None = None
    step: float | None = None

    def validate(self) -> "ExperimentManifest":
        if self.kind not in EXPERIMENT_KINDS:
            raise ManifestError(f"unknown experiment kind {self.kind!r}")
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise ManifestError(f"replicates must be a positive integer, got {self.replicates!r}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ManifestError("master_seed must fit in 64 unsigned bits")
        if self.schema_version != SCHEMA_VERSION:
            raise SchemaVersionError(self.schema_version, SCHEMA_VERSION)
        try:
            grid = parse_number_list(self.n_grid)
        except ValueError as exc:
            raise ManifestError(f"bad n_grid: {exc}") from None
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ManifestError("n_grid must be increasing")
        if self.epsilon is not None and self.epsilon < 0:
            raise ManifestError("epsilon must be nonnegative")
        if self.kind == "bm_lil":
            if self.model not in ("power", "power_log"):
                raise ManifestError(f"bm_lil kernel must be power or power_log, got {self.model!r}")
            if not (self.alpha and self.alpha > 0 and self.step and self.step > 0):
                raise ManifestError("bm_lil needs positive alpha and step")
        elif self.kind != "validate":
            self.levy_model()
        return self

    def levy_model(self) -> lm.LevyModel:
        try:
            if self.model in (lm.GAMMA, lm.GAMMA_LIKE):
                if self.theta is None or self.lam is None:
                    raise ManifestError("gamma-type models need theta and lambda")
                return lm.LevyModel(self.model, float(self.theta), float(self.lam))
            if self.model == lm.COMPOUND_POISSON:
                return lm.LevyModel.compound_poisson(decode_jump(self.jump, self.rate))
        except lm.ModelError as exc:
            raise ManifestError(str(exc)) from None
        raise ManifestError(f"unknown model {self.model!r}")

    @classmethod
    def for_model(cls, kind: str, model: lm.LevyModel, n_grid: str, replicates: int,
                  master_seed: int, epsilon: float | None = None) -> "ExperimentManifest":
        if model.is_cp:
            jump, rate = encode_jump(model.jump)
            return cls(kind, lm.COMPOUND_POISSON, n_grid, replicates, master_seed,
                       jump=jump, rate=rate, epsilon=epsilon)
        return cls(kind, model.kind, n_grid, replicates, master_seed,
                   theta=model.theta, lam=model.lam, epsilon=epsilon)

    def to_text(self) -> str:
        vals = {
            "kind": self.kind, "model": self.model, "theta": self.theta, "lambda": self.lam,
            "jump": self.jump, "rate": self.rate, "n_grid": self.n_grid,
            "replicates": self.replicates, "master_seed": self.master_seed,
            "epsilon": self.epsilon, "schema_version": self.schema_version,
            "alpha": self.alpha, "step": self.step,
        }
        lines = ["# regen_lil experiment manifest"]
        for key in MANIFEST_KEYS:
            lines.append(f"{key} = {_fmt(vals[key])}")
        for key in EXTRA_KEYS:
            if vals[key] is not None:
                lines.append(f"{key} = {_fmt(vals[key])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentManifest":
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ManifestError(f"line {lineno}: expected 'key = value'")
            k, v = (p.strip() for p in line.split("=", 1))
            if k not in MANIFEST_KEYS and k not in EXTRA_KEYS:
                raise ManifestError(f"line {lineno}: unknown key {k!r}")
            if k in raw:
                raise ManifestError(f"line {lineno}: duplicate key {k!r}")
            raw[k] = v
        missing = [k for k in MANIFEST_KEYS if k not in raw]
        if missing:
            raise ManifestError(f"manifest missing keys: {', '.join(missing)}")
        try:
            version = int(raw["schema_version"])
        except ValueError:
            raise ManifestError("schema_version must be an integer") from None
        if version != SCHEMA_VERSION:
            raise SchemaVersionError(version, SCHEMA_VERSION)
        try:
            return cls(
                kind=raw["kind"], model=raw["model"], n_grid=raw["n_grid"],
                replicates=int(raw["replicates"]), master_seed=int(raw["master_seed"]),
                theta=_opt_float(raw["theta"]), lam=_opt_float(raw["lambda"]),
                jump=None if raw["jump"] == NA else raw["jump"], rate=_opt_float(raw["rate"]),
                epsilon=_opt_float(raw["epsilon"]), schema_version=version,
                alpha=_opt_float(raw.get("alpha", NA)), step=_opt_float(raw.get("step", NA)),
            )
        except ValueError as exc:
            raise ManifestError(f"bad manifest value: {exc}") from None


def encode_jump(jump: lm.JumpDist) -> tuple[str, float | None]:
    if jump.kind == "exp":
        return "exp", jump.rate
    if jump.kind == "det":
        return f"det:{jump.value!r}", None
    return "table:" + ";".join(f"{v!r}/{p!r}" for v, p in zip(jump.values, jump.probs)), None


def decode_jump(text: str | None, rate: float | None) -> lm.JumpDist:
    if text is None:
        raise ManifestError("compound Poisson manifest needs a jump entry")
    if text == "exp":
        return lm.JumpDist.exponential(1.0 if rate is None else rate)
    if text.startswith("det:"):
        return lm.JumpDist.deterministic(float(text[4:]))
    if text.startswith("table:"):
        pairs = [p.split("/") for p in text[6:].split(";")]
        return lm.JumpDist.table([float(v) for v, _ in pairs], [float(p) for _, p in pairs])
    raise ManifestError(f"unknown jump encoding {text!r}")


@dataclass(frozen=True)
class ResultRecord:
    n: float
    raw: float
    centering: float
    normalization: float
    normalized: float
    replicate: int
    stream_id: str

    @classmethod
    def build(cls, n, raw, centering, normalization, replicate, stream_id):
        return cls(n, raw, centering, normalization, (raw - centering) / normalization,
                   replicate, stream_id)


def _num(x) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return "%.17g" % x


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_num(r.n), _num(r.raw), _num(r.centering), _num(r.normalization),
                    _num(r.normalized), str(r.replicate), r.stream_id])
    return buf.getvalue()


def _parse_num(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def records_from_csv(text: str) -> list[ResultRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ManifestError(f"CSV header must be {','.join(CSV_COLUMNS)}")
    out = []
    for row in rows[1:]:
        n, raw, c, z, norm, rep, sid = row
        out.append(ResultRecord(_parse_num(n), _parse_num(raw), float(c), float(z),
                                float(norm), int(rep), sid))
    return out


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def persist(manifest: ExperimentManifest, records, path, metadata: dict | None = None) -> None:
    """Write ``manifest.txt``, ``results.csv`` and ``metadata.json`` under ``path``."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "manifest.txt"), "w", newline="\n") as fh:
        fh.write(manifest.to_text())
    with open(os.path.join(path, "results.csv"), "w", newline="") as fh:
        fh.write(records_to_csv(records))
    with open(os.path.join(path, "metadata.json"), "w", newline="\n") as fh:
        json.dump(_json_safe(metadata or {}), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> ExperimentManifest:
    mpath = os.path.join(path, "manifest.txt") if os.path.isdir(path) else path
    with open(mpath) as fh:
        return ExperimentManifest.from_text(fh.read())


def load(path):
    """Inverse of :func:`persist`: returns ``(manifest, records)``."""
    manifest = load_manifest(path)
    with open(os.path.join(path, "results.csv"), newline="") as fh:
        records = records_from_csv(fh.read())
    return manifest, records


def load_metadata(path) -> dict:
    with open(os.path.join(path, "metadata.json")) as fh:
        return json.load(fh)
