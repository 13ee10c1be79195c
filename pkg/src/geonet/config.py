"""Strict JSON run configuration.

Every section is a frozen dataclass; unknown keys, duplicate keys, wrong
types and non-positive tolerances raise :class:`ConfigError` carrying the
dotted field path and, when the source text is known, its line number.
``RunConfig.from_dict(cfg.to_dict()) == cfg`` holds for every valid config.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import shooting
from .errors import ConfigError, DomainError
from .metrics import metric_from_spec

SCHEMA = "geonet.config/1"
U64_MAX = 2 ** 64 - 1


@dataclass(frozen=True)
class OdeConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    mesh_steps: int = 0  # 0 selects the per-space default


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-9
    max_iters: int = 20


@dataclass(frozen=True)
class BvpConfig:
    fd_step: float = 1e-6
    max_iters: int = 30


@dataclass(frozen=True)
class FdConfig:
    step_x: float = 1e-5
    step_frame: float = 1e-5
    step_hessian: float = 3e-4


@dataclass(frozen=True)
class SearchConfig:
    grad_tol: float = 1e-8
    max_outer: int = 40
    polish_steps: int = 2
    inertia_cutoff: float = 1e-6


@dataclass(frozen=True)
class MultistartConfig:
    count: int = 64
    seed: int = 0


@dataclass(frozen=True)
class DedupConfig:
    tol: float = 1e-6


@dataclass(frozen=True)
class VerifyConfig:
    tol: float = 1e-5


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    report: str = "report.json"
    networks: str = "networks.csv"
    resolution: int = 100


SECTIONS = {
    "ode": OdeConfig, "newton": NewtonConfig, "bvp": BvpConfig, "fd": FdConfig,
    "search": SearchConfig, "multistart": MultistartConfig, "dedup": DedupConfig,
    "verify": VerifyConfig, "output": OutputConfig,
}
# integer fields that may be zero; every other number must be > 0
NON_NEGATIVE = {("ode", "mesh_steps"), ("search", "polish_steps"), ("multistart", "seed")}
METRIC_KEYS = {"space", "dim", "kind", "epsilon", "poly"}
TERM_KEYS = {"coeff", "powers", "entry"}


@dataclass(frozen=True)
class RunConfig:
    space: str
    dim: int
    metric: dict
    ode: OdeConfig = field(default_factory=OdeConfig)
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    bvp: BvpConfig = field(default_factory=BvpConfig)
    fd: FdConfig = field(default_factory=FdConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    multistart: MultistartConfig = field(default_factory=MultistartConfig)
    dedup: DedupConfig = field(default_factory=DedupConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def mesh_steps(self):
        if self.ode.mesh_steps:
            return self.ode.mesh_steps
        return shooting.BALL_MESH if self.space == "ball" else shooting.SEARCH_MESH

    def build_metric(self):
        return metric_from_spec(self.metric)

    def search_options(self):
        from .search import SearchOptions

        return SearchOptions(
            starts=self.multistart.count, seed=self.multistart.seed,
            grad_tol=self.search.grad_tol, max_outer=self.search.max_outer,
            polish_steps=self.search.polish_steps, inner_tol=self.newton.tol,
            inner_max_iters=self.newton.max_iters, inner_jac_step=self.fd.step_hessian,
            grad_step=self.fd.step_x, frame_step=self.fd.step_frame,
            hessian_step=self.fd.step_hessian, inertia_cutoff=self.search.inertia_cutoff,
            dedup_tol=self.dedup.tol, verify_tol=self.verify.tol)

    def with_seed(self, seed):
        seed = _check_seed(seed, "multistart.seed")
        return replace(self, multistart=replace(self.multistart, seed=seed))

    def to_dict(self):
        out = {"schema": SCHEMA, "space": self.space, "dim": self.dim, "metric": _canonical_metric(self.metric)}
        for name in SECTIONS:
            out[name] = asdict(getattr(self, name))
        return out

    @classmethod
    def from_dict(cls, data, text=None):
        return _parse(data, text)


def _err(msg, path, text=None):
    line = _locate(text, path) if text is not None else None
    return ConfigError(msg, path if line is None else f"{path} (line {line})")


def _locate(text, path):
    """Best-effort line number of a dotted key path inside JSON ``text``."""
    pos = 0
    for key in path.split("."):
        if key.isdigit():
            continue
        i = text.find(f'"{key}"', pos)
        if i < 0:
            return None
        pos = i + 1
    return text.count("\n", 0, pos) + 1


def _check_seed(seed, path, text=None):
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= U64_MAX:
        raise _err(f"seed must be an unsigned 64-bit integer, got {seed!r}", path, text)
    return seed


def _check_number(value, ftype, path, text, positive):
    if isinstance(value, bool):
        raise _err(f"expected {ftype.__name__}, got bool", path, text)
    if ftype is int:
        if not isinstance(value, int):
            raise _err(f"expected an integer, got {value!r}", path, text)
    elif ftype is float:
        if not isinstance(value, (int, float)):
            raise _err(f"expected a number, got {value!r}", path, text)
        value = float(value)
        if value != value or value in (float("inf"), float("-inf")):
            raise _err("must be finite", path, text)
    if positive and value <= 0:
        raise _err(f"must be > 0, got {value}", path, text)
    if positive is False and value < 0:
        raise _err(f"must be >= 0, got {value}", path, text)
    return value


def _parse_section(name, cls, data, text):
    if not isinstance(data, dict):
        raise _err("expected an object", name, text)
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            raise _err(f"unknown key (allowed: {', '.join(known)})", f"{name}.{key}", text)
    kwargs = {}
    for key, value in data.items():
        path = f"{name}.{key}"
        ftype = {"float": float, "int": int, "str": str}[known[key].type]
        if ftype is str:
            if not isinstance(value, str) or not value:
                raise _err("expected a non-empty string", path, text)
        elif (name, key) == ("multistart", "seed"):
            value = _check_seed(value, path, text)
        else:
            value = _check_number(value, ftype, path, text, (name, key) not in NON_NEGATIVE)
        kwargs[key] = value
    return cls(**kwargs)


def _canonical_metric(metric):
    out = {"space": metric["space"], "dim": metric["dim"], "kind": metric["kind"],
           "epsilon": metric["epsilon"], "poly": []}
    for t in metric["poly"]:
        term = {"coeff": t["coeff"], "powers": list(t["powers"])}
        if "entry" in t:
            term["entry"] = list(t["entry"])
        out["poly"].append(term)
    return out


def _parse_metric(data, space, dim, text):
    if not isinstance(data, dict):
        raise _err("expected an object", "metric", text)
    for key in data:
        if key not in METRIC_KEYS:
            raise _err(f"unknown key (allowed: {', '.join(sorted(METRIC_KEYS))})", f"metric.{key}", text)
    if data.get("space", space) != space:
        raise _err(f"metric space {data['space']!r} differs from run space {space!r}", "metric.space", text)
    if data.get("dim", dim) != dim:
        raise _err(f"metric dim {data['dim']!r} differs from run dim {dim}", "metric.dim", text)
    kind = data.get("kind", "standard")
    if not isinstance(kind, str):
        raise _err("expected a string", "metric.kind", text)
    eps = _check_number(data.get("epsilon", 0.0), float, "metric.epsilon", text, positive=False)
    poly = data.get("poly", [])
    if not isinstance(poly, list):
        raise _err("expected a list of terms", "metric.poly", text)
    terms = []
    for i, t in enumerate(poly):
        path = f"metric.poly.{i}"
        if not isinstance(t, dict):
            raise _err("expected an object", path, text)
        for key in t:
            if key not in TERM_KEYS:
                raise _err("unknown key (allowed: coeff, powers, entry)", f"{path}.{key}", text)
        if "coeff" not in t or "powers" not in t:
            raise _err("terms need 'coeff' and 'powers'", path, text)
        term = {"coeff": _check_number(t["coeff"], float, f"{path}.coeff", text, positive=None),
                "powers": t["powers"]}
        if not isinstance(t["powers"], list) or not all(isinstance(p, int) and not isinstance(p, bool)
                                                        for p in t["powers"]):
            raise _err("powers must be a list of integers", f"{path}.powers", text)
        if "entry" in t:
            if kind != "bilinear":
                raise _err("'entry' is only valid for bilinear metrics", f"{path}.entry", text)
            term["entry"] = t["entry"]
        elif kind == "bilinear":
            raise _err("bilinear terms need an 'entry' [i, j]", path, text)
        terms.append(term)
    spec = {"space": space, "dim": dim, "kind": kind, "epsilon": eps, "poly": terms}
    try:
        metric_from_spec(spec)
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        raise _err(str(exc), "metric", text) from None
    return spec


def _parse(data, text=None):
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", "")
    allowed = {"schema", "space", "dim", "metric", *SECTIONS}
    for key in data:
        if key not in allowed:
            raise _err(f"unknown key (allowed: {', '.join(sorted(allowed))})", key, text)
    schema = data.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise _err(f"unsupported schema {schema!r}, expected {SCHEMA!r}", "schema", text)
    for key in ("space", "dim", "metric"):
        if key not in data:
            raise _err("missing required key", key, text)
    space = data["space"]
    if space not in ("ball", "sphere"):
        raise _err(f"must be 'ball' or 'sphere', got {space!r}", "space", text)
    dim = data["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 2:
        raise _err(f"must be an integer >= 2, got {dim!r}", "dim", text)
    metric = _parse_metric(data["metric"], space, dim, text)
    sections = {name: _parse_section(name, cls, data.get(name, {}), text) for name, cls in SECTIONS.items()}
    return RunConfig(space=space, dim=dim, metric=metric, **sections)


def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", key)
        out[key] = value
    return out


def loads(text):
    """Parse and validate a config from JSON text."""
    try:
        data = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}", "") from None
    except ConfigError as exc:
        hits = [m.start() for m in re.finditer(rf'"{re.escape(exc.where)}"\s*:', text)]
        where = exc.where if len(hits) < 2 else f"{exc.where} (line {text.count(chr(10), 0, hits[1]) + 1})"
        raise ConfigError(f"duplicate key {exc.where!r}", where) from None
    return RunConfig.from_dict(data, text)


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", "") from None
    return loads(text)


def dumps(config):
    return json.dumps(config.to_dict(), indent=2) + "\n"
