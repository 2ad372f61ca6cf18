"""Run configuration: flat INI files mapped onto a validated :class:`RunConfig`."""

from __future__ import annotations

import configparser
import inspect
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import benchmarks
from .material_models import Softening
from .mesh import load_mesh
from .solver import Formulation, SolverConfig, StepSchedule

SCALE_KEYS = {"scale_u": "u", "scale_phi": "phi", "scale_theta": "theta", "scale_lam": "lam"}

_SCHEMA: dict[str, tuple[str, ...]] = {
    "run": ("benchmark", "mesh", "output", "snapshot_every", "reference"),
    "model": ("length_scale", "band_h", "coarse_factor", "softening"),
    "solver": (
        "formulation", "tol", "max_iters", "eta", "max_steps", "u_end",
        "stop_load_fraction", "max_halvings", "max_reseeds", *SCALE_KEYS,
    ),
    "schedule": ("phases", "end"),
}


class ConfigError(ValueError):
    """Invalid configuration; carries the offending field and file location when known."""

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None, column: int | None = None):
        where = f"line {line}" + (f", column {column}" if column else "") if line else ""
        prefix = ": ".join(p for p in (where, field and f"field {field!r}") if p)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.field = field
        self.line = line
        self.column = column


@dataclass(frozen=True)
class RunConfig:
    benchmark: str = "sent"
    mesh_path: Path | None = None
    output: Path = Path("out")
    snapshot_every: int = 0
    references: tuple[Path, ...] = ()
    model: dict = field(default_factory=dict)  # builder overrides actually set
    solver: SolverConfig = field(default_factory=SolverConfig)
    phases: tuple[tuple[int | None, float], ...] | None = None
    schedule_end: float | None = None

    def schedule(self, problem: benchmarks.BenchmarkProblem) -> StepSchedule:
        if self.phases is None:
            return problem.schedule
        end = self.schedule_end if self.schedule_end is not None else problem.u_end
        return StepSchedule.until(self.phases, end)

    def build_problem(self) -> benchmarks.BenchmarkProblem:
        problem = benchmarks.build(self.benchmark, **self.model)
        if self.mesh_path is not None:
            problem = replace(problem, mesh=load_mesh(self.mesh_path))
        if self.phases is not None:
            problem = problem.with_schedule(self.schedule(problem))
        return problem


def _key_locations(text: str) -> dict[tuple[str, str], tuple[int, int]]:
    """Map (section, key) to its 1-based (line, column) in the raw text."""
    out, section = {}, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            continue
        if section is not None and "=" in s:
            key = s.split("=", 1)[0].strip().lower()
            out.setdefault((section, key), (lineno, raw.index(s[0]) + 1))
    return out


def _parse_phases(text: str, field_name: str) -> tuple[tuple[int | None, float], ...]:
    phases = []
    for part in text.split(","):
        if "@" not in part:
            raise ConfigError(f"expected 'count @ increment', got {part.strip()!r}", field=field_name)
        count, du = (p.strip() for p in part.split("@", 1))
        try:
            n = None if count == "*" else int(count)
            d = float(du)
        except ValueError:
            raise ConfigError(f"cannot parse phase {part.strip()!r}", field=field_name) from None
        if (n is not None and n <= 0) or d == 0 or not math.isfinite(d):
            raise ConfigError(f"phase {part.strip()!r} needs a positive count and a nonzero increment", field=field_name)
        phases.append((n, d))
    return tuple(phases)


def _format_phases(phases) -> str:
    return ", ".join(f"{'*' if n is None else n} @ {du!r}" for n, du in phases)


def parse_config(path) -> RunConfig:
    """Read and validate an INI run file.

    Raises ``FileNotFoundError`` for a missing file and :class:`ConfigError`
    for syntax, unknown keys or out-of-range values.
    """
    path = Path(path)
    text = path.read_text()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse {line.strip()!r}", line=lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc), line=exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", line=exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    where = _key_locations(text)
    for section in parser.sections():
        if section not in _SCHEMA:
            lineno = next((i for i, raw in enumerate(text.splitlines(), 1) if raw.strip() == f"[{section}]"), None)
            raise ConfigError(f"unknown section [{section}]; expected one of {sorted(_SCHEMA)}", line=lineno, column=1)
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                line, col = where.get((section, key), (None, None))
                raise ConfigError(f"unknown key in [{section}]", field=key, line=line, column=col)

    def get(section: str, key: str) -> str | None:
        if not parser.has_option(section, key):
            return None
        v = parser.get(section, key).strip()
        return v or None

    def typed(section: str, key: str, kind):
        v = get(section, key)
        if v is None:
            return None
        try:
            return kind(v)
        except ValueError:
            line, col = where.get((section, key), (None, None))
            raise ConfigError(f"expected {kind.__name__}, got {v!r}", field=key, line=line, column=col) from None

    def at(section: str, key: str) -> dict:
        line, col = where.get((section, key), (None, None))
        return {"field": key, "line": line, "column": col}

    name = get("run", "benchmark") or RunConfig.benchmark
    known = sorted(benchmarks.BENCHMARKS) + sorted(benchmarks.VARIANTS)
    if name not in known:
        raise ConfigError(f"unknown benchmark {name!r}; choose from {known}", **at("run", "benchmark"))

    snapshot_every = typed("run", "snapshot_every", int) or 0
    if snapshot_every < 0:
        raise ConfigError("must be >= 0", **at("run", "snapshot_every"))
    mesh = get("run", "mesh")
    refs = tuple(Path(p.strip()) for p in (get("run", "reference") or "").split(",") if p.strip())

    model: dict = {}
    for key, kind, ok, rule in (
        ("length_scale", float, lambda v: v > 0, "must be positive"),
        ("band_h", float, lambda v: v > 0, "must be positive"),
        ("coarse_factor", float, lambda v: v >= 1, "must be >= 1"),
    ):
        v = typed("model", key, kind)
        if v is None:
            continue
        if not (math.isfinite(v) and ok(v)):
            raise ConfigError(f"{rule}, got {v!r}", **at("model", key))
        model[key] = v
    if (soft := get("model", "softening")) is not None:
        try:
            model["softening"] = Softening(soft.lower())
        except ValueError:
            raise ConfigError(f"unknown softening {soft!r}; choose from {[s.value for s in Softening]}", **at("model", "softening")) from None
    base = benchmarks.VARIANTS.get(name, (name,))[0]
    accepted = inspect.signature(benchmarks.BENCHMARKS[base]).parameters
    for key in model:
        if key not in accepted:
            raise ConfigError(f"not adjustable for benchmark {name!r}", **at("model", key))

    kwargs: dict = {}
    if (form := get("solver", "formulation")) is not None:
        try:
            kwargs["formulation"] = Formulation(form.lower())
        except ValueError:
            raise ConfigError(f"expected 'lmm' or 'penalty', got {form!r}", **at("solver", "formulation")) from None
    for key, kind in (
        ("tol", float), ("eta", float), ("u_end", float), ("stop_load_fraction", float),
        ("max_iters", int), ("max_steps", int), ("max_halvings", int), ("max_reseeds", int),
    ):
        v = typed("solver", key, kind)
        if v is None:
            continue
        positive = key in ("tol", "eta", "max_iters", "max_steps")
        if kind is float and not math.isfinite(v) or (positive and v <= 0) or v < 0:
            raise ConfigError(f"{'must be positive' if positive else 'must be >= 0'}, got {v!r}", **at("solver", key))
        kwargs[key] = v
    scaling = {}
    for key, fname in SCALE_KEYS.items():
        v = typed("solver", key, float)
        if v is not None:
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"must be positive, got {v!r}", **at("solver", key))
            scaling[fname] = v
    if scaling:
        kwargs["scaling"] = scaling
    solver = SolverConfig(**kwargs)

    phases = get("schedule", "phases")
    phases = _parse_phases(phases, "phases") if phases is not None else None
    end = typed("schedule", "end", float)
    return RunConfig(
        benchmark=name,
        mesh_path=Path(mesh) if mesh else None,
        output=Path(get("run", "output") or RunConfig.output),
        snapshot_every=snapshot_every,
        references=refs,
        model=model,
        solver=solver,
        phases=phases,
        schedule_end=end,
    )


def format_config(cfg: RunConfig) -> str:
    """Serialize a RunConfig; unset options are written as empty values."""
    s = cfg.solver
    scaling = s.scaling or {}

    def opt(v) -> str:
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v.value if hasattr(v, "value") else v)

    lines = [
        "[run]",
        f"benchmark = {cfg.benchmark}",
        f"mesh = {opt(cfg.mesh_path)}",
        f"output = {cfg.output}",
        f"snapshot_every = {cfg.snapshot_every}",
        f"reference = {', '.join(str(p) for p in cfg.references)}",
        "",
        "[model]",
        *(f"{k} = {opt(cfg.model.get(k))}" for k in _SCHEMA["model"]),
        "",
        "[solver]",
        f"formulation = {s.formulation.value}",
        *(f"{k} = {opt(getattr(s, k))}" for k in _SCHEMA["solver"][1:9]),
        *(f"{k} = {opt(scaling.get(f))}" for k, f in SCALE_KEYS.items()),
        "",
        "[schedule]",
        f"phases = {_format_phases(cfg.phases) if cfg.phases else ''}",
        f"end = {opt(cfg.schedule_end)}",
        "",
    ]
    return "\n".join(lines)


def write_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(format_config(cfg))


def with_overrides(cfg: RunConfig, **solver_overrides) -> RunConfig:
    """Apply command-line solver overrides; ``None`` values are ignored."""
    known = {f.name for f in fields(SolverConfig)}
    kw = {k: v for k, v in solver_overrides.items() if v is not None and k in known}
    return replace(cfg, solver=replace(cfg.solver, **kw)) if kw else cfg
