"""Scenario files: flat ``dotted.key = value`` text, defaults equal to the benchmark.

Example::

    # negative correlation benchmark
    financial.rho = -0.7
    eps = none
    grid_points = 2001
    outputs = path, regime, statics
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .model import PARAM_KEYS, ModelParams
from .oracle import SimSpec

OUTPUT_KINDS = ("path", "regime", "statics", "optimal_eps", "oracle")
DEFAULT_OUTPUTS = ("path", "regime")


class ScenarioError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class Scenario:
    params: ModelParams = field(default_factory=ModelParams)
    eps: float | None = None
    grid_points: int = 2001
    outputs: tuple[str, ...] = DEFAULT_OUTPUTS
    sim: SimSpec = field(default_factory=SimSpec)
    explicit: frozenset[str] = frozenset()  # keys set in the file

    def with_grid(self, n: int) -> "Scenario":
        return replace(self, grid_points=int(n))

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, sim=replace(self.sim, seed=int(seed)))


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def parse_text(text: str, source: str = "<scenario>") -> Scenario:
    params = ModelParams()
    eps: float | None = None
    grid_points = 2001
    outputs = DEFAULT_OUTPUTS
    sim = SimSpec()
    seen: set[str] = set()
    problems: list[str] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            problems.append(f"{where}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in seen:
            problems.append(f"{where}: duplicate key '{key}'")
        seen.add(key)
        try:
            group, _, name = key.partition(".")
            if group in PARAM_KEYS and name in PARAM_KEYS[group]:
                num = float(value)
                if not math.isfinite(num):
                    raise ValueError("must be finite")
                params = params.set(key, num)
            elif key == "eps":
                eps = None if value.lower() in ("none", "") else float(value)
            elif key == "grid_points":
                grid_points = int(value)
                if grid_points < 2:
                    raise ValueError("must be >= 2")
            elif key == "outputs":
                kinds = tuple(k.strip() for k in value.split(",") if k.strip())
                bad = [k for k in kinds if k not in OUTPUT_KINDS]
                if bad:
                    raise ValueError(f"unknown output(s) {bad}; choose from {list(OUTPUT_KINDS)}")
                outputs = kinds
            elif key in ("sim.n_paths", "sim.n_steps", "sim.seed"):
                sim = replace(sim, **{key[4:]: int(value)})
            else:
                raise KeyError("unknown key")
        except (ValueError, KeyError) as exc:
            msg = exc.args[0] if exc.args else str(exc)
            problems.append(f"{where}: field '{key}': {msg} (value {value!r})")

    if problems:
        raise ScenarioError(problems)
    return Scenario(params, eps, grid_points, outputs, sim, frozenset(seen))


def load(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError([f"{path}: cannot read ({exc.strerror})"]) from exc
    return parse_text(text, str(path))


def dump(sc: Scenario) -> str:
    """Canonical text form: every key, full precision; parses back to an equal scenario."""
    lines = [f"{k} = {_fmt(v)}" for k, v in sc.params.as_dotted().items()]
    lines.append(f"eps = {'none' if sc.eps is None else _fmt(sc.eps)}")
    lines.append(f"grid_points = {sc.grid_points}")
    lines.append(f"outputs = {', '.join(sc.outputs)}")
    lines.append(f"sim.n_paths = {sc.sim.n_paths}")
    lines.append(f"sim.n_steps = {sc.sim.n_steps}")
    lines.append(f"sim.seed = {sc.sim.seed}")
    return "\n".join(lines) + "\n"
