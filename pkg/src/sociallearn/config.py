"""Experiment configuration files (YAML).

Key tree (every key optional unless noted; unknown keys are rejected)::

    preset: paper-10node        # fills graph, matrix and model
    graph:
      preset: paper-10node | ring
      nodes: 10                 # with edges, or with preset: ring
      edges: [[0, 1], ...]      # 0-based, undirected
    matrix:
      rule: lazy-metropolis | explicit
      values: [[...], ...]      # explicit only; A[l][k] = P(k pulls from l)
    model:                      # required unless a preset supplies it
      family: gaussian | categorical
      hypotheses: [h0, h1]      # labels; default h0, h1, ...
      true: 0                   # index or label of the true hypothesis
      nu: [...]                 # gaussian shortcut: means 0 under h0, nu[k] under h1
      means: [[...], ...]       # gaussian, shape (K, H)
      probs: [[[...]]]          # categorical, shape (K, H, S)
    alpha: 0.0                  # or one value per agent, each in [0, 1)
    steps: 2500
    seed: 0
    replications: 1
    output_dir: out             # default: $SOCIALLEARN_OUTPUT_DIR or "."
    rate:
      s_grid: {start: 0, stop: 10, step: 0.1}   # or an explicit list
      t_max: 50
    deviation:
      s: [3.0, 3.5, 5.5, 6.0]
      i: 2500
      agents: [1, 5]
      N: 60
      method: importance | plain
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .models import CategoricalModel, GaussianModel, HypothesisSpace, ModelError
from .network import Graph, NetworkError, lazy_metropolis, paper_graph, ring_graph, validate

OUTPUT_DIR_ENV = "SOCIALLEARN_OUTPUT_DIR"

PAPER_NU = (3.0, 8.0, 0.0, 0.0, 3.0, 0.0, 3.0, 0.0, 0.0, 0.0)

PRESETS = {
    "paper-10node": {
        "graph": {"preset": "paper-10node"},
        "matrix": {"rule": "lazy-metropolis"},
        "model": {"family": "gaussian", "hypotheses": ["theta_true", "theta"], "true": 0,
                  "nu": list(PAPER_NU)},
        "alpha": 0.0,
        "steps": 2500,
        "rate": {"s_grid": {"start": 0.0, "stop": 10.0, "step": 0.1}},
        "deviation": {"s": [3.0, 3.5, 5.5, 6.0], "i": 2500, "agents": [1, 5], "N": 60,
                      "method": "importance"},
    },
}

_TOP_KEYS = {"preset", "graph", "matrix", "model", "alpha", "steps", "seed", "replications",
             "output_dir", "rate", "deviation"}
_GRAPH_KEYS = {"preset", "nodes", "edges"}
_MATRIX_KEYS = {"rule", "values"}
_MODEL_KEYS = {"family", "hypotheses", "true", "nu", "means", "probs"}
_RATE_KEYS = {"s_grid", "t_max"}
_DEV_KEYS = {"s", "i", "agents", "N", "method"}


class ConfigError(ValueError):
    """The file cannot be parsed into a configuration (syntax, keys, types)."""


class ConfigValidationError(ValueError):
    """The configuration parses but describes an invalid experiment."""


@dataclass
class DeviationSettings:
    s: list[float] = field(default_factory=list)
    i: int = 2500
    agents: list[int] = field(default_factory=lambda: [0])
    N: int = 60
    method: str = "importance"


@dataclass
class ExperimentConfig:
    A: np.ndarray
    model: object
    hypotheses: HypothesisSpace
    graph: Graph | None = None
    alpha: float | list[float] = 0.0
    steps: int = 2500
    seed: int = 0
    replications: int = 1
    output_dir: Path = Path(".")
    s_grid: np.ndarray | None = None
    t_max: float = 50.0
    deviation: DeviationSettings = field(default_factory=DeviationSettings)
    source: dict = field(default_factory=dict, repr=False)

    @property
    def truth(self) -> int:
        return self.hypotheses.truth

    @property
    def K(self) -> int:
        return self.A.shape[0]

    def alpha_array(self) -> np.ndarray:
        a = np.asarray(self.alpha, dtype=float)
        return np.full(self.K, float(a)) if a.ndim == 0 else a


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"'{where}' must be a mapping")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in '{where}': {', '.join(sorted(map(str, extra)))}")


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "model":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_s_grid(spec) -> np.ndarray:
    """``{start, stop, step}`` (inclusive stop), a list, or ``"start:stop:step"``."""
    if isinstance(spec, str):
        parts = spec.split(":")
        if len(parts) == 3:
            spec = dict(zip(("start", "stop", "step"), map(float, parts)))
        else:
            spec = [float(x) for x in spec.split(",") if x.strip()]
    if isinstance(spec, dict):
        _check_keys(spec, {"start", "stop", "step"}, "rate.s_grid")
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        if step <= 0:
            raise ConfigError("s_grid step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        grid = start + step * np.arange(max(n, 0))
    else:
        grid = np.asarray(spec, dtype=float).ravel()
    if grid.size == 0:
        raise ConfigError("s grid is empty")
    return grid


def _build_graph(g):
    _check_keys(g, _GRAPH_KEYS, "graph")
    preset = g.get("preset")
    if preset == "paper-10node":
        return paper_graph()
    if preset == "ring":
        return ring_graph(int(g["nodes"]))
    if preset is not None:
        raise ConfigError(f"unknown graph preset {preset!r}")
    if "nodes" not in g:
        raise ConfigError("graph needs 'nodes' (and 'edges') or a preset")
    return Graph(int(g["nodes"]), tuple(tuple(e) for e in g.get("edges", [])))


def _build_model(m):
    _check_keys(m, _MODEL_KEYS, "model")
    family = m.get("family")
    if family == "gaussian":
        if ("nu" in m) == ("means" in m):
            raise ConfigError("gaussian model needs exactly one of 'nu' or 'means'")
        model = GaussianModel.shifted(m["nu"]) if "nu" in m else GaussianModel(m["means"])
    elif family == "categorical":
        if "probs" not in m:
            raise ConfigError("categorical model needs 'probs'")
        model = CategoricalModel(m["probs"])
    else:
        raise ConfigError(f"unknown model family {family!r}")
    labels = tuple(str(x) for x in m.get("hypotheses", [f"h{j}" for j in range(model.n_hypotheses)]))
    if len(labels) != model.n_hypotheses:
        raise ConfigError("number of hypothesis labels does not match the model")
    hyp = HypothesisSpace(labels)
    true = m.get("true", 0)
    try:
        truth = hyp.index(true)
    except ValueError:
        raise ConfigError(f"unknown true hypothesis {true!r}") from None
    return model, HypothesisSpace(labels, truth)


def from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate a configuration.

    Raises ``ConfigError`` for structural problems and ``ConfigValidationError``
    when the pieces are well-formed but invalid (bad matrix, alpha out of range, ...).
    """
    if raw is None:
        raw = {}
    _check_keys(raw, _TOP_KEYS, "top level")
    if "preset" in raw:
        name = raw["preset"]
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}")
        raw = _merge(PRESETS[name], {k: v for k, v in raw.items() if k != "preset"})

    try:
        graph = _build_graph(raw["graph"]) if "graph" in raw else None
        mat = raw.get("matrix", {"rule": "lazy-metropolis"})
        _check_keys(mat, _MATRIX_KEYS, "matrix")
        rule = mat.get("rule", "lazy-metropolis")
        if rule == "lazy-metropolis":
            if graph is None:
                raise ConfigError("lazy-metropolis needs a graph")
            A = lazy_metropolis(graph)
        elif rule == "explicit":
            if "values" not in mat:
                raise ConfigError("explicit matrix needs 'values'")
            A = np.asarray(mat["values"], dtype=float)
        else:
            raise ConfigError(f"unknown matrix rule {rule!r}")
        report = validate(A)
        if not report:
            raise ConfigValidationError(f"combination matrix invalid: {report}")
        if "model" not in raw:
            raise ConfigError("missing 'model' section")
        model, hyp = _build_model(raw["model"])
    except (NetworkError, ModelError) as exc:
        raise ConfigValidationError(str(exc)) from exc
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc

    if model.K != A.shape[0]:
        raise ConfigValidationError(f"model has {model.K} agents but the matrix is {A.shape[0]}x{A.shape[0]}")
    if isinstance(model, CategoricalModel):
        try:
            model.check_support(hyp.truth)
        except ModelError as exc:
            raise ConfigValidationError(str(exc)) from exc

    alpha = raw.get("alpha", 0.0)
    a = np.asarray(alpha, dtype=float)
    if a.ndim not in (0, 1) or (a.ndim == 1 and a.shape != (A.shape[0],)):
        raise ConfigError("alpha must be a number or one number per agent")
    if np.any(a < 0) or np.any(a >= 1):
        raise ConfigValidationError("alpha must lie in [0, 1); alpha = 1 means no cooperation")

    rate = raw.get("rate", {})
    _check_keys(rate, _RATE_KEYS, "rate")
    dev = raw.get("deviation", {})
    _check_keys(dev, _DEV_KEYS, "deviation")
    dev_s = dev.get("s", [])
    dev_settings = DeviationSettings(
        s=[float(x) for x in (dev_s if isinstance(dev_s, list) else [dev_s])],
        i=int(dev.get("i", 2500)),
        agents=[int(x) for x in dev.get("agents", [0])],
        N=int(dev.get("N", 60)),
        method=str(dev.get("method", "importance")),
    )
    if dev_settings.method not in ("importance", "plain"):
        raise ConfigError(f"unknown deviation method {dev_settings.method!r}")

    out = raw.get("output_dir", os.environ.get(OUTPUT_DIR_ENV, "."))
    out = Path(out)

    try:
        steps = int(raw.get("steps", 2500))
        seed = int(raw.get("seed", 0))
        reps = int(raw.get("replications", 1))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    if steps < 0 or reps < 1:
        raise ConfigValidationError("steps must be >= 0 and replications >= 1")

    return ExperimentConfig(
        A=A,
        model=model,
        hypotheses=hyp,
        graph=graph,
        alpha=a.tolist(),
        steps=steps,
        seed=seed,
        replications=reps,
        output_dir=out,
        s_grid=parse_s_grid(rate["s_grid"]) if "s_grid" in rate else None,
        t_max=float(rate.get("t_max", 50.0)),
        deviation=dev_settings,
        source=raw,
    )


def load(path_or_preset) -> ExperimentConfig:
    """Load a YAML file, or a bare preset name such as ``paper-10node``."""
    p = Path(path_or_preset)
    if not p.exists() and str(path_or_preset) in PRESETS:
        return from_dict({"preset": str(path_or_preset)})
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    return from_dict(raw)
