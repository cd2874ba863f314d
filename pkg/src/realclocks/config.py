"""Experiment configuration: JSON loading, schema validation and presets."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import textio
from .clock_models import ClockParams, CorrelationModel, GRID_RESOLUTION
from .errors import IntegrityError, ParameterError, RealClocksError
from .quantum_core import DensityMatrix, Hamiltonian

EXPERIMENTS = ("clock_stats", "dephasing_compare", "master_trajectory",
               "classical_diffusion", "bath_spectrum")

PRESETS = {
    "qubit-dephasing": {
        "experiment": "dephasing_compare",
        "clock": {"theta": 0.1, "kappa": 0.005},
        "system": {"energies": [0.0, 1.0]},
        "initial_state": {"preset": "plus"},
        "numeric": {"dt": 0.005, "horizon": 100.0, "n_paths": 10000, "n_snapshots": 100, "seed": 1},
    },
    "classical-release": {
        "experiment": "classical_diffusion",
        "clock": {"theta": 4.0, "kappa": 0.2},
        "classical": {"omega": 1.0, "initial": {"kind": "delta", "phi0": 0.0}},
        "numeric": {"n_grid": 256, "horizon": 2000.0, "n_snapshots": 20},
    },
}


class ConfigError(RealClocksError):
    """Unparseable or structurally invalid configuration (exit status 2)."""


def load_schema() -> dict:
    text = resources.files("realclocks").joinpath("config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    experiment: str
    clock: ClockParams
    numeric: dict
    output_dir: Path
    H: Hamiltonian | None = None
    rho0: DensityMatrix | None = None
    classical: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _matrix_from_json(rows, where: str) -> np.ndarray:
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ConfigError(f"{where}: matrix must be square")
    m = np.zeros((n, n), dtype=complex)
    for i, r in enumerate(rows):
        for j, e in enumerate(r):
            m[i, j] = complex(e[0], e[1]) if isinstance(e, list) else complex(e)
    return m


def _one_of(d: dict, keys, where: str) -> str:
    present = [k for k in keys if k in d]
    if len(present) != 1:
        raise ConfigError(f"{where}: give exactly one of {', '.join(keys)}")
    return present[0]


def _read_matrix_file(path: Path, where: str) -> np.ndarray:
    if not path.is_file():
        raise ConfigError(f"{where}: file not found: {path}")
    try:
        return textio.read_matrix(path)
    except ParameterError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _build_clock(raw: dict) -> ClockParams:
    model = raw.get("model", "ornstein_uhlenbeck")
    if model == "tabulated":
        table = raw.get("table")
        if table is None:
            raise ConfigError("clock: tabulated model needs a 'table'")
        return ClockParams.tabulated(table["tau"], table["c"], epsilon=raw.get("epsilon", 1.0))
    if "theta" not in raw or "kappa" not in raw:
        raise ConfigError("clock: 'theta' and 'kappa' are required")
    return ClockParams(theta=float(raw["theta"]), kappa=float(raw["kappa"]),
                       epsilon=float(raw.get("epsilon", 1.0)), model=CorrelationModel.ORNSTEIN_UHLENBECK)


def _build_state(raw: dict, H: Hamiltonian, base: Path) -> DensityMatrix:
    key = _one_of(raw, ("file", "matrix", "preset"), "initial_state")
    try:
        if key == "file":
            rho = DensityMatrix(_read_matrix_file(base / raw["file"], "initial_state"))
        elif key == "matrix":
            rho = DensityMatrix(_matrix_from_json(raw["matrix"], "initial_state"))
        else:
            name, d = raw["preset"], H.dim
            if name == "plus":
                rho = DensityMatrix.plus(d)
            elif name == "maximally_mixed":
                rho = DensityMatrix.maximally_mixed(d)
            elif name == "ground":
                rho = DensityMatrix.pure(H.eigenvectors[:, 0])
            else:  # energy_diagonal: pointer-basis projection of "plus"
                pe = np.real(np.diag(H.to_eigenbasis(DensityMatrix.plus(d).matrix)))
                rho = DensityMatrix(H.from_eigenbasis(np.diag(pe / pe.sum()).astype(complex)))
    except IntegrityError as exc:
        raise ConfigError(f"initial_state: {exc}") from None
    if rho.dim != H.dim:
        raise ConfigError(f"initial_state: dimension {rho.dim} does not match the Hamiltonian ({H.dim})")
    return rho


def _build_hamiltonian(raw: dict, base: Path) -> Hamiltonian:
    key = _one_of(raw, ("file", "matrix", "energies"), "system")
    try:
        if key == "file":
            return Hamiltonian(_read_matrix_file(base / raw["file"], "system"))
        if key == "matrix":
            return Hamiltonian(_matrix_from_json(raw["matrix"], "system"))
        return Hamiltonian.diagonal(raw["energies"])
    except ParameterError as exc:
        raise ConfigError(f"system: {exc}") from None


def parse_document(text: str, source: str = "<config>") -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{source}: at {loc}: {exc.message}") from None
    if "preset" in doc:
        doc = _merge(PRESETS[doc["preset"]], {k: v for k, v in doc.items() if k != "preset"})
    return doc


def load_config(path, seed: int | None = None, output_dir=None) -> ExperimentConfig:
    """Parse, validate and build every domain object of a config file.

    Structural problems raise ConfigError (status 2); numeric-bound
    violations raise ParameterError (status 3).
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    doc = parse_document(path.read_text(encoding="utf-8"), str(path))
    return build_config(doc, path.parent, seed=seed, output_dir=output_dir)


def build_config(doc: dict, base: Path = Path("."), seed: int | None = None,
                 output_dir=None) -> ExperimentConfig:
    base = Path(base)
    exp = doc["experiment"]
    numeric = dict(doc.get("numeric", {}))
    if seed is not None:
        numeric["seed"] = int(seed)
    numeric.setdefault("seed", 0)
    if numeric["seed"] < 0:
        raise ParameterError("seed must be non-negative")
    out = Path(output_dir) if output_dir is not None else base / doc.get("output_dir", f"out_{exp}")
    if "clock" not in doc:
        raise ConfigError("missing 'clock' section")
    clock = _build_clock(doc["clock"])
    cfg = ExperimentConfig(exp, clock, numeric, out, source=doc)

    if exp in ("dephasing_compare", "master_trajectory"):
        if "system" not in doc or "initial_state" not in doc:
            raise ConfigError(f"{exp} needs 'system' and 'initial_state'")
        cfg.H = _build_hamiltonian(doc["system"], base)
        cfg.rho0 = _build_state(doc["initial_state"], cfg.H, base)
    if exp == "classical_diffusion":
        cl = dict(doc.get("classical", {}))
        cl.setdefault("omega", 1.0)
        cl.setdefault("initial", {"kind": "von_mises", "mu": math.pi, "concentration": 1.0})
        cfg.classical = cl
    _apply_defaults(cfg)
    validate_numeric(cfg)
    cfg.warnings = regime_warnings(cfg)
    return cfg


def _apply_defaults(cfg: ExperimentConfig):
    n, c = cfg.numeric, cfg.clock
    if cfg.experiment == "clock_stats":
        n.setdefault("dt", c.theta / GRID_RESOLUTION)
        n.setdefault("horizon", 100.0 * c.theta)
        n.setdefault("n_paths", 1000)
    elif cfg.experiment == "dephasing_compare":
        wmax = cfg.H.max_gap
        n.setdefault("dt", min(c.theta / GRID_RESOLUTION, 0.1 / wmax if wmax > 0 else math.inf))
        n.setdefault("n_paths", 1000)
        n.setdefault("n_snapshots", 100)
    elif cfg.experiment == "master_trajectory":
        from .master_equation import suggest_dt
        if "dt" not in n and "horizon" in n:
            n["dt"] = suggest_dt(cfg.H, c.diffusion, n["horizon"])
        n.setdefault("n_snapshots", 200)
    elif cfg.experiment == "classical_diffusion":
        from .classical_dynamics import max_stable_dt
        n.setdefault("n_grid", 256)
        n.setdefault("n_snapshots", 20)
        n.setdefault("dt", max_stable_dt(n["n_grid"], cfg.classical["omega"], c.diffusion))
    elif cfg.experiment == "bath_spectrum":
        n.setdefault("omega_max", 50.0 / c.theta)
        n.setdefault("n_omega", 201)
        n.setdefault("temperature_product", 1.0)


def validate_numeric(cfg: ExperimentConfig):
    """Pre-validate numeric bounds of the target module; raises ParameterError."""
    n, c, exp = cfg.numeric, cfg.clock, cfg.experiment
    if exp in ("dephasing_compare", "master_trajectory", "classical_diffusion") and "horizon" not in n:
        raise ConfigError(f"numeric.horizon is required for {exp}")
    for key in ("n_paths", "n_grid", "n_snapshots", "n_omega"):
        if key in n and n[key] < 1:
            raise ParameterError(f"numeric.{key} must be positive")
    if exp == "clock_stats":
        from .clock_models import _validate_grid
        _validate_grid(c, n["horizon"], n["dt"])
    elif exp == "dephasing_compare":
        from .monte_carlo import EnsembleSpec
        EnsembleSpec(c, cfg.H, cfg.rho0, n["n_paths"], n["horizon"], n["dt"], n["seed"])
    elif exp == "master_trajectory":
        from .master_equation import MasterParams
        if n["horizon"] < 0:
            raise ParameterError("numeric.horizon must be non-negative")
        MasterParams(cfg.H, c.diffusion, n["dt"]).check_step()
    elif exp == "classical_diffusion":
        from .classical_dynamics import max_stable_dt
        if n["n_grid"] < 8:
            raise ParameterError("numeric.n_grid must be at least 8")
        if n["horizon"] < 0:
            raise ParameterError("numeric.horizon must be non-negative")
        omega = cfg.classical["omega"]
        if not (omega > 0):
            raise ParameterError("classical.omega must be positive")
        lim = max_stable_dt(n["n_grid"], omega, c.diffusion)
        if not (0 < n["dt"] <= lim * (1 + 1e-12)):
            raise ParameterError(f"numeric.dt must be in (0, {lim}] for this grid")
        init = cfg.classical["initial"]
        if init["kind"] == "von_mises" and init.get("concentration", 1.0) < 0:
            raise ParameterError("von Mises concentration must be non-negative")
    elif exp == "bath_spectrum":
        if c.model is CorrelationModel.ORNSTEIN_UHLENBECK and not (n["omega_max"] > 0):
            raise ParameterError("numeric.omega_max must be positive")
        if not (n["temperature_product"] > 0):
            raise ParameterError("numeric.temperature_product must be positive")


def derived_quantities(cfg: ExperimentConfig) -> dict:
    from .clock_models import period_of_applicability
    c = cfg.clock
    out = {
        "experiment": cfg.experiment,
        "theta": c.theta,
        "kappa": c.kappa,
        "epsilon": c.epsilon,
        "model": c.model.value,
        "kappa_over_theta": c.ratio,
        "good_clock": c.good_clock,
        "c0": c.c0,
        "D": c.diffusion,
    }
    zeta = None
    wmax = None
    if cfg.H is not None:
        zeta = cfg.H.zeta
        wmax = cfg.H.max_gap
        out["dim"] = cfg.H.dim
    elif cfg.experiment == "classical_diffusion":
        zeta = 1.0 / cfg.classical["omega"]
        wmax = cfg.classical["omega"]
    if zeta is not None:
        out["zeta"] = zeta
        out["period_of_applicability"] = period_of_applicability(c, zeta)
    if wmax is not None:
        out["max_gap"] = wmax
        out["theta_times_max_gap"] = c.theta * wmax
    return out


def regime_warnings(cfg: ExperimentConfig) -> list[str]:
    from .clock_models import GOOD_CLOCK_RATIO
    w = []
    c = cfg.clock
    if c.ratio >= GOOD_CLOCK_RATIO:
        w.append(f"kappa/theta = {c.ratio:.4g} is outside good-clock regime (threshold {GOOD_CLOCK_RATIO})")
    d = derived_quantities(cfg)
    if d.get("theta_times_max_gap", 0.0) > 1.0:
        w.append(f"theta * max|omega_nm| = {d['theta_times_max_gap']:.4g} > 1: "
                 "Markov approximation questionable")
    horizon = cfg.numeric.get("horizon")
    if horizon is not None and "period_of_applicability" in d and horizon > d["period_of_applicability"]:
        w.append("horizon exceeds the period of applicability of the clock")
    return w
