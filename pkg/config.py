import copy
import logging
from dataclasses import dataclass
from pathlib import Path

from errors import ConfigError, LabError

# Default Configuration
DEFAULT_CONFIG = {
    # Experiment
    "potential": [],          # (k, value) pairs; empty is Fubini–Study
    "m": [],                  # powers; empty means the command's default list
    "nodes": 0,               # 0 derives the node count from the largest power
    "degree": 64,             # Legendre cap for projected profiles
    "lift": [],               # rationals or 'sl'; one value, or one per power
    "seed": 0,
    "out": "results",
    "workers": 1,
    "db_path": "",            # '' puts runs.db in the output directory, 'none' disables it
    # Corrector
    "inject": [],             # (order, k, value) triples
    "steps": 1,
    "guard_orders": 0,        # 0 picks 2 with five or more powers, else 1
    "refine_sweeps": 4,
    "refine_tol": 1e-9,
    "d0_scale": 1.0,
    "linearization_amplitude": 1e-3,
    # Expansion / obstruction
    "fit_order": 0,           # 0 picks cubic with five or more powers, else quadratic
    "check_character": True,
    "random_potentials": 5,
    # Tolerances
    "tol_exact": 1e-10,
    "tol_identity": 1e-8,
    "tol_a1": 2e-2,
    "tol_fit_residual": 1e-3,
    "tol_linearization": 5e-2,
    "tol_recovery": 0.1,
    "tol_kernel": 1e-3,
    "tol_slope": 0.25,
    "max_condition": 1e10,
}

LIST_KEYS = ("potential", "m", "lift", "inject")
TOLERANCE_KEYS = tuple(k for k in DEFAULT_CONFIG if k.startswith("tol_")) + ("max_condition",)

_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")


def parse_keyvalue(text, path=None):
    """Split 'key = value' text into (line, key, value) entries; '#' starts a comment."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", path=path, line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", path=path, line=lineno)
        entries.append((lineno, key, value))
    return entries


def convert_value(key, raw, path=None, line=None):
    default = DEFAULT_CONFIG[key]
    try:
        if key == "potential":
            k, value = raw.split()
            return (int(k), float(value))
        if key == "inject":
            order, k, value = raw.split()
            return (int(order), int(k), float(value))
        if key == "m":
            return int(raw)
        if key == "lift":
            return raw.strip()
        if isinstance(default, bool):
            lowered = raw.strip().lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError("expected true or false")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"cannot parse {raw!r} ({e})", path=path, line=line, field=key) from e


def load_config(path=None):
    """Load a key-value config file over the defaults; with no path, return the defaults."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    config["_lines"] = {}
    config["_path"] = None
    if path is None:
        return config

    config["_path"] = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config ({e})", path=path) from e

    for lineno, key, raw in parse_keyvalue(text, path):
        if key not in DEFAULT_CONFIG:
            raise ConfigError("unknown field", path=path, line=lineno, field=key)
        value = convert_value(key, raw, path, lineno)
        if key in LIST_KEYS:
            # The first occurrence replaces the default list.
            if key not in config["_lines"]:
                config[key] = []
            config[key].append(value)
        else:
            if key in config["_lines"]:
                raise ConfigError(
                    f"duplicate field (first set on line {config['_lines'][key]})",
                    path=path, line=lineno, field=key,
                )
            config[key] = value
        config["_lines"].setdefault(key, lineno)

    logging.getLogger("config").debug(f"Loaded config {path}: {len(config['_lines'])} fields set")
    return config


def dump_config(config):
    """Key-value text that load_config reads back to the same settings."""
    lines = []
    for key, default in DEFAULT_CONFIG.items():
        value = config.get(key, default)
        if key in LIST_KEYS:
            for item in value:
                text = " ".join(repr(v) if isinstance(v, float) else str(v) for v in item) \
                    if isinstance(item, (tuple, list)) else str(item)
                lines.append(f"{key} = {text}")
        elif isinstance(value, bool):
            lines.append(f"{key} = {'true' if value else 'false'}")
        elif isinstance(value, float):
            lines.append(f"{key} = {value!r}")
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def save_config(config, path):
    try:
        Path(path).write_text(dump_config(config), encoding="utf-8")
    except OSError as e:
        logging.error(f"Error saving config {path}: {e}")
        raise ConfigError(f"cannot write config ({e})", path=path) from e


def get_effective_config(file_config, overrides):
    """
    Merge command-line overrides over file settings.

    Returns a new dict; file_config is never mutated.
    Any override that is None means "inherit from the file".
    """
    effective = copy.deepcopy(file_config)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in DEFAULT_CONFIG:
            raise ConfigError("unknown field", field=key)
        effective[key] = copy.deepcopy(value)
        # An overridden field no longer comes from a file line
        effective.get("_lines", {}).pop(key, None)
    return effective


# --- Validated run configuration ---

@dataclass(frozen=True, eq=False)
class RunConfig:
    potential: object
    m_list: tuple
    nodes: int
    degree: int
    lifts: tuple
    seed: int
    out_dir: Path
    workers: int
    db_path: Path
    inject: tuple
    steps: int
    guard_orders: int
    refine_sweeps: int
    refine_tol: float
    d0_scale: float
    linearization_amplitude: float
    fit_order: int
    check_character: bool
    random_potentials: int
    tolerances: dict
    settings: dict

    def tol(self, name):
        return self.tolerances[name]

    def grid(self, m_list=None):
        from geom import grid_size, moment_grid
        ms = m_list or self.m_list
        return moment_grid(grid_size(max(ms), self.nodes))

    def metric(self, m_list=None):
        from geom import InvariantMetric
        return InvariantMetric(self.potential, self.grid(m_list))

    def lift_for(self, m_list=None):
        from equivariant import Lift
        ms = tuple(m_list or self.m_list)
        if not self.lifts:
            return Lift.sl()
        if len(self.lifts) == 1:
            return Lift(default=self.lifts[0])
        if len(self.lifts) != len(ms):
            raise ConfigError(
                f"{len(self.lifts)} lift constants for {len(ms)} powers; give one, or one per power",
                field="lift",
            )
        return Lift(constants=tuple(zip(ms, self.lifts)))

    def injections(self):
        """Injected perturbations grouped by order, as (order, InvariantFunction)."""
        from geom import InvariantFunction
        orders = sorted({order for order, _, _ in self.inject})
        return tuple(
            (order, InvariantFunction.from_pairs([(k, v) for o, k, v in self.inject if o == order]))
            for order in orders
        )

    def echo(self):
        """JSON-safe copy of the effective settings."""
        echo = {}
        for key in DEFAULT_CONFIG:
            value = self.settings.get(key, DEFAULT_CONFIG[key])
            if key in LIST_KEYS:
                value = [list(v) if isinstance(v, (tuple, list)) else v for v in value]
            echo[key] = value
        echo["m"] = list(self.m_list)
        echo["nodes_resolved"] = self.grid().node_count
        return echo

    def echo_text(self):
        return dump_config(self.settings)


def _fail(effective, key, message):
    lines = effective.get("_lines", {})
    path = effective.get("_path") if key in lines else None
    raise ConfigError(message, path=path, line=lines.get(key), field=key)


def build_run_config(effective, default_m=()):
    """Validate an effective config dict and resolve it into a RunConfig."""
    from equivariant import parse_rational
    from geom import InvariantFunction, min_density

    # 1. Powers
    m_list = tuple(effective.get("m") or default_m)
    if not m_list:
        _fail(effective, "m", "no powers given")
    if any(m < 1 for m in m_list):
        _fail(effective, "m", f"powers must be positive integers: {list(m_list)}")
    if any(b <= a for a, b in zip(m_list, m_list[1:])):
        _fail(effective, "m", f"m_list must be strictly increasing: {list(m_list)}")

    # 2. Potential (admissibility is checked before any computation)
    pairs = effective.get("potential", [])
    if any(k < 0 for k, _ in pairs):
        _fail(effective, "potential", "Legendre indices must be nonnegative")
    potential = InvariantFunction.from_pairs(pairs)
    low = min_density(potential)
    if not low > 0.0:
        _fail(effective, "potential", f"outside the Kähler cone: 1 + Δ₀φ reaches {low:.6g}")

    # 3. Lifts
    try:
        lifts = tuple(parse_rational(c) for c in effective.get("lift", []))
    except LabError as e:
        _fail(effective, "lift", str(e))

    # 4. Scalars
    for key in ("nodes", "steps", "refine_sweeps", "guard_orders", "random_potentials"):
        if effective[key] < 0:
            _fail(effective, key, f"must be nonnegative, got {effective[key]}")
    if 0 < effective["nodes"] < 2:
        _fail(effective, "nodes", "need at least 2 nodes")
    if effective["degree"] < 1:
        _fail(effective, "degree", "must be at least 1")
    if effective["workers"] < 1:
        _fail(effective, "workers", "must be at least 1")
    if effective["fit_order"] not in (0, 2, 3):
        _fail(effective, "fit_order", "must be 0 (auto), 2 or 3")
    if effective["d0_scale"] == 0.0:
        _fail(effective, "d0_scale", "must be nonzero")
    if effective["linearization_amplitude"] <= 0.0:
        _fail(effective, "linearization_amplitude", "must be positive")
    for order, k, _ in effective.get("inject", []):
        if order < 1 or k < 0:
            _fail(effective, "inject", f"entries are 'order k value' with order ≥ 1, got ({order}, {k})")
    tolerances = {}
    for key in TOLERANCE_KEYS:
        if not effective[key] > 0.0:
            _fail(effective, key, "must be positive")
        tolerances[key] = float(effective[key])
    if effective["refine_tol"] <= 0.0:
        _fail(effective, "refine_tol", "must be positive")

    # 5. Paths
    out_dir = Path(effective["out"])
    db_setting = str(effective.get("db_path", "")).strip()
    if db_setting.lower() == "none":
        db_path = None
    elif db_setting:
        db_path = Path(db_setting)
    else:
        db_path = out_dir / "runs.db"

    settings = {k: v for k, v in effective.items() if not k.startswith("_")}
    return RunConfig(
        potential=potential,
        m_list=m_list,
        nodes=int(effective["nodes"]),
        degree=int(effective["degree"]),
        lifts=lifts,
        seed=int(effective["seed"]),
        out_dir=out_dir,
        workers=int(effective["workers"]),
        db_path=db_path,
        inject=tuple(tuple(t) for t in effective.get("inject", [])),
        steps=int(effective["steps"]),
        guard_orders=int(effective["guard_orders"]),
        refine_sweeps=int(effective["refine_sweeps"]),
        refine_tol=float(effective["refine_tol"]),
        d0_scale=float(effective["d0_scale"]),
        linearization_amplitude=float(effective["linearization_amplitude"]),
        fit_order=int(effective["fit_order"]),
        check_character=bool(effective["check_character"]),
        random_potentials=int(effective["random_potentials"]),
        tolerances=tolerances,
        settings=settings,
    )
