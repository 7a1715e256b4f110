"""Scenario description and config-file loading.

Config files are TOML.  Physical quantities carry their unit in the key
name (``tx_power_w``, ``pathloss_db``, ``sensitivity_dbm``, ``angle_deg``);
everything is converted to linear units on load.
"""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

# Default half-width of the one-ring scatterer spread around a cluster.
DEFAULT_SCATTER_APERTURE_DEG = 90.0


class ConfigError(ValueError):
    """Invalid scenario description.  ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None, key=None):
        self.message = message
        self.line = line
        self.path = path
        self.key = key
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line else f"{path}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(x):
    return 10.0 * math.log10(x)


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * math.log10(w) + 30.0


@dataclass(frozen=True)
class ClusterConfig:
    num_terminals: int = 8
    angle_deg: float = 90.0
    aperture_deg: float = 0.0
    kappa: float = 5.0
    pathloss_db: float = -63.5

    def __post_init__(self):
        if int(self.num_terminals) != self.num_terminals or self.num_terminals < 1:
            raise ConfigError(f"terminals must be a positive integer, got {self.num_terminals}",
                              key="terminals")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}", key="kappa")
        if self.aperture_deg < 0:
            raise ConfigError(f"aperture_deg must be >= 0, got {self.aperture_deg}",
                              key="aperture_deg")

    @property
    def pathloss_linear(self):
        return db_to_linear(self.pathloss_db)


@dataclass(frozen=True)
class EhCircuit:
    """Piecewise-linear harvester: off below ``sensitivity``, linear with
    slope ``efficiency`` up to ``saturation``, flat beyond."""

    # nominal -22 dBm and -4.8 dBm, kept at their rounded watt values (6.30 uW, 311 uW)
    sensitivity: float = 6.30e-6
    saturation: float = 311e-6
    efficiency: float = 0.25

    def __post_init__(self):
        if not 0 <= self.sensitivity < self.saturation:
            raise ConfigError("EH circuit needs 0 <= sensitivity < saturation", key="sensitivity")
        if not 0 < self.efficiency <= 1:
            raise ConfigError("EH efficiency must lie in (0, 1]", key="efficiency")


@dataclass(frozen=True)
class SolverOptions:
    """Options for the EH-constrained precoder.

    ``lower_bound``/``upper_bound`` are the per-terminal RF power window in
    watts.  ``None`` means: take them from the EH circuit.
    """

    lower_bound: float | None = None
    upper_bound: float | None = None
    multistart: int = 8
    max_outer: int = 5000
    max_inner: int = 4000
    tol: float = 1e-7
    feas_tol: float = 1e-9

    def __post_init__(self):
        if self.multistart < 1:
            raise ConfigError("multistart must be >= 1", key="multistart")
        lo = 0.0 if self.lower_bound is None else self.lower_bound
        hi = math.inf if self.upper_bound is None else self.upper_bound
        if lo < 0 or not lo < hi:
            raise ConfigError("solver bounds need 0 <= lower < upper", key="lower_bound")

    def bounds(self, circuit: EhCircuit):
        lo = circuit.sensitivity if self.lower_bound is None else self.lower_bound
        hi = circuit.saturation if self.upper_bound is None else self.upper_bound
        return lo, hi


# "iid" means R = I: uncorrelated Rayleigh multipath, the analytic reference case
CORRELATION_MODELS = ("one_ring", "iid")


@dataclass(frozen=True)
class SystemConfig:
    num_antennas: int = 8
    clusters: tuple = (ClusterConfig(),)
    tx_power_w: float = 1.0
    antenna_gain_db: float = 0.0
    element_spacing: float = 0.5
    rotation_deg: float = 0.0
    seed: int = 1
    scatter_aperture_deg: float = DEFAULT_SCATTER_APERTURE_DEG
    freeze_correlation: bool = False
    correlation: str = "one_ring"
    eh: EhCircuit = field(default_factory=EhCircuit)
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        if int(self.num_antennas) != self.num_antennas or self.num_antennas < 1:
            raise ConfigError(f"num_antennas must be a positive integer, got {self.num_antennas}",
                              key="num_antennas")
        if not self.clusters:
            raise ConfigError("at least one cluster is required", key="clusters")
        if len(self.clusters) > self.num_antennas:
            raise ConfigError(
                f"{len(self.clusters)} clusters exceed num_antennas={self.num_antennas}",
                key="num_antennas",
            )
        if self.tx_power_w <= 0:
            raise ConfigError("tx_power_w must be positive", key="tx_power")
        if self.element_spacing <= 0:
            raise ConfigError("element_spacing must be positive", key="element_spacing")
        if not 0 <= self.rotation_deg <= 180:
            raise ConfigError("rotation_deg must lie in [0, 180]", key="rotation_deg")
        if self.scatter_aperture_deg < 0:
            raise ConfigError("scatter_aperture_deg must be >= 0", key="scatter_aperture_deg")
        if self.correlation not in CORRELATION_MODELS:
            raise ConfigError(f"correlation must be one of {', '.join(CORRELATION_MODELS)}, "
                              f"got {self.correlation!r}", key="correlation")

    @property
    def antenna_gain(self):
        return db_to_linear(self.antenna_gain_db)

    @property
    def num_clusters(self):
        return len(self.clusters)

    @property
    def total_terminals(self):
        return sum(c.num_terminals for c in self.clusters)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def operating_point_config(**overrides) -> SystemConfig:
    """The operating point used throughout: L=3, K=8, M=8, kappa=5."""
    clusters = tuple(ClusterConfig(8, phi, 0.0, 5.0, -63.5) for phi in (0.0, 30.0, 70.0))
    cfg = SystemConfig(num_antennas=8, clusters=clusters, tx_power_w=10.0, antenna_gain_db=10.0)
    return cfg.replace(**overrides) if overrides else cfg


def cluster_angles(num_clusters):
    """Evenly spread cluster positions l*180/(L+1) degrees, l = 1..L."""
    return [180.0 * l / (num_clusters + 1) for l in range(1, num_clusters + 1)]


# -- TOML I/O ---------------------------------------------------------------

_TOP_KEYS = {
    "num_antennas", "tx_power_w", "tx_power_dbm", "antenna_gain_db", "element_spacing",
    "rotation_deg", "seed", "scatter_aperture_deg", "freeze_correlation", "correlation", "eh", "solver",
    "clusters",
}
_CLUSTER_KEYS = {"terminals", "angle_deg", "aperture_deg", "kappa", "pathloss_db"}
_EH_KEYS = {"sensitivity_w", "sensitivity_dbm", "saturation_w", "saturation_dbm", "efficiency"}
_SOLVER_KEYS = {
    "lower_bound_w", "lower_bound_dbm", "upper_bound_w", "upper_bound_dbm", "multistart",
    "max_outer", "max_inner", "tol", "feas_tol",
}


def _line_of(text, key, occurrence=0):
    """1-based line of the ``occurrence``-th assignment whose key starts with ``key``."""
    if text is None or key is None:
        return None
    pat = re.compile(rf"^\s*{re.escape(key)}\w*\s*=", re.MULTILINE)
    matches = list(pat.finditer(text))
    if not matches:
        return None
    m = matches[min(occurrence, len(matches) - 1)]
    return text.count("\n", 0, m.start()) + 1


def _power(d, stem, default=None):
    if f"{stem}_w" in d and f"{stem}_dbm" in d:
        raise ConfigError(f"give either {stem}_w or {stem}_dbm, not both", key=stem)
    if f"{stem}_w" in d:
        return float(d[f"{stem}_w"])
    if f"{stem}_dbm" in d:
        return dbm_to_watts(float(d[f"{stem}_dbm"]))
    return default


def _check_keys(d):
    for section, allowed in ((d, _TOP_KEYS), (d.get("eh", {}), _EH_KEYS),
                             (d.get("solver", {}), _SOLVER_KEYS)):
        for key in section:
            if key not in allowed:
                raise ConfigError(f"unknown key '{key}'", key=key)
    for c in d.get("clusters", []):
        for key in c:
            if key not in _CLUSTER_KEYS:
                raise ConfigError(f"unknown cluster key '{key}'", key=key)


def _num(d, key, default, kind=float):
    value = d.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}", key=key)
    if kind is int and int(value) != value:
        raise ConfigError(f"'{key}' must be an integer, got {value!r}", key=key)
    return kind(value)


def config_from_dict(d, text=None, path=None) -> SystemConfig:
    """Build a :class:`SystemConfig` from parsed TOML (or manifest JSON)."""
    cluster_index = 0
    try:
        _check_keys(d)
        clusters = []
        for cluster_index, c in enumerate(d.get("clusters", [])):
            clusters.append(ClusterConfig(
                num_terminals=_num(c, "terminals", 8, int),
                angle_deg=_num(c, "angle_deg", 90.0),
                aperture_deg=_num(c, "aperture_deg", 0.0),
                kappa=_num(c, "kappa", 5.0),
                pathloss_db=_num(c, "pathloss_db", -63.5),
            ))
        cluster_index = 0
        eh_d = d.get("eh", {})
        eh = EhCircuit(
            sensitivity=_power(eh_d, "sensitivity", EhCircuit.sensitivity),
            saturation=_power(eh_d, "saturation", EhCircuit.saturation),
            efficiency=_num(eh_d, "efficiency", EhCircuit.efficiency),
        )
        s_d = d.get("solver", {})
        solver = SolverOptions(
            lower_bound=_power(s_d, "lower_bound"),
            upper_bound=_power(s_d, "upper_bound"),
            multistart=_num(s_d, "multistart", 8, int),
            max_outer=_num(s_d, "max_outer", 5000, int),
            max_inner=_num(s_d, "max_inner", 4000, int),
            tol=_num(s_d, "tol", 1e-7),
            feas_tol=_num(s_d, "feas_tol", 1e-9),
        )
        return SystemConfig(
            num_antennas=_num(d, "num_antennas", 8, int),
            clusters=tuple(clusters),
            tx_power_w=_power(d, "tx_power", 1.0),
            antenna_gain_db=_num(d, "antenna_gain_db", 0.0),
            element_spacing=_num(d, "element_spacing", 0.5),
            rotation_deg=_num(d, "rotation_deg", 0.0),
            seed=_num(d, "seed", 1, int),
            scatter_aperture_deg=_num(d, "scatter_aperture_deg", DEFAULT_SCATTER_APERTURE_DEG),
            freeze_correlation=bool(d.get("freeze_correlation", False)),
            correlation=str(d.get("correlation", "one_ring")),
            eh=eh,
            solver=solver,
        )
    except ConfigError as exc:
        line = _line_of(text, exc.key, cluster_index)
        raise ConfigError(exc.message, line=line, path=path, key=exc.key) from None


def config_to_dict(cfg: SystemConfig) -> dict:
    """Inverse of :func:`config_from_dict`; powers are emitted in watts so
    the round trip is exact."""
    solver = {
        "multistart": cfg.solver.multistart,
        "max_outer": cfg.solver.max_outer,
        "max_inner": cfg.solver.max_inner,
        "tol": cfg.solver.tol,
        "feas_tol": cfg.solver.feas_tol,
    }
    if cfg.solver.lower_bound is not None:
        solver["lower_bound_w"] = cfg.solver.lower_bound
    if cfg.solver.upper_bound is not None:
        solver["upper_bound_w"] = cfg.solver.upper_bound
    return {
        "num_antennas": cfg.num_antennas,
        "tx_power_w": cfg.tx_power_w,
        "antenna_gain_db": cfg.antenna_gain_db,
        "element_spacing": cfg.element_spacing,
        "rotation_deg": cfg.rotation_deg,
        "seed": cfg.seed,
        "scatter_aperture_deg": cfg.scatter_aperture_deg,
        "freeze_correlation": cfg.freeze_correlation,
        "correlation": cfg.correlation,
        "eh": {
            "sensitivity_w": cfg.eh.sensitivity,
            "saturation_w": cfg.eh.saturation,
            "efficiency": cfg.eh.efficiency,
        },
        "solver": solver,
        "clusters": [
            {
                "terminals": c.num_terminals,
                "angle_deg": c.angle_deg,
                "aperture_deg": c.aperture_deg,
                "kappa": c.kappa,
                "pathloss_db": c.pathloss_db,
            }
            for c in cfg.clusters
        ],
    }


def load_config(path) -> SystemConfig:
    """Read a TOML scenario file, or the ``config`` block of a run manifest."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=path) from None
    if path.suffix == ".json":
        import json

        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, line=exc.lineno, path=path) from None
        return config_from_dict(d.get("config", d), path=path)
    try:
        d = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(str(exc), line=int(m.group(1)) if m else None, path=path) from None
    return config_from_dict(d, text=text, path=path)
