"""Seeded problem-instance generation for the movable-antenna full-duplex link.

A :class:`Scenario` bundles everything that is fixed while antenna positions
and transmit powers are optimized: path angles, the self-interference
scattering core, large-scale link coefficients, and co-channel interference
(CCI) estimates with a bounded error radius per entry.

All internal math uses linear SI units (watts, meters, power ratios).
Decibel / dBm conversions happen only at the file and CLI boundary.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s
SCENARIO_HEADER = "# mafd-scenario v1"

# %.17g round-trips IEEE doubles exactly through text
_FLOAT_FMT = "%.17g"


class ConfigurationError(ValueError):
    """A system configuration violates one of its invariants."""


class ScenarioParseError(ValueError):
    """A scenario or config file could not be parsed."""


# ---------------------------------------------------------------------------
# Unit conversions
# ---------------------------------------------------------------------------

def db_to_linear(x_db: float) -> float:
    """Power ratio from decibels: 10^(x/10)."""
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watts(x_dbm: float) -> float:
    """Watts from dBm: 10^((x-30)/10)."""
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watts_to_dbm(x_w: float) -> float:
    return 10.0 * math.log10(x_w) + 30.0


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathAngles:
    """Elevation/azimuth pair of a propagation path, both in [0, pi]."""

    elevation: float
    azimuth: float

    def __post_init__(self):
        if not (0.0 <= self.elevation <= math.pi):
            raise ConfigurationError(
                f"elevation {self.elevation} outside [0, pi]")
        if not (0.0 <= self.azimuth <= math.pi):
            raise ConfigurationError(f"azimuth {self.azimuth} outside [0, pi]")


def angles_array(angles: Sequence[PathAngles]) -> np.ndarray:
    """Stack a list of PathAngles into an (L, 2) array [elevation, azimuth]."""
    return np.array([[a.elevation, a.azimuth] for a in angles], dtype=float)


@dataclass
class SystemConfig:
    """Static system parameters of one problem instance.

    Powers and gains are linear (watts / ratios); decibel-flavored keys exist
    only in the config-file dialect (see :func:`load_config`).
    """

    num_tx_antennas: int          # M
    num_rx_antennas: int          # N
    num_ul_uts: int               # J
    num_dl_uts: int               # K
    wavelength: float             # m
    region_size_tx: float         # side of the square transmit region, m
    region_size_rx: float         # side of the square receive region, m
    min_spacing: float            # minimum inter-antenna distance, m
    si_paths_tx: int              # L^t
    si_paths_rx: int              # L^r
    si_loss: float                # residual SI power ratio after cancellation
    ul_noise: float               # satellite receive noise, W
    dl_noise: np.ndarray          # per-DL-UT noise, W, shape (K,)
    ul_rate_thresholds: np.ndarray  # bps/Hz, shape (J,)
    dl_rate_thresholds: np.ndarray  # bps/Hz, shape (K,)
    sat_gain: float               # satellite antenna power gain, linear
    cci_error_fraction: float     # eps_jk^2 / |c_jk|^2
    tcheby_weights: tuple[float, float]   # (lambda_1, lambda_2)
    ref_objectives: tuple[float, float]   # (T_1^*, T_2^*), W
    link_distance: float          # satellite-UT distance, m
    rng_seed: int = 0

    def __post_init__(self):
        self.dl_noise = np.atleast_1d(np.asarray(self.dl_noise, dtype=float))
        self.ul_rate_thresholds = np.atleast_1d(
            np.asarray(self.ul_rate_thresholds, dtype=float))
        self.dl_rate_thresholds = np.atleast_1d(
            np.asarray(self.dl_rate_thresholds, dtype=float))
        if self.dl_noise.size == 1:
            self.dl_noise = np.full(self.num_dl_uts, float(self.dl_noise[0]))
        if self.ul_rate_thresholds.size == 1:
            self.ul_rate_thresholds = np.full(
                self.num_ul_uts, float(self.ul_rate_thresholds[0]))
        if self.dl_rate_thresholds.size == 1:
            self.dl_rate_thresholds = np.full(
                self.num_dl_uts, float(self.dl_rate_thresholds[0]))
        self.tcheby_weights = (float(self.tcheby_weights[0]),
                               float(self.tcheby_weights[1]))
        self.ref_objectives = (float(self.ref_objectives[0]),
                               float(self.ref_objectives[1]))

    def validate(self):
        """Raise ConfigurationError naming the first violated invariant."""
        if self.num_tx_antennas < 1:
            raise ConfigurationError("num_tx_antennas must be >= 1")
        if self.num_ul_uts < 1 or self.num_dl_uts < 1:
            raise ConfigurationError("need at least one UL and one DL UT")
        if self.num_rx_antennas < self.num_ul_uts:
            raise ConfigurationError(
                "num_rx_antennas must be >= num_ul_uts "
                "(zero-forcing needs full column rank)")
        if self.si_paths_tx < 1 or self.si_paths_rx < 1:
            raise ConfigurationError("si_paths_tx/rx must be >= 1")
        w1, w2 = self.tcheby_weights
        if w1 < 0 or w2 < 0:
            raise ConfigurationError("tcheby_weights must be nonnegative")
        if abs(w1 + w2 - 1.0) > 1e-9:
            raise ConfigurationError(
                f"tcheby_weights must sum to 1 (got {w1 + w2!r})")
        if self.wavelength <= 0:
            raise ConfigurationError("wavelength must be positive")
        if self.min_spacing <= 0:
            raise ConfigurationError("min_spacing must be positive")
        if self.region_size_tx < 0 or self.region_size_rx < 0:
            raise ConfigurationError("region sizes must be nonnegative")
        if self.si_loss < 0:
            raise ConfigurationError("si_loss must be nonnegative")
        if self.ul_noise <= 0:
            raise ConfigurationError("ul_noise must be positive")
        if self.dl_noise.shape != (self.num_dl_uts,) or np.any(self.dl_noise <= 0):
            raise ConfigurationError(
                "dl_noise must be positive, one value per DL UT")
        if self.ul_rate_thresholds.shape != (self.num_ul_uts,) or np.any(
                self.ul_rate_thresholds < 0):
            raise ConfigurationError(
                "ul_rate_thresholds must be nonnegative, one per UL UT")
        if self.dl_rate_thresholds.shape != (self.num_dl_uts,) or np.any(
                self.dl_rate_thresholds <= 0):
            raise ConfigurationError(
                "dl_rate_thresholds must be positive, one per DL UT")
        if self.sat_gain <= 0:
            raise ConfigurationError("sat_gain must be positive")
        if self.cci_error_fraction < 0:
            raise ConfigurationError("cci_error_fraction must be nonnegative")
        if self.ref_objectives[0] == 0 or self.ref_objectives[1] == 0:
            raise ConfigurationError("ref_objectives must be nonzero")
        if self.link_distance <= 0:
            raise ConfigurationError("link_distance must be positive")

    def replace(self, **kw) -> "SystemConfig":
        return replace(self, **kw)


def desk_scale_config(seed: int = 0) -> SystemConfig:
    """Reduced-size default instance, tuned so the SI/CCI coupling is active
    but numerically benign; completes full experiment sweeps in minutes."""
    lam = SPEED_OF_LIGHT / 8e9
    return SystemConfig(
        num_tx_antennas=8, num_rx_antennas=8, num_ul_uts=3, num_dl_uts=2,
        wavelength=lam,
        region_size_tx=3 * lam, region_size_rx=3 * lam,
        min_spacing=lam / 2,
        si_paths_tx=4, si_paths_rx=4,
        si_loss=db_to_linear(-100.0),
        ul_noise=dbm_to_watts(-70.0),
        dl_noise=np.full(2, dbm_to_watts(-95.0)),
        ul_rate_thresholds=np.full(3, 0.5),
        dl_rate_thresholds=np.full(2, 1.0),
        sat_gain=db_to_linear(20.0),
        cci_error_fraction=0.05,
        tcheby_weights=(0.5, 0.5),
        ref_objectives=(1.0, 1.0),
        link_distance=3e3,
        rng_seed=seed,
    )


def full_scale_config(seed: int = 0) -> SystemConfig:
    """Full-size instance: 16 antennas per side, 600 km link, 10 SI paths."""
    lam = SPEED_OF_LIGHT / 8e9
    return SystemConfig(
        num_tx_antennas=16, num_rx_antennas=16, num_ul_uts=6, num_dl_uts=2,
        wavelength=lam,
        region_size_tx=5 * lam, region_size_rx=5 * lam,
        min_spacing=lam / 2,
        si_paths_tx=10, si_paths_rx=10,
        si_loss=db_to_linear(-100.0),
        ul_noise=dbm_to_watts(-110.0),
        dl_noise=np.full(2, dbm_to_watts(-100.0)),
        ul_rate_thresholds=np.full(6, 0.5),
        dl_rate_thresholds=np.full(2, 1.0),
        sat_gain=db_to_linear(20.0),
        cci_error_fraction=0.05,
        tcheby_weights=(0.5, 0.5),
        ref_objectives=(1.0, 1.0),
        link_distance=600e3,
        rng_seed=seed,
    )


@dataclass(eq=False)
class Scenario:
    """One realized problem instance (immutable by convention)."""

    config: SystemConfig
    si_tx_angles: tuple[PathAngles, ...]   # L^t entries
    si_rx_angles: tuple[PathAngles, ...]   # L^r entries
    si_core: np.ndarray                    # Sigma, complex (L^r, L^t)
    ul_angles: tuple[PathAngles, ...]      # J entries
    dl_angles: tuple[PathAngles, ...]      # K entries
    ul_coeffs: np.ndarray                  # complex (J,)
    dl_coeffs: np.ndarray                  # complex (K,)
    cci_true: np.ndarray                   # complex (J, K)
    cci_est: np.ndarray                    # complex (J, K)
    cci_radii: np.ndarray                  # real (J, K), >= |cci_est - cci_true|

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        if self.si_tx_angles != other.si_tx_angles:
            return False
        if self.si_rx_angles != other.si_rx_angles:
            return False
        if self.ul_angles != other.ul_angles or self.dl_angles != other.dl_angles:
            return False
        for name in ("si_core", "ul_coeffs", "dl_coeffs",
                     "cci_true", "cci_est", "cci_radii"):
            if not np.array_equal(getattr(self, name), getattr(other, name)):
                return False
        return _config_equal(self.config, other.config)

    def aggregated_cci_radii(self) -> np.ndarray:
        """Per-DL-UT radius: eps_k = sqrt(sum_j eps_jk^2), shape (K,)."""
        return np.sqrt(np.sum(self.cci_radii ** 2, axis=0))

    def check_invariants(self):
        err = np.abs(self.cci_est - self.cci_true)
        if np.any(err > self.cci_radii + 1e-15):
            raise ConfigurationError(
                "CCI estimate falls outside its uncertainty set")
        if np.any(self.cci_radii < 0):
            raise ConfigurationError("cci_radii must be nonnegative")


def _config_equal(a: SystemConfig, b: SystemConfig) -> bool:
    for f in fields(SystemConfig):
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, np.ndarray):
            if not np.array_equal(va, vb):
                return False
        elif va != vb:
            return False
    return True


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _path_gain(wavelength: float, distance: float, gain: float) -> float:
    """Log-distance power gain: gain * (lambda/4pi)^2 * d^-2.8."""
    return gain * (wavelength / (4.0 * math.pi)) ** 2 * distance ** (-2.8)


def _draw_angles(rng: np.random.Generator, count: int) -> tuple[PathAngles, ...]:
    vals = rng.uniform(0.0, math.pi, size=(count, 2))
    return tuple(PathAngles(float(e), float(a)) for e, a in vals)


def generate(config: SystemConfig) -> Scenario:
    """Draw a scenario deterministically from ``config`` (seed included).

    Angles are uniform in [0, pi]. Link coefficients follow the log-distance
    model with exponent 2.8 and uniform phase; the satellite gain applies to
    the UL/DL links but not to the UT-to-UT CCI links, whose distances are
    uniform in [1, 10] km. CCI errors are drawn uniformly inside the complex
    disk of radius eps_jk, so the estimate always lies inside its own
    uncertainty set.
    """
    config.validate()
    rng = np.random.default_rng(config.rng_seed)
    lt, lr = config.si_paths_tx, config.si_paths_rx
    j_n, k_n = config.num_ul_uts, config.num_dl_uts

    si_tx_angles = _draw_angles(rng, lt)
    si_rx_angles = _draw_angles(rng, lr)

    sigma_scale = math.sqrt(1.0 / (2.0 * lt * lr))
    si_core = sigma_scale * (rng.standard_normal((lr, lt))
                             + 1j * rng.standard_normal((lr, lt)))

    ul_angles = _draw_angles(rng, j_n)
    dl_angles = _draw_angles(rng, k_n)

    link_mag = math.sqrt(_path_gain(config.wavelength, config.link_distance,
                                    config.sat_gain))
    ul_coeffs = link_mag * np.exp(1j * rng.uniform(0, 2 * math.pi, size=j_n))
    dl_coeffs = link_mag * np.exp(1j * rng.uniform(0, 2 * math.pi, size=k_n))

    ut_dist = rng.uniform(1e3, 1e4, size=(j_n, k_n))
    cci_mag = np.sqrt(_path_gain(config.wavelength, 1.0, 1.0)) \
        * ut_dist ** (-1.4)
    cci_phase = rng.uniform(0, 2 * math.pi, size=(j_n, k_n))
    cci_true = cci_mag * np.exp(1j * cci_phase)

    cci_radii = math.sqrt(config.cci_error_fraction) * np.abs(cci_true)
    err_u = rng.uniform(0.0, 1.0, size=(j_n, k_n))        # radius ~ eps*sqrt(u)
    err_phase = rng.uniform(0, 2 * math.pi, size=(j_n, k_n))
    cci_err = cci_radii * np.sqrt(err_u) * np.exp(1j * err_phase)
    cci_est = cci_true - cci_err

    s = Scenario(
        config=config,
        si_tx_angles=si_tx_angles, si_rx_angles=si_rx_angles,
        si_core=si_core,
        ul_angles=ul_angles, dl_angles=dl_angles,
        ul_coeffs=ul_coeffs, dl_coeffs=dl_coeffs,
        cci_true=cci_true, cci_est=cci_est, cci_radii=cci_radii,
    )
    s.check_invariants()
    return s


# ---------------------------------------------------------------------------
# Config files (hand-written dialect: decibel keys) and scenario files
# ---------------------------------------------------------------------------

_COUNT_KEYS = {
    "num_tx_antennas", "num_rx_antennas", "num_ul_uts", "num_dl_uts",
    "si_paths_tx", "si_paths_rx", "rng_seed",
}


def _parse_kv_lines(lines, where: str) -> dict:
    out = {}
    for ln, raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioParseError(f"{where}:{ln}: expected 'key = value'")
        key, _, val = line.partition("=")
        out[key.strip()] = (ln, val.strip())
    return out


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def config_from_mapping(kv: dict, where: str = "<config>") -> SystemConfig:
    """Build a SystemConfig from parsed key/value pairs.

    Accepts the hand-written dialect (``si_loss_db``, ``ul_noise_dbm``, ...)
    and the machine-written linear dialect (``si_loss_ratio``,
    ``ul_noise_w``, ...). Linear keys win when both are present.
    """
    def take(*names, required=True):
        for n in names:
            if n in kv:
                return n, kv[n][1]
        if required:
            raise ScenarioParseError(f"{where}: missing key {names[0]!r}")
        return None, None

    def scalar(*names, conv=float, required=True, default=None):
        name, raw = take(*names, required=required)
        if raw is None:
            return default
        try:
            return conv(raw)
        except ValueError as exc:
            ln = kv[name][0]
            raise ScenarioParseError(f"{where}:{ln}: bad value for {name}: {exc}")

    def vector(*names):
        name, raw = take(*names)
        try:
            return np.array(_floats(raw))
        except ValueError as exc:
            ln = kv[name][0]
            raise ScenarioParseError(f"{where}:{ln}: bad value for {name}: {exc}")

    name, _ = take("si_loss_ratio", "si_loss_db")
    si_loss = scalar("si_loss_ratio") if name == "si_loss_ratio" \
        else db_to_linear(scalar("si_loss_db"))
    name, _ = take("ul_noise_w", "ul_noise_dbm")
    ul_noise = scalar("ul_noise_w") if name == "ul_noise_w" \
        else dbm_to_watts(scalar("ul_noise_dbm"))
    name, _ = take("dl_noise_w", "dl_noise_dbm")
    dl_noise = vector("dl_noise_w") if name == "dl_noise_w" \
        else np.array([dbm_to_watts(v) for v in vector("dl_noise_dbm")])
    name, _ = take("sat_gain_ratio", "sat_gain_dbi")
    sat_gain = scalar("sat_gain_ratio") if name == "sat_gain_ratio" \
        else db_to_linear(scalar("sat_gain_dbi"))

    cfg = SystemConfig(
        num_tx_antennas=scalar("num_tx_antennas", conv=int),
        num_rx_antennas=scalar("num_rx_antennas", conv=int),
        num_ul_uts=scalar("num_ul_uts", conv=int),
        num_dl_uts=scalar("num_dl_uts", conv=int),
        wavelength=scalar("wavelength_m"),
        region_size_tx=scalar("region_size_tx_m"),
        region_size_rx=scalar("region_size_rx_m"),
        min_spacing=scalar("min_spacing_m"),
        si_paths_tx=scalar("si_paths_tx", conv=int),
        si_paths_rx=scalar("si_paths_rx", conv=int),
        si_loss=si_loss,
        ul_noise=ul_noise,
        dl_noise=dl_noise,
        ul_rate_thresholds=vector("ul_rate_threshold_bpshz"),
        dl_rate_thresholds=vector("dl_rate_threshold_bpshz"),
        sat_gain=sat_gain,
        cci_error_fraction=scalar("cci_error_fraction"),
        tcheby_weights=(scalar("tcheby_weight_ul"), scalar("tcheby_weight_dl")),
        ref_objectives=(scalar("ref_objective_ul_w"),
                        scalar("ref_objective_dl_w")),
        link_distance=scalar("link_distance_m"),
        rng_seed=scalar("rng_seed", conv=int, required=False, default=0),
    )
    try:
        cfg.validate()
    except ConfigurationError as exc:
        raise ScenarioParseError(f"{where}: {exc}") from exc
    return cfg


def load_config(path) -> SystemConfig:
    """Read a hand-written key/value config file."""
    with open(path, "r") as fh:
        kv = _parse_kv_lines(enumerate(fh, start=1), str(path))
    return config_from_mapping(kv, where=str(path))


def _config_lines(config: SystemConfig) -> list[str]:
    f = lambda x: _FLOAT_FMT % x
    vec = lambda v: ", ".join(_FLOAT_FMT % x for x in v)
    return [
        f"num_tx_antennas = {config.num_tx_antennas}",
        f"num_rx_antennas = {config.num_rx_antennas}",
        f"num_ul_uts = {config.num_ul_uts}",
        f"num_dl_uts = {config.num_dl_uts}",
        f"wavelength_m = {f(config.wavelength)}",
        f"region_size_tx_m = {f(config.region_size_tx)}",
        f"region_size_rx_m = {f(config.region_size_rx)}",
        f"min_spacing_m = {f(config.min_spacing)}",
        f"si_paths_tx = {config.si_paths_tx}",
        f"si_paths_rx = {config.si_paths_rx}",
        f"si_loss_ratio = {f(config.si_loss)}",
        f"ul_noise_w = {f(config.ul_noise)}",
        f"dl_noise_w = {vec(config.dl_noise)}",
        f"ul_rate_threshold_bpshz = {vec(config.ul_rate_thresholds)}",
        f"dl_rate_threshold_bpshz = {vec(config.dl_rate_thresholds)}",
        f"sat_gain_ratio = {f(config.sat_gain)}",
        f"cci_error_fraction = {f(config.cci_error_fraction)}",
        f"tcheby_weight_ul = {f(config.tcheby_weights[0])}",
        f"tcheby_weight_dl = {f(config.tcheby_weights[1])}",
        f"ref_objective_ul_w = {f(config.ref_objectives[0])}",
        f"ref_objective_dl_w = {f(config.ref_objectives[1])}",
        f"link_distance_m = {f(config.link_distance)}",
        f"rng_seed = {config.rng_seed}",
    ]


def _angle_lines(angles) -> list[str]:
    return [f"{_FLOAT_FMT % a.elevation} {_FLOAT_FMT % a.azimuth}"
            for a in angles]


def _complex_lines(arr: np.ndarray) -> list[str]:
    arr2 = np.atleast_2d(arr)
    return [" ".join(f"{_FLOAT_FMT % v.real} {_FLOAT_FMT % v.imag}"
                     for v in row) for row in arr2]


def _real_lines(arr: np.ndarray) -> list[str]:
    arr2 = np.atleast_2d(arr)
    return [" ".join(_FLOAT_FMT % v for v in row) for row in arr2]


def scenario_to_text(s: Scenario) -> str:
    out = [SCENARIO_HEADER, "[config]"]
    out += _config_lines(s.config)
    out += ["[si_tx_angles]"] + _angle_lines(s.si_tx_angles)
    out += ["[si_rx_angles]"] + _angle_lines(s.si_rx_angles)
    out += ["[si_core]"] + _complex_lines(s.si_core)
    out += ["[ul_angles]"] + _angle_lines(s.ul_angles)
    out += ["[dl_angles]"] + _angle_lines(s.dl_angles)
    out += ["[ul_coeffs]"] + _complex_lines(s.ul_coeffs)
    out += ["[dl_coeffs]"] + _complex_lines(s.dl_coeffs)
    out += ["[cci_true]"] + _complex_lines(s.cci_true)
    out += ["[cci_est]"] + _complex_lines(s.cci_est)
    out += ["[cci_radii]"] + _real_lines(s.cci_radii)
    return "\n".join(out) + "\n"


def save(s: Scenario, path):
    with open(path, "w") as fh:
        fh.write(scenario_to_text(s))


def _split_sections(lines, where: str):
    header = None
    sections: dict[str, list] = {}
    current = None
    for ln, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if header is None:
            if line.strip() != SCENARIO_HEADER:
                raise ScenarioParseError(
                    f"{where}:1: expected header {SCENARIO_HEADER!r}")
            header = line
            continue
        stripped = line.split("#", 1)[0].strip() if not line.startswith("#") \
            else ""
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1]
            sections[current] = []
            continue
        if current is None:
            raise ScenarioParseError(f"{where}:{ln}: data before any section")
        sections[current].append((ln, stripped))
    if header is None:
        raise ScenarioParseError(f"{where}: empty file")
    return sections


def _parse_angles(rows, where: str) -> tuple[PathAngles, ...]:
    out = []
    for ln, text in rows:
        vals = _floats(text)
        if len(vals) != 2:
            raise ScenarioParseError(
                f"{where}:{ln}: expected 'elevation azimuth'")
        try:
            out.append(PathAngles(vals[0], vals[1]))
        except ConfigurationError as exc:
            raise ScenarioParseError(f"{where}:{ln}: {exc}") from exc
    return tuple(out)


def _parse_complex(rows, where: str) -> np.ndarray:
    data = []
    for ln, text in rows:
        vals = _floats(text)
        if len(vals) % 2:
            raise ScenarioParseError(
                f"{where}:{ln}: odd number of floats in complex row")
        data.append([complex(vals[i], vals[i + 1])
                     for i in range(0, len(vals), 2)])
    return np.array(data, dtype=complex)


def _parse_real(rows, where: str) -> np.ndarray:
    return np.array([_floats(text) for _, text in rows], dtype=float)


def load(path) -> Scenario:
    """Read a scenario file written by :func:`save`; validates invariants."""
    with open(path, "r") as fh:
        sections = _split_sections(fh, str(path))
    where = str(path)
    required = ["config", "si_tx_angles", "si_rx_angles", "si_core",
                "ul_angles", "dl_angles", "ul_coeffs", "dl_coeffs",
                "cci_true", "cci_est", "cci_radii"]
    for name in required:
        if name not in sections:
            raise ScenarioParseError(f"{where}: missing section [{name}]")

    kv = _parse_kv_lines(sections["config"], where)
    config = config_from_mapping(kv, where=where)

    s = Scenario(
        config=config,
        si_tx_angles=_parse_angles(sections["si_tx_angles"], where),
        si_rx_angles=_parse_angles(sections["si_rx_angles"], where),
        si_core=_parse_complex(sections["si_core"], where),
        ul_angles=_parse_angles(sections["ul_angles"], where),
        dl_angles=_parse_angles(sections["dl_angles"], where),
        ul_coeffs=_parse_complex(sections["ul_coeffs"], where).ravel(),
        dl_coeffs=_parse_complex(sections["dl_coeffs"], where).ravel(),
        cci_true=_parse_complex(sections["cci_true"], where),
        cci_est=_parse_complex(sections["cci_est"], where),
        cci_radii=_parse_real(sections["cci_radii"], where),
    )
    if s.si_core.shape != (config.si_paths_rx, config.si_paths_tx):
        raise ScenarioParseError(f"{where}: si_core shape {s.si_core.shape} "
                                 f"does not match path counts")
    if s.cci_true.shape != (config.num_ul_uts, config.num_dl_uts):
        raise ScenarioParseError(f"{where}: cci_true shape mismatch")
    s.check_invariants()
    return s
