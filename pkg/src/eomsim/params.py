"""Device configuration and derived rotating-frame rates.

All quantities are SI; every frequency-like quantity is an angular
frequency in rad/s once loaded.  Config documents may spell any of the
frequency keys either as ``*_rad_s`` (angular) or ``*_hz`` (cycles);
the ``_hz`` form is multiplied by 2*pi on load.

The membrane quadratures are dimensionless (commutator [Q, P] = i), so
all optomechanical coupling rates carry units of rad/s and the drive
amplitudes carry 1/s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

from scipy.constants import c as C_LIGHT, hbar as HBAR, k as K_B

__all__ = [
    "ConfigError",
    "PhysicalConfig",
    "DerivedRates",
    "thermal_occupation",
    "drive_amplitude",
    "derive_couplings",
    "load_config",
    "loads_config",
    "dumps_config",
]

# ln(float_max); above this the Bose factor underflows to zero anyway.
_EXP_ARG_MAX = 709.0


class ConfigError(ValueError):
    """A configuration document is malformed or physically inconsistent."""


def thermal_occupation(omega, temperature):
    """Mean thermal occupation 1/(exp(hbar*w/kB*T) - 1) of a mode.

    Parameters
    ----------
    omega : float
        Mode angular frequency in rad/s, > 0.
    temperature : float
        Bath temperature in kelvin, >= 0.  T = 0 returns exactly 0
        (the limit is taken; no overflow is raised).
    """
    if omega <= 0.0:
        raise ValueError("thermal_occupation requires omega > 0")
    if temperature < 0.0:
        raise ValueError("thermal_occupation requires temperature >= 0")
    if temperature == 0.0:
        return 0.0
    x = HBAR * omega / (K_B * temperature)
    if x > _EXP_ARG_MAX:
        return 0.0
    return 1.0 / math.expm1(x)


def drive_amplitude(power, decay, omega_drive):
    """Coherent drive amplitude sqrt(2*P*kappa/(hbar*w_d)) in 1/s.

    Parameters
    ----------
    power : float
        Input power in watts, >= 0.
    decay : float
        Cavity amplitude decay rate in rad/s, > 0.
    omega_drive : float
        Drive angular frequency in rad/s, > 0.
    """
    if power < 0.0:
        raise ValueError("drive_amplitude requires power >= 0")
    if decay <= 0.0 or omega_drive <= 0.0:
        raise ValueError("drive_amplitude requires decay > 0 and omega_drive > 0")
    return math.sqrt(2.0 * power * decay / (HBAR * omega_drive))


@dataclass(frozen=True)
class PhysicalConfig:
    """Raw device, drive and bath parameters in SI units.

    Exactly one of ``q_mechanical``/``gamma_m`` and exactly one of
    ``g2_over_g1``/(``reflectivity`` + ``g2_sign``) must be set.
    """

    cavity_length: float        # m
    omega_c: float              # rad/s, optical cavity resonance
    lambda_drive: float         # m, optical drive wavelength
    mass: float                 # kg, membrane effective mass
    omega_m: float              # rad/s, mechanical resonance
    kappa: float                # rad/s, optical amplitude decay
    omega_w: float              # rad/s, microwave resonance
    kappa_w: float              # rad/s, microwave amplitude decay
    gap: float                  # m, capacitor plate separation
    mu: float                   # dimensionless capacitance participation, (0, 1)
    power_optical: float        # W
    power_microwave: float      # W
    delta0c: float              # rad/s, bare optical detuning omega_c - omega_d
    delta0w: float              # rad/s, bare microwave detuning omega_w - omega_dw
    temperature: float          # K
    q_mechanical: float | None = None
    gamma_m: float | None = None      # rad/s
    g2_over_g1: float | None = None   # signed quadratic/linear coupling ratio
    reflectivity: float | None = None # membrane power reflectivity in [0, 1)
    g2_sign: int | None = None        # +1 or -1, required with reflectivity

    def __post_init__(self):
        positive = [
            "cavity_length", "omega_c", "lambda_drive", "mass", "omega_m",
            "kappa", "omega_w", "kappa_w", "gap",
        ]
        for name in positive:
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("power_optical", "power_microwave", "temperature"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 < self.mu < 1.0:
            raise ConfigError("mu must lie strictly between 0 and 1")
        if (self.q_mechanical is None) == (self.gamma_m is None):
            raise ConfigError("exactly one of q_mechanical, gamma_m must be given")
        if self.q_mechanical is not None and self.q_mechanical <= 0.0:
            raise ConfigError("q_mechanical must be > 0")
        if self.gamma_m is not None and self.gamma_m <= 0.0:
            raise ConfigError("gamma_m must be > 0")
        has_ratio = self.g2_over_g1 is not None
        has_refl = self.reflectivity is not None or self.g2_sign is not None
        if has_ratio == has_refl:
            raise ConfigError(
                "exactly one of g2_over_g1, (reflectivity, g2_sign) must be given"
            )
        if has_refl:
            if self.reflectivity is None or self.g2_sign is None:
                raise ConfigError("reflectivity and g2_sign must be given together")
            if not 0.0 <= self.reflectivity < 1.0:
                raise ConfigError("reflectivity must lie in [0, 1)")
            if self.g2_sign not in (-1, 1):
                raise ConfigError("g2_sign must be +1 or -1")
        if self.delta0w >= self.omega_w:
            raise ConfigError("delta0w must be below omega_w (drive frequency > 0)")


@dataclass(frozen=True)
class DerivedRates:
    """Rotating-frame rates of the three-mode model, all in rad/s.

    ``coupling_quadratic`` is signed; all other rates are >= 0.  Drive
    amplitudes are in 1/s, occupations dimensionless.
    """

    coupling_linear: float      # single-photon linear optomechanical rate
    coupling_quadratic: float   # signed single-photon quadratic rate
    coupling_microwave: float   # membrane-LC electromechanical rate
    drive_optical: float        # 1/s
    drive_microwave: float      # 1/s
    n_optical: float
    n_microwave: float
    n_mechanical: float
    gamma_m: float
    omega_m: float
    kappa: float
    kappa_w: float
    delta0c: float
    delta0w: float


def derive_couplings(cfg: PhysicalConfig) -> DerivedRates:
    """Derive every rotating-frame rate of the model from device parameters.

    The zero-point amplitude x_zpf = sqrt(hbar/(m*Omega_m)) sets the
    linear rate (omega_c/L)*x_zpf and the electromechanical rate
    (mu*omega_w/2d)*x_zpf.  The quadratic rate follows either from the
    configured ratio or from the membrane reflectivity form
    (8*pi^2*c/(lambda_d^2*L))*sqrt(R/(1-R))*(hbar/(m*Omega_m)).
    """
    x_zpf = math.sqrt(HBAR / (cfg.mass * cfg.omega_m))
    g_lin = (cfg.omega_c / cfg.cavity_length) * x_zpf
    g_mw = (cfg.mu * cfg.omega_w / (2.0 * cfg.gap)) * x_zpf
    if cfg.g2_over_g1 is not None:
        g_quad = g_lin * cfg.g2_over_g1
    else:
        magnitude = (
            8.0 * math.pi**2 * C_LIGHT / (cfg.lambda_drive**2 * cfg.cavity_length)
            * math.sqrt(cfg.reflectivity / (1.0 - cfg.reflectivity))
            * (HBAR / (cfg.mass * cfg.omega_m))
        )
        g_quad = cfg.g2_sign * magnitude
    if cfg.q_mechanical is not None:
        gamma_m = cfg.omega_m / cfg.q_mechanical
    else:
        gamma_m = cfg.gamma_m
    omega_d = 2.0 * math.pi * C_LIGHT / cfg.lambda_drive
    omega_dw = cfg.omega_w - cfg.delta0w
    return DerivedRates(
        coupling_linear=g_lin,
        coupling_quadratic=g_quad,
        coupling_microwave=g_mw,
        drive_optical=drive_amplitude(cfg.power_optical, cfg.kappa, omega_d),
        drive_microwave=drive_amplitude(cfg.power_microwave, cfg.kappa_w, omega_dw),
        n_optical=thermal_occupation(cfg.omega_c, cfg.temperature),
        n_microwave=thermal_occupation(cfg.omega_w, cfg.temperature),
        n_mechanical=thermal_occupation(cfg.omega_m, cfg.temperature),
        gamma_m=gamma_m,
        omega_m=cfg.omega_m,
        kappa=cfg.kappa,
        kappa_w=cfg.kappa_w,
        delta0c=cfg.delta0c,
        delta0w=cfg.delta0w,
    )


# Mapping of config-document keys to PhysicalConfig fields.  Frequency
# quantities accept a `<key>_rad_s` or `<key>_hz` spelling.
_PLAIN_KEYS = {
    "cavity_length_m": "cavity_length",
    "lambda_drive_m": "lambda_drive",
    "mass_kg": "mass",
    "gap_m": "gap",
    "mu": "mu",
    "power_optical_w": "power_optical",
    "power_microwave_w": "power_microwave",
    "temperature_k": "temperature",
    "q_mechanical": "q_mechanical",
    "g2_over_g1": "g2_over_g1",
    "reflectivity": "reflectivity",
    "g2_sign": "g2_sign",
}
_FREQ_KEYS = {
    "omega_c": "omega_c",
    "omega_m": "omega_m",
    "kappa": "kappa",
    "omega_w": "omega_w",
    "kappa_w": "kappa_w",
    "delta0c": "delta0c",
    "delta0w": "delta0w",
    "gamma_m": "gamma_m",
}
_REQUIRED_FIELDS = [
    "cavity_length", "omega_c", "lambda_drive", "mass", "omega_m", "kappa",
    "omega_w", "kappa_w", "gap", "mu", "power_optical", "power_microwave",
    "delta0c", "delta0w", "temperature",
]


def loads_config(text: str) -> PhysicalConfig:
    """Parse a JSON config document into a validated PhysicalConfig.

    Unknown keys are rejected; missing required keys and violated
    invariants raise ConfigError naming the offending field.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")

    values: dict[str, float] = {}

    def assign(field, value, key):
        if field in values:
            raise ConfigError(f"duplicate specification of {field} (key {key!r})")
        values[field] = value

    for key, raw in doc.items():
        if key in _PLAIN_KEYS:
            field = _PLAIN_KEYS[key]
            if field == "g2_sign":
                if raw not in (-1, 1):
                    raise ConfigError("g2_sign must be +1 or -1")
                assign(field, int(raw), key)
                continue
            if not isinstance(raw, (int, float)) or isinstance(raw, bool):
                raise ConfigError(f"key {key!r} must be a number")
            assign(field, float(raw), key)
            continue
        matched = False
        for base, field in _FREQ_KEYS.items():
            if key == base + "_rad_s":
                scale, matched = 1.0, True
            elif key == base + "_hz":
                scale, matched = 2.0 * math.pi, True
            if matched:
                if not isinstance(raw, (int, float)) or isinstance(raw, bool):
                    raise ConfigError(f"key {key!r} must be a number")
                assign(field, scale * float(raw), key)
                break
        if not matched:
            raise ConfigError(f"unknown config key {key!r}")

    missing = [f for f in _REQUIRED_FIELDS if f not in values]
    if missing:
        raise ConfigError(f"missing required config field(s): {', '.join(missing)}")
    if "q_mechanical" in values and "gamma_m" in values:
        raise ConfigError("exactly one of q_mechanical, gamma_m must be given")
    return PhysicalConfig(**values)


def load_config(path) -> PhysicalConfig:
    """Read and parse a JSON config file; see loads_config."""
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read())


def dumps_config(cfg: PhysicalConfig) -> str:
    """Serialize a PhysicalConfig to canonical JSON (rad/s keys).

    Round-trip exact: loads_config(dumps_config(cfg)) reproduces every
    field bit-for-bit, hence identical DerivedRates.
    """
    inverse_plain = {v: k for k, v in _PLAIN_KEYS.items()}
    inverse_freq = {v: k + "_rad_s" for k, v in _FREQ_KEYS.items()}
    doc = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        key = inverse_plain.get(f.name) or inverse_freq[f.name]
        doc[key] = value
    return json.dumps(doc, indent=2, sort_keys=True)
