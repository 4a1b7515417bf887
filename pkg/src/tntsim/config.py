"""INI-style experiment configuration.

Flat key-value sections, diff-friendly, no schema tooling.  Frequencies are
given in Hz (key names end in _hz) and converted to angular frequencies
internally.  mode=ideal forbids loss channels and technical noise.
"""

import configparser
import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConfigError
from .hamiltonian import PhysicalParams
from .mcwf import JumpChannel, NoiseModel

__all__ = ["ExperimentConfig", "parse_config", "parse_config_file", "DEFAULT_CONFIG_TEXT"]

TWO_PI = 2.0 * math.pi

DEFAULT_CONFIG_TEXT = """\
[run]
mode = ideal
seed = 1
threads = 0

[physics]
chi_coeff_hz = 1.43
nchi_hz =
omega_hz = 19.0
delta_ext_hz = 0.0
delta_coeff_hz = 0.63
n_ref = 550

[protocol]
n_atoms = 500
times_ms = 1:40:1
echo = false
omega_pulse_hz = 340.0
prep_pulse_hz =
tomography_angles_deg = 0:180:1
alpha_deg = 52.0
ndep_n_values = 200:600:50
ndep_time_ms = 15.0

[loss]
channels =

[noise]
sigma_delta_hz = 0.0
sigma_det_atoms = 0.0
ramp_loss_atoms = 0.0
apply_ramp_loss = false
apply_shot_noise = false

[ensemble]
n_traj = 500
shots = 100
dt_us =

[array]
n_sites = 30
site_n_min = 200
site_n_max = 600
profile = gaussian
"""


def _parse_number_list(text):
    """'a:b:step' inclusive ranges or comma lists or single numbers."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) == 2:
            start, stop, step = parts[0], parts[1], 1.0
        elif len(parts) == 3:
            start, stop, step = parts
        else:
            raise ConfigError(f"bad range spec {text!r}")
        if step <= 0 or stop < start:
            raise ConfigError(f"bad range spec {text!r}")
        return tuple(np.arange(start, stop + 0.5 * step, step).tolist())
    return tuple(float(p) for p in text.split(","))


def _parse_channels(text):
    channels = []
    text = text.strip()
    if not text:
        return ()
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        fields = [f.strip() for f in part.split(",")]
        if len(fields) != 3:
            raise ConfigError(f"loss channel {part!r} is not 'p,q,rate'")
        try:
            channels.append(JumpChannel(int(fields[0]), int(fields[1]), float(fields[2])))
        except ValueError as exc:
            raise ConfigError(f"bad loss channel {part!r}: {exc}") from exc
    return tuple(channels)


def _fmt_number_list(values):
    return ",".join(f"{v:g}" for v in values)


def _fmt_channels(channels):
    return "; ".join(f"{c.p},{c.q},{c.rate_coeff:g}" for c in channels)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "ideal"
    seed: int = 1
    threads: int = 0  # 0 = automatic
    chi_coeff_hz: float = 1.43
    nchi_hz: float | None = None
    omega_hz: float = 19.0
    delta_ext_hz: float = 0.0
    delta_coeff_hz: float = 0.63
    n_ref: float = 550.0
    n_atoms: int = 500
    times_ms: tuple = (15.0,)
    echo: bool = False
    omega_pulse_hz: float = 340.0
    prep_pulse_hz: float | None = None
    tomography_angles_deg: tuple = tuple(float(a) for a in range(0, 181))
    alpha_deg: float = 52.0
    ndep_n_values: tuple = tuple(float(n) for n in range(200, 601, 50))
    ndep_time_ms: float = 15.0
    channels: tuple = ()
    sigma_delta_hz: float = 0.0
    sigma_det_atoms: float = 0.0
    ramp_loss_atoms: float = 0.0
    apply_ramp_loss: bool = False
    apply_shot_noise: bool = False
    n_traj: int = 500
    shots: int = 100
    dt_us: float | None = None
    n_sites: int = 30
    site_n_min: int = 200
    site_n_max: int = 600
    profile: str = "gaussian"

    def validate(self):
        if self.mode not in ("ideal", "mcwf", "experiment"):
            raise ConfigError(f"run.mode must be ideal, mcwf or experiment, got {self.mode!r}")
        if self.mode == "ideal":
            if self.channels:
                raise ConfigError("run.mode = ideal forbids loss.channels")
            if self.sigma_delta_hz or self.sigma_det_atoms or self.ramp_loss_atoms:
                raise ConfigError("run.mode = ideal forbids [noise] entries")
        if self.n_atoms < 1:
            raise ConfigError("protocol.n_atoms must be >= 1")
        if not self.times_ms:
            raise ConfigError("protocol.times_ms must be non-empty")
        if self.n_traj < 1 or self.shots < 1:
            raise ConfigError("[ensemble] counts must be >= 1")
        if self.n_sites < 1 or self.site_n_min < 1 or self.site_n_max < self.site_n_min:
            raise ConfigError("bad [array] settings")
        return self

    # unit-converted views -------------------------------------------------

    def params(self):
        return PhysicalParams(
            omega=TWO_PI * self.omega_hz,
            chi_coeff=TWO_PI * self.chi_coeff_hz,
            nchi_fixed=None if self.nchi_hz is None else TWO_PI * self.nchi_hz,
            delta_ext=TWO_PI * self.delta_ext_hz,
            delta_coeff=TWO_PI * self.delta_coeff_hz,
            n_ref=self.n_ref,
        )

    def noise(self):
        return NoiseModel(
            sigma_delta=TWO_PI * self.sigma_delta_hz,
            sigma_det=self.sigma_det_atoms,
            ramp_loss_atoms=self.ramp_loss_atoms,
        )

    def times_s(self):
        return tuple(t * 1e-3 for t in self.times_ms)

    def angles_rad(self):
        return tuple(math.radians(a) for a in self.tomography_angles_deg)

    def dt_s(self):
        return None if self.dt_us is None else self.dt_us * 1e-6

    # serialization ---------------------------------------------------------

    def to_text(self):
        def opt(v, fmt="{:g}"):
            return "" if v is None else fmt.format(v)

        return (
            "[run]\n"
            f"mode = {self.mode}\n"
            f"seed = {self.seed}\n"
            f"threads = {self.threads}\n"
            "\n[physics]\n"
            f"chi_coeff_hz = {self.chi_coeff_hz:g}\n"
            f"nchi_hz = {opt(self.nchi_hz)}\n"
            f"omega_hz = {self.omega_hz:g}\n"
            f"delta_ext_hz = {self.delta_ext_hz:g}\n"
            f"delta_coeff_hz = {self.delta_coeff_hz:g}\n"
            f"n_ref = {self.n_ref:g}\n"
            "\n[protocol]\n"
            f"n_atoms = {self.n_atoms}\n"
            f"times_ms = {_fmt_number_list(self.times_ms)}\n"
            f"echo = {str(self.echo).lower()}\n"
            f"omega_pulse_hz = {self.omega_pulse_hz:g}\n"
            f"prep_pulse_hz = {opt(self.prep_pulse_hz)}\n"
            f"tomography_angles_deg = {_fmt_number_list(self.tomography_angles_deg)}\n"
            f"alpha_deg = {self.alpha_deg:g}\n"
            f"ndep_n_values = {_fmt_number_list(self.ndep_n_values)}\n"
            f"ndep_time_ms = {self.ndep_time_ms:g}\n"
            "\n[loss]\n"
            f"channels = {_fmt_channels(self.channels)}\n"
            "\n[noise]\n"
            f"sigma_delta_hz = {self.sigma_delta_hz:g}\n"
            f"sigma_det_atoms = {self.sigma_det_atoms:g}\n"
            f"ramp_loss_atoms = {self.ramp_loss_atoms:g}\n"
            f"apply_ramp_loss = {str(self.apply_ramp_loss).lower()}\n"
            f"apply_shot_noise = {str(self.apply_shot_noise).lower()}\n"
            "\n[ensemble]\n"
            f"n_traj = {self.n_traj}\n"
            f"shots = {self.shots}\n"
            f"dt_us = {opt(self.dt_us)}\n"
            "\n[array]\n"
            f"n_sites = {self.n_sites}\n"
            f"site_n_min = {self.site_n_min}\n"
            f"site_n_max = {self.site_n_max}\n"
            f"profile = {self.profile}\n"
        )

    def config_hash(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def override(self, **kwargs):
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None}).validate()


def parse_config(text):
    """Parse INI text into a validated ExperimentConfig."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    def get(section, key, cast=str, default=None, required=False):
        if not cp.has_option(section, key) or cp.get(section, key).strip() == "":
            if required:
                raise ConfigError(f"missing config key [{section}] {key}")
            return default
        raw = cp.get(section, key).strip()
        try:
            if cast is bool:
                if raw.lower() in ("true", "yes", "on", "1"):
                    return True
                if raw.lower() in ("false", "no", "off", "0"):
                    return False
                raise ValueError(f"not a boolean: {raw!r}")
            return cast(raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"bad value for [{section}] {key}: {exc}") from exc

    defaults = ExperimentConfig()
    cfg = ExperimentConfig(
        mode=get("run", "mode", str, defaults.mode),
        seed=get("run", "seed", int, defaults.seed),
        threads=get("run", "threads", int, defaults.threads),
        chi_coeff_hz=get("physics", "chi_coeff_hz", float, defaults.chi_coeff_hz),
        nchi_hz=get("physics", "nchi_hz", float, None),
        omega_hz=get("physics", "omega_hz", float, defaults.omega_hz),
        delta_ext_hz=get("physics", "delta_ext_hz", float, defaults.delta_ext_hz),
        delta_coeff_hz=get("physics", "delta_coeff_hz", float, defaults.delta_coeff_hz),
        n_ref=get("physics", "n_ref", float, defaults.n_ref),
        n_atoms=get("protocol", "n_atoms", int, defaults.n_atoms),
        times_ms=get("protocol", "times_ms", _parse_number_list, defaults.times_ms),
        echo=get("protocol", "echo", bool, defaults.echo),
        omega_pulse_hz=get("protocol", "omega_pulse_hz", float, defaults.omega_pulse_hz),
        prep_pulse_hz=get("protocol", "prep_pulse_hz", float, None),
        tomography_angles_deg=get(
            "protocol", "tomography_angles_deg", _parse_number_list,
            defaults.tomography_angles_deg,
        ),
        alpha_deg=get("protocol", "alpha_deg", float, defaults.alpha_deg),
        ndep_n_values=get(
            "protocol", "ndep_n_values", _parse_number_list, defaults.ndep_n_values
        ),
        ndep_time_ms=get("protocol", "ndep_time_ms", float, defaults.ndep_time_ms),
        channels=get("loss", "channels", _parse_channels, ()),
        sigma_delta_hz=get("noise", "sigma_delta_hz", float, defaults.sigma_delta_hz),
        sigma_det_atoms=get("noise", "sigma_det_atoms", float, defaults.sigma_det_atoms),
        ramp_loss_atoms=get("noise", "ramp_loss_atoms", float, defaults.ramp_loss_atoms),
        apply_ramp_loss=get("noise", "apply_ramp_loss", bool, defaults.apply_ramp_loss),
        apply_shot_noise=get("noise", "apply_shot_noise", bool, defaults.apply_shot_noise),
        n_traj=get("ensemble", "n_traj", int, defaults.n_traj),
        shots=get("ensemble", "shots", int, defaults.shots),
        dt_us=get("ensemble", "dt_us", float, None),
        n_sites=get("array", "n_sites", int, defaults.n_sites),
        site_n_min=get("array", "site_n_min", int, defaults.site_n_min),
        site_n_max=get("array", "site_n_max", int, defaults.site_n_max),
        profile=get("array", "profile", str, defaults.profile),
    )
    return cfg.validate()


def parse_config_file(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
