"""JSON run configuration with strict validation.

Unknown keys are rejected everywhere: a mistyped physics parameter that
silently falls back to a default is the main hazard of batch runs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import dynamics, reservoir, spectra
from .errors import ConfigError
from .geometry import CurvedSpace

MODES = ("simulate", "rates", "kernel", "noise-stats", "validate")
U64 = 2**64 - 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class SpaceConfig(_Strict):
    lam: float = Field(0.0, alias="lambda", ge=0.0)
    mass: float = Field(1.0, gt=0.0)
    chart_limit: float = Field(1e3, gt=1.0)

    def build(self) -> CurvedSpace:
        return CurvedSpace(lam=self.lam, mass=self.mass, chart_limit=self.chart_limit)


class FreeConfig(_Strict):
    type: Literal["free"]

    def build(self):
        return dynamics.Free()


class HarmonicConfig(_Strict):
    type: Literal["harmonic"]
    omega0: float = Field(1.0, gt=0.0)

    def build(self):
        return dynamics.Harmonic(self.omega0)


class CoulombConfig(_Strict):
    type: Literal["coulomb"]
    alpha: float = 1.0

    def build(self):
        return dynamics.CoulombLike(self.alpha)


Potential = Annotated[Union[FreeConfig, HarmonicConfig, CoulombConfig], Field(discriminator="type")]


class LorentzConfig(_Strict):
    type: Literal["lorentz"]
    strength: float = Field(gt=0.0)
    resonance: float = Field(gt=0.0)
    damping: float = Field(gt=0.0)

    def build(self):
        return reservoir.Lorentz(self.strength, self.resonance, self.damping)


class DrudeConfig(_Strict):
    type: Literal["ohmic_drude"]
    eta: float = Field(gt=0.0)
    omega_c: float = Field(gt=0.0)

    def build(self):
        return reservoir.OhmicDrude(self.eta, self.omega_c)


class TabulatedConfig(_Strict):
    type: Literal["tabulated"]
    path: str

    def build(self):
        return reservoir.load_tabulated(self.path)


Susceptibility = Annotated[
    Union[LorentzConfig, DrudeConfig, TabulatedConfig], Field(discriminator="type")
]


class BathConfig(_Strict):
    N: int = Field(400, ge=1)
    omega_max: Optional[float] = Field(None, gt=0.0)
    tolerance: float = Field(1e-3, gt=0.0)
    verify: bool = True


class SimSection(_Strict):
    dt: float = Field(0.01, gt=0.0)
    steps: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0, le=U64)
    scheme: Literal["conservative", "routeA", "routeB"] = "routeB"
    replicas: int = Field(1, ge=1)
    stride: int = Field(1, ge=1)
    temperature: float = Field(0.0, ge=0.0)
    kB: float = Field(1.0, gt=0.0)
    window: Optional[int] = Field(None, ge=1)
    chunk: int = Field(100, ge=1)
    energy_jump: float = Field(0.5, gt=0.0)
    x0: tuple[float, float] = (1.0, 0.0)
    v0: tuple[float, float] = (0.0, 0.0)

    def build(self) -> dynamics.SimConfig:
        return dynamics.SimConfig(
            dt=self.dt,
            steps=self.steps,
            seed=self.seed,
            scheme=self.scheme,
            stride=self.stride,
            replicas=self.replicas,
            temperature=self.temperature,
            kB=self.kB,
            window=self.window,
            energy_jump=self.energy_jump,
            chunk=self.chunk,
        )


class BoseConfig(_Strict):
    type: Literal["bose_einstein"]
    temperature: float = Field(ge=0.0)

    def build(self):
        return spectra.BoseEinstein(self.temperature)


class FixedConfig(_Strict):
    type: Literal["fixed"]
    value: float = Field(ge=0.0)

    def build(self):
        return spectra.Fixed(self.value)


class LineShapeConfig(_Strict):
    type: Literal["gaussian", "lorentzian"] = "gaussian"
    sigma: float = Field(0.05, gt=0.0)

    def build(self):
        cls = spectra.Gaussian if self.type == "gaussian" else spectra.Lorentzian
        return cls(self.sigma)


class SpectraSection(_Strict):
    n_max: int = Field(30, ge=1, le=60)
    lam: Optional[float] = Field(None, alias="lambda", ge=0.0)
    initial: int = Field(0, ge=0)
    occupation: Annotated[Union[BoseConfig, FixedConfig], Field(discriminator="type")] = FixedConfig(
        type="fixed", value=1.0
    )
    line_shape: LineShapeConfig = LineShapeConfig()
    floor: float = Field(1e-15, ge=0.0)


class KernelSection(_Strict):
    dt: float = Field(0.01, gt=0.0)
    t_max: float = Field(10.0, gt=0.0)
    omega_max: Optional[float] = Field(None, gt=0.0)
    tol: float = Field(1e-10, gt=0.0)
    kk_omega_max: Optional[float] = Field(None, gt=0.0)
    kk_points: int = Field(25001, ge=16)
    kk_eval: tuple[float, float] = (0.1, 4.0)
    kk_eval_points: int = Field(400, ge=2)


class NoiseSection(_Strict):
    x: tuple[float, float] = (0.5, -0.3)
    lags: list[float] = [0.0, 0.5, 1.0, 2.0]
    temperature: float = Field(1.0, gt=0.0)
    kB: float = Field(1.0, gt=0.0)
    replicas: int = Field(10000, ge=2)

    @model_validator(mode="after")
    def _lags(self):
        if not self.lags or any(t < 0 for t in self.lags):
            raise ValueError("lags must be a non-empty list of non-negative numbers")
        return self


class RunConfig(_Strict):
    mode: Literal["simulate", "rates", "kernel", "noise-stats", "validate"]
    space: SpaceConfig = SpaceConfig()
    potential: Potential = HarmonicConfig(type="harmonic")
    susceptibility: Optional[Susceptibility] = None
    bath: BathConfig = BathConfig()
    sim: SimSection = SimSection()
    spectra: SpectraSection = SpectraSection()
    kernel: KernelSection = KernelSection()
    noise: NoiseSection = NoiseSection()
    output: str = "out"

    @model_validator(mode="after")
    def _required(self):
        needs = self.mode in ("rates", "kernel", "noise-stats") or (
            self.mode == "simulate" and self.sim.scheme != "conservative"
        )
        if needs and self.susceptibility is None:
            raise ValueError(f"mode '{self.mode}' needs a 'susceptibility' section")
        if self.mode == "rates" and self.potential.type != "harmonic":
            raise ValueError("mode 'rates' needs a harmonic potential")
        return self

    @property
    def spectra_lambda(self) -> float:
        return self.space.lam if self.spectra.lam is None else self.spectra.lam


def _path(loc) -> str:
    # pydantic puts the union tag into the location; drop it for readability
    parts = [str(p) for p in loc if not (isinstance(p, str) and p in _TAGS)]
    return ".".join(parts)


_TAGS = {"free", "harmonic", "coulomb", "lorentz", "ohmic_drude", "tabulated", "bose_einstein", "fixed"}


def validate_config(data) -> RunConfig:
    """Validate a parsed JSON object; :class:`ConfigError` names the offending key."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object", path="")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        path = _path(err["loc"])
        msg = err["msg"]
        if err["type"] == "extra_forbidden":
            msg = "unknown key"
        raise ConfigError(msg, path=path) from None


def parse_config(file) -> RunConfig:
    """Load and validate a JSON configuration file."""
    path = Path(file)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", path="") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}", path="") from None
    return validate_config(data)


def dump(config: RunConfig) -> dict:
    return config.model_dump(mode="json", by_alias=True)
