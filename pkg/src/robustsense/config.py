"""Experiment configuration files (INI format) and bundled presets."""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .detectors import STATISTICS, DetectorSpec
from .estimators import KINDS
from .montecarlo import SimConfig, derive_seed
from .sampling import FAMILIES, NoiseModel

PRESETS = ("fig1", "fig2", "fig3", "fig4")
EXPERIMENT_KINDS = ("pof-curve", "roc")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment: geometry, noise families and detector grid."""

    path: str
    kind: str
    p: int
    n: int
    trials: int
    seed: int
    snr_db: float | None
    sigma2: float
    families: tuple[str, ...]
    gg_shape: float | None
    student_t_dof: float
    estimators: tuple[str, ...]
    statistics: tuple[str, ...]
    student_t_nu: float

    @property
    def rho(self) -> float:
        """Linear-scale SNR; internals never see decibels."""
        return 0.0 if self.snr_db is None else 10.0 ** (self.snr_db / 10.0)

    def noise_model(self, family: str) -> NoiseModel:
        if family == "gaussian":
            return NoiseModel.gaussian(self.sigma2)
        if family == "gg":
            return NoiseModel.generalized_gaussian(self.gg_shape, self.sigma2)
        return NoiseModel.student_t(self.student_t_dof, self.sigma2)

    def detector_specs(self) -> tuple[DetectorSpec, ...]:
        specs = []
        for estimator in self.estimators:
            for statistic in self.statistics:
                sigma2 = self.sigma2 if statistic == "rlrt" else None
                specs.append(DetectorSpec(statistic=statistic, estimator=estimator, sigma2=sigma2))
        return tuple(specs)

    def sim_config(self, family: str, master_seed: int) -> SimConfig:
        return SimConfig(
            p=self.p,
            n=self.n,
            trials=self.trials,
            noise=self.noise_model(family),
            detectors=self.detector_specs(),
            master_seed=master_seed,
            rho=self.rho,
            student_t_nu=self.student_t_nu,
        )


def preset_path(name: str) -> Path | None:
    """Filesystem path of a bundled preset, or None if unknown."""
    if name not in PRESETS:
        return None
    return Path(str(resources.files("robustsense") / "presets" / f"{name}.ini"))


def _split_list(raw: str) -> tuple[str, ...]:
    return tuple(item.strip() for item in raw.split(",") if item.strip())


def load_config(path_or_preset: str) -> ExperimentConfig:
    """Load and validate a config file; bare preset names resolve to bundled files."""
    path = Path(path_or_preset)
    if not path.exists():
        bundled = preset_path(path_or_preset)
        if bundled is None:
            raise ConfigError(f"{path_or_preset}: no such config file or preset (presets: {', '.join(PRESETS)})")
        path = bundled
    where = str(path)

    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=where)
    except OSError as exc:
        raise ConfigError(f"{where}: cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{where}: {exc}") from exc

    def need(section: str, key: str) -> str:
        if not parser.has_option(section, key):
            raise ConfigError(f"{where}: [{section}] missing required key '{key}'")
        return parser.get(section, key)

    def grab(section: str, key: str, fallback: str | None = None) -> str | None:
        return parser.get(section, key, fallback=fallback)

    def as_int(section: str, key: str, raw: str) -> int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where}: [{section}] {key} = {raw!r} is not an integer") from None

    def as_float(section: str, key: str, raw: str) -> float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{where}: [{section}] {key} = {raw!r} is not a number") from None

    for section in ("experiment", "noise", "detectors"):
        if not parser.has_section(section):
            raise ConfigError(f"{where}: missing required section [{section}]")

    kind = need("experiment", "kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"{where}: [experiment] kind = {kind!r} is not one of {', '.join(EXPERIMENT_KINDS)}"
        )
    p = as_int("experiment", "p", need("experiment", "p"))
    n = as_int("experiment", "n", need("experiment", "n"))
    trials = as_int("experiment", "trials", need("experiment", "trials"))
    seed = as_int("experiment", "seed", need("experiment", "seed"))
    snr_raw = grab("experiment", "snr_db")
    if kind == "roc" and snr_raw is None:
        raise ConfigError(f"{where}: [experiment] roc experiments require snr_db")
    snr_db = None if snr_raw is None else as_float("experiment", "snr_db", snr_raw)

    fam_raw = grab("noise", "families") or grab("noise", "family")
    if fam_raw is None:
        raise ConfigError(f"{where}: [noise] needs 'families' (or 'family')")
    families = _split_list(fam_raw)
    unknown = [f for f in families if f not in FAMILIES]
    if unknown:
        raise ConfigError(
            f"{where}: [noise] unknown families {unknown}; expected from {', '.join(FAMILIES)}"
        )
    if not families:
        raise ConfigError(f"{where}: [noise] at least one family is required")
    if kind == "roc" and len(families) != 1:
        raise ConfigError(f"{where}: [noise] roc experiments take exactly one family")
    sigma2 = as_float("noise", "sigma2", grab("noise", "sigma2", "1.0"))
    gg_shape_raw = grab("noise", "gg_shape")
    gg_shape = None if gg_shape_raw is None else as_float("noise", "gg_shape", gg_shape_raw)
    if "gg" in families and gg_shape is None:
        raise ConfigError(f"{where}: [noise] gg family requires gg_shape")
    student_t_dof = as_float("noise", "student_t_dof", grab("noise", "student_t_dof", "3.0"))

    estimators = _split_list(need("detectors", "estimators"))
    statistics = _split_list(need("detectors", "statistics"))
    bad_est = [e for e in estimators if e not in KINDS]
    if bad_est:
        raise ConfigError(
            f"{where}: [detectors] unknown estimators {bad_est}; expected from {', '.join(KINDS)}"
        )
    bad_stat = [s for s in statistics if s not in STATISTICS]
    if bad_stat:
        raise ConfigError(
            f"{where}: [detectors] unknown statistics {bad_stat}; expected from {', '.join(STATISTICS)}"
        )
    if not estimators or not statistics:
        raise ConfigError(f"{where}: [detectors] estimators and statistics must be non-empty")
    if "gg_ml" in estimators and (len(families) != 1 or families[0] != "gg"):
        raise ConfigError(
            f"{where}: [detectors] gg_ml requires the noise family to be gg "
            "(its weight needs the true shape)"
        )
    student_t_nu = as_float("detectors", "student_t_nu", grab("detectors", "student_t_nu", "3.0"))

    cfg = ExperimentConfig(
        path=where,
        kind=kind,
        p=p,
        n=n,
        trials=trials,
        seed=seed,
        snr_db=snr_db,
        sigma2=sigma2,
        families=families,
        gg_shape=gg_shape,
        student_t_dof=student_t_dof,
        estimators=estimators,
        statistics=statistics,
        student_t_nu=student_t_nu,
    )
    try:
        for i, family in enumerate(cfg.families):
            cfg.sim_config(family, derive_seed(cfg.seed, i))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    return cfg
