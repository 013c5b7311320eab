"""Experiment configuration loading and reproducible output helpers.

Configs are TOML; every stochastic run must name its master seed explicitly
(no entropy defaults), so a (config, seed) pair fully determines every output
byte. Each output directory receives the exact config text plus a manifest
with the config hash, the resolved seed and the library versions.
"""
from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np
import scipy

from . import __version__
from ._backend import backend_name
from .coefficients import Coefficients, registry_coefficients
from .kernels import Kernel, kernel_from_config
from .lifted import SimGrid
from .quadrature import DiscreteLiftMeasure, PartitionSpec, discretize

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "write_csv",
    "write_manifest",
]


class ConfigError(ValueError):
    """Malformed or incomplete experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed config with the raw table and the originating text retained."""

    data: dict
    text: str
    path: Path

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def section(self, name: str, required: bool = True) -> dict:
        tab = self.data.get(name)
        if tab is None:
            if required:
                raise ConfigError(f"config section [{name}] is required")
            return {}
        if not isinstance(tab, dict):
            raise ConfigError(f"[{name}] must be a table")
        return tab

    def kernel(self, name: str = "kernel") -> Kernel:
        try:
            return kernel_from_config(self.section(name))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid [{name}] table: {exc}") from exc

    def partition(self) -> PartitionSpec:
        q = self.section("quadrature", required=False)
        try:
            return PartitionSpec(
                n_cells=int(q.get("n_atoms", 100)),
                x_min=float(q.get("x_min", 1e-5)),
                x_max=float(q.get("x_max", 1e5)))
        except ValueError as exc:
            raise ConfigError(f"invalid [quadrature] table: {exc}") from exc

    def atoms(self, kernel_name: str = "kernel") -> DiscreteLiftMeasure:
        from .kernels import lift_measure

        return discretize(lift_measure(self.kernel(kernel_name)),
                          self.partition())

    def grid(self) -> SimGrid:
        g = self.section("grid")
        try:
            return SimGrid(T=float(g["T"]), N=int(g["N"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid [grid] table: {exc}") from exc

    def coefficients(self) -> Coefficients:
        sec = self.section("coefficients")
        try:
            b = dict(sec["b"])
            s = dict(sec.get("sigma", {"name": "const", "c": 0.0}))
            b_name, s_name = b.pop("name"), s.pop("name")
            return registry_coefficients(b_name, b, s_name, s)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid [coefficients] table: {exc}") from exc

    def resolve_seed(self, override: Optional[int]) -> int:
        """Seed from the flag or [ensemble].seed; absence is a config error."""
        if override is not None:
            return int(override)
        ens = self.section("ensemble", required=False)
        if "seed" not in ens:
            raise ConfigError(
                "no seed given: set [ensemble].seed or pass --seed")
        return int(ens["seed"])

    def paths(self) -> int:
        ens = self.section("ensemble", required=False)
        return int(ens.get("paths", 1))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} does not parse: {exc}") from exc
    return ExperimentConfig(data=data, text=text, path=path)


def _fmt(v) -> str:
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))  # shortest round-trip decimal, reproducible
    return str(v)


def write_csv(path: Path, header: Sequence[str],
              rows: Iterable[Sequence]) -> None:
    """Header + rows with '.' decimals and LF endings, written atomically."""
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def write_manifest(out_dir: Path, cfg: ExperimentConfig, seed) -> None:
    """Record everything needed to reproduce the run (no timestamps)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.toml").write_text(cfg.text, newline="\n")
    lines = [
        f"config_sha256={cfg.sha256}",
        f"seed={'none' if seed is None else int(seed)}",
        f"volift={__version__}",
        f"numpy={np.__version__}",
        f"scipy={scipy.__version__}",
        f"python={sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro}",
        f"backend={backend_name()}",
    ]
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n", newline="\n")
