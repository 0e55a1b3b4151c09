"""Run configuration: flat key-value text with sections, round-trip safe.

A serialized copy is written next to every run's outputs so any run can be
reproduced (together with marks.json) bit for bit.
"""

from __future__ import annotations

import configparser
import io
import json
import os
from dataclasses import dataclass, field, replace

__all__ = ["RunConfig", "ConfigError"]

OUTPUT_DIR_ENV = "TSFEM_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    d: int = 2
    sizes: tuple[int, ...] = (1, 1)
    degrees: tuple[int, ...] = (3, 3)
    geometry: str = "identity"
    geometry_params: dict = field(default_factory=dict)
    pde: str = "sine"
    pde_params: dict = field(default_factory=dict)
    theta: float = 0.5
    osc_orders: tuple[int, ...] | None = None
    max_elements: int = 20000
    max_iters: int | None = None
    eta_tol: float | None = None
    out_dir: str = "runs/out"
    seed: int = 0
    threads: int | None = None
    window: int = 5
    dump_meshes: bool = True

    def validate(self) -> "RunConfig":
        from .geometry import make_geometry
        from .problems import _PRESETS

        if self.d != 2:
            raise ConfigError("runs are 2D (d = 2)")
        if len(self.sizes) != self.d or len(self.degrees) != self.d:
            raise ConfigError("sizes/degrees must have d entries")
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError("theta must be in (0, 1]")
        if not self.geometry:
            raise ConfigError("geometry name is required")
        try:
            make_geometry(self.geometry, self.geometry_params, self.sizes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.pde not in _PRESETS:
            raise ConfigError(f"unknown PDE preset {self.pde!r}")
        if self.osc_orders is not None and len(self.osc_orders) != self.d:
            raise ConfigError("osc orders must have d entries")
        return self

    def resolved_out_dir(self) -> str:
        return os.environ.get(OUTPUT_DIR_ENV, self.out_dir)

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        cp["domain"] = {
            "d": str(self.d),
            "sizes": " ".join(map(str, self.sizes)),
            "degrees": " ".join(map(str, self.degrees)),
        }
        cp["geometry"] = {"name": self.geometry}
        for k, v in sorted(self.geometry_params.items()):
            cp["geometry"][k] = json.dumps(v)
        cp["pde"] = {"name": self.pde}
        for k, v in sorted(self.pde_params.items()):
            cp["pde"][k] = json.dumps(v)
        cp["marking"] = {"theta": repr(self.theta)}
        cp["oscillation"] = {}
        if self.osc_orders is not None:
            cp["oscillation"]["orders"] = " ".join(map(str, self.osc_orders))
        cp["stopping"] = {"max_elements": str(self.max_elements)}
        if self.max_iters is not None:
            cp["stopping"]["max_iters"] = str(self.max_iters)
        if self.eta_tol is not None:
            cp["stopping"]["eta_tol"] = repr(self.eta_tol)
        cp["output"] = {
            "dir": self.out_dir,
            "dump_meshes": str(self.dump_meshes).lower(),
        }
        cp["misc"] = {"seed": str(self.seed), "window": str(self.window)}
        if self.threads is not None:
            cp["misc"]["threads"] = str(self.threads)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unparseable config: {exc}") from None

        def ints(s):
            return tuple(int(x) for x in s.split())

        cfg = cls()
        if cp.has_section("domain"):
            cfg.d = cp["domain"].getint("d", cfg.d)
            if "sizes" in cp["domain"]:
                cfg.sizes = ints(cp["domain"]["sizes"])
            if "degrees" in cp["domain"]:
                cfg.degrees = ints(cp["domain"]["degrees"])
        if cp.has_section("geometry"):
            cfg.geometry = cp["geometry"].get("name", cfg.geometry)
            cfg.geometry_params = {
                k: json.loads(v) for k, v in cp["geometry"].items() if k != "name"
            }
        if cp.has_section("pde"):
            cfg.pde = cp["pde"].get("name", cfg.pde)
            cfg.pde_params = {
                k: json.loads(v) for k, v in cp["pde"].items() if k != "name"
            }
        if cp.has_section("marking"):
            cfg.theta = cp["marking"].getfloat("theta", cfg.theta)
        if cp.has_section("oscillation") and "orders" in cp["oscillation"]:
            cfg.osc_orders = ints(cp["oscillation"]["orders"])
        if cp.has_section("stopping"):
            cfg.max_elements = cp["stopping"].getint("max_elements",
                                                     cfg.max_elements)
            if "max_iters" in cp["stopping"]:
                cfg.max_iters = cp["stopping"].getint("max_iters")
            if "eta_tol" in cp["stopping"]:
                cfg.eta_tol = cp["stopping"].getfloat("eta_tol")
        if cp.has_section("output"):
            cfg.out_dir = cp["output"].get("dir", cfg.out_dir)
            cfg.dump_meshes = cp["output"].getboolean("dump_meshes",
                                                      cfg.dump_meshes)
        if cp.has_section("misc"):
            cfg.seed = cp["misc"].getint("seed", cfg.seed)
            cfg.window = cp["misc"].getint("window", cfg.window)
            if "threads" in cp["misc"]:
                cfg.threads = cp["misc"].getint("threads")
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def with_overrides(self, **kwargs) -> "RunConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs)
