"""Run configuration: JSON schema, validation and round-tripping."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

__all__ = ["ConfigError", "RunConfig", "load_config"]

_RULES = ("backward-euler", "bdf2", "radau2a")
_FORMULATIONS = ("first-kind", "second-kind", "combined-const", "combined-omega")
_DATA_KINDS = {
    "polynomial-pulse": {"required": ("a", "b", "m", "p"), "optional": ()},
    "gaussian-beam": {"required": ("f", "t_p", "sigma"), "optional": ("direction", "sigma_w")},
}
_OBSERVATION_KINDS = {
    "grid": ("n", "extent"),
    "points": ("points",),
    "circle": ("radius", "n"),
}


class ConfigError(ValueError):
    pass


def _reject_unknown(section: str, given: dict, allowed) -> None:
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


def _complex_from_json(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError("complex values are given as [re, im]")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float)):
        return complex(value)
    raise ConfigError(f"cannot read {value!r} as a number")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description.

    ``mesh`` is an OFF path or ``"icosphere:<level>"``; ``eta`` is stored as
    ``[re, im]`` so the manifest stays plain JSON.
    """

    time: dict
    contour: dict
    rule: str
    boundary_data: dict
    geometry: str = "sphere-analytic"
    mesh: str | None = None
    formulation: str = "combined-const"
    eta: tuple = (1.0, 0.0)
    observation: dict = field(default_factory=lambda: {"kind": "grid", "n": 61, "extent": 3.0})
    output: dict = field(default_factory=lambda: {"directory": "cqwave-out", "prefix": "run"})
    workers: int | None = None
    degree: int | None = None
    half_spectrum: bool = True
    nf_list: tuple | None = None
    reference_nf: int | None = None
    base_dir: str = field(default=".", compare=False, repr=False)

    # ---------------------------------------------------------- derived
    @property
    def c(self) -> float:
        return float(self.time["c"])

    @property
    def n_steps(self) -> int:
        return int(self.time["n_steps"])

    @property
    def dt(self) -> float:
        return float(self.time["t_final"]) / self.n_steps

    @property
    def lam(self) -> float:
        return float(self.contour["lam"])

    @property
    def n_freq(self) -> int:
        return int(self.contour["n_freq"])

    @property
    def eta_complex(self) -> complex:
        return complex(self.eta[0], self.eta[1])

    def resolve_path(self, p) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    # ---------------------------------------------------------- (de)serialise
    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        allowed = {f.name for f in fields(cls)} - {"base_dir"}
        _reject_unknown("config", raw, allowed)
        for key in ("time", "contour", "rule", "boundary_data"):
            if key not in raw:
                raise ConfigError(f"missing required key {key!r}")
        kw = dict(raw)
        time = dict(kw["time"])
        _reject_unknown("time", time, ("c", "t_final", "n_steps"))
        for key in ("c", "t_final", "n_steps"):
            if key not in time:
                raise ConfigError(f"time.{key} is required")
        if not (float(time["c"]) > 0 and float(time["t_final"]) > 0):
            raise ConfigError("time.c and time.t_final must be positive")
        if int(time["n_steps"]) != time["n_steps"] or int(time["n_steps"]) < 1:
            raise ConfigError("time.n_steps must be a positive integer")
        kw["time"] = {"c": float(time["c"]), "t_final": float(time["t_final"]), "n_steps": int(time["n_steps"])}

        contour = dict(kw["contour"])
        _reject_unknown("contour", contour, ("lam", "n_freq"))
        if "lam" not in contour or "n_freq" not in contour:
            raise ConfigError("contour.lam and contour.n_freq are required")
        if not float(contour["lam"]) > 0:
            raise ConfigError("contour.lam must be positive")
        if int(contour["n_freq"]) != contour["n_freq"] or int(contour["n_freq"]) < 1:
            raise ConfigError("contour.n_freq must be a positive integer")
        kw["contour"] = {"lam": float(contour["lam"]), "n_freq": int(contour["n_freq"])}

        if kw["rule"] not in _RULES:
            raise ConfigError(f"rule must be one of {_RULES}")
        geometry = kw.get("geometry", "sphere-analytic")
        if geometry not in ("sphere-analytic", "mesh"):
            raise ConfigError("geometry must be 'sphere-analytic' or 'mesh'")
        if geometry == "mesh":
            mesh = kw.get("mesh")
            if not isinstance(mesh, str):
                raise ConfigError("geometry 'mesh' needs mesh: an OFF path or 'icosphere:<level>'")
            if mesh.startswith("icosphere:"):
                try:
                    int(mesh.split(":", 1)[1])
                except ValueError:
                    raise ConfigError(f"bad icosphere level in {mesh!r}") from None
            elif not (Path(mesh) if Path(mesh).is_absolute() else Path(base_dir) / mesh).is_file():
                raise ConfigError(f"mesh file not found: {mesh}")
        if kw.get("formulation", "combined-const") not in _FORMULATIONS:
            raise ConfigError(f"formulation must be one of {_FORMULATIONS}")
        eta = _complex_from_json(kw.get("eta", 1.0))
        kw["eta"] = (eta.real, eta.imag)

        data = dict(kw["boundary_data"])
        kind = data.get("kind")
        if kind not in _DATA_KINDS:
            raise ConfigError(f"boundary_data.kind must be one of {sorted(_DATA_KINDS)}")
        spec = _DATA_KINDS[kind]
        _reject_unknown("boundary_data", data, ("kind",) + spec["required"] + spec["optional"])
        missing = [k for k in spec["required"] if k not in data]
        if missing:
            raise ConfigError(f"boundary_data ({kind}) is missing {', '.join(missing)}")
        kw["boundary_data"] = data

        obs = dict(kw.get("observation", {"kind": "grid", "n": 61, "extent": 3.0}))
        okind = obs.get("kind")
        if okind not in _OBSERVATION_KINDS:
            raise ConfigError(f"observation.kind must be one of {sorted(_OBSERVATION_KINDS)}")
        _reject_unknown("observation", obs, ("kind",) + _OBSERVATION_KINDS[okind])
        if okind == "grid":
            obs.setdefault("n", 61)
            obs.setdefault("extent", 3.0)
        if okind == "points":
            pts = np.asarray(obs.get("points", []), dtype=float).reshape(-1, 3)
            obs["points"] = pts.tolist()
        kw["observation"] = obs

        out = dict(kw.get("output", {}))
        _reject_unknown("output", out, ("directory", "prefix"))
        out.setdefault("directory", "cqwave-out")
        out.setdefault("prefix", "run")
        kw["output"] = out

        if kw.get("workers") is not None and int(kw["workers"]) < 1:
            raise ConfigError("workers must be a positive integer")
        if kw.get("nf_list") is not None:
            nfs = [int(v) for v in kw["nf_list"]]
            if nfs != sorted(set(nfs)) or nfs[0] < 1:
                raise ConfigError("nf_list must be strictly increasing positive integers")
            kw["nf_list"] = tuple(nfs)
        if kw.get("reference_nf") is not None:
            kw["reference_nf"] = int(kw["reference_nf"])
        return cls(base_dir=str(base_dir), **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d["eta"] = list(self.eta)
        if d["nf_list"] is not None:
            d["nf_list"] = list(d["nf_list"])
        return d

    def replace(self, **changes) -> "RunConfig":
        d = self.to_dict()
        d.update(changes)
        return RunConfig.from_dict(d, base_dir=self.base_dir)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return RunConfig.from_dict(raw, base_dir=path.parent)
