"""Run configuration: line-oriented text with dotted keys.

Grammar (one entry per line, '#' starts a comment):

    key = value
    key.subkey = value

Values are an integer, a float, a comma-separated list of numbers, or a bare
token.  Parsing then emitting then parsing again returns an identical
mapping, which makes configs usable as reproducibility manifests.

Recognized keys (see README for the full table):

    field, alpha, x0, t0, t1, seed, outputs
    integrator.rtol / .atol / .max_step / .r_floor / .horizon
    regularization.kind (polynomial_blend | preset1d)
    regularization.g0, regularization.sigma, nu, nu.list
    nu.geometric.T / .mean_fr / .chi / .n_first / .n_last
    sweep.t_start / .t_stop / .t_points
    classify.s_budget
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .fields import BUILTIN_NAMES
from .integrators import IntegrationOptions


def _parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        try:
            return [float(p.strip()) for p in raw.split(",") if p.strip() != ""]
        except ValueError as exc:
            raise ConfigError(f"bad list value {raw!r}") from exc
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    if raw == "":
        raise ConfigError("empty value")
    return raw


def _emit_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        if len(v) == 1:
            return f"{float(v[0])!r},"  # trailing comma keeps it a list on reparse
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def parse_config(text: str) -> dict:
    """Parse config text into an ordered flat mapping of dotted keys."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        out[key] = _parse_value(raw)
    return out


def emit_config(mapping: dict) -> str:
    return "\n".join(f"{k} = {_emit_value(v)}" for k, v in mapping.items()) + "\n"


@dataclass
class RunConfig:
    field_name: str
    alpha: float
    x0: np.ndarray
    t0: float = 0.0
    t1: float = 1.0
    seed: int = 0
    outputs: Optional[str] = None
    options: IntegrationOptions = dc_field(default_factory=IntegrationOptions)
    reg_kind: Optional[str] = None  # polynomial_blend | preset1d
    reg_g0: Optional[np.ndarray] = None
    reg_sigma: Optional[int] = None
    nu: Optional[float] = None
    nu_list: Optional[list] = None
    geo: Optional[dict] = None  # T, mean_fr, chi, n_first, n_last
    sweep_t: Optional[tuple] = None  # (t_start, t_stop, n_points)
    s_budget: float = 2.0e4
    raw: dict = dc_field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls.from_mapping(parse_config(text))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    @classmethod
    def from_mapping(cls, m: dict) -> "RunConfig":
        m = dict(m)

        def take(key, default=None):
            return m.pop(key, default)

        name = take("field")
        if name not in BUILTIN_NAMES:
            raise ConfigError(f"field must be one of {BUILTIN_NAMES}, got {name!r}")
        alpha = take("alpha")
        if alpha is None:
            raise ConfigError("alpha is required")
        alpha = float(alpha)
        if not (math.isfinite(alpha) and alpha < 1.0):
            raise ConfigError(f"alpha must be finite and < 1, got {alpha}")
        x0 = take("x0")
        if x0 is None:
            raise ConfigError("x0 is required")
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        if not np.all(np.isfinite(x0)):
            raise ConfigError("x0 must be finite")
        t0 = float(take("t0", 0.0))
        t1 = float(take("t1", t0 + 1.0))
        if not (math.isfinite(t0) and math.isfinite(t1)):
            raise ConfigError("t0 and t1 must be finite")
        seed = int(take("seed", 0))
        outputs = take("outputs")
        try:
            options = IntegrationOptions(
                rtol=float(take("integrator.rtol", 1e-9)),
                atol=float(take("integrator.atol", 1e-12)),
                max_step=float(take("integrator.max_step", math.inf)),
                r_floor=float(take("integrator.r_floor", 1e-10)),
                horizon=float(take("integrator.horizon", 1e3)),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        reg_kind = take("regularization.kind")
        reg_g0 = take("regularization.g0")
        if reg_g0 is not None:
            reg_g0 = np.atleast_1d(np.asarray(reg_g0, dtype=float))
        reg_sigma = take("regularization.sigma")
        if reg_sigma is not None:
            reg_sigma = int(reg_sigma)
        if reg_kind is not None:
            if reg_kind not in ("polynomial_blend", "preset1d"):
                raise ConfigError(f"unknown regularization.kind {reg_kind!r}")
            if reg_kind == "polynomial_blend" and reg_g0 is None:
                raise ConfigError("polynomial_blend needs regularization.g0")
            if reg_kind == "preset1d" and reg_sigma is None:
                raise ConfigError("preset1d needs regularization.sigma (+1, -1 or 0)")

        nu = take("nu")
        nu = float(nu) if nu is not None else None
        nu_list = take("nu.list")
        if nu_list is not None and not isinstance(nu_list, list):
            nu_list = [float(nu_list)]
        geo = None
        if any(k.startswith("nu.geometric.") for k in m):
            geo = {
                "T": float(take("nu.geometric.T", 0.0)),
                "mean_fr": float(take("nu.geometric.mean_fr", 0.0)),
                "chi": float(take("nu.geometric.chi", 0.0)),
                "n_first": int(take("nu.geometric.n_first", 1)),
                "n_last": int(take("nu.geometric.n_last", 5)),
            }
            if geo["T"] <= 0 or geo["mean_fr"] <= 0:
                raise ConfigError("nu.geometric needs positive T and mean_fr")
        sweep_t = None
        if any(k.startswith("sweep.") for k in m):
            sweep_t = (
                float(take("sweep.t_start", t0)),
                float(take("sweep.t_stop", t1)),
                int(take("sweep.t_points", 101)),
            )
        s_budget = float(take("classify.s_budget", 2.0e4))
        if m:
            raise ConfigError(f"unknown config keys: {sorted(m)}")
        return cls(
            field_name=name,
            alpha=alpha,
            x0=x0,
            t0=t0,
            t1=t1,
            seed=seed,
            outputs=outputs,
            options=options,
            reg_kind=reg_kind,
            reg_g0=reg_g0,
            reg_sigma=reg_sigma,
            nu=nu,
            nu_list=nu_list,
            geo=geo,
            sweep_t=sweep_t,
            s_budget=s_budget,
        )

    def to_mapping(self) -> dict:
        m: dict = {"field": self.field_name, "alpha": self.alpha, "x0": list(self.x0)}
        m["t0"] = self.t0
        m["t1"] = self.t1
        m["seed"] = self.seed
        if self.outputs is not None:
            m["outputs"] = self.outputs
        o = self.options
        m["integrator.rtol"] = o.rtol
        m["integrator.atol"] = o.atol
        m["integrator.max_step"] = o.max_step
        m["integrator.r_floor"] = o.r_floor
        m["integrator.horizon"] = o.horizon
        if self.reg_kind is not None:
            m["regularization.kind"] = self.reg_kind
        if self.reg_g0 is not None:
            m["regularization.g0"] = list(self.reg_g0)
        if self.reg_sigma is not None:
            m["regularization.sigma"] = self.reg_sigma
        if self.nu is not None:
            m["nu"] = self.nu
        if self.nu_list is not None:
            m["nu.list"] = list(self.nu_list)
        if self.geo is not None:
            m["nu.geometric.T"] = self.geo["T"]
            m["nu.geometric.mean_fr"] = self.geo["mean_fr"]
            m["nu.geometric.chi"] = self.geo["chi"]
            m["nu.geometric.n_first"] = self.geo["n_first"]
            m["nu.geometric.n_last"] = self.geo["n_last"]
        if self.sweep_t is not None:
            m["sweep.t_start"], m["sweep.t_stop"], m["sweep.t_points"] = self.sweep_t
        m["classify.s_budget"] = self.s_budget
        return m

    def emit(self) -> str:
        return emit_config(self.to_mapping())
