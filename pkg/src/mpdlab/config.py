"""Experiment configuration, dotted overrides and result envelopes."""

import copy
from datetime import datetime, timezone
import hashlib
import json
import os

from . import __version__
from .errors import ConfigError
from .fuchsian import FuchsianGroup, GroupElement, octagon_group
from .metric import Bump, BumpField, HolomorphicField, MetricField, TensorTerm, TENSOR_KINDS

OUT_ENV = "MPDLAB_OUT"

DEFAULT_NUMERICS = {
    "ode_step": 1e-3,
    "coarse_step": 1e-2,
    "shooting_tol": 1e-10,
    "burn_in": 15.0,
    "fd_steps": [1e-2, 5e-3],
    "tensor_fd_h": 1e-3,
    "inconsistency_tol": 1e-4,
    "quadrature": {"n_angle": 8, "n_radius": 12, "n_fiber": 8},
    "hessian_quadrature": {"n_angle": 16, "n_radius": 24, "n_fiber": 8},
    "hessian_steps": [4e-2, 2e-2],
    "entropy_step": 2e-2,
    "birkhoff_time": 2000.0,
    "birkhoff_discard": 50.0,
    "trace_hessian_coeff": 0.25,
}

DEFAULTS = {
    "group": {"name": "octagon"},
    "perturbation": {"scale": 1.0, "truncation": 4, "conformal": [], "tensors": []},
    "family": None,
    "hessian": None,
    "xray": None,
    "numerics": DEFAULT_NUMERICS,
    "depth": 2,
    "classes": None,
    "seed": 0,
    "output_dir": None,
}

# sections replaced wholesale rather than merged key by key
_FREEFORM = ("group",)

_POSITIVE = ("ode_step", "coarse_step", "shooting_tol", "tensor_fd_h", "inconsistency_tol",
             "entropy_step", "birkhoff_time")


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError("unknown field", path=f"{path}{k}")
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in _FREEFORM:
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def _point(v, path):
    try:
        x, y = (float(t) for t in v)
    except (TypeError, ValueError):
        raise ConfigError("expected a point [x, y]", path=path) from None
    return complex(x, y)


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}", path=path)
    return float(v)


def bump_field(spec, truncation, path):
    if not isinstance(spec, list):
        raise ConfigError("expected a list of bumps", path=path)
    out = []
    for i, b in enumerate(spec):
        p = f"{path}[{i}]"
        if not isinstance(b, dict) or set(b) - {"center", "radius", "amplitude"}:
            raise ConfigError("bump needs exactly center, radius, amplitude", path=p)
        try:
            out.append(Bump(_point(b.get("center"), f"{p}.center"), _number(b.get("radius"), f"{p}.radius"),
                            _number(b.get("amplitude"), f"{p}.amplitude")))
        except ConfigError as exc:
            if exc.path and exc.path.startswith(p):
                raise
            raise ConfigError(str(exc), path=p) from None
    return BumpField(tuple(out), truncation)


def tensor_terms(spec, truncation, path="perturbation.tensors"):
    """TensorTerm tuple from a JSON list."""
    if not isinstance(spec, list):
        raise ConfigError("expected a list of tensor terms", path=path)
    out = []
    for i, t in enumerate(spec):
        p = f"{path}[{i}]"
        if not isinstance(t, dict):
            raise ConfigError("expected an object", path=p)
        kind = t.get("kind")
        if kind not in TENSOR_KINDS:
            raise ConfigError(f"unknown tensor kind {kind!r}; expected one of {sorted(TENSOR_KINDS)}", path=f"{p}.kind")
        coef = _number(t.get("coef", 1.0), f"{p}.coef")
        if kind == "holomorphic":
            c = t.get("coefficient", 1.0)
            c = complex(*c) if isinstance(c, list) else complex(_number(c, f"{p}.coefficient"))
            field = HolomorphicField(_point(t.get("pole"), f"{p}.pole"), c, int(t.get("truncation", truncation)))
        else:
            field = bump_field(t.get("bumps"), int(t.get("truncation", truncation)), f"{p}.bumps")
        out.append(TensorTerm(kind, coef, field))
    return tuple(out)


class ExperimentConfig:
    """Validated configuration; ``data`` is the canonical JSON-ready form with defaults filled."""

    def __init__(self, data):
        self.data = data
        self.group = build_group(data["group"])
        pert = data["perturbation"]
        trunc = int(pert["truncation"])
        if trunc < 0:
            raise ConfigError("truncation must be nonnegative", path="perturbation.truncation")
        self.conformal = bump_field(pert["conformal"], trunc, "perturbation.conformal") if pert["conformal"] else None
        self.tensors = tensor_terms(pert["tensors"], trunc)
        self.scale = _number(pert["scale"], "perturbation.scale")
        if not self.scale > 0:
            raise ConfigError("scale must be positive", path="perturbation.scale")
        num = data["numerics"]
        for k in _POSITIVE:
            if not _number(num[k], f"numerics.{k}") > 0:
                raise ConfigError("must be positive", path=f"numerics.{k}")
        for k in ("fd_steps", "hessian_steps"):
            if not num[k] or any(not _number(s, f"numerics.{k}") > 0 for s in num[k]):
                raise ConfigError("steps must be a nonempty list of positive numbers", path=f"numerics.{k}")
        if _number(num["burn_in"], "numerics.burn_in") < 0:
            raise ConfigError("must be nonnegative", path="numerics.burn_in")
        if not isinstance(data["depth"], int) or data["depth"] < 0:
            raise ConfigError("depth must be a nonnegative integer", path="depth")
        if not isinstance(data["seed"], int):
            raise ConfigError("seed must be an integer", path="seed")
        if data["classes"] is not None and not all(isinstance(w, str) and w for w in data["classes"]):
            raise ConfigError("classes must be a list of nonempty words", path="classes")
        self.family = data["family"]
        if self.family is not None and self.family.get("kind") not in ("conformal", "linear"):
            raise ConfigError("family kind must be 'conformal' or 'linear'", path="family.kind")

    @property
    def numerics(self):
        return self.data["numerics"]

    @property
    def seed(self):
        return self.data["seed"]

    def metric(self):
        return MetricField(self.group, self.conformal, self.tensors, self.scale)

    def base_metric(self):
        return MetricField(self.group)

    def output_dir(self):
        return self.data["output_dir"] or os.environ.get(OUT_ENV) or "results"

    def to_json(self):
        return canonical_json(self.data)

    def hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.data == other.data


def build_group(spec):
    if not isinstance(spec, dict):
        raise ConfigError("expected an object", path="group")
    if spec.get("name") == "octagon" and "generators" not in spec:
        return octagon_group()
    gens = spec.get("generators")
    if not isinstance(gens, dict) or not gens:
        raise ConfigError("expected 'name': 'octagon' or a generators object", path="group")
    elements = {}
    for label, m in gens.items():
        p = f"group.generators.{label}"
        try:
            el = GroupElement.from_matrix(m)
        except ConfigError as exc:
            raise ConfigError(str(exc), path=p) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad matrix ({exc})", path=p) from None
        elements[label] = el
    center = _point(spec.get("dirichlet_center", [0.0, 1.0]), "group.dirichlet_center")
    return FuchsianGroup(elements, relator=spec.get("relator"), dirichlet_center=center)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def load_config(data):
    """Validate a parsed JSON object and fill defaults."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", path="")
    return ExperimentConfig(_merge(DEFAULTS, data))


def parse_config(path, overrides=()):
    """Read a JSON config file, apply ``key=value`` overrides and validate."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config file not found", path=str(path)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc})", path=str(path)) from None
    return load_config(apply_overrides(data, overrides))


def apply_overrides(data, overrides):
    """Set dotted paths from ``key=value`` strings; values are parsed as JSON when possible."""
    data = copy.deepcopy(data)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not key=value", path=key or item)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = data
        for i, p in enumerate(parts[:-1]):
            nxt = node.get(p)
            if nxt is None:
                default = DEFAULTS
                for q in parts[:i + 1]:
                    default = default.get(q) if isinstance(default, dict) else None
                nxt = copy.deepcopy(default) if isinstance(default, dict) else {}
                node[p] = nxt
            if not isinstance(nxt, dict):
                raise ConfigError("cannot descend into a non-object", path=".".join(parts[:i + 1]))
            node = nxt
        node[parts[-1]] = value
    return data


class ResultEnvelope:
    """Payload plus the config hash, tool version, timestamp and numerics echo."""

    def __init__(self, command, config, payload, ok=True):
        self.command = command
        self.config_hash = config.hash()
        self.version = __version__
        self.timestamp = datetime.now(timezone.utc).isoformat()
        self.numerics = copy.deepcopy(config.numerics)
        self.config = copy.deepcopy(config.data)
        self.payload = payload
        self.ok = ok

    def to_dict(self):
        return {"command": self.command, "ok": self.ok, "config_hash": self.config_hash, "version": self.version,
                "timestamp": self.timestamp, "numerics": self.numerics, "config": self.config,
                "payload": self.payload}

    def payload_json(self):
        return canonical_json(self.payload)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)
