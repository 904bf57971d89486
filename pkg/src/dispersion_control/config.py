"""TOML scenario documents -> :class:`ScenarioConfig`.

A minimal document::

    mode = "distributed"
    n_agents = 70

    [target]
    lambda1 = 10.0
    lambda2 = 4.0

Everything else has a default (see ``README.md``). Unknown keys are
rejected so that typos do not silently fall back to defaults.
"""
from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .dispersion import DispersionTarget
from .sim import ConfigError, Event, GraphSpec, ScenarioConfig

__all__ = ["parse_config", "load_config", "load_document", "config_hash", "bundled_config", "BUNDLED"]

_TOP = {
    "mode", "n_agents", "seed", "duration", "step_h", "log_every", "eps_f", "eps_s",
    "basis", "motion", "on_death", "allow_psd_target", "description",
    "initial", "target", "graph", "events",
}
_INITIAL = {"distribution", "bounds", "positions"}
_TARGET = {"lambda1", "lambda2"}
_GRAPH = {"type", "radius", "seed", "edges"}
_EVENT = {"time", "kind", "agents", "count", "omega", "radius"}

BUNDLED = ("fig2", "fig2_kill", "fig3", "static")


def _reject_unknown(doc: dict, allowed: set, where: str) -> None:
    extra = sorted(set(doc) - allowed)
    if extra:
        prefix = f"{where}." if where else ""
        raise ConfigError(prefix + extra[0], "unknown key")


def _req(doc: dict, key: str, where: str = ""):
    if key not in doc:
        raise ConfigError(f"{where}.{key}" if where else key, "missing required field")
    return doc[key]


def _num(v, key):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    return float(v)


def parse_config(text_or_doc, overrides: dict | None = None) -> ScenarioConfig:
    """Parse a TOML string (or an already-loaded mapping) into a validated config.

    ``overrides`` replaces top-level keys before validation (CLI flags).
    """
    doc = tomllib.loads(text_or_doc) if isinstance(text_or_doc, str) else dict(text_or_doc)
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    _reject_unknown(doc, _TOP, "")

    n = _req(doc, "n_agents")
    if isinstance(n, bool) or not isinstance(n, int):
        raise ConfigError("n_agents", "expected an integer")
    mode = _req(doc, "mode")

    tdoc = _req(doc, "target")
    _reject_unknown(tdoc, _TARGET, "target")
    try:
        target = DispersionTarget(
            _num(_req(tdoc, "lambda1", "target"), "target.lambda1"),
            _num(_req(tdoc, "lambda2", "target"), "target.lambda2"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("target", str(exc)) from None

    kw: dict = {}
    idoc = doc.get("initial", {})
    _reject_unknown(idoc, _INITIAL, "initial")
    dist = idoc.get("distribution", "explicit" if "positions" in idoc else "uniform")
    if dist == "uniform":
        if "positions" in idoc:
            raise ConfigError("initial.positions", "positions given with a uniform distribution")
        b = idoc.get("bounds", [[-3.0, 3.0], [-1.0, 1.0]])
        try:
            (x0, x1), (y0, y1) = b
            bounds = ((_num(x0, "initial.bounds"), _num(x1, "initial.bounds")),
                      (_num(y0, "initial.bounds"), _num(y1, "initial.bounds")))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("initial.bounds", "expected [[xmin, xmax], [ymin, ymax]]") from None
        if not (bounds[0][0] < bounds[0][1] and bounds[1][0] < bounds[1][1]):
            raise ConfigError("initial.bounds", "empty region")
        kw["bounds"] = bounds
    elif dist == "explicit":
        pos = _req(idoc, "positions", "initial")
        try:
            kw["positions"] = tuple((float(x), float(y)) for x, y in pos)
        except (TypeError, ValueError):
            raise ConfigError("initial.positions", "expected a list of [x, y] pairs") from None
    else:
        raise ConfigError("initial.distribution", f"unknown distribution {dist!r}")

    gdoc = doc.get("graph", {})
    _reject_unknown(gdoc, _GRAPH, "graph")
    gkind = gdoc.get("type", "edges" if "edges" in gdoc else "geometric")
    if gkind == "edges":
        try:
            edges = tuple((int(i), int(j)) for i, j in _req(gdoc, "edges", "graph"))
        except (TypeError, ValueError):
            raise ConfigError("graph.edges", "expected a list of [i, j] pairs") from None
        kw["graph"] = GraphSpec(kind="edges", edges=edges)
    elif gkind == "geometric":
        radius = _num(gdoc.get("radius", 1.0), "graph.radius")
        if radius <= 0:
            raise ConfigError("graph.radius", "radius must be positive")
        kw["graph"] = GraphSpec(kind="geometric", radius=radius, seed=gdoc.get("seed"))
    elif gkind == "complete":
        kw["graph"] = GraphSpec(kind="complete")
    else:
        raise ConfigError("graph.type", f"unknown graph type {gkind!r}")

    events = []
    for k, ev in enumerate(doc.get("events", [])):
        where = f"events[{k}]"
        _reject_unknown(ev, _EVENT, where)

        def _tuple(key, conv):
            v = ev.get(key, [])
            v = v if isinstance(v, list) else [v]
            try:
                return tuple(conv(x) for x in v)
            except (TypeError, ValueError):
                raise ConfigError(f"{where}.{key}", "bad value") from None

        events.append(
            Event(
                time=_num(_req(ev, "time", where), f"{where}.time"),
                kind=_req(ev, "kind", where),
                agents=_tuple("agents", int),
                count=int(ev.get("count", 0)),
                omega=_tuple("omega", float),
                radius=_tuple("radius", float),
            )
        )
    kw["events"] = tuple(events)

    for key in ("seed", "log_every"):
        if key in doc:
            if isinstance(doc[key], bool) or not isinstance(doc[key], int):
                raise ConfigError(key, "expected an integer")
            kw[key] = doc[key]
    for key in ("duration", "eps_f", "eps_s", "step_h"):
        if key in doc:
            kw[key] = _num(doc[key], key)
    for key in ("basis", "on_death"):
        if key in doc:
            kw[key] = str(doc[key])
    for key in ("motion", "allow_psd_target"):
        if key in doc:
            if not isinstance(doc[key], bool):
                raise ConfigError(key, "expected true or false")
            kw[key] = doc[key]
    return ScenarioConfig(n_agents=n, target=target, mode=mode, **kw)


def load_document(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(str(path), f"malformed document: {exc}") from None


def load_config(path, overrides: dict | None = None) -> ScenarioConfig:
    return parse_config(load_document(path), overrides)


def config_hash(doc: dict) -> str:
    """SHA-256 of the canonical JSON form of a (possibly overridden) document."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def bundled_config(name: str) -> Path:
    """Path of a scenario shipped with the package (``fig2``, ``fig3``, ...)."""
    p = Path(__file__).parent / "scenarios" / f"{name}.cfg"
    if not p.exists():
        raise FileNotFoundError(f"no bundled scenario {name!r}; choose from {', '.join(BUNDLED)}")
    return p
