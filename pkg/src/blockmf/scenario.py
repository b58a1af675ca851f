"""Versioned JSON scenario files driving the command line.

Fail-closed: the "schema" field must read "blockmf/1" and every field
must be known — typos are errors, not silently ignored knobs. The seed
never defaults to the clock; it comes from the file or the --seed flag.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigurationError
from .graph import (
    BlockGraph,
    ProportionTargets,
    build_complete_peripheral,
    build_regular_peripheral,
)
from .rates import RateSpec, queue_spec, sis_spec

__all__ = ["Scenario", "load_scenario"]

SCHEMA = "blockmf/1"

_TOP_FIELDS = {
    "schema", "seed", "out", "graph", "rates", "targets", "init",
    "horizon", "dt", "grid", "replicas", "n_list", "tagged",
    "picard_tol", "picard_max_iter", "flow_csv",
}


def _reject_unknown(obj, allowed, where):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise InvalidConfigurationError(
            f"unknown field(s) in {where}: {sorted(unknown)}"
        )


def _positive(value, name, *, integer=False, minimum=None):
    if integer:
        if not isinstance(value, int) or isinstance(value, bool):
            raise InvalidConfigurationError(f"{name} must be an integer")
    else:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise InvalidConfigurationError(f"{name} must be a number")
        value = float(value)
        if not np.isfinite(value):
            raise InvalidConfigurationError(f"{name} must be finite")
    if minimum is not None and value < minimum:
        raise InvalidConfigurationError(f"{name} must be >= {minimum}")
    return value


@dataclass
class Scenario:
    """Parsed scenario; builder methods resolve sections on demand so a
    subcommand only validates what it uses."""

    raw: dict
    base_dir: str
    path: str

    # --- fields with light validation ---------------------------------

    @property
    def seed(self):
        s = self.raw.get("seed")
        if s is None:
            return None
        s = _positive(s, "seed", integer=True, minimum=0)
        if s >= 2 ** 64:
            raise InvalidConfigurationError("seed must fit in 64 bits")
        return s

    @property
    def out(self):
        return self.raw.get("out")

    @property
    def horizon(self) -> float:
        if "horizon" not in self.raw:
            raise InvalidConfigurationError("scenario needs a horizon")
        T = _positive(self.raw["horizon"], "horizon")
        if T <= 0:
            raise InvalidConfigurationError("horizon must be > 0")
        return T

    def dt(self, default=0.01) -> float:
        if "dt" not in self.raw:
            return default
        v = _positive(self.raw["dt"], "dt")
        if v <= 0:
            raise InvalidConfigurationError("dt must be > 0")
        return v

    def grid(self, default=51) -> int:
        return _positive(self.raw.get("grid", default), "grid",
                         integer=True, minimum=2)

    def replicas(self, default=None) -> int:
        v = self.raw.get("replicas", default)
        if v is None:
            raise InvalidConfigurationError("scenario needs replicas")
        return _positive(v, "replicas", integer=True, minimum=1)

    @property
    def n_list(self):
        v = self.raw.get("n_list")
        if v is None:
            raise InvalidConfigurationError("scenario needs n_list")
        if not isinstance(v, list) or not v:
            raise InvalidConfigurationError("n_list must be a nonempty list")
        out = [_positive(n, "n_list entry", integer=True, minimum=2)
               for n in v]
        if out != sorted(set(out)):
            raise InvalidConfigurationError(
                "n_list must be strictly increasing"
            )
        return out

    @property
    def picard_tol(self) -> float:
        v = _positive(self.raw.get("picard_tol", 1e-8), "picard_tol")
        if v <= 0:
            raise InvalidConfigurationError("picard_tol must be > 0")
        return v

    @property
    def picard_max_iter(self) -> int:
        return _positive(self.raw.get("picard_max_iter", 50),
                         "picard_max_iter", integer=True, minimum=1)

    @property
    def flow_csv(self):
        v = self.raw.get("flow_csv")
        if v is None:
            return None
        return self._resolve_file(v, "flow_csv")

    def tagged(self, r: int):
        """Tagged-node requests for the joint-law test; defaults to the
        first central node of block 0 and the first peripheral of block
        1 (block 0 again when r = 1)."""
        v = self.raw.get("tagged")
        if v is None:
            return [(0, "c"), (min(1, r - 1), "p")]
        if not isinstance(v, list) or not v:
            raise InvalidConfigurationError("tagged must be a nonempty list")
        out = []
        for item in v:
            if isinstance(item, int) and not isinstance(item, bool):
                out.append(item)
                continue
            if (isinstance(item, list) and len(item) == 2
                    and isinstance(item[0], int) and item[1] in ("c", "p")):
                out.append((item[0], item[1]))
                continue
            raise InvalidConfigurationError(
                f"tagged entries are node ids or [block, \"c\"|\"p\"]: "
                f"{item!r}"
            )
        return out

    # --- section builders ----------------------------------------------

    def _resolve_file(self, rel, name):
        if not isinstance(rel, str):
            raise InvalidConfigurationError(f"{name} must be a path string")
        path = os.path.join(self.base_dir, rel)
        if not os.path.exists(path):
            raise InvalidConfigurationError(f"{name} file not found: {path}")
        return path

    def build_graph(self):
        obj = self.raw.get("graph")
        if obj is None:
            raise InvalidConfigurationError("scenario needs a graph section")
        if not isinstance(obj, dict):
            raise InvalidConfigurationError("graph must be a JSON object")
        if "file" in obj:
            _reject_unknown(obj, {"file"}, "graph")
            with open(self._resolve_file(obj["file"], "graph")) as fp:
                return BlockGraph.from_json_obj(json.load(fp))
        if "complete_blocks" in obj:
            _reject_unknown(obj, {"complete_blocks"}, "graph")
            return build_complete_peripheral(
                [tuple(b) for b in obj["complete_blocks"]]
            )
        if "regular" in obj:
            _reject_unknown(obj, {"regular"}, "graph")
            inner = obj["regular"]
            _reject_unknown(inner, {"blocks", "fractions"}, "graph.regular")
            return build_regular_peripheral(
                [tuple(b) for b in inner["blocks"]], inner["fractions"]
            )
        return BlockGraph.from_json_obj(obj)

    def build_rates(self, obj=None):
        if obj is None:
            obj = self.raw.get("rates")
        if obj is None:
            raise InvalidConfigurationError("scenario needs a rates section")
        if not isinstance(obj, dict):
            raise InvalidConfigurationError("rates must be a JSON object")
        if "file" in obj:
            _reject_unknown(obj, {"file"}, "rates")
            with open(self._resolve_file(obj["file"], "rates")) as fp:
                return self.build_rates(json.load(fp))
        model = obj.get("model")
        if model == "sis":
            _reject_unknown(obj, {"model", "r", "gamma", "nu", "eta",
                                  "zeta"}, "rates")
            r = _positive(obj.get("r", 1), "rates.r", integer=True, minimum=1)
            return sis_spec(r, obj["gamma"], obj["nu"], obj["eta"],
                            obj["zeta"])
        if model == "queue":
            _reject_unknown(obj, {"model", "colors", "zeta", "vartheta",
                                  "c0"}, "rates")
            return queue_spec(obj["colors"], obj["zeta"], obj["vartheta"],
                              obj["c0"])
        if model == "tables":
            _reject_unknown(obj, {"model", "spec"}, "rates")
            return RateSpec.from_json_obj(obj["spec"])
        raise InvalidConfigurationError(
            f"unknown rate model {model!r}; choose sis, queue or tables"
        )

    def build_targets(self, graph=None):
        obj = self.raw.get("targets")
        if obj == "from_graph" or obj is None:
            if graph is None:
                graph = self.build_graph()
            return ProportionTargets.from_graph(graph)
        if not isinstance(obj, dict):
            raise InvalidConfigurationError(
                "targets must be an object or \"from_graph\""
            )
        return ProportionTargets.from_json_obj(obj)

    def build_inits(self, r: int):
        obj = self.raw.get("init")
        if obj is None:
            raise InvalidConfigurationError("scenario needs an init section")
        _reject_unknown(obj, {"c", "p"}, "init")
        try:
            cs, ps = obj["c"], obj["p"]
        except KeyError as exc:
            raise InvalidConfigurationError(f"init missing {exc} rows")
        if len(cs) != r or len(ps) != r:
            raise InvalidConfigurationError(
                f"init needs {r} central and {r} peripheral rows"
            )
        out = []
        for j in range(r):
            out.append(np.asarray(cs[j], dtype=float))
            out.append(np.asarray(ps[j], dtype=float))
        return out


def load_scenario(path) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fp:
            raw = json.load(fp)
    except FileNotFoundError:
        raise InvalidConfigurationError(f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InvalidConfigurationError(
            f"scenario is not valid JSON: line {exc.lineno} column "
            f"{exc.colno}: {exc.msg}"
        )
    if not isinstance(raw, dict):
        raise InvalidConfigurationError("scenario must be a JSON object")
    if raw.get("schema") != SCHEMA:
        raise InvalidConfigurationError(
            f"scenario schema must be {SCHEMA!r}, got {raw.get('schema')!r}"
        )
    _reject_unknown(raw, _TOP_FIELDS, "scenario")
    return Scenario(raw, os.path.dirname(os.path.abspath(path)), str(path))
