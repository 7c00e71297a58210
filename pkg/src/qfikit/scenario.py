"""Scenario configuration, validation and sweep execution."""
from __future__ import annotations

import copy
import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from . import __version__
from .errors import QfiError, ValidationError
from .families import (
    ParamStateFamily,
    bell_family,
    derivative,
    ghz_family,
    random_family,
    softmax_family,
    unitary_family,
)
from .measurement import ProjectiveMeasurement
from .metrics import metric_report
from .optimizer import default_grouping_tol, reduce_projectors
from .protocol import (
    ControlledUnitary,
    audit_chain,
    build_controlled_unitary,
    orthogonal_aux_unitaries,
)
from .sld import optimal_measurement
from .states import (
    AuxiliaryState,
    hermitian_eig,
    matrix_from_json,
    random_density,
    random_hermitian,
)
from .tolerances import DEFAULT, Tolerances

log = logging.getLogger(__name__)

REPORT_VERSION = 1
CSV_COLUMNS = ("x", "F_a", "F_b", "F_sub_b", "cfi_a")


def load_schema(name: str) -> dict:
    return json.loads(resources.files("qfikit").joinpath("schemas", name).read_text())


def bundled_scenarios() -> list:
    root = resources.files("qfikit").joinpath("scenarios")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(path) -> dict:
    """Read a scenario file; a bare bundled name such as ``bell.json`` also works."""
    p = Path(path)
    if not p.exists() and p.name in bundled_scenarios() and p.parent == Path("."):
        text = resources.files("qfikit").joinpath("scenarios", p.name).read_text()
    else:
        text = p.read_text()
    return json.loads(text)


# ----------------------------------------------------------------------------
# validation

def _family_dim(fam: dict, problems: list) -> Optional[int]:
    kind = fam.get("kind")
    if kind == "bell":
        return 4
    if kind == "ghz":
        return 2 ** fam["n_qubits"]
    if kind == "unitary":
        d0, dh = fam["rho0"]["dim"], fam["generator"]["dim"]
        if d0 != dh:
            problems.append(f"family.generator: dim {dh} != family.rho0 dim {d0}")
        return d0
    if kind == "diagonal":
        if len(fam["weights"]) != len(fam["rates"]):
            problems.append("family.rates: length must equal family.weights")
        return len(fam["weights"])
    if kind == "random":
        if fam.get("rank", fam["dim"]) > fam["dim"]:
            problems.append("family.rank: must not exceed family.dim")
        return fam["dim"]
    return None


def _check_matrix(obj: dict, where: str, dim: Optional[int], problems: list):
    n = obj["dim"] ** 2
    if len(obj["re"]) != n or len(obj.get("im", [0.0] * n)) != n:
        problems.append(f"{where}: needs {n} entries in 're' and 'im'")
    if dim is not None and obj["dim"] != dim:
        problems.append(f"{where}: dim {obj['dim']} != expected {dim}")


def validate_config(config: dict) -> Tolerances:
    """Check ``config`` against the schema and for mutual consistency.

    Returns:
        The resolved tolerances.

    Raises:
        ValidationError: listing every failing field.
    """
    validator = jsonschema.Draft202012Validator(load_schema("scenario.schema.json"))
    problems = [
        f"{'.'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
        for e in sorted(validator.iter_errors(config), key=lambda e: list(map(str, e.absolute_path)))
    ]
    if problems:
        raise ValidationError(problems)

    fam = config["family"]
    dim = _family_dim(fam, problems)
    for key in ("rho0", "generator"):
        if key in fam:
            _check_matrix(fam[key], f"family.{key}", dim, problems)

    meas = config["measurement"]
    n_out = None
    if meas["kind"] == "explicit":
        for i, pm in enumerate(meas["projectors"]):
            _check_matrix(pm, f"measurement.projectors[{i}]", dim, problems)
        n_out = len(meas["projectors"])
    elif meas["kind"] == "computational":
        n_out = dim

    aux = config["auxiliary"]
    if aux.get("purity") == "mixed":
        w = aux["weights"]
        if len(w) != aux["dim"]:
            problems.append(f"auxiliary.weights: length {len(w)} != auxiliary.dim {aux['dim']}")
        elif abs(sum(w) - 1) > 1e-9:
            problems.append(f"auxiliary.weights: sum to {sum(w)!r}, expected 1")

    proto = config["protocol"]
    if proto["aux_unitaries"] == "explicit":
        if n_out is None:
            problems.append("protocol.unitaries: explicit unitaries need an explicit or "
                            "computational measurement (sld-optimal has a varying outcome count)")
        elif len(proto["unitaries"]) != n_out:
            problems.append(f"protocol.unitaries: {len(proto['unitaries'])} given for {n_out} projectors")
        for i, u in enumerate(proto["unitaries"]):
            _check_matrix(u, f"protocol.unitaries[{i}]", aux["dim"], problems)
    elif n_out is not None and n_out > aux["dim"]:
        log.warning("%d outcomes exceed auxiliary dim %d: orthogonal-auto shifts repeat",
                    n_out, aux["dim"])

    sw = config["sweep"]
    if sw["x_start"] > sw["x_end"]:
        problems.append("sweep.x_start: must be <= sweep.x_end")

    tol = DEFAULT
    try:
        tol = DEFAULT.with_overrides(**config.get("tolerances", {}))
    except KeyError as exc:
        problems.append(f"tolerances: {exc.args[0]}")
    if problems:
        raise ValidationError(problems)
    return tol


# ----------------------------------------------------------------------------
# building blocks from a validated config

@dataclass
class Scenario:
    config: dict
    tol: Tolerances
    family: ParamStateFamily
    sigma: AuxiliaryState

    def measurement_at(self, x: float) -> ProjectiveMeasurement:
        kind = self.config["measurement"]["kind"]
        if kind == "computational":
            return ProjectiveMeasurement.computational(self.family.dim)
        if kind == "explicit":
            return ProjectiveMeasurement(
                [matrix_from_json(p) for p in self.config["measurement"]["projectors"]], self.tol
            )
        return optimal_measurement(self.family(x), derivative(self.family, x), self.tol)

    def controlled_unitary(self, meas: ProjectiveMeasurement) -> ControlledUnitary:
        proto = self.config["protocol"]
        if proto["aux_unitaries"] == "explicit":
            ops = [matrix_from_json(u) for u in proto["unitaries"]]
        else:
            ops = orthogonal_aux_unitaries(meas.count, self.sigma.dim)
        return build_controlled_unitary(meas, ops, self.tol)

    def x_grid(self) -> np.ndarray:
        sw = self.config["sweep"]
        return np.linspace(sw["x_start"], sw["x_end"], sw["n_points"])


def _build_family(fam: dict, seed: int) -> ParamStateFamily:
    kind = fam["kind"]
    axis = fam.get("axis", "z")
    if kind == "bell":
        f = bell_family(axis)
    elif kind == "ghz":
        f = ghz_family(fam["n_qubits"], axis)
    elif kind == "unitary":
        f = unitary_family(matrix_from_json(fam["rho0"]), matrix_from_json(fam["generator"]))
    elif kind == "diagonal":
        f = softmax_family(fam["weights"], fam["rates"])
    else:
        rng = np.random.default_rng(seed)
        dim, rank = fam["dim"], fam.get("rank", fam["dim"])
        if fam.get("encoding", "unitary") == "unitary":
            f = unitary_family(random_density(dim, rank, rng), random_hermitian(dim, rng))
        else:
            f = random_family(dim, rank, rng)
    deriv = fam.get("derivative")
    if deriv:
        f = f.with_strategy(deriv.get("strategy", f.strategy),
                            **{k: deriv[k] for k in ("step", "shift") if k in deriv})
    return f


def build_scenario(config: dict) -> Scenario:
    tol = validate_config(config)
    try:
        family = _build_family(config["family"], config.get("seed", 0))
        aux = config["auxiliary"]
        if aux.get("purity", "pure") == "pure":
            sigma = AuxiliaryState.pure(aux["dim"])
        else:
            sigma = AuxiliaryState.diagonal(aux["weights"])
        if config["measurement"]["kind"] == "explicit":
            ProjectiveMeasurement([matrix_from_json(p) for p in config["measurement"]["projectors"]], tol)
        if config["family"]["kind"] == "unitary":
            hermitian_eig(matrix_from_json(config["family"]["generator"]), tol)
    except QfiError as exc:
        raise ValidationError([str(exc)]) from exc
    return Scenario(config, tol, family, sigma)


# ----------------------------------------------------------------------------
# execution

def _evaluate_point(sc: Scenario, x: float) -> dict:
    try:
        meas = sc.measurement_at(x)
        cu = sc.controlled_unitary(meas)
        rep = audit_chain(sc.family, sc.sigma, cu, x, sc.tol)
        met = metric_report(sc.family, x, sc.tol)
    except (QfiError, np.linalg.LinAlgError) as exc:
        log.warning("x=%g failed: %s", x, exc)
        return {"x": float(x), "status": "error", "error_type": type(exc).__name__, "error": str(exc)}
    rec = {"x": float(x), "status": "ok"}
    rec.update(rep.as_dict())
    rec["violation"] = bool(rep.violations)
    rec["metrics"] = met.as_dict()
    return rec


def _summary(records: list) -> dict:
    ok = [r for r in records if r["status"] == "ok"]
    return {
        "n_points": len(records),
        "n_errors": len(records) - len(ok),
        "n_violations": sum(r["violation"] for r in ok),
        "all_chain_ok": all(r["chain_ok"] for r in ok),
    }


def _grouping_summary(sc: Scenario) -> dict:
    grp = sc.config.get("grouping", {})
    x = float(grp.get("x", sc.config["sweep"]["x_start"]))
    meas = sc.measurement_at(x)
    p = meas.probabilities(sc.family(x))
    dp = meas.probabilities(derivative(sc.family, x))
    tol = grp.get("tol")
    tol = default_grouping_tol(p, dp) if tol is None else float(tol)
    plan = reduce_projectors(meas, sc.family, x, tol, sc.tol)

    def f_b(m: ProjectiveMeasurement) -> float:
        # each outcome gets its own orthogonal pure auxiliary level
        cu = build_controlled_unitary(m, orthogonal_aux_unitaries(m.count, m.count), sc.tol)
        return audit_chain(sc.family, AuxiliaryState.pure(m.count), cu, x, sc.tol).F_b

    out = {"x": x, "tol": tol}
    out.update(plan.as_dict())
    out["F_b_original"] = f_b(meas)
    out["F_b_reduced"] = f_b(plan.measurement)
    return out


def _report(command: str, config: dict, sc: Scenario, records: list, grouping, t0: float) -> dict:
    return {
        "report_version": REPORT_VERSION,
        "qfikit_version": __version__,
        "command": command,
        "config": config,
        "tolerances": {k: float(v) for k, v in sc.tol.as_dict().items()},
        "records": records,
        "summary": _summary(records),
        "grouping": grouping,
        "timing": {"wall_time_s": time.perf_counter() - t0},
    }


def run_scenario(config: dict, jobs: int = 1, seed: Optional[int] = None) -> dict:
    """Sweep the scenario's x grid and audit the transfer at every point.

    Points are evaluated on up to ``jobs`` threads; records stay ordered by x.
    A point that fails numerically yields an error record and the sweep goes on.
    """
    t0 = time.perf_counter()
    config = copy.deepcopy(config)
    if seed is not None:
        config["seed"] = int(seed)
    sc = build_scenario(config)
    xs = sc.x_grid()
    if jobs > 1 and xs.size > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda x: _evaluate_point(sc, x), xs))
    else:
        records = [_evaluate_point(sc, x) for x in xs]
    grouping = None
    if config.get("grouping", {}).get("enabled"):
        grouping = _grouping_summary(sc)
    return _report("run", config, sc, records, grouping, t0)


def run_grouping(config: dict, seed: Optional[int] = None) -> dict:
    """Projector-grouping report: N, M, I1, I2 and the auxiliary QFI before
    and after merging, each protocol using one orthogonal pure level per outcome."""
    t0 = time.perf_counter()
    config = copy.deepcopy(config)
    if seed is not None:
        config["seed"] = int(seed)
    config.setdefault("grouping", {"enabled": True})
    if not config["grouping"].get("enabled"):
        raise ValidationError(["grouping.enabled: must be true for a grouping run"])
    sc = build_scenario(config)
    return _report("group", config, sc, [], _grouping_summary(sc), t0)


def has_violation(report: dict) -> bool:
    return any(r.get("violation") for r in report["records"])


def validate_report(report: dict) -> None:
    jsonschema.validate(report, load_schema("report.schema.json"),
                        cls=jsonschema.Draft202012Validator)


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def write_csv(report: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in report["records"]:
            if r["status"] == "ok":
                w.writerow([repr(float(r[c])) for c in CSV_COLUMNS])
