"""Command-line front door: config parsing, seed management, dispatch.

Exit codes: 0 success, 1 configuration/operational error, 2 scientific FAIL
(a bound violated beyond Monte Carlo noise), so CI can gate on bound
violations separately from broken configs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import bounds as bnd
from .estimation import (
    DiscreteJointLaw,
    GaussianRegressionLaw,
    SyntheticDistribution,
    TwoClassGaussianLaw,
    error_triple,
)
from .experiments import (
    run_concentration,
    run_split_sweep,
    run_stability_audit,
)
from .learners import (
    ConstantPredictor,
    Kernel,
    Learner,
    LossKind,
    ThresholdPredictor,
    adaboost_learner,
    constant_learner,
    erm_learner,
    knn_learner,
    lasso_learner,
    regnet_learner,
)
from .resampling import SchemeError, build_scheme
from .stability import certificate_regnet, estimate_profile, StabilityProfile

ENV_SEED = "STABCV_SEED"


class ConfigError(ValueError):
    """Bad config or parameters; maps to exit code 1."""


# ---------------------------------------------------------------------------
# config schemas (unknown keys rejected everywhere)
# ---------------------------------------------------------------------------


def _obj(properties: dict, required=()) -> dict:
    return {
        "type": "object",
        "properties": properties,
        "required": list(required),
        "additionalProperties": False,
    }


_NUM = {"type": "number"}
_POS_NUM = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 1}
_SEED = {"type": "integer", "minimum": 0}

LOSS_SCHEMA = _obj(
    {"kind": {"enum": ["zero-one", "squared-clipped"]}, "M": _POS_NUM}, ["kind"]
)

LAW_SCHEMA = {
    "oneOf": [
        _obj(
            {
                "kind": {"const": "discrete-joint"},
                "atoms": {"type": "array", "minItems": 1,
                          "items": {"type": "array", "minItems": 3, "maxItems": 3}},
            },
            ["kind", "atoms"],
        ),
        _obj(
            {
                "kind": {"const": "gaussian-regression"},
                "slope": {"type": "array", "items": _NUM, "minItems": 1},
                "noise": {"type": "number", "minimum": 0},
                "x_kind": {"enum": ["gaussian", "uniform"]},
                "low": _NUM,
                "high": _NUM,
            },
            ["kind", "slope", "noise"],
        ),
        _obj(
            {
                "kind": {"const": "two-class-gaussian"},
                "mean0": {"type": "array", "items": _NUM, "minItems": 1},
                "mean1": {"type": "array", "items": _NUM, "minItems": 1},
                "sigma": _POS_NUM,
                "prior1": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
            ["kind", "mean0", "mean1", "sigma", "prior1"],
        ),
    ]
}

HYPOTHESIS_SCHEMA = {
    "oneOf": [
        _obj({"kind": {"const": "constant"}, "value": _NUM, "loss": LOSS_SCHEMA},
             ["kind", "value"]),
        _obj({"kind": {"const": "threshold"}, "feature": {"type": "integer", "minimum": 0},
              "cut": _NUM, "lo": _NUM, "hi": _NUM, "loss": LOSS_SCHEMA},
             ["kind", "feature", "cut", "lo", "hi"]),
    ]
}

DICTIONARY_SCHEMA = {
    "oneOf": [
        _obj({"kind": {"const": "poly"}, "degree": _INT}, ["kind", "degree"]),
        _obj({"kind": {"const": "coordinates"}, "dim": _INT}, ["kind", "dim"]),
    ]
}

LEARNER_SCHEMA = {
    "oneOf": [
        _obj({"learner": {"const": "knn"}, "k": _INT,
              "task": {"enum": ["classify", "regress"]}, "loss": LOSS_SCHEMA},
             ["learner", "k"]),
        _obj({"learner": {"const": "regnet"},
              "kernel": _obj({"kind": {"enum": ["gaussian", "linear"]}, "gamma": _POS_NUM},
                             ["kind"]),
              "reg": _POS_NUM, "loss": LOSS_SCHEMA},
             ["learner", "kernel", "reg"]),
        _obj({"learner": {"const": "erm"},
              "hypotheses": {"type": "array", "items": HYPOTHESIS_SCHEMA, "minItems": 1}},
             ["learner", "hypotheses"]),
        _obj({"learner": {"const": "adaboost"}, "rounds": _INT}, ["learner", "rounds"]),
        _obj({"learner": {"const": "lasso"}, "dictionary": DICTIONARY_SCHEMA,
              "A": _POS_NUM, "loss": LOSS_SCHEMA},
             ["learner", "dictionary", "A"]),
        _obj({"learner": {"const": "constant"}, "value": _NUM, "loss": LOSS_SCHEMA},
             ["learner", "value"]),
    ]
}

SCHEME_SCHEMA = {
    "oneOf": [
        _obj({"kind": {"const": "leave-one-out"}}, ["kind"]),
        _obj({"kind": {"const": "k-fold"}, "k": _INT}, ["kind", "k"]),
        _obj({"kind": {"const": "hold-out"},
              "mask": {"type": "array", "items": {"enum": [0, 1]}, "minItems": 2}},
             ["kind", "mask"]),
        _obj({"kind": {"const": "leave-nu-out-exact"}, "nu": _INT, "support_cap": _INT},
             ["kind", "nu"]),
        _obj({"kind": {"const": "leave-nu-out-monte-carlo"}, "nu": _INT, "draws": _INT},
             ["kind", "nu", "draws"]),
    ]
}

PROFILE_SCHEMA = {
    "oneOf": [
        _obj({"certified_regnet": _obj(
            {"m_bound": _POS_NUM, "kappa": _POS_NUM, "lambda_reg": _POS_NUM},
            ["m_bound", "kappa", "lambda_reg"])},
            ["certified_regnet"]),
        _obj({"kind": {"enum": ["weak", "strong", "cv-weak", "cv-strong", "sure"]},
              "distance": {"enum": ["d_inf", "d_1", "d_e"]},
              "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
              "lambda": {"type": "number", "minimum": 0},
              "delta": {"type": "number", "minimum": 0, "maximum": 1},
              "provenance": {"enum": ["certified", "estimated"]}},
             ["kind", "distance", "lambda", "delta"]),
    ]
}

BOUND_PARAMS_SCHEMA = _obj({
    "delta_loo_next": {"type": "number", "minimum": 0},
    "alpha_prime": _POS_NUM,
    "delta_prime": {"type": "number", "minimum": 0},
    "delta_loo": {"type": "number", "minimum": 0},
    "exponent_with_n": {"type": "boolean"},
})

CV_RUN_SCHEMA = _obj(
    {"seed": _SEED, "n": {"type": "integer", "minimum": 2}, "law": LAW_SCHEMA,
     "learner": LEARNER_SCHEMA, "scheme": SCHEME_SCHEMA,
     "mc_draws": {"type": "integer", "minimum": 2}, "data_stream": _SEED},
    ["n", "law", "learner", "scheme"],
)

STABILITY_SCHEMA = _obj(
    {"seed": _SEED, "n": {"type": "integer", "minimum": 2}, "law": LAW_SCHEMA,
     "learner": LEARNER_SCHEMA, "scheme": SCHEME_SCHEMA,
     "kind": {"enum": ["weak", "strong", "cv-weak", "cv-strong"]},
     "distance": {"enum": ["d_inf", "d_1", "d_e"]},
     "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
     "reps": {"type": "integer", "minimum": 100},
     "target_delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
     "dinf_grid": _INT, "eval_draws": {"type": "integer", "minimum": 2}},
    ["n", "law", "learner", "scheme", "kind", "distance", "reps"],
)

CONCENTRATION_SCHEMA = _obj(
    {"seed": _SEED, "n": {"type": "integer", "minimum": 2}, "law": LAW_SCHEMA,
     "learner": LEARNER_SCHEMA, "scheme": SCHEME_SCHEMA, "profile": PROFILE_SCHEMA,
     "bound_kind": {"enum": ["generic", "generic-kappa", "uniform-strong",
                             "uniform-weak", "holdout-uniform"]},
     "replicates": _INT,
     "eps_grid": {"type": "array", "items": _POS_NUM, "minItems": 1},
     "mc_draws": {"type": "integer", "minimum": 2},
     "bound_params": BOUND_PARAMS_SCHEMA},
    ["n", "law", "learner", "scheme", "profile", "bound_kind", "replicates"],
)

SPLIT_SCHEMA = _obj(
    {"seed": _SEED, "n": {"type": "integer", "minimum": 2}, "law": LAW_SCHEMA,
     "learner": LEARNER_SCHEMA,
     "p_grid": {"type": "array", "items": _POS_NUM, "minItems": 1},
     "scheme_kind": {"enum": ["k-fold", "leave-nu-out-exact", "leave-nu-out-monte-carlo"]},
     "replicates": _INT, "lam": _POS_NUM, "delta": {"type": "number", "minimum": 0},
     "split_kind": {"enum": ["weak-general", "strong-uniform"]},
     "mc_draws": {"type": "integer", "minimum": 2}, "mc_mask_draws": _INT},
    ["n", "law", "learner", "p_grid", "scheme_kind", "replicates", "lam"],
)

AUDIT_SCHEMA = _obj(
    {"seed": _SEED, "n": {"type": "integer", "minimum": 2}, "law": LAW_SCHEMA,
     "learner": LEARNER_SCHEMA, "scheme": SCHEME_SCHEMA,
     "distance": {"enum": ["d_inf", "d_1", "d_e"]},
     "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
     "replicates": {"type": "integer", "minimum": 100},
     "kind": {"enum": ["weak", "strong", "cv-weak", "cv-strong"]},
     "certificate": PROFILE_SCHEMA,
     "target_delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
     "dinf_grid": _INT, "eval_draws": {"type": "integer", "minimum": 2}},
    ["n", "law", "learner", "scheme", "distance", "replicates"],
)


def validate_config(config: dict, schema: dict) -> None:
    try:
        jsonschema.validate(config, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config error at {exc.json_path}: {exc.message}") from exc


# ---------------------------------------------------------------------------
# builders from validated config blocks
# ---------------------------------------------------------------------------


def build_law(spec: dict) -> SyntheticDistribution:
    kind = spec["kind"]
    if kind == "discrete-joint":
        return DiscreteJointLaw.from_table(spec["atoms"])
    if kind == "gaussian-regression":
        return GaussianRegressionLaw(
            slope=tuple(spec["slope"]), noise=spec["noise"],
            x_kind=spec.get("x_kind", "gaussian"),
            low=spec.get("low", -1.0), high=spec.get("high", 1.0))
    return TwoClassGaussianLaw(
        mean0=tuple(spec["mean0"]), mean1=tuple(spec["mean1"]),
        sigma=spec["sigma"], prior1=spec["prior1"])


def _build_loss(spec: dict | None) -> LossKind | None:
    if spec is None:
        return None
    return LossKind(spec["kind"], spec.get("M", 1.0))


def _build_hypothesis(spec: dict):
    loss = _build_loss(spec.get("loss")) or LossKind("zero-one")
    if spec["kind"] == "constant":
        return ConstantPredictor(spec["value"], loss)
    return ThresholdPredictor(spec["feature"], spec["cut"], spec["lo"], spec["hi"], loss)


def _build_dictionary(spec: dict):
    if spec["kind"] == "poly":
        return [(lambda x, j=j: float(x[0]) ** j) for j in range(1, spec["degree"] + 1)]
    return [(lambda x, j=j: float(x[j])) for j in range(spec["dim"])]


def _squared_bound(spec: dict) -> float:
    """M for the clipped squared loss of a regression learner's config."""
    loss = spec.get("loss")
    if loss is None:
        return 1.0
    if loss["kind"] != "squared-clipped":
        raise ConfigError(f"{spec['learner']} uses the squared-clipped loss, "
                          f"got {loss['kind']!r}")
    return loss.get("M", 1.0)


def build_learner(spec: dict) -> Learner:
    name = spec["learner"]
    if name == "knn":
        return knn_learner(spec["k"], spec.get("task", "classify"),
                           _build_loss(spec.get("loss")))
    if name == "regnet":
        kernel = Kernel(spec["kernel"]["kind"], spec["kernel"].get("gamma", 1.0))
        return regnet_learner(kernel, spec["reg"], _squared_bound(spec))
    if name == "erm":
        return erm_learner([_build_hypothesis(h) for h in spec["hypotheses"]],
                           spec={"learner": "erm", "hypotheses": spec["hypotheses"]})
    if name == "adaboost":
        return adaboost_learner(spec["rounds"])
    if name == "lasso":
        return lasso_learner(_build_dictionary(spec["dictionary"]), spec["A"],
                             m_bound=_squared_bound(spec),
                             spec={"learner": "lasso", "dictionary": spec["dictionary"],
                                   "A": spec["A"]})
    return constant_learner(spec["value"], _build_loss(spec.get("loss")) or LossKind("zero-one"))


def build_scheme_from_config(n: int, spec: dict, seed: int):
    params = {k: v for k, v in spec.items() if k not in ("kind", "support_cap")}
    try:
        return build_scheme(n, spec["kind"], params, seed=seed,
                            support_cap=spec.get("support_cap", 10**6))
    except SchemeError as exc:
        raise ConfigError(str(exc)) from exc


def build_profile(spec: dict, n: int) -> StabilityProfile:
    if "certified_regnet" in spec:
        cert = spec["certified_regnet"]
        return certificate_regnet(cert["m_bound"], cert["kappa"], n, cert["lambda_reg"])
    return StabilityProfile(
        kind=spec["kind"], distance=spec["distance"], alpha=spec.get("alpha", 1.0),
        lam=spec["lambda"], delta=spec["delta"],
        provenance=spec.get("provenance", "estimated"))


# ---------------------------------------------------------------------------
# bounds eval registry
# ---------------------------------------------------------------------------


def _tail_outputs(tb: bnd.TailBound) -> dict:
    return {"shift": tb.threshold_shift, "raw": tb.raw_value,
            "clipped": tb.clipped_value, "vacuous": tb.vacuous}


def _prob_outputs(value: float) -> dict:
    return {"shift": 0.0, "raw": value, "clipped": min(value, 1.0), "vacuous": value >= 1.0}


def _eval_formula(formula: str, p: dict) -> dict:
    if formula == "vc-baseline":
        return _tail_outputs(bnd.vc_baseline(p["n"], p["p"], p["eps"], p["vc_dim"],
                                             p.get("v_log_with_n", False)))
    if formula == "generic":
        return _tail_outputs(bnd.generic_stability_tail(
            p["n"], p["p"], p["eps"], p["lam"], p.get("alpha", 1.0),
            p.get("delta", 0.0), p.get("multiplier", 1.0)))
    if formula == "uniform-strong":
        return _tail_outputs(bnd.uniform_stability_tail_strong(
            p["n"], p["p"], p["eps"], p["lam"], p.get("alpha", 1.0), p.get("delta", 0.0),
            p.get("delta_loo_next", 0.0), p.get("alpha_prime")))
    if formula == "uniform-weak":
        return _tail_outputs(bnd.uniform_stability_tail_weak(
            p["n"], p["p"], p["eps"], p["lam"], p.get("alpha", 1.0),
            p.get("delta_prime", 0.0), p.get("delta", 0.0)))
    if formula == "holdout-uniform":
        return _tail_outputs(bnd.holdout_uniform_tail(
            p["n"], p["p"], p["eps"], p["lam"], p.get("alpha", 1.0), p.get("delta", 0.0),
            p.get("delta_loo", 0.0), p.get("exponent_with_n", False)))
    if formula in ("l1-weak-general", "l1-strong-uniform"):
        kind = formula[3:]
        value = bnd.l1_bound(kind, p["n"], p["p"], p["lam"], p.get("delta", 0.0),
                             p.get("delta_prime", 0.0))
        return {"shift": 0.0, "raw": value, "clipped": value, "vacuous": False}
    if formula in ("optimal-split-weak-general", "optimal-split-strong-uniform"):
        kind = formula[len("optimal-split-"):]
        rule = bnd.optimal_split(kind, p["n"], p["lam"])
        return {"p_star": rule.p_star, "objective": rule.bound_at_p_star}
    if formula == "hoeffding":
        ranges = p.get("ranges", p.get("range"))
        if ranges is None:
            raise ConfigError("hoeffding requires 'range' or 'ranges'")
        return _prob_outputs(bnd.hoeffding_tail(p["n"], p["eps"], ranges))
    if formula == "mcdiarmid":
        cs = p.get("c")
        if isinstance(cs, (int, float)):
            cs = [cs] * int(p.get("count", 1))
        return _prob_outputs(bnd.mcdiarmid_tail(p["eps"], cs))
    if formula == "kutin-strong":
        return _prob_outputs(bnd.kutin_strong_tail(
            p["n"], p["tau"], p["b"], p["c"], p["delta"], p["alpha_prime"]))
    if formula == "kutin-weak":
        return _prob_outputs(bnd.kutin_weak_tail(p["n"], p["eps"], p["b"], p["c"], p["delta"]))
    if formula == "expectation-from-tail":
        value = bnd.expectation_from_tail(p["C"], p["K"])
        return {"shift": 0.0, "raw": value, "clipped": value, "vacuous": False}
    if formula == "knn-certificate":
        from .stability import certificate_knn_tail
        return _tail_outputs(certificate_knn_tail(p["n"], p["k"], p["d"], p["eps"]))
    if formula == "regnet-certificate":
        prof = certificate_regnet(p["M"], p["kappa"], p["n"], p["lambda_reg"])
        return {"shift": 0.0, "raw": prof.lam, "clipped": min(prof.lam, 1.0),
                "vacuous": prof.lam >= 1.0}
    if formula == "delta-heuristic":
        return _prob_outputs(bnd.delta_heuristic(p["n"], p["p"], p.get("c0", 1.0)))
    raise ConfigError(f"unknown formula {formula!r}")


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return '"' + json.dumps(value) + '"'
    return str(value)


def bounds_eval_text(formula: str, params: dict) -> str:
    """One-row CSV: formula, echoed inputs, then the outputs."""
    try:
        outputs = _eval_formula(formula, params)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"formula {formula!r}: missing or bad parameter {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"formula {formula!r}: {exc}") from exc
    in_keys = sorted(params)
    out_keys = list(outputs)
    header = ",".join(["formula"] + in_keys + out_keys)
    row = ",".join([formula] + [_csv_cell(params[k]) for k in in_keys]
                   + [_csv_cell(outputs[k]) for k in out_keys])
    return header + "\n" + row + "\n"


# ---------------------------------------------------------------------------
# IO helpers
# ---------------------------------------------------------------------------


def to_json_text(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_out(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load_config(path: str, schema: dict) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        config = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    validate_config(config, schema)
    return config


def _resolve_seed(config: dict, override: int | None = None) -> int:
    """Seed precedence: --seed flag, config key, STABCV_SEED env var, then 0."""
    if override is not None:
        return int(override)
    if "seed" in config:
        return int(config["seed"])
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"{ENV_SEED} must be an integer, got {env!r}") from exc
    return 0


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_bounds_eval(args) -> int:
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed --params JSON: {exc}") from exc
    if not isinstance(params, dict):
        raise ConfigError("--params must be a JSON object")
    _write_out(bounds_eval_text(args.formula, params), args.out)
    return 0


def _cmd_scheme_build(args) -> int:
    try:
        params = json.loads(args.params) if args.params else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed --params JSON: {exc}") from exc
    scheme = build_scheme_from_config(args.n, {**params, "kind": args.kind}, args.seed)
    _write_out(to_json_text(scheme.to_json_dict()), args.out)
    return 0


def _cmd_cv_run(args) -> int:
    config = _load_config(args.config, CV_RUN_SCHEMA)
    seed = _resolve_seed(config, args.seed)
    law = build_law(config["law"])
    learner = build_learner(config["learner"])
    scheme = build_scheme_from_config(config["n"], config["scheme"], seed)
    data = law.sample(config["n"], seed, stream=config.get("data_stream", 0))
    triple = error_triple(learner, data, scheme, law,
                          mc_draws=config.get("mc_draws"), seed=seed,
                          stream=(1 << 22))
    payload = triple.to_json_dict()
    payload["scheme_echo"] = scheme.to_json_dict()
    payload["seed"] = seed
    _write_out(to_json_text(payload), args.out)
    return 0


def _cmd_stability_estimate(args) -> int:
    config = _load_config(args.config, STABILITY_SCHEMA)
    seed = _resolve_seed(config, args.seed)
    law = build_law(config["law"])
    learner = build_learner(config["learner"])
    scheme = build_scheme_from_config(config["n"], config["scheme"], seed)
    profile = estimate_profile(
        learner, config["kind"], config["distance"], scheme, law,
        reps=config["reps"], alpha=config.get("alpha", 1.0), seed=seed,
        target_delta=config.get("target_delta", 0.05),
        dinf_grid=config.get("dinf_grid", 512),
        eval_draws=config.get("eval_draws", 2000),
    )
    _write_out(to_json_text(profile.to_json_dict()), args.out)
    return 0


def _cmd_experiment(args) -> int:
    if args.mode == "concentration":
        config = _load_config(args.config, CONCENTRATION_SCHEMA)
        seed = _resolve_seed(config, args.seed)
        scheme = build_scheme_from_config(config["n"], config["scheme"], seed)
        report = run_concentration(
            build_law(config["law"]), build_learner(config["learner"]), scheme,
            build_profile(config["profile"], config["n"]), config["bound_kind"],
            replicates=config["replicates"], eps_grid=config.get("eps_grid"),
            seed=seed, workers=args.workers, mc_draws=config.get("mc_draws"),
            bound_params=config.get("bound_params"),
        )
        _write_out(to_json_text(report.to_json_dict()), args.out)
        if args.csv:
            Path(args.csv).write_text(report.to_csv_text())
        return 2 if report.overall_verdict == "FAIL" else 0

    if args.mode == "split":
        config = _load_config(args.config, SPLIT_SCHEMA)
        seed = _resolve_seed(config, args.seed)
        report = run_split_sweep(
            build_law(config["law"]), build_learner(config["learner"]), config["n"],
            config["p_grid"], config["scheme_kind"], config["replicates"], seed=seed,
            lam=config["lam"], delta=config.get("delta", 0.0),
            split_kind=config.get("split_kind", "weak-general"),
            workers=args.workers, mc_draws=config.get("mc_draws"),
            mc_mask_draws=config.get("mc_mask_draws", 50),
        )
        _write_out(to_json_text(report.to_json_dict()), args.out)
        if args.csv:
            lines = ["p,scheme_kind,kappa,mean_gap,stderr,l1_weak_general"]
            for row in report.rows:
                lines.append(f"{row.p!r},{row.scheme_kind},{row.kappa},"
                             f"{row.mean_gap!r},{row.stderr!r},{row.l1_weak_general!r}")
            Path(args.csv).write_text("\n".join(lines) + "\n")
        return 0

    config = _load_config(args.config, AUDIT_SCHEMA)
    seed = _resolve_seed(config, args.seed)
    scheme = build_scheme_from_config(config["n"], config["scheme"], seed)
    certificate = None
    if "certificate" in config:
        certificate = build_profile(config["certificate"], config["n"])
    report = run_stability_audit(
        build_law(config["law"]), build_learner(config["learner"]), scheme,
        config["distance"], config.get("alpha", 1.0), config["replicates"], seed=seed,
        kind=config.get("kind", "cv-weak"), certificate=certificate,
        target_delta=config.get("target_delta", 0.05),
        dinf_grid=config.get("dinf_grid", 512),
        eval_draws=config.get("eval_draws", 2000),
    )
    _write_out(to_json_text(report.to_json_dict()), args.out)
    if args.csv:
        lines = ["lambda,delta_hat,stderr"]
        for lam, dh, se in report.profile.curve:
            lines.append(f"{lam!r},{dh!r},{se!r}")
        Path(args.csv).write_text("\n".join(lines) + "\n")
    return 2 if report.certificate_satisfied is False else 0


def _selftest_cases() -> list[tuple[str, float, float, float]]:
    """(name, got, want, tol) rows for the embedded example table."""
    from .learners import LearningSet, fit_adaboost, fit_erm_finite, fit_knn, stump_base_learner
    from .resampling import BinaryVector, total_variation
    from .stability import certificate_knn_tail

    cases: list[tuple[str, float, float, float]] = []
    full10 = BinaryVector.ones(10)
    loo10 = BinaryVector.from_bits([0] + [1] * 9)
    l2o10 = BinaryVector.from_bits([0, 0] + [1] * 8)
    cases.append(("tv-loo-10", total_variation(loo10, full10), 0.2, 0.0))
    cases.append(("tv-l2o-10", total_variation(l2o10, full10), 0.4, 0.0))
    cases.append(("hoeffding", bnd.hoeffding_tail(50, 0.2, 1.0), math.exp(-4.0), 1e-12))
    cases.append(("mcdiarmid", bnd.mcdiarmid_tail(0.1, [0.01] * 100), math.exp(-2.0), 1e-12))
    cases.append(("expectation-from-tail", bnd.expectation_from_tail(2.0, 8.0),
                  math.sqrt((math.log(2.0) + 2.0) / 8.0), 1e-12))
    cases.append(("regnet-certificate", certificate_regnet(1.0, 1.0, 100, 0.1).lam, 0.4, 1e-12))
    cases.append(("knn-certificate", certificate_knn_tail(101, 1, 1, 0.5).raw_value,
                  6.0 * math.exp(-100.0 * 0.125 / 216.0), 1e-12))
    tail = bnd.generic_stability_tail(100, 0.1, 0.3, 0.5, 1.0, 0.01)
    cases.append(("generic-shift", tail.threshold_shift, 0.1, 1e-15))
    cases.append(("generic-raw", tail.raw_value, 2.0 * math.exp(-1.8) + 0.01, 1e-12))
    rule = bnd.optimal_split("weak-general", 1000, 1.0)
    excess = max(0.0, rule.bound_at_p_star - 4.0 * (1.0 / 1000.0) ** (1.0 / 3.0))
    cases.append(("split-objective-dominated", excess, 0.0, 1e-12))

    data = LearningSet.from_arrays([[0.0], [1.0]], [1.0, 0.0], u=[0.3, 0.7])
    knn = fit_knn(data, 1)
    cases.append(("knn-nearest", knn.predict([0.1]), 1.0, 0.0))
    boost = fit_adaboost(LearningSet.from_arrays([[0.0], [1.0], [2.0], [3.0]],
                                                 [0.0, 0.0, 1.0, 1.0], u=[0.1, 0.2, 0.3, 0.4]),
                         stump_base_learner, 1)
    cases.append(("adaboost-one-round", boost.predict([3.0]), 1.0, 0.0))
    hyps = [ConstantPredictor(1.0), ConstantPredictor(0.0)]
    erm_data = LearningSet.from_arrays([[0.0]] * 3 + [[1.0]] * 7,
                                       [1.0] * 3 + [0.0] * 7, u=np.linspace(0.1, 0.9, 10))
    cases.append(("erm-majority", fit_erm_finite(erm_data, hyps).predict([0.0]), 0.0, 0.0))
    return cases


def _cmd_selftest(args) -> int:
    failures = 0
    for name, got, want, tol in _selftest_cases():
        ok = abs(got - want) <= tol
        print(f"{'ok  ' if ok else 'FAIL'} {name}: got {got!r}, want {want!r} (tol {tol})")
        failures += 0 if ok else 1
    if failures:
        print(f"{failures} selftest case(s) failed")
        return 1
    print("selftest passed")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stabcv",
                                     description="cross-validation bounds toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_bounds = sub.add_parser("bounds", help="closed-form bound evaluators")
    bounds_sub = p_bounds.add_subparsers(dest="subcommand", required=True)
    p_eval = bounds_sub.add_parser("eval", help="evaluate one formula")
    p_eval.add_argument("--formula", required=True)
    p_eval.add_argument("--params", required=True, help="JSON object of parameters")
    p_eval.add_argument("--out", default="-")
    p_eval.set_defaults(func=_cmd_bounds_eval)

    p_scheme = sub.add_parser("scheme", help="resampling schemes")
    scheme_sub = p_scheme.add_subparsers(dest="subcommand", required=True)
    p_build = scheme_sub.add_parser("build", help="build and serialize a scheme")
    p_build.add_argument("--n", type=int, required=True)
    p_build.add_argument("--kind", required=True)
    p_build.add_argument("--params", default="{}")
    p_build.add_argument("--seed", type=int, default=0)
    p_build.add_argument("--out", default="-")
    p_build.set_defaults(func=_cmd_scheme_build)

    p_cv = sub.add_parser("cv", help="cross-validation runs")
    cv_sub = p_cv.add_subparsers(dest="subcommand", required=True)
    p_run = cv_sub.add_parser("run", help="one error-triple run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p_run.add_argument("--out", default="-")
    p_run.set_defaults(func=_cmd_cv_run)

    p_stab = sub.add_parser("stability", help="stability profiles")
    stab_sub = p_stab.add_subparsers(dest="subcommand", required=True)
    p_est = stab_sub.add_parser("estimate", help="estimate a stability profile")
    p_est.add_argument("--config", required=True)
    p_est.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p_est.add_argument("--out", default="-")
    p_est.set_defaults(func=_cmd_stability_estimate)

    p_exp = sub.add_parser("experiment", help="Monte Carlo certification runs")
    p_exp.add_argument("mode", choices=["concentration", "split", "audit"])
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p_exp.add_argument("--out", default="-")
    p_exp.add_argument("--csv", default=None)
    p_exp.add_argument("--workers", type=int, default=1)
    p_exp.set_defaults(func=_cmd_experiment)

    p_self = sub.add_parser("selftest", help="run the embedded example table")
    p_self.set_defaults(func=_cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
