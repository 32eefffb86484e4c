"""Experiment definitions shared by the CLI and the acceptance suite.

Every experiment is a function ``(seed, params) -> SeedResult``. ``params``
is the experiment-specific part of a config file; missing keys fall back to
the defaults in ``DEFAULTS``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .encoding import AnchorPrior, EncodingScheme, predictive_entropy, scale_logits, softmax
from .functions import (
    CorruptionSpec,
    Dataset,
    corrupt,
    get_benchmark,
    load_csv,
    make_blobs,
    make_two_moons,
    sample_benchmark,
    split,
)
from .learners import (
    ForestConfig,
    KsvmConfig,
    MlpConfig,
    train_anchored_forest,
    train_anchored_ksvm,
    train_anchored_mlp,
    train_baseline,
)
from .mbo import MboTask, run_mbo
from .metrics import auroc, ece, mae, r2, spearman
from .smo import SmoConfig, run_smo

log = logging.getLogger(__name__)

__all__ = ["SeedResult", "EXPERIMENTS", "DEFAULTS", "run_experiment"]


@dataclass
class SeedResult:
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


EXPERIMENTS = {}

DEFAULTS = {
    "regression-calibration": {
        "dataset": {"benchmark": "griewank", "dim": 2, "n": 1000},
        "n_train": 200,
        "forest": {"n_trees": 5, "anchor_replication": 5},
        "anchors_k": 100,
        "ensemble_m": 3,
    },
    "encoding-ablation": {
        "benchmarks": ["griewank", "ackley"],
        "dim": 2,
        "n_total": 1000,
        "n_train": 200,
        "schemes": ["identity", "single", "double"],
        "forest": {"n_trees": 5, "anchor_replication": 5},
        "anchors_k": 100,
    },
    "smo": {"objective": "sinusoid", "n_iterations": 50},
    "mbo": {
        "task": {},
        "anchors_k": 16,
        "restarts": 50,
        "iters": 1000,
        "step": 0.01,
        "forward": {"hidden_layers": [128, 128], "epochs": 100, "learning_rate": 1e-4},
        "inverse": {"hidden_layers": [128, 128], "epochs": 100, "activation": "leaky_relu",
                    "learning_rate": 1e-4},
    },
    "ood": {
        "n_train": 500,
        "noise": 0.1,
        "n_test": 500,
        "n_ood": 500,
        "inflate": 1.5,
        "anchors_k": 10,
        "mlp": {"hidden_layers": [128, 128, 128], "epochs": 200, "batch_size": 32},
        "t_min": 0.05,
    },
    "calibration-shift": {
        "n_train": 500,
        "noise": 0.1,
        "n_test": 1000,
        "kind": "gaussian",
        "intensities": [1, 2, 3, 4, 5],
        "anchors_k": 10,
        "bins": 15,
        "mlp": {"hidden_layers": [128, 128, 128], "epochs": 200, "batch_size": 32},
        "t_min": 0.05,
    },
    "anchor-ablation": {
        "n_train": 500,
        "noise": 0.1,
        "n_test": 1000,
        "kind": "gaussian",
        "intensity": 5,
        "k_values": [2, 5, 10, 25, 50],
        "mlp": {"hidden_layers": [128, 128, 128], "epochs": 200, "batch_size": 32},
    },
    "ksvm-demo": {
        "centers": [[-2.0, -1.5], [2.0, -1.5], [0.0, 2.0]],
        "n": 150,
        "sd": 0.5,
        "grid": 60,
        "bounds": [[-5.0, -5.0], [5.0, 5.0]],
        "anchors_k": 5,
        "ksvm": {"gamma": 0.5, "C": 1.0, "anchor_replication": 5},
    },
}


def experiment(name):
    def register(fn):
        EXPERIMENTS[name] = fn
        return fn
    return register


# alternatives rather than overrides: a user value replaces the default whole
_REPLACE = {"dataset"}


def _merge(defaults, params):
    out = dict(defaults)
    for k, v in (params or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in _REPLACE:
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_params(name, params):
    return _merge(DEFAULTS[name], params)


def run_experiment(name, seed, params=None) -> SeedResult:
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}")
    return EXPERIMENTS[name](int(seed), resolve_params(name, params))


# -- regression ----------------------------------------------------------------

def _load_dataset(source, seed):
    if "path" in source:
        return load_csv(source["path"], source.get("target", -1))
    fn = get_benchmark(source["benchmark"], source.get("dim"))
    return sample_benchmark(fn, source.get("n", 1000), seed)


def _forest_uq(train, test, fcfg, scheme, k, seed):
    model = train_anchored_forest(train, fcfg, scheme)
    mean, var, _ = model.predict(test.inputs, model.anchors(k, seed=seed))
    mu = mean[:, 0]
    truth = test.targets[:, 0]
    err = np.abs(mu - truth)
    unc = var.sum(axis=1)
    return {
        "r2": r2(mu, truth),
        "mae": mae(mu, truth),
        "spearman": _safe_spearman(unc, err),
    }


def _safe_spearman(a, b):
    try:
        return spearman(a, b)
    except ValueError:
        return float("nan")


@experiment("regression-calibration")
def regression_calibration(seed, p) -> SeedResult:
    """Anchored forest vs. a seed ensemble of plain forests on one table."""
    ds = _load_dataset(p["dataset"], seed)
    train, test = split(ds, p["n_train"], seed)
    fcfg = ForestConfig(**{**p["forest"], "seed": seed})
    res = SeedResult()
    delta = _forest_uq(train, test, fcfg, "single", p["anchors_k"], seed)
    res.metrics.update({f"delta/{k}": v for k, v in delta.items()})
    ens = train_baseline(train, fcfg, "ensemble", m=p["ensemble_m"])
    mean, var, _ = ens.predict(test.inputs)
    truth = test.targets[:, 0]
    err = np.abs(mean[:, 0] - truth)
    res.metrics["ensemble/r2"] = r2(mean[:, 0], truth)
    res.metrics["ensemble/mae"] = mae(mean[:, 0], truth)
    res.metrics["ensemble/spearman"] = _safe_spearman(var.sum(axis=1), err)
    return res


@experiment("encoding-ablation")
def encoding_ablation(seed, p) -> SeedResult:
    """R^2 and uncertainty/error rank correlation for each encoding."""
    res = SeedResult()
    rows = []
    for name in p["benchmarks"]:
        fn = get_benchmark(name, p["dim"])
        ds = sample_benchmark(fn, p["n_total"], seed)
        train, test = split(ds, p["n_train"], seed)
        fcfg = ForestConfig(**{**p["forest"], "seed": seed})
        for scheme in p["schemes"]:
            scheme = EncodingScheme.parse(scheme).value
            m = _forest_uq(train, test, fcfg, scheme, p["anchors_k"], seed)
            for k, v in m.items():
                res.metrics[f"{fn.name}/{scheme}/{k}"] = v
            rows.append({"function": fn.name, "scheme": scheme, **m})
    res.tables["encoding_ablation"] = rows
    return res


# -- SMO / MBO -----------------------------------------------------------------

@experiment("smo")
def smo(seed, p) -> SeedResult:
    cfg = SmoConfig(**{**p, "seed": seed})
    trace = run_smo(cfg)
    res = SeedResult()
    res.metrics["best"] = trace.best
    res.metrics["initial_best"] = float(np.max(trace.init_y))
    dim = trace.init_x.shape[1]
    running = np.maximum.accumulate(trace.init_y)
    res.tables["smo_initial"] = [
        {**{f"x{i}": float(x[i]) for i in range(dim)}, "y": float(y), "best": float(b)}
        for x, y, b in zip(trace.init_x, trace.init_y, running)
    ]
    res.tables["smo_trace"] = [
        {"iteration": r.iteration, **{f"x{i}": r.x[i] for i in range(dim)}, "y": r.y,
         "best": r.best, "ei": r.ei, "mu": r.mu, "sigma": r.sigma}
        for r in trace.records
    ]
    return res


@experiment("mbo")
def mbo(seed, p) -> SeedResult:
    task = MboTask(**p["task"])
    fcfg = MlpConfig(**{**p["forward"], "seed": seed})
    icfg = MlpConfig(**{**p["inverse"], "seed": seed + 1})
    result = run_mbo(task, seed, fcfg, icfg, p["anchors_k"], p["restarts"], p["iters"], p["step"])
    res = SeedResult()
    rows = []
    for e in result.entries:
        key = f"target={e.target:g}"
        for method, r in (("weighted", e.weighted), ("vanilla", e.vanilla)):
            res.metrics[f"{key}/{method}/achieved"] = r.achieved
            res.metrics[f"{key}/{method}/abs_error"] = abs(r.achieved - e.target)
            res.metrics[f"{key}/{method}/mu"] = r.mu
            res.metrics[f"{key}/{method}/b"] = r.b
            rows.append({"target": e.target, "method": method, "achieved": r.achieved,
                         "mu": r.mu, "b": r.b, "objective": r.objective})
    res.tables["mbo"] = rows
    res.extra["mbo_result"] = result.to_dict()
    return res


# -- classification ------------------------------------------------------------

def _moons_split(p, seed):
    train = make_two_moons(p["n_train"], p["noise"], seed)
    test = make_two_moons(p["n_test"], p["noise"], seed + 10_000)
    return train, test


def _mlp_cfg(p, seed):
    return MlpConfig(**{**p["mlp"], "seed": seed})


def _delta_logits(model, X, anchors):
    mean, var, _ = model.predict(X, anchors)
    return mean, var


def inflated_box_samples(X, n, factor, rng):
    """Uniform samples over the bounding box of X scaled by ``factor`` about its center."""
    lo, hi = X.min(axis=0), X.max(axis=0)
    center, half = (lo + hi) / 2, (hi - lo) / 2 * factor
    return rng.uniform(center - half, center + half, (n, X.shape[1]))


@experiment("ood")
def ood(seed, p) -> SeedResult:
    """Separate uniform box samples from two-moons test points by entropy."""
    train, test = _moons_split(p, seed)
    rng = np.random.default_rng(seed + 20_000)
    X_ood = inflated_box_samples(train.inputs, p["n_ood"], p["inflate"], rng)
    cfg = _mlp_cfg(p, seed)
    res = SeedResult()
    for scheme in ("single", "identity"):
        model = train_anchored_mlp(train, cfg, scheme)
        anchors = model.anchors(p["anchors_k"], seed=seed + 1)
        mu_in, var_in = _delta_logits(model, test.inputs, anchors)
        mu_out, var_out = _delta_logits(model, X_ood, anchors)
        h_in = predictive_entropy(softmax(scale_logits(mu_in, var_in, p["t_min"])))
        h_out = predictive_entropy(softmax(scale_logits(mu_out, var_out, p["t_min"])))
        res.metrics[f"{scheme}/auroc_scaled"] = auroc(h_in, h_out)
        hs_in = predictive_entropy(softmax(scale_logits(mu_in, var_in, p["t_min"], scalar=True)))
        hs_out = predictive_entropy(softmax(scale_logits(mu_out, var_out, p["t_min"], scalar=True)))
        res.metrics[f"{scheme}/auroc_scaled_scalar"] = auroc(hs_in, hs_out)
        res.metrics[f"{scheme}/auroc_mean"] = auroc(
            predictive_entropy(softmax(mu_in)), predictive_entropy(softmax(mu_out)))
        res.metrics[f"{scheme}/auroc_variance"] = auroc(var_in.sum(1), var_out.sum(1))
        res.metrics[f"{scheme}/accuracy"] = float(np.mean(mu_in.argmax(1) == test.targets))
    plain = train_baseline(train, cfg, "plain")
    z_in, z_out = plain.predict(test.inputs), plain.predict(X_ood)
    res.metrics["plain/auroc"] = auroc(predictive_entropy(softmax(z_in)),
                                       predictive_entropy(softmax(z_out)))
    res.metrics["plain/auroc_ts"] = auroc(predictive_entropy(softmax(0.5 * z_in)),
                                          predictive_entropy(softmax(0.5 * z_out)))
    res.metrics["plain/accuracy"] = float(np.mean(z_in.argmax(1) == test.targets))
    return res


@experiment("calibration-shift")
def calibration_shift(seed, p) -> SeedResult:
    """ECE / NLL / Brier of Delta-scaled, Delta-mean and plain models under noise."""
    train, test = _moons_split(p, seed)
    cfg = _mlp_cfg(p, seed)
    model = train_anchored_mlp(train, cfg, "single")
    anchors = model.anchors(p["anchors_k"], seed=seed + 1)
    plain = train_baseline(train, cfg, "plain")
    res = SeedResult()
    rows = []
    for intensity in [0, *p["intensities"]]:
        if intensity == 0:
            shifted = test
        else:
            spec = CorruptionSpec(p["kind"], int(intensity), seed + 30_000)
            shifted = corrupt(test, spec)
        mu, var = _delta_logits(model, shifted.inputs, anchors)
        probs = {
            "delta_scaled": softmax(scale_logits(mu, var, p["t_min"])),
            "delta_mean": softmax(mu),
            "plain": softmax(plain.predict(shifted.inputs)),
        }
        for method, pr in probs.items():
            rep = ece(pr, shifted.targets, p["bins"])
            for k in ("ece", "nll", "brier", "accuracy"):
                res.metrics[f"intensity={intensity}/{method}/{k}"] = getattr(rep, k)
            rows.append({"intensity": intensity, "method": method, "ece": rep.ece,
                         "nll": rep.nll, "brier": rep.brier, "accuracy": rep.accuracy})
            if intensity == p["intensities"][-1]:
                # empty bins carry no confidence or accuracy; leave them out
                res.tables[f"reliability_{method}"] = [
                    {"bin": i, **b} for i, b in enumerate(rep.to_dict()["per_bin"])
                    if b["weight"] > 0
                ]
    res.tables["calibration_shift"] = rows
    return res


def normalize_k_values(k_values):
    """Validate and deduplicate a K sweep, preserving order."""
    out, seen = [], set()
    for k in k_values:
        k = int(k)
        if k < 1:
            raise ValueError(f"K must be >= 1, got {k}")
        if k in seen:
            log.warning("duplicate K=%d in sweep ignored", k)
            continue
        seen.add(k)
        out.append(k)
    return out


@experiment("anchor-ablation")
def anchor_ablation(seed, p) -> SeedResult:
    """Spearman(uncertainty, error) on a shifted test set as K grows."""
    k_values = normalize_k_values(p["k_values"])
    train, test = _moons_split(p, seed)
    shifted = corrupt(test, CorruptionSpec(p["kind"], int(p["intensity"]), seed + 30_000))
    model = train_anchored_mlp(train, _mlp_cfg(p, seed), "single")
    all_anchors = model.anchors(max(k_values), seed=seed + 1)
    res = SeedResult()
    rows = []
    for k in k_values:
        mu, var = _delta_logits(model, shifted.inputs, all_anchors[:k])
        probs = softmax(mu)
        err = 1.0 - probs[np.arange(len(shifted)), shifted.targets]
        unc = var.sum(axis=1)
        try:
            rho = spearman(unc, err)
        except ValueError as exc:
            res.errors.append({"K": k, "error": str(exc)})
            continue
        res.metrics[f"K={k}/spearman"] = rho
        rows.append({"K": k, "spearman": rho})
    res.tables["anchor_ablation"] = rows
    res.extra["k_values"] = k_values
    return res


@experiment("ksvm-demo")
def ksvm_demo(seed, p) -> SeedResult:
    """Three-blob anchored kernel SVM; where does total variance peak?"""
    data = make_blobs(p["centers"], p["n"], p["sd"], seed)
    cfg = KsvmConfig(**{**p["ksvm"], "seed": seed})
    model = train_anchored_ksvm(data, cfg, "single")
    anchors = model.anchors(p["anchors_k"], seed=seed + 1)
    train_mean, _, _ = model.predict(data.inputs, anchors)
    (x0, y0), (x1, y1) = p["bounds"]
    g = p["grid"]
    gx, gy = np.meshgrid(np.linspace(x0, x1, g), np.linspace(y0, y1, g))
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    mean, var, _ = model.predict(grid, anchors)
    total = var.sum(axis=1).reshape(g, g)
    labels = mean.argmax(axis=1).reshape(g, g)
    dist = boundary_distance(labels)
    peak = np.unravel_index(np.argmax(total), total.shape)
    res = SeedResult()
    res.metrics["train_accuracy"] = float(np.mean(train_mean.argmax(1) == data.targets))
    res.metrics["peak_boundary_distance"] = float(dist[peak])
    res.metrics["max_total_variance"] = float(total.max())
    res.tables["ksvm_grid"] = [
        {"x": float(a), "y": float(b), "label": int(c), "total_variance": float(v)}
        for a, b, c, v in zip(grid[:, 0], grid[:, 1], labels.ravel(), total.ravel())
    ]
    return res


def boundary_distance(labels):
    """Chebyshev distance (in cells) from every cell to the nearest label change.

    A cell is on the boundary when a 4-neighbour carries a different label.
    """
    on = np.zeros(labels.shape, dtype=bool)
    on[:-1, :] |= labels[:-1, :] != labels[1:, :]
    on[1:, :] |= labels[1:, :] != labels[:-1, :]
    on[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    on[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    pts = np.argwhere(on)
    if pts.size == 0:
        return np.full(labels.shape, np.inf)
    idx = np.indices(labels.shape).reshape(2, -1).T
    d = np.abs(idx[:, None, :] - pts[None, :, :]).max(axis=2).min(axis=1)
    return d.reshape(labels.shape).astype(float)
