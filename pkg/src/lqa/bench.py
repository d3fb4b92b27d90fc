"""Experiment runner and CLI.

One training run wires a model, a dataset, and an optimizer into the epoch /
batch-step loop, recording one metric row per batch step. The epoch_loss
column carries the running mean of the epoch's batch losses, so the last row
of each epoch is that epoch's summary. Runs are deterministic for a fixed
config and seed; wall time is the one column measured from a real clock, and
can be pinned with a fixed clock for byte-identical output.

Cost accounting: every gradient pass counts one forward and one backward;
every optimizer probe counts one extra forward. The per-step rate estimator
therefore shows exactly forward_count == 3 * backward_count, baselines show
equality.
"""

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import data as data_mod
from . import nn, optim, oracle
from .tensor import NonFiniteError, Rng, derive_seed, dot, matmul, rng_uniform

__all__ = [
    "TrainConfig",
    "MetricRecord",
    "TrainingDiverged",
    "run_training",
    "emit_csv",
    "read_metrics",
    "epoch_summaries",
    "emit_plot",
    "cli_main",
]

MODELS = ("logreg", "mlp", "lenet5")
DATASETS = ("mnist", "cifar10", "synthetic-quadratic")
OPTIMIZERS = ("sgd", "sgd-m", "sgd-nag", "adagrad", "rmsprop", "adam", "lqa")

CSV_HEADER = (
    "epoch,batch_step,train_loss,epoch_loss,lr_used,"
    "lqa_verdict,forward_count,backward_count,wall_time_s"
)


class TrainingDiverged(RuntimeError):
    """Raised when a run hits a non-finite loss; metrics so far were flushed."""


@dataclass
class TrainConfig:
    model: str = "logreg"
    dataset: str = "mnist"
    optimizer: str = "lqa"
    lr: float | None = None
    batch_size: int = 64
    epochs: int = 1
    seed: int = 0
    init: str = "default"
    delta0: float = 0.01
    delta_min: float = 1e-6
    delta_max: float = 10.0
    b_min: float = 1e-12
    quad_dim: int = 10
    data_dir: str | None = None
    out: str | None = None

    def validate(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.dataset != "synthetic-quadratic" and self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if self.init not in ("default", "zeros"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.optimizer != "lqa" and (self.lr is None or not self.lr > 0.0):
            raise ValueError(f"optimizer {self.optimizer!r} requires a positive --lr")
        if self.dataset == "synthetic-quadratic" and self.quad_dim < 1:
            raise ValueError("quad-dim must be at least 1")
        # surfaces bad probe-rate bounds early
        optim.LqaState(self.delta0, self.delta_min, self.delta_max, self.b_min)


@dataclass
class MetricRecord:
    epoch: int
    batch_step: int
    train_loss: float
    epoch_loss: float
    lr_used: float
    lqa_verdict: str
    forward_count: int
    backward_count: int
    wall_time_s: float


@dataclass
class _Counters:
    forward: int = 0
    backward: int = 0


def _resolve_data_dir(config):
    return config.data_dir or data_mod.default_data_dir()


def _load_train_split(config):
    base = _resolve_data_dir(config)
    if config.dataset == "mnist":
        train, _ = data_mod.load_mnist(os.path.join(base, "mnist"))
        flat_dim, image_shape = 784, (1, 28, 28)
    else:
        train, _ = data_mod.load_cifar10(base)
        flat_dim, image_shape = 3072, (3, 32, 32)
    return train, flat_dim, image_shape


def _build_model(config, flat_dim, image_shape):
    if config.model == "logreg":
        return nn.build_logreg(flat_dim, 10)
    if config.model == "mlp":
        return nn.build_mlp(flat_dim, 1000, 10)
    return nn.build_lenet5(image_shape, 10)


def run_training(config, clock=time.perf_counter, log=None):
    """Execute one run and return its per-batch-step metric records.

    Writes the CSV to config.out (when set) on success and also on a
    non-finite abort, so the last good metrics always reach disk.
    """
    config.validate()
    quadratic = config.dataset == "synthetic-quadratic"
    rng = Rng(derive_seed(config.seed, 1))

    if quadratic:
        objective = data_mod.synthetic_quadratic(config.quad_dim, derive_seed(config.seed, 0))
        if config.init == "zeros":
            params = np.zeros(config.quad_dim, dtype=np.float64)
        else:
            params = rng_uniform(rng, (config.quad_dim,), -1.0, 1.0)
        batches_per_epoch = 1  # full-batch objective: one step per epoch
    else:
        train, flat_dim, image_shape = _load_train_split(config)
        model = _build_model(config, flat_dim, image_shape)
        nn.init_params(model, rng, config.init)
        params = nn.flatten_params(model)

    counters = _Counters()
    lqa_state = None
    stepper = None
    if config.optimizer == "lqa":
        lqa_state = optim.LqaState(config.delta0, config.delta_min, config.delta_max, config.b_min)
    else:
        stepper = optim.make_baseline(config.optimizer, config.lr, params.size)

    records = []
    t0 = clock()
    step = 0
    try:
        for epoch in range(1, config.epochs + 1):
            if quadratic:
                batches = [None] * batches_per_epoch
            else:
                batches = data_mod.epoch_batches(train, config.batch_size, rng)
            loss_sum = 0.0
            for k, batch in enumerate(batches, start=1):
                if quadratic:
                    loss, grad = oracle.quad_loss_grad(objective, params)
                    ray = oracle.ray_probe(objective, params, grad)

                    def probe(s, _ray=ray):
                        if s != 0.0:
                            counters.forward += 1
                        return _ray(s)

                else:
                    loss, grad = nn.backward(model, batch, params)
                    probe = nn.make_loss_probe(
                        model, batch, params, grad, loss,
                        on_eval=lambda: setattr(counters, "forward", counters.forward + 1),
                    )
                counters.forward += 1
                counters.backward += 1
                if not math.isfinite(loss):
                    raise NonFiniteError(f"non-finite loss at epoch {epoch} step {k}")
                loss_sum += loss
                if lqa_state is not None:
                    params, lqa_state = optim.lqa_step(params, grad, probe, lqa_state)
                    lr_used = lqa_state.delta0
                    verdict = lqa_state.last_verdict.value
                else:
                    params = stepper.step(params, grad)
                    lr_used = config.lr
                    verdict = ""
                step += 1
                records.append(
                    MetricRecord(
                        epoch=epoch,
                        batch_step=step,
                        train_loss=loss,
                        epoch_loss=loss_sum / k,
                        lr_used=lr_used,
                        lqa_verdict=verdict,
                        forward_count=counters.forward,
                        backward_count=counters.backward,
                        wall_time_s=clock() - t0,
                    )
                )
            if log is not None:
                log(
                    f"epoch {epoch}/{config.epochs}  "
                    f"loss {loss_sum / len(batches):.6f}  lr {records[-1].lr_used:.6g}"
                )
    except NonFiniteError as exc:
        if config.out:
            emit_csv(records, config.out)
        raise TrainingDiverged(str(exc)) from exc
    if config.out:
        emit_csv(records, config.out)
    return records


# ---------------------------------------------------------------------------
# Metric files
# ---------------------------------------------------------------------------


def _fmt(x):
    return format(float(x), ".17g")


def emit_csv(records, path):
    """Write records under the fixed 9-column header; floats keep 17 significant digits."""
    with open(path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        for r in records:
            f.write(
                f"{r.epoch},{r.batch_step},{_fmt(r.train_loss)},{_fmt(r.epoch_loss)},"
                f"{_fmt(r.lr_used)},{r.lqa_verdict},{r.forward_count},"
                f"{r.backward_count},{_fmt(r.wall_time_s)}\n"
            )


def read_metrics(path):
    """Parse a metrics CSV back into records; raises ValueError on schema drift."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path} is empty") from None
        if header != CSV_HEADER.split(","):
            raise ValueError(f"{path} does not match the metrics schema")
        records = []
        for row in reader:
            if len(row) != 9:
                raise ValueError(f"{path}: expected 9 columns, got {len(row)}")
            records.append(
                MetricRecord(
                    epoch=int(row[0]),
                    batch_step=int(row[1]),
                    train_loss=float(row[2]),
                    epoch_loss=float(row[3]),
                    lr_used=float(row[4]),
                    lqa_verdict=row[5],
                    forward_count=int(row[6]),
                    backward_count=int(row[7]),
                    wall_time_s=float(row[8]),
                )
            )
    return records


def epoch_summaries(records):
    """(epoch, epoch_loss) from the last record of each epoch."""
    out = []
    for r in records:
        if out and out[-1][0] == r.epoch:
            out[-1] = (r.epoch, r.epoch_loss)
        else:
            out.append((r.epoch, r.epoch_loss))
    return out


# ---------------------------------------------------------------------------
# Plotting (self-contained SVG)
# ---------------------------------------------------------------------------

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
    "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
)


def emit_plot(csv_paths, path, width=860, height=560):
    """Line chart of epoch loss vs iteration, one polyline per metrics file."""
    if not csv_paths:
        raise ValueError("need at least one metrics file")
    series = []
    for p in csv_paths:
        pts = epoch_summaries(read_metrics(p))
        if not pts:
            raise ValueError(f"{p} has no records to plot")
        stem = os.path.splitext(os.path.basename(p))[0]
        series.append((stem, pts))

    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    if y_lo == y_hi:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    margin_l, margin_r, margin_t, margin_b = 70, 24, 24, 56
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b

    def sx(x):
        return margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return margin_t + (y_hi - y) / (y_hi - y_lo) * plot_h

    def ticks(lo, hi, n=5):
        step = (hi - lo) / n
        return [lo + i * step for i in range(n + 1)]

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin_l}" y1="{margin_t + plot_h}" x2="{margin_l + plot_w}" '
        f'y2="{margin_t + plot_h}" stroke="black"/>',
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" '
        f'y2="{margin_t + plot_h}" stroke="black"/>',
    ]
    for t in ticks(x_lo, x_hi):
        x = sx(t)
        parts.append(
            f'<line x1="{x:.1f}" y1="{margin_t + plot_h}" x2="{x:.1f}" '
            f'y2="{margin_t + plot_h + 5}" stroke="black"/>'
            f'<text x="{x:.1f}" y="{margin_t + plot_h + 20}" font-size="12" '
            f'text-anchor="middle">{t:.4g}</text>'
        )
    for t in ticks(y_lo, y_hi):
        y = sy(t)
        parts.append(
            f'<line x1="{margin_l - 5}" y1="{y:.1f}" x2="{margin_l}" y2="{y:.1f}" '
            f'stroke="black"/>'
            f'<text x="{margin_l - 8}" y="{y + 4:.1f}" font-size="12" '
            f'text-anchor="end">{t:.4g}</text>'
        )
    parts.append(
        f'<text x="{margin_l + plot_w / 2}" y="{height - 14}" font-size="14" '
        f'text-anchor="middle">iteration</text>'
    )
    parts.append(
        f'<text x="18" y="{margin_t + plot_h / 2}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 18 {margin_t + plot_h / 2})">training loss</text>'
    )
    for i, (stem, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        ly = margin_t + 16 + 18 * i
        lx = margin_l + plot_w - 150
        parts.append(
            f'<rect x="{lx}" y="{ly - 10}" width="14" height="4" fill="{color}"/>'
            f'<text x="{lx + 20}" y="{ly - 4}" font-size="12">{stem}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts))


# ---------------------------------------------------------------------------
# Verification suite (also backs the acceptance tests)
# ---------------------------------------------------------------------------


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise |a - n| / max(|a|, |n|, floor), reduced to the max."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    b = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max())


def check_quadratic_exactness(instances=50, dims=(1, 2, 10, 100),
                              deltas=(1e-4, 1e-2, 1.0), seed=2024):
    """Max relative gap between the probe-solved rate and the closed form.

    Each instance recenters the linear offset so the loss at the probe point
    is zero; the estimator is exactly invariant to constant loss shifts, and
    without the recentering the second difference at delta0 = 1e-4 would lose
    eight significant digits to cancellation before the estimator ever saw it.
    """
    worst = 0.0
    for i in range(instances):
        dim = dims[i % len(dims)]
        q = data_mod.synthetic_quadratic(dim, derive_seed(seed, i))
        rng = Rng(derive_seed(seed, 1000 + i))
        theta = rng_uniform(rng, (dim,), -1.0, 1.0)
        if float(theta @ theta) < 1e-3:
            theta = theta + 1.0
        shift = (float(q.c @ theta) - 0.5 * float(theta @ (q.A @ theta))) / float(theta @ theta)
        q = oracle.QuadraticObjective(q.A, q.c - shift * theta)
        _, grad = oracle.quad_loss_grad(q, theta)
        expected = oracle.quad_optimal_step(q, theta, grad)
        for d0 in deltas:
            state = optim.LqaState(delta0=d0, delta_min=1e-9, delta_max=1e9)
            probe = oracle.ray_probe(q, theta, grad)
            _, new_state = optim.lqa_step(theta, grad, probe, state)
            worst = max(worst, abs(new_state.delta0 - expected) / abs(expected))
    return worst


def _attach_standalone(layer, rng):
    params = []
    grads = []
    for shape in layer.param_shapes:
        params.append(np.zeros(shape, dtype=np.float64))
        grads.append(np.zeros(shape, dtype=np.float64))
    layer.attach(params, grads)
    fans = layer.fans()
    if fans is not None:
        r = np.sqrt(6.0 / sum(fans))
        layer.params[0][:] = rng_uniform(rng, layer.params[0].shape, -r, r)
        if len(layer.params) > 1:
            layer.params[1][:] = rng_uniform(rng, layer.params[1].shape, -0.1, 0.1)


def _layer_fd_errors(layer, x, rng, h):
    """FD-vs-analytic max relative error for one layer (params and input)."""
    readout = rng_uniform(rng, np.asarray(layer.forward(x)).shape, -1.0, 1.0)

    def loss_at(x_eval):
        return float(np.sum(readout * layer.forward(x_eval)))

    layer.forward(x)
    dx = layer.backward(readout.copy())
    errs = [relative_error(dx, oracle.finite_diff_grad(
        lambda v: loss_at(v.reshape(x.shape)), x.ravel(), h).reshape(x.shape))]

    if layer.param_shapes:
        layer.forward(x)
        layer.backward(readout.copy())
        analytic = np.concatenate([g.ravel() for g in layer.grads])

        def loss_at_params(vec):
            off = 0
            for p in layer.params:
                p[:] = vec[off : off + p.size].reshape(p.shape)
                off += p.size
            return loss_at(x)

        p0 = np.concatenate([p.ravel() for p in layer.params])
        fd = oracle.finite_diff_grad(loss_at_params, p0, h)
        loss_at_params(p0)  # restore
        errs.append(relative_error(analytic, fd))
    return max(errs)


def _toy_batch(rng, n, input_shape, classes):
    x = rng_uniform(rng, (n, *input_shape), -1.0, 1.0)
    y = np.minimum((rng.uniform(n) * classes).astype(np.int64), classes - 1)
    return data_mod.Batch(np.arange(n), x, y)


def check_gradient_correctness(h=1e-5, seed=11):
    """FD checks for every layer type, the loss head, and every model builder.

    Returns {check name: max relative error}.
    """
    rng = Rng(seed)
    results = {}

    cases = [
        ("dense", nn.Dense(7, 5), (4, 7)),
        ("relu", nn.Relu(), (4, 6)),
        ("conv", nn.Conv2d(2, 3, 3), (2, 2, 6, 6)),
        ("pool", nn.MaxPool2(), (2, 2, 6, 6)),
        ("pad", nn.SpatialZeroPad(2), (2, 1, 4, 4)),
        ("flatten", nn.Flatten(), (3, 2, 4, 4)),
    ]
    for name, layer, x_shape in cases:
        _attach_standalone(layer, rng)
        x = rng_uniform(rng, x_shape, -1.0, 1.0)
        results[name] = _layer_fd_errors(layer, x, rng, h)

    # loss head: analytic dlogits vs FD through the scalar loss
    logits = rng_uniform(rng, (5, 4), -2.0, 2.0)
    labels = np.array([0, 3, 1, 2, 2])
    _, dlogits = nn.softmax_cross_entropy(logits, labels)
    fd = oracle.finite_diff_grad(
        lambda v: nn.softmax_cross_entropy(v.reshape(5, 4), labels)[0], logits.ravel(), h
    )
    results["loss_head"] = relative_error(dlogits, fd.reshape(5, 4))

    builders = [
        ("logreg", nn.build_logreg(12, 4), (12,), 4),
        ("mlp", nn.build_mlp(12, 8, 3), (12,), 3),
        ("lenet5", nn.build_lenet5((1, 16, 16), 3, conv_channels=(2, 3), fc_dims=(6, 5)), (1, 16, 16), 3),
    ]
    for name, model, in_shape, classes in builders:
        nn.init_params(model, rng)
        batch = _toy_batch(rng, 6, in_shape, classes)
        params = nn.flatten_params(model)
        _, analytic = nn.backward(model, batch, params)
        fd = oracle.finite_diff_grad(lambda p: nn.forward_loss(model, batch, p), params, h)
        results[f"model_{name}"] = relative_error(analytic, fd)
    return results


def check_coefficient_identity(delta0=0.01, seed=5):
    """(relative error of the linear coefficient vs dot(g, g) at delta0,
    error-shrink factor when delta0 is halved) on a logistic-regression batch.
    """
    rng = Rng(seed)
    model = nn.build_logreg(10, 4)
    nn.init_params(model, rng)
    batch = _toy_batch(rng, 32, (10,), 4)
    params = nn.flatten_params(model)
    loss0, grad = nn.backward(model, batch, params)
    gg = dot(grad, grad)

    def rel_err(d0):
        probe = nn.make_loss_probe(model, batch, params, grad, loss0)
        coeffs = optim.lqa_estimate_coefficients(loss0, probe, d0)
        return abs(coeffs.a_tilde - gg) / gg

    e1 = rel_err(delta0)
    e2 = rel_err(delta0 / 2.0)
    return e1, (e1 / e2 if e2 > 0.0 else math.inf)


def run_verification(stream=sys.stdout):
    """The `verify` subcommand: oracle-backed self-checks, PASS/FAIL per line."""
    failures = 0

    def report(name, ok, detail):
        nonlocal failures
        line = f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})"
        print(line, file=stream)
        failures += 0 if ok else 1

    rng = Rng(123)
    a = rng_uniform(rng, (5, 7), -1.0, 1.0)
    b = rng_uniform(rng, (7, 3), -1.0, 1.0)
    ref = np.zeros((5, 3))
    for i in range(5):
        for j in range(3):
            for k in range(7):
                ref[i, j] += a[i, k] * b[k, j]
    err = relative_error(matmul(a, b), ref)
    report("tensor.matmul vs triple loop", err < 1e-12, f"rel err {err:.2e}")

    worst = check_quadratic_exactness()
    report("rate solver exact on quadratics", worst < 1e-9, f"max rel err {worst:.2e}")

    grads = check_gradient_correctness()
    worst_name, worst_err = max(grads.items(), key=lambda kv: kv[1])
    report(
        "gradients vs central differences",
        worst_err < 1e-4,
        f"worst {worst_name} rel err {worst_err:.2e}",
    )

    e1, ratio = check_coefficient_identity()
    report(
        "linear coefficient matches dot(g, g)",
        e1 < 1e-3 and 3.0 <= ratio <= 5.0,
        f"rel err {e1:.2e}, halving ratio {ratio:.2f}",
    )
    return failures


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="lqa",
        description="Train small classifiers with a per-step estimated learning rate "
        "and benchmark it against standard optimizers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fetch = sub.add_parser("fetch", help="download and verify a dataset")
    p_fetch.add_argument("--dataset", choices=("mnist", "cifar10"), required=True)
    p_fetch.add_argument("--data-dir", default=None)
    p_fetch.add_argument("--base-url", default=None, help="override the download location")

    p_train = sub.add_parser("train", help="run one training configuration")
    p_train.add_argument("--model", choices=MODELS, default="logreg")
    p_train.add_argument("--dataset", choices=DATASETS, default="mnist")
    p_train.add_argument("--optimizer", choices=OPTIMIZERS, required=True)
    p_train.add_argument("--lr", type=float, default=None,
                         help="learning rate (required for every optimizer except lqa)")
    p_train.add_argument("--batch-size", type=int, default=64)
    p_train.add_argument("--epochs", type=int, required=True)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--init", choices=("default", "zeros"), default="default")
    p_train.add_argument("--delta0", type=float, default=0.01, help="initial probe rate")
    p_train.add_argument("--delta-min", type=float, default=1e-6)
    p_train.add_argument("--delta-max", type=float, default=10.0)
    p_train.add_argument("--b-min", type=float, default=1e-12, help="curvature floor")
    p_train.add_argument("--quad-dim", type=int, default=10)
    p_train.add_argument("--data-dir", default=None)
    p_train.add_argument("--out", required=True, help="metrics CSV path")
    p_train.add_argument("--fixed-clock", action="store_true",
                         help="record wall_time_s as 0.0 for byte-identical reruns")
    p_train.add_argument("--quiet", action="store_true")

    p_plot = sub.add_parser("plot", help="render metrics CSVs as an SVG chart")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("csvs", nargs="+")

    sub.add_parser("verify", help="run the oracle-backed self checks")
    return parser


def cli_main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "fetch":
            base = args.data_dir or data_mod.default_data_dir()
            if args.dataset == "mnist":
                kwargs = {"base_url": args.base_url} if args.base_url else {}
                path = data_mod.fetch_mnist(os.path.join(base, "mnist"), **kwargs)
            else:
                kwargs = {"url": args.base_url} if args.base_url else {}
                path = data_mod.fetch_cifar10(base, **kwargs)
            print(f"dataset ready under {path}")
            return 0

        if args.command == "train":
            config = TrainConfig(
                model=args.model,
                dataset=args.dataset,
                optimizer=args.optimizer,
                lr=args.lr,
                batch_size=args.batch_size,
                epochs=args.epochs,
                seed=args.seed,
                init=args.init,
                delta0=args.delta0,
                delta_min=args.delta_min,
                delta_max=args.delta_max,
                b_min=args.b_min,
                quad_dim=args.quad_dim,
                data_dir=args.data_dir,
                out=args.out,
            )
            clock = (lambda: 0.0) if args.fixed_clock else time.perf_counter
            log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
            run_training(config, clock=clock, log=log)
            print(f"wrote {args.out}")
            return 0

        if args.command == "plot":
            emit_plot(args.csvs, args.out)
            print(f"wrote {args.out}")
            return 0

        return 1 if run_verification() else 0
    except (ValueError, FileNotFoundError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(cli_main())
