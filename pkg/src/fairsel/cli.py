"""Command-line surface: gen-data, inject-bias, train, sweep, report, verify.

Experiments are driven by a TOML config so a run is fully described by
(config, seed); flags exist only for paths and a few overrides. Exit codes:
0 success, 1 verification failure, 2 usage or config error.
"""

from __future__ import annotations

import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click
import numpy as np

from . import analysis
from .data import (BiasSpec, GenSpec, generate_synthetic, inject_label_bias,
                   load_table, save_table)
from .model import ModelSpec
from .proxy import NoisyOracleProxy, build_holdout_proxy, load_file_proxy
from .selection import SelectorConfig
from .svg import line_chart
from .trainer import (MetricsLog, TrainerConfig, run_training, sweep,
                      sweep_to_csv)

_SCHEMA = {
    "data": {"num_examples", "feature_dim", "class_priors", "means",
             "variances", "group_prior", "seed"},
    "bias": {"rho", "target_groups", "theta_plus", "theta_minus", "seed"},
    "model": {"architecture", "input_dim", "num_classes", "hidden_width",
              "include_sensitive_as_feature"},
    "selector": {"kind", "alpha", "gamma", "objective_variant"},
    "trainer": {"n_b", "batch_ratio", "epochs", "max_steps", "eval_every",
                "learning_rate", "weight_decay", "resample", "seed",
                "workers", "checkpoint_every"},
    "proxy": {"kind", "path", "steps", "seed", "noise"},
    "sweep": {"alphas", "gammas", "seeds"},
    "paths": {"train", "test", "holdout", "out_dir"},
}


class RunConfig:
    """Validated TOML config; paths resolve relative to the config file."""

    def __init__(self, raw: dict, base_dir: str):
        for section, keys in raw.items():
            if section not in _SCHEMA:
                raise click.UsageError(f"unknown config section [{section}]")
            for key in keys:
                if key not in _SCHEMA[section]:
                    raise click.UsageError(
                        f"unknown config key [{section}].{key}")
        self.raw = raw
        self.base_dir = base_dir

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, "rb") as f:
                raw = tomllib.load(f)
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise click.UsageError(f"cannot read config {path}: {e}")
        return cls(raw, os.path.dirname(os.path.abspath(path)))

    def section(self, name: str, required: bool = True) -> dict:
        if name not in self.raw:
            if required:
                raise click.UsageError(f"missing required config section [{name}]")
            return {}
        return self.raw[name]

    def path(self, key: str, override: str | None = None,
             required: bool = True) -> str | None:
        if override:
            return override
        paths = self.raw.get("paths", {})
        if key not in paths:
            if required:
                raise click.UsageError(f"missing required config key [paths].{key}")
            return None
        return os.path.join(self.base_dir, paths[key])

    def gen_spec(self) -> GenSpec:
        d = self.section("data")
        try:
            return GenSpec(
                num_examples=d["num_examples"], feature_dim=d["feature_dim"],
                class_priors=tuple(d["class_priors"]),
                means=tuple(tuple(m) for m in d["means"]),
                variances=tuple(tuple(v) for v in d["variances"]),
                group_prior=tuple(d["group_prior"]),
            )
        except KeyError as e:
            raise click.UsageError(f"missing required config key [data].{e.args[0]}")

    def bias_spec(self) -> BiasSpec:
        b = self.section("bias")
        if "rho" in b:
            groups = len(self.section("data", required=False).get("group_prior", [0, 0]))
            return BiasSpec.symmetric(b["rho"], num_groups=groups,
                                      target_groups=tuple(b.get("target_groups", [1])))
        try:
            return BiasSpec(tuple(b["theta_plus"]), tuple(b["theta_minus"]))
        except KeyError as e:
            raise click.UsageError(f"missing required config key [bias].{e.args[0]}")

    def model_spec(self) -> ModelSpec:
        m = self.section("model")
        try:
            return ModelSpec(
                architecture=m["architecture"], input_dim=m["input_dim"],
                num_classes=m["num_classes"], hidden_width=m.get("hidden_width", 0),
                include_sensitive_as_feature=m.get("include_sensitive_as_feature",
                                                   False),
            )
        except KeyError as e:
            raise click.UsageError(f"missing required config key [model].{e.args[0]}")

    def selector_config(self) -> SelectorConfig:
        s = self.section("selector", required=False)
        return SelectorConfig(
            kind=s.get("kind", "fair"), alpha=s.get("alpha", 0.1),
            gamma=s.get("gamma", 0.3),
            objective_variant=s.get("objective_variant", "eq13"),
        )

    def trainer_config(self, out_dir: str | None = None) -> TrainerConfig:
        t = self.section("trainer", required=False)
        return TrainerConfig(
            model=self.model_spec(), selector=self.selector_config(),
            n_b=t.get("n_b", 32), batch_ratio=t.get("batch_ratio", 0.1),
            epochs=t.get("epochs", 10), max_steps=t.get("max_steps"),
            eval_every=t.get("eval_every", 1),
            learning_rate=t.get("learning_rate", 1e-3),
            weight_decay=t.get("weight_decay", 1e-2),
            resample=t.get("resample", True), seed=t.get("seed", 0),
            workers=t.get("workers",
                          int(os.environ.get("FAIRSEL_THREADS", "1"))),
            checkpoint_every=t.get("checkpoint_every", 0),
            checkpoint_dir=os.path.join(out_dir, "checkpoints") if out_dir else None,
        )

    def build_proxy(self, holdout_path: str | None = None):
        p = self.section("proxy", required=False)
        kind = p.get("kind", "none")
        if kind == "none":
            return None
        if kind == "file":
            if "path" not in p:
                raise click.UsageError("missing required config key [proxy].path")
            return load_file_proxy(os.path.join(self.base_dir, p["path"]))
        if kind == "noisy_oracle":
            return NoisyOracleProxy(self.gen_spec(), p.get("noise", 0.0))
        if kind == "holdout":
            path = holdout_path or self.path("holdout")
            holdout = load_table(path, split="holdout")
            return build_holdout_proxy(holdout, self.model_spec(),
                                       p.get("steps", 500), p.get("seed", 0))
        raise click.UsageError(f"unknown [proxy].kind {kind!r}")


@click.group()
def main():
    """Fair online batch selection experiments."""


@main.command("gen-data")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path())
def gen_data(config_path, out_path):
    """Generate a clean synthetic dataset CSV."""
    cfg = RunConfig.load(config_path)
    seed = cfg.section("data").get("seed", 0)
    table = generate_synthetic(cfg.gen_spec(), seed=seed)
    out = out_path or cfg.path("train")
    save_table(table, out)
    click.echo(f"wrote {len(table)} examples to {out}")


@main.command("inject-bias")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--input", "in_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def inject_bias(config_path, in_path, out_path):
    """Flip observed labels per the configured group-conditional rates."""
    cfg = RunConfig.load(config_path)
    table = load_table(in_path)
    seed = cfg.section("bias").get("seed", 0)
    biased = inject_label_bias(table, cfg.bias_spec(), seed=seed)
    save_table(biased, out_path)
    flipped = int(np.sum(biased.y != biased.z))
    click.echo(f"wrote {out_path} ({flipped} of {len(biased)} labels flipped)")


@main.command("train")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--train", "train_path", default=None, type=click.Path())
@click.option("--test", "test_path", default=None, type=click.Path())
@click.option("--out", "out_dir", default=None, type=click.Path())
def train(config_path, train_path, test_path, out_dir):
    """Run one training job; writes metrics.csv and a final checkpoint."""
    cfg = RunConfig.load(config_path)
    out = out_dir or cfg.path("out_dir")
    os.makedirs(out, exist_ok=True)
    train_table = load_table(cfg.path("train", train_path), split="train")
    test_table = load_table(cfg.path("test", test_path), split="test")
    tcfg = cfg.trainer_config(out_dir=out)
    result = run_training(tcfg, train_table, test_table, cfg.build_proxy())
    result.log.to_csv(os.path.join(out, "metrics.csv"))
    from .model import save_checkpoint
    save_checkpoint(os.path.join(out, "final.fsel"), result.model, result.params)
    final = result.log.final()
    click.echo(f"final accuracy {final.accuracy:.4f}  delta_dp {final.delta_dp:.4f}")


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--train", "train_path", default=None, type=click.Path())
@click.option("--test", "test_path", default=None, type=click.Path())
@click.option("--out", "out_dir", default=None, type=click.Path())
def sweep_cmd(config_path, train_path, test_path, out_dir):
    """Grid sweep over alpha x gamma x seeds; one summary row per cell."""
    cfg = RunConfig.load(config_path)
    grid = cfg.section("sweep")
    for key in ("alphas", "gammas", "seeds"):
        if key not in grid:
            raise click.UsageError(f"missing required config key [sweep].{key}")
    out = out_dir or cfg.path("out_dir")
    os.makedirs(out, exist_ok=True)
    train_table = load_table(cfg.path("train", train_path), split="train")
    test_table = load_table(cfg.path("test", test_path), split="test")
    rows = sweep(grid["alphas"], grid["gammas"], grid["seeds"],
                 cfg.trainer_config(), train_table, test_table, cfg.build_proxy())
    path = os.path.join(out, "sweep.csv")
    sweep_to_csv(rows, path)
    click.echo(f"wrote {len(rows)} summary rows to {path}")


@main.command("report")
@click.option("--log", "log_paths", multiple=True, required=True,
              type=click.Path(exists=False))
@click.option("--out", "out_dir", required=True, type=click.Path())
def report(log_paths, out_dir):
    """Render accuracy / fairness / selection-rate curves from metrics logs.

    Consumes only the metrics CSVs; nothing is recomputed.
    """
    os.makedirs(out_dir, exist_ok=True)
    logs = []
    for p in log_paths:
        try:
            logs.append((os.path.splitext(os.path.basename(p))[0],
                         MetricsLog.from_csv(p)))
        except (OSError, ValueError) as e:
            raise click.UsageError(f"cannot read metrics log {p}: {e}")
    charts = [
        ("accuracy", "Test accuracy", lambda r: r.accuracy),
        ("delta_dp", "Demographic parity gap", lambda r: r.delta_dp),
        ("disc_sel_rate", "Discriminated selection rate",
         lambda r: r.disc_sel_rate),
    ]
    for field_name, title, getter in charts:
        series = []
        for label, log in logs:
            xs = [float(r.epoch) for r in log.rows]
            ys = [getter(r) for r in log.rows]
            series.append((label, xs, ys))
        svg_text = line_chart(series, title=title, xlabel="epoch",
                              ylabel=field_name)
        with open(os.path.join(out_dir, f"{field_name}.svg"), "w",
                  encoding="utf-8") as f:
            f.write(svg_text)
        lines = ["label,epoch,value"]
        for label, xs, ys in series:
            lines += [f"{label},{x:g},{y!r}" for x, y in zip(xs, ys)]
        with open(os.path.join(out_dir, f"{field_name}.csv"), "w",
                  encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    click.echo(f"wrote {len(charts)} charts to {out_dir}")


@main.command("verify")
@click.option("--seed", default=0, show_default=True)
def verify(seed):
    """Run the exact numerical verifiers; exit 1 if any check fails."""
    results = analysis.run_all_checks(seed)
    failed = False
    for r in results:
        click.echo(r.line())
        failed = failed or not r.passed
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
