"""Command line entry point: ``alsr {train,eval,variance-lab,ablate,report}``.

Flag precedence: an explicit ``--seed`` overrides the config file's ``seed``.
Every command writes only under its ``--out`` directory and finishes with a
``manifest.json`` of SHA-256 hashes. Exit status is 0 on full success, 1 on
any failed run or verification, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from .errors import AlsrError
from .evaluation import Evaluator, dump_json, METRIC_NOTE
from .manifest import write_manifest

log = logging.getLogger("alsr")


@dataclasses.dataclass(frozen=True)
class Command:
    name: str
    out: Path
    config: Path | None = None
    checkpoint: Path | None = None
    population: Path | None = None
    runs: tuple = ()
    seed: int | None = None
    resolution: int | None = None
    jobs: int = 1


def build_parser():
    keys = config_mod.describe_keys()
    p = argparse.ArgumentParser(prog="alsr", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        return sub.add_parser(name, help=help_, description=help_,
                              epilog="config keys (TOML) and defaults:\n" + keys,
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    t = cmd("train", "train one model and write curve.csv, heatmap.csv, metrics.json, checkpoint")
    t.add_argument("--config", required=True, type=Path)
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--seed", type=int, help="overrides the config file seed")

    e = cmd("eval", "score a checkpoint against held-out data; writes metrics.json")
    e.add_argument("--checkpoint", required=True, type=Path)
    e.add_argument("--config", required=True, type=Path)
    e.add_argument("--out", required=True, type=Path)
    e.add_argument("--seed", type=int, help="overrides the config file seed")

    v = sub.add_parser("variance-lab", help="exact importance-sampling checks on discrete populations",
                       description="Population file: JSON object with lambdas, base_prob, cond_mean, cond_var "
                                   "(or {\"populations\": [...]}). Without --population the built-in corpus is used.")
    v.add_argument("--population", type=Path)
    v.add_argument("--out", required=True, type=Path)
    v.add_argument("--resolution", type=int, help="simplex lattice resolution (default depends on grid size)")

    a = cmd("ablate", "sweep [ablate] alphas x kernels x seeds; writes ablation.csv and runs/")
    a.add_argument("--config", required=True, type=Path)
    a.add_argument("--out", required=True, type=Path)
    a.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    r = sub.add_parser("report", help="merge run directories into comparison.csv, heatmaps.csv, summary.md")
    r.add_argument("--runs", required=True, nargs="+", type=Path)
    r.add_argument("--out", required=True, type=Path)
    return p


def parse_args(argv=None) -> tuple[Command, bool]:
    ns = build_parser().parse_args(argv)
    c = Command(
        name=ns.command, out=ns.out,
        config=getattr(ns, "config", None), checkpoint=getattr(ns, "checkpoint", None),
        population=getattr(ns, "population", None), runs=tuple(getattr(ns, "runs", ()) or ()),
        seed=getattr(ns, "seed", None), resolution=getattr(ns, "resolution", None),
        jobs=getattr(ns, "jobs", 1),
    )
    return c, ns.verbose


def resolve_config(c: Command) -> config_mod.RunConfig:
    cfg = config_mod.load_config(c.config)
    if c.seed is not None:
        cfg = dataclasses.replace(cfg, seed=c.seed)
    return cfg


def cmd_train(c: Command) -> int:
    from .evaluation import run_training, write_run

    rep = run_training(resolve_config(c))
    write_run(rep, c.out)
    return 0


def cmd_eval(c: Command) -> int:
    from .model import load_checkpoint

    cfg = resolve_config(c)
    model = load_checkpoint(c.checkpoint)
    c.out.mkdir(parents=True, exist_ok=True)
    ev = Evaluator(cfg)
    scores = ev.score(ev.generate(model))
    dump_json({"note": METRIC_NOTE, "checkpoint": c.checkpoint.as_posix(), "final": scores},
              c.out / "metrics.json")
    write_manifest(c.out)
    return 0


def cmd_variance_lab(c: Command) -> int:
    from .variance_lab import DiscretePopulation, builtin_corpus, lab_report

    if c.population is None:
        pops = builtin_corpus()
    else:
        doc = json.loads(c.population.read_text())
        pops = [DiscretePopulation.from_dict(d) for d in doc.get("populations", [doc])]
    reports = [lab_report(p, c.resolution) for p in pops]
    c.out.mkdir(parents=True, exist_ok=True)
    ok = all(r["verification"]["passed"] for r in reports)
    dump_json({"all_passed": ok, "reports": reports}, c.out / "variance_lab.json")
    write_manifest(c.out)
    return 0 if ok else 1


def cmd_ablate(c: Command) -> int:
    from .ablation import run_ablation

    cfg = resolve_config(c)
    ab = cfg.ablate
    table = run_ablation(cfg, ab.alphas, ab.kernels, ab.seeds, out_dir=c.out, jobs=c.jobs)
    (c.out / "resolved_config.toml").write_text(config_mod.dumps(cfg))
    write_manifest(c.out)
    return 0 if table.n_failed == 0 else 1


def cmd_report(c: Command) -> int:
    from .report import assemble_report

    _, errors = assemble_report(c.runs, c.out)
    return 0 if not errors else 1


HANDLERS = {
    "train": cmd_train, "eval": cmd_eval, "variance-lab": cmd_variance_lab,
    "ablate": cmd_ablate, "report": cmd_report,
}


def main(argv=None) -> int:
    c, verbose = parse_args(argv)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return HANDLERS[c.name](c)
    except (AlsrError, OSError) as e:
        print(f"alsr {c.name}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
