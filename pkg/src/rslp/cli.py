"""Command-line interface: ``rslp <command> ...``."""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from rslp.channel import generate_channels, random_phases, read_dataset, write_dataset
from rslp.checkpoint import load_checkpoint, save_checkpoint
from rslp.errors import RslpError
from rslp.evaluate import SweepSpec, memory_table, run_evaluation, write_csv
from rslp.geometry import SlotBatch
from rslp.ipm import solve_batch
from rslp.model import TrainConfig, UnfoldedModel, build_model, train
from rslp.quant import PRECISIONS


def _generate(args):
    channels = generate_channels(args.antennas, args.users, args.count, args.seed)
    write_dataset(args.out, channels)
    print(f"wrote {args.count} samples (M={args.antennas}, K={args.users}) to {args.out}")


def _solve(args):
    data = read_dataset(args.data)
    phases = random_phases(len(data), data.K, np.random.default_rng(args.phase_seed))
    batch = SlotBatch.from_channels(data.samples, phases, args.snr_db, np.sqrt(args.error_bound))
    sol = solve_batch(batch)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "snr_db", "power", "max_margin", "iters"])
        for s in range(len(batch)):
            writer.writerow([s, args.snr_db, sol.power[s], sol.max_margin[s], sol.iterations[s]])
    print(f"solved {int(sol.ok.sum())}/{len(batch)} slots; mean power {np.nanmean(sol.power):.6g} W")


def _train(args):
    data = read_dataset(args.data)
    cfg = TrainConfig(
        puu_iters=args.puu_iters, ppu_iters=args.ppu_iters, blocks=args.blocks, batch=args.batch,
        lr0=args.lr, mu=args.mu, delta_sq=args.delta_sq, samples=len(data), seed=args.seed,
    )
    model = build_model(data.M, data.K, args.blocks, args.precision, seed=args.seed)
    result = train(model, data, cfg)
    save_checkpoint(model, args.out, packed=False)
    trace = Path(args.trace) if args.trace else Path(args.out).with_suffix(".trace.csv")
    with trace.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "stage", "loss", "lr"])
        writer.writerows(result.trace)
    print(f"trained {len(result.trace)} iterations; model {args.out}, trace {trace}")


def _quantize(args):
    source = load_checkpoint(args.model)
    cfg = dict(source.config(), precision=args.bits)
    if args.activations != "keep":
        cfg["sign_activations"] = args.activations == "sign"
    target = UnfoldedModel.from_config(cfg)
    src = source.named_params()
    for name, p in target.named_params().items():
        if name in src:
            p.values[...] = src[name].values
    save_checkpoint(target, args.out)
    print(f"wrote {args.bits} model to {args.out}")


def _evaluate(args):
    path = Path(args.spec)
    with path.open("rb") as fh:
        data = tomllib.load(fh)
    spec = SweepSpec.from_dict(data, base=path.parent)
    results = run_evaluation(spec, args.out)
    for name, rows in results.items():
        print(f"{name}: {len(rows)} rows")
    print(f"results in {args.out}")


def _memory(args):
    models = {Path(p).stem: load_checkpoint(p) for p in args.models}
    rows = memory_table(models)
    if args.out:
        write_csv(rows, args.out)
    print(f"{'model':<24} {'fp32 values':>12} {'quantized':>10} {'MB':>10} {'ratio':>8}")
    for r in rows:
        print(f"{r.method:<24} {r.fp_params:>12} {r.binary_params:>10} {r.megabytes:>10.5f} "
              f"{r.ratio_vs_fp32:>8.2f}")
    return rows


def build_parser():
    parser = argparse.ArgumentParser(prog="rslp", description="Robust symbol-level precoding toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="write a Rayleigh channel dataset (SLPD)")
    p.add_argument("--antennas", "-M", type=int, required=True)
    p.add_argument("--users", "-K", type=int, required=True)
    p.add_argument("--count", "-N", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_generate)

    p = sub.add_parser("solve", help="interior-point baseline on every slot of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--error-bound", type=float, default=0.0, help="squared CSI error bound delta^2")
    p.add_argument("--phase-seed", type=int, default=0, help="seed of the QPSK symbol phases")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_solve)

    p = sub.add_parser("train", help="train an unfolded network on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--precision", choices=PRECISIONS, default="fp32")
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--puu-iters", type=int, default=15)
    p.add_argument("--ppu-iters", type=int, default=10)
    p.add_argument("--batch", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--mu", type=float, default=1e-4)
    p.add_argument("--delta-sq", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="loss trace CSV (default: <out>.trace.csv)")
    p.set_defaults(func=_train)

    p = sub.add_parser("quantize", help="convert a checkpoint to binary or ternary weights")
    p.add_argument("--model", required=True)
    p.add_argument("--bits", choices=("binary", "ternary"), required=True)
    p.add_argument("--activations", choices=("keep", "sign", "float"), default="keep",
                   help="PPU activations of the converted model (default: as in the source)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_quantize)

    p = sub.add_parser("evaluate", help="power sweeps, latency and memory from a TOML spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_evaluate)

    p = sub.add_parser("memory", help="inference memory of checkpoints")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--out", help="optional CSV output")
    p.set_defaults(func=_memory)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (RslpError, OSError, tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
