"""Command line: rf2image train | infer."""

import argparse
import sys


def main(argv=None):
    p = argparse.ArgumentParser(prog="rf2image", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train the reading-to-photo translator")
    tr.add_argument("--data", required=True, help="dataset directory")
    tr.add_argument("--epochs", type=int, required=True)
    tr.add_argument("--seed", type=int, required=True)
    tr.add_argument("--out", default="run", help="output directory for checkpoint + losses")
    tr.add_argument("--batch-size", type=int, default=16)
    tr.add_argument("--log-every", type=int, default=10)

    inf = sub.add_parser("infer", help="write reconstructions for a dataset split")
    inf.add_argument("--ckpt", required=True)
    inf.add_argument("--data", required=True)
    inf.add_argument("--out", required=True)
    inf.add_argument("--split", default="test", choices=["train", "test", "all"])

    args = p.parse_args(argv)
    if args.command == "train":
        from .train import train

        ckpt, _ = train(
            args.data, args.epochs, args.seed, args.out,
            batch_size=args.batch_size, log_every=args.log_every,
        )
        print(f"checkpoint written to {ckpt}")
        return 0
    if args.command == "infer":
        from .infer import infer

        written = infer(args.ckpt, args.data, args.out, split=args.split)
        print(f"wrote {len(written)} images to {args.out}")
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
