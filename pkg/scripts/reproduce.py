"""Run every config in scripts/configs through the CLI, writing into results/."""
import argparse
import json
import sys
from pathlib import Path

from polariton_engine import cli

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("names", nargs="*", help="config stems to run (default: all)")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    configs = sorted((HERE / "configs").glob("*.json"))
    if args.names:
        configs = [c for c in configs if c.stem in args.names]
    status = 0
    for path in configs:
        sub = json.loads(path.read_text())["subcommand"]
        argv = [sub, "--config", str(path), "--out", str(out / path.stem)]
        if args.threads:
            argv += ["--threads", str(args.threads)]
        print(f"== {path.stem} ({sub})", flush=True)
        status = max(status, cli.main(argv))
    return status


if __name__ == "__main__":
    sys.exit(main())
