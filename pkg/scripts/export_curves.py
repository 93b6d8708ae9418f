"""Write endpoint curves h and h o E of every bundled fixture to CSV files for plotting."""
import argparse
import sys
from pathlib import Path

from ivinvex.cli import main as cli_main
from ivinvex.problem import fixture_names


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="curves")
    ap.add_argument("--grid", type=int, default=401)
    ap.add_argument("fixtures", nargs="*", help="fixture names (default: all)")
    args = ap.parse_args(argv)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    status = 0
    for name in args.fixtures or fixture_names():
        target = out / f"{name}.csv"
        code = cli_main(["sample-csv", name, "--grid", str(args.grid), "--out", str(target)])
        print(f"{name}: {'wrote ' + str(target) if code == 0 else 'failed'}")
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
