"""Run the acceptance suite outside pytest and print one line per criterion.

    python scripts/run_acceptance.py [--profile quick|full] [--workers N] [--only 1 4 8]
"""
import argparse
import sys

from bergmc import acceptance


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--profile", choices=sorted(acceptance.PROFILES), default="quick")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", type=int, nargs="*")
    args = ap.parse_args()
    ok = True
    for i, fn in enumerate(acceptance.CRITERIA, start=1):
        if args.only and i not in args.only:
            continue
        res = fn(args.profile) if i <= 3 else fn(args.profile, workers=args.workers)
        print(res.line(), flush=True)
        ok &= res.passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
