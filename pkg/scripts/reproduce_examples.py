"""Check every built-in scenario against its annotated expectations.

    python3 scripts/reproduce_examples.py [--out results.json]
"""

import argparse
import sys

from evmkt.runner import verify_expectations
from evmkt.scenarios import paper_examples, save_report


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out")
    args = parser.parse_args()
    rows, failed = [], 0
    for scenario in paper_examples():
        for label, ok, detail in verify_expectations(scenario):
            rows.append({"check": label, "ok": ok, "detail": detail})
            failed += not ok
            print(f"{'PASS' if ok else 'FAIL'}  {label:<48} {detail}")
    print(f"\n{len(rows) - failed}/{len(rows)} checks pass")
    if args.out:
        save_report({"results": rows}, args.out)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
