"""Run the two-particle reproduction and print the check table.

    python scripts/reproduce_two_particle.py [--max-order 8] [--write-chart charts/two_particle.json] [--json]
"""

import argparse
import json
import sys

from moyalvey import twoparticle


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-order", type=int, default=8)
    ap.add_argument("--write-chart", metavar="PATH", help="also write the chart JSON used by the CLI")
    ap.add_argument("--json", action="store_true", help="print the table as JSON")
    args = ap.parse_args(argv)

    if args.write_chart:
        print(f"wrote {twoparticle.write_chart(args.write_chart)}", file=sys.stderr)
    checks = twoparticle.run(args.max_order)
    if args.json:
        print(json.dumps(twoparticle.as_table(checks), indent=2))
    else:
        width = max(len(c.name) for c in checks)
        for c in checks:
            print(f"{c.status:<6} {c.name:<{width}}  {c.detail}")
    return 1 if any(c.status == "FAIL" for c in checks) else 0


if __name__ == "__main__":
    sys.exit(main())
