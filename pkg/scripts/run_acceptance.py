"""Run the acceptance checks and print one line per criterion.

    python scripts/run_acceptance.py                 # everything, full scale
    python scripts/run_acceptance.py --only 4 7 --scale 0.1
"""

import argparse
import json

from rcinar import verify as V

p = argparse.ArgumentParser()
p.add_argument("--only", type=int, nargs="*")
p.add_argument("--scale", type=float, default=1.0)
p.add_argument("--seed", type=int, default=V.VERIFY_SEED)
p.add_argument("--workers", type=int, default=1)
p.add_argument("--json", help="write all details here")
args = p.parse_args()

results = V.run_all(args.seed, args.scale, args.workers, args.only,
                    echo=lambda s: print(s, flush=True))
print(f"{sum(r.passed for r in results)}/{len(results)} passed")
if args.json:
    with open(args.json, "w") as fh:
        json.dump([r.to_dict() | {"seconds": r.seconds} for r in results], fh, indent=2, default=str)
