"""Audit pass rates against a server that lost part of one group.

Example:
    python3 scripts/detection_trials.py --n 64 --group C --fraction 0.5 --c 2 4 8
"""
import argparse
import random

from hhpor.auditor import audit
from hhpor.client import PORClient
from hhpor.params import setup_profile
from hhpor.server import PORServer
from hhpor.transport import Channel, LoopbackTransport


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--writes", type=int, default=0, help="writes before the attack (fills H levels)")
    ap.add_argument("--group", default="C", help="C, all, or an occupied level number")
    ap.add_argument("--fraction", type=float, default=0.5)
    ap.add_argument("--c", type=int, nargs="+", default=[2, 4, 8])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    params, secret = setup_profile("toy", args.n, rng)
    server = PORServer(params, random.Random(args.seed + 1))
    channel = Channel(params, LoopbackTransport(server))
    client = PORClient.init(params, secret, [rng.randbytes(params.payload_capacity) for _ in range(args.n // 2)], channel)
    for i in range(args.writes):
        client.modify(i % client.state.size, rng.randbytes(8))

    print(f"n={args.n} W={client.state.W} group={args.group} fraction={args.fraction}")
    print(f"{'c':>3} {'pass':>7} {'detect':>7}")
    for c in args.c:
        passed = 0
        for _ in range(args.trials):
            server.set_mode(f"delete:{args.group}:{args.fraction}")
            passed += audit(params, channel, c, rng).ok
        print(f"{c:>3} {passed / args.trials:>7.4f} {1 - passed / args.trials:>7.4f}")


if __name__ == "__main__":
    main()
