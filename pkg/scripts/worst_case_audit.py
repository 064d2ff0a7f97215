#!/usr/bin/env python3
"""Audit the closed-form recursion bounds and prox certificates at full scale.

Runs the 1000-instance worst-case suites for the two recursion lemmas and the
1000-call certificate battery, then prints the single known counterexample:
the constant pair (10/9, 1) for the additive-error recursion undershoots the
attainable worst case (the sound closed form is the squared tight sqrt-sum
bound; see ifista.analysis.recurrence_envelope_bound).
"""

import sys

from ifista.analysis import recurrence_bound, recurrence_envelope_bound, recurrence_extremal_sequence
from ifista.cli import main as cli


def main() -> int:
    code = cli(["verify", "lemmas", "--instances", "1000", "--seed", "0"])
    code = max(code, cli(["verify", "prox-certs", "--instances", "1000", "--seed", "0"]))
    alphas = recurrence_extremal_sequence(4.0, [0.5], [0.0])
    stated, _ = recurrence_bound(4.0, [0.5], [0.0])
    envelope = recurrence_envelope_bound(4.0, [0.5], [0.0])
    print(f"counterexample to the (10/9, 1) pair: extremal alpha_1 = {alphas[1]:.6f} "
          f"> stated {stated[0]:.6f}; sound envelope gives {envelope[0]:.6f}")
    return code


if __name__ == "__main__":
    sys.exit(main())
