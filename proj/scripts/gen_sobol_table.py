#!/usr/bin/env python3
"""Emit src/sobol_directions.cpp from the Joe-Kuo new-joe-kuo-6.21201 table.

The table is read from the copy bundled with SciPy (scipy/stats/_sobol_direction_numbers.npz),
which stores, per dimension, the primitive polynomial as a full integer and the initial
direction integers m_1..m_s.
"""
import argparse
import os

import numpy as np
import scipy

DEFAULT_DIMS = 1024


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dims", type=int, default=DEFAULT_DIMS)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "src", "sobol_directions.cpp"))
    args = ap.parse_args()

    path = os.path.join(os.path.dirname(scipy.__file__), "stats", "_sobol_direction_numbers.npz")
    data = np.load(path)
    poly, vinit = data["poly"], data["vinit"]

    rows = []
    # Dimension 1 is the van der Corput sequence and has no polynomial.
    rows.append((0, 0, []))
    for d in range(1, args.dims):
        p = int(poly[d])
        s = p.bit_length() - 1
        a = (p >> 1) & ((1 << (s - 1)) - 1) if s > 1 else 0
        m = [int(v) for v in vinit[d][:s]]
        rows.append((s, a, m))

    max_deg = max(r[0] for r in rows)
    with open(args.out, "w") as f:
        f.write("// Generated by scripts/gen_sobol_table.py. Do not edit.\n")
        f.write("// Source: Joe & Kuo direction numbers, new-joe-kuo-6.21201 (as bundled with SciPy).\n")
        f.write('#include "uqvae/sobol_table.hpp"\n\nnamespace uqvae::detail {\n\n')
        f.write(f"const int kSobolTableDims = {args.dims};\n")
        f.write(f"static_assert(kSobolMaxDegree >= {max_deg});\n\n")
        f.write("const SobolDirectionEntry kSobolTable[] = {\n")
        for s, a, m in rows:
            mm = ", ".join(str(v) for v in m) if m else "0"
            f.write(f"    {{{s}, {a}, {{{mm}}}}},\n")
        f.write("};\n\n}  // namespace uqvae::detail\n")
    print(f"wrote {args.dims} dimensions (max degree {max_deg}) to {args.out}")


if __name__ == "__main__":
    main()
