#!/usr/bin/env python3
"""Regenerates the golden test fixtures.

The fixtures are written here, independently of the C++ encoders, so the
decoders are checked against bytes produced by a second implementation.

  golden.pemb            3 records, dim 4
  golden.pmlp            dims [3, 4, 3, 2, 2], parameter k = (k - 20) / 8
  adam_trajectory.csv    5 scalar Adam steps in 60-digit arithmetic
"""
import os
import struct

import mpmath

HERE = os.path.dirname(os.path.abspath(__file__))


def short_string(s):
    b = s.encode("utf-8")
    return struct.pack("<H", len(b)) + b


def golden_pemb():
    records = [
        ("fig-001", [1.0, -2.5, 0.15625, 3.4028234663852886e38]),
        ("fig-äö", [-0.0, 1.401298464324817e-45, 100.0, -1.0]),
        ("US1234567-3", [0.5, 0.25, -0.125, 2.0]),
    ]
    out = b"PEMB" + struct.pack("<III", 1, len(records), 4)
    for rid, values in records:
        out += short_string(rid) + struct.pack("<4f", *values)
    return out


def golden_pmlp():
    dims = [3, 4, 3, 2, 2]
    out = b"PMLP" + struct.pack("<I", 1) + struct.pack("<B", 1)
    names = ["alpha", "beta"]
    out += struct.pack("<I", len(names)) + b"".join(short_string(n) for n in names)
    out += struct.pack("<I", len(dims)) + struct.pack("<5I", *dims)
    out += struct.pack("<Q", 0x0123456789ABCDEF) + struct.pack("<I", 17)
    k = 0
    for i in range(4):
        for _ in range(dims[i] * dims[i + 1] + dims[i + 1]):
            out += struct.pack("<f", (k - 20) / 8.0)
            k += 1
    return out


def adam_trajectory():
    mpmath.mp.dps = 60
    lr, b1, b2, eps = (mpmath.mpf(x) for x in ("1e-3", "0.9", "0.999", "1e-8"))
    theta, m, v = mpmath.mpf("0.5"), mpmath.mpf(0), mpmath.mpf(0)
    grads = ["1.0", "-0.5", "0.25", "2.0", "-1.0"]
    rows = ["step,grad,theta,m,v"]
    for t, g in enumerate(grads, start=1):
        g = mpmath.mpf(g)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        theta = theta - lr * m_hat / (mpmath.sqrt(v_hat) + eps)
        rows.append(",".join([str(t), mpmath.nstr(g, 17), mpmath.nstr(theta, 20),
                              mpmath.nstr(m, 20), mpmath.nstr(v, 20)]))
    return "\n".join(rows) + "\n"


def main():
    with open(os.path.join(HERE, "golden.pemb"), "wb") as f:
        f.write(golden_pemb())
    with open(os.path.join(HERE, "golden.pmlp"), "wb") as f:
        f.write(golden_pmlp())
    with open(os.path.join(HERE, "adam_trajectory.csv"), "w") as f:
        f.write(adam_trajectory())


if __name__ == "__main__":
    main()
