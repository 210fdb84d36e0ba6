#!/usr/bin/env python3
"""Independent per-layer arithmetic oracle for the bundled backbone fixtures.

Walks each stage by hand with explicit formulas and prints the exact FLOPs
and log-variance numbers that the C++ test suites assert against. Run from
anywhere; no dependencies beyond the standard library.
"""

import math

# (kernel, in, out, stride, bottleneck, layers, has_pool)
A1_CONV = [
    (3, 3, 32, 4, 32, 1, True),
    (5, 32, 128, 1, 40, 3, False),
    (5, 128, 448, 2, 80, 8, False),
    (5, 448, 1280, 2, 128, 10, False),
    (5, 1280, 2048, 2, 240, 10, False),
]
A1_TR = dict(cin=2048, cout=256, d_model=424, d_ffn=912, layers=1)

A2_CONV = [
    (3, 3, 32, 4, 32, 1, True),
    (5, 32, 112, 1, 48, 3, False),
    (5, 112, 448, 2, 72, 8, False),
    (5, 448, 1024, 2, 104, 10, False),
    (5, 1024, 2000, 2, 304, 10, False),
]
A2_TR = dict(cin=2000, cout=256, d_model=504, d_ffn=1024, layers=1)


def conv_flops(k, cin, cout, h_out, w_out):
    return 2 * h_out * w_out * cout * (k * k * cin)


def backbone_flops(conv_stages, tr, h, w):
    per_stage = []
    for (k, cin, cout, stride, wb, units, pool) in conv_stages:
        total = 0
        if pool:
            h //= 2
            w //= 2
            stride //= 2
        for u in range(units):
            s = stride if u == 0 else 1
            c_in_u = cin if u == 0 else cout
            # 1x1 reduce at incoming resolution, kxk at outgoing, 1x1 expand
            total += conv_flops(1, c_in_u, wb, h, w)
            h_out, w_out = h // s, w // s
            total += conv_flops(k, wb, wb, h_out, w_out)
            total += conv_flops(1, wb, cout, h_out, w_out)
            if c_in_u != cout or s != 1:
                total += conv_flops(1, c_in_u, cout, h_out, w_out)
            h, w = h_out, w_out
        per_stage.append(total)
    s_tokens = h * w
    d, f = tr["d_model"], tr["d_ffn"]
    t = 2 * s_tokens * tr["cin"] * d
    t += tr["layers"] * 2 * s_tokens * (4 * d * d + 2 * s_tokens * d + 2 * d * f)
    t += 2 * s_tokens * d * tr["cout"]
    per_stage.append(t)
    return per_stage


def backbone_log_variance(conv_stages, tr, h, w):
    """Cumulative log variance at the end of each stage (unit-variance input)."""
    cum = 0.0
    out = []
    for (k, cin, cout, stride, wb, units, pool) in conv_stages:
        if pool:
            h //= 2
            w //= 2
            stride //= 2
        for u in range(units):
            c_in_u = cin if u == 0 else cout
            cum += math.log(c_in_u) + math.log(wb * k * k) + math.log(wb)
        h //= stride
        w //= stride
        out.append(cum)
    s_tokens = h * w
    cum += math.log(tr["cin"])
    for _ in range(tr["layers"]):
        cum += 2 * math.log(tr["d_model"]) + math.log(tr["d_ffn"]) + math.log(s_tokens)
    out.append(cum)
    return out


def report(name, conv, tr, h, w):
    fl = backbone_flops(conv, tr, h, w)
    lv = backbone_log_variance(conv, tr, h, w)
    print(f"--- {name} @ {h}x{w}")
    print("flops per stage:", fl)
    print("flops total    :", sum(fl))
    print("log-variance   :", [f"{v:.9f}" for v in lv])


if __name__ == "__main__":
    report("A1", A1_CONV, A1_TR, 320, 320)
    report("A2", A2_CONV, A2_TR, 320, 320)
    report("A1", A1_CONV, A1_TR, 64, 64)
    # single conv layer example: k=3, 3->32, stride 4, 64x64 input
    print("single conv example:", conv_flops(3, 3, 32, 16, 16))
    print("1x1 minimal conv   :", conv_flops(1, 1, 1, 1, 1))
    print("two-layer entropy  :", f"{math.log(32 * 9) + math.log(128 * 25):.9f}")
