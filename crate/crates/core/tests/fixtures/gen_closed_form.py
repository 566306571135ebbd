"""Regenerates closed_form.csv: random radio inputs and 50-digit reference
values for transmit power, node power and the PAoI test.

    python3 gen_closed_form.py > closed_form.csv
"""
import random
import sys

import mpmath as mp

mp.mp.dps = 50
rng = random.Random(20240611)


def q_inv(p):
    # Q(x) = erfc(x / sqrt 2) / 2; 50 digits leave ample margin for p >= 1e-12
    return mp.sqrt(2) * mp.erfinv(1 - 2 * p)


def log_uniform(lo, hi):
    return 10 ** rng.uniform(lo, hi)


out = sys.stdout
out.write("m,p,c1,L,wc,h,B,alpha,delta,tx,node,paoi,ambiguous\n")
for _ in range(10000):
    m = rng.randint(1, 200)
    p = log_uniform(-12, -0.005) if rng.random() < 0.8 else rng.uniform(0.5, 0.99)
    c1 = log_uniform(-15, -2)
    L = rng.randint(50, 1000)
    wc = log_uniform(-4, -1)
    B = log_uniform(4, 6)
    alpha = (m / B) * (1 + log_uniform(-1, 3))
    h = log_uniform(-4, 0)
    delta = rng.choice([0.9, 0.99, 0.999, 0.95])

    P = mp.mpf(p)
    qi = q_inv(P)
    x = qi / mp.sqrt(m) + mp.log(2) * L / m
    tx = mp.mpf(c1) * mp.expm1(x)
    node = (max(tx, 0) + mp.mpf(wc)) * m / (mp.mpf(h) * mp.mpf(B))
    window = (mp.mpf(alpha) - mp.mpf(m) / mp.mpf(B)) / mp.mpf(h)
    n = mp.floor(window)
    viol = P ** n
    bound = 1 - mp.mpf(delta)
    paoi = viol <= bound
    # Too close to call in binary64: a floor edge or a tie with the bound.
    ambiguous = (window - n) < mp.mpf("1e-8") * window or (
        n > 0 and abs(viol / bound - 1) < mp.mpf("1e-9")
    )
    out.write(
        f"{m},{p!r},{c1!r},{L},{wc!r},{h!r},{B!r},{alpha!r},{delta!r},"
        f"{mp.nstr(tx, 20)},{mp.nstr(node, 20)},{int(paoi)},{int(ambiguous)}\n"
    )
