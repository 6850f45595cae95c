"""Regenerates jet_lut.txt: 256 rows of "index r g b".

Jet channel c(x) = clamp(1.5 - |4x - k|, 0, 1), k = 3/2/1 for r/g/b,
x = i/255, scaled by 255 and rounded half away from zero.
"""
import math


def round_half_away(y):
    f = math.floor(y)
    return f + (1 if y - f >= 0.5 else 0)


def channel(x, k):
    v = min(max(1.5 - abs(4.0 * x - k), 0.0), 1.0)
    return round_half_away(255.0 * v)


with open("jet_lut.txt", "w") as out:
    for i in range(256):
        x = i / 255.0
        out.write(f"{i} {channel(x, 3.0)} {channel(x, 2.0)} {channel(x, 1.0)}\n")
