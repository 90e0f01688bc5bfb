"""Reference for synth_uniform: seed derivation, closed-unit draw, rounding
half to even onto the grid. Freezes the prefix checked in test_traces.cpp."""
from keystream_oracle import M, GAMMA


def mix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
    return z ^ (z >> 31)


def fnv1a(label):
    h = 0xCBF29CE484222325
    for c in label.encode():
        h ^= c
        h = (h * 0x100000001B3) & M
    return h


def derive_seed(parent, label, index=0):
    z = mix64(parent ^ fnv1a(label))
    z = mix64((z + (index + 1) * GAMMA) & M)
    return mix64(z ^ 0xD6E8FEB86659FD93)


def word(seed, j):
    return mix64((seed + (j + 1) * GAMMA) & M)


def synth_uniform(low, high, n, seed, res=0.01):
    s = derive_seed(seed, "synth-uniform")
    out = []
    for j in range(n):
        u = float(word(s, j) >> 11) / float((1 << 53) - 1)
        out.append(round((low + (high - low) * u) / res))  # banker's rounding
    return out


if __name__ == "__main__":
    print(synth_uniform(0.0, 100.0, 8, 7))
