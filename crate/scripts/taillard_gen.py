"""Regenerate Taillard flow-shop instances from their published seeds.

Usage: python3 taillard_gen.py JOBS MACHINES SEED [SEED ...] > file.txt

Uses Taillard's portable Lehmer generator (a=16807, m=2^31-1) and writes the
benchmark's machine-major layout. Upper/lower bounds are not derivable from
the seed; pass them as SEED:UB:LB to include them in the header.
"""
import sys


def unif(state, low, high):
    m, a, b, c = 2147483647, 16807, 127773, 2836
    k = state[0] // b
    state[0] = a * (state[0] % b) - k * c
    if state[0] < 0:
        state[0] += m
    return low + int((state[0] / m) * (high - low + 1))


def main():
    n, m = int(sys.argv[1]), int(sys.argv[2])
    for arg in sys.argv[3:]:
        parts = arg.split(":")
        seed = int(parts[0])
        ub, lb = (parts[1], parts[2]) if len(parts) == 3 else ("0", "0")
        state = [seed]
        rows = [[unif(state, 1, 99) for _ in range(n)] for _ in range(m)]
        print("number of jobs, number of machines, initial seed, upper bound and lower bound :")
        print(f"{n:12d}{m:12d}{seed:12d}{int(ub):12d}{int(lb):12d}")
        print("processing times :")
        for r in rows:
            print("".join(f"{v:3d}" for v in r))


if __name__ == "__main__":
    main()
