"""Reference computations for the tests, written without any package code."""
import numpy as np


def is_prime(q):
    if q < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if q % p == 0:
            return q == p
    d, s = q - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, q)
        if x in (1, q - 1):
            continue
        for _ in range(s - 1):
            x = x * x % q
            if x == q - 1:
                break
        else:
            return False
    return True


def smallest_psi(q, n):
    """Smallest x with x^n = -1 mod q."""
    for x in range(2, q):
        if pow(x, n, q) == q - 1:
            return x
    raise ValueError("no root")


def negacyclic_dft(v, q, psi):
    n = len(v)
    return [sum(int(v[j]) * pow(psi, (2 * k + 1) * j, q) for j in range(n)) % q for k in range(n)]


def chunked_dft(X, q, psi):
    """Negacyclic DFT of every row of X, exact via 20-bit pieces in int64 matrix products."""
    n = X.shape[1]
    V = np.array([[pow(psi, (2 * k + 1) * j % (2 * n), q) for j in range(n)] for k in range(n)], dtype=object)
    Xo = X.astype(object)
    piece = lambda A, i: np.array((A >> (20 * i)) & 0xFFFFF, dtype=np.int64)
    acc = np.zeros((X.shape[0], n), dtype=object)
    for i in range(3):
        for j in range(3):
            acc = acc + (piece(Xo, i) @ piece(V, j).T).astype(object) * (1 << (20 * (i + j)))
    return acc % q


def schoolbook_negacyclic(a, b, q):
    n = len(a)
    out = [0] * n
    for i in range(n):
        for j in range(n):
            k = i + j
            if k < n:
                out[k] += int(a[i]) * int(b[j])
            else:
                out[k - n] -= int(a[i]) * int(b[j])
    return [x % q for x in out]


def matvec(M, v, t):
    return [sum(int(x) * int(y) for x, y in zip(row, v)) % t for row in M]
