#!/usr/bin/env python3
"""Quaternion arithmetic and the 2x2 complex embedding.

Walks through the basis multiplication table, the conjugate/norm identities,
and the ring homomorphism into 2x2 complex matrices.
"""

import numpy as np

from quatspectra import (I1, I2, I3, UNIT, Quaternion, conjugate, from_complex,
                         multiply, norm, to_complex)

print("=== basis multiplication table ===")
names = {(1, 0, 0, 0): "1", (0, 1, 0, 0): "i1", (0, 0, 1, 0): "i2",
         (0, 0, 0, 1): "i3", (-1, 0, 0, 0): "-1", (0, -1, 0, 0): "-i1",
         (0, 0, -1, 0): "-i2", (0, 0, 0, -1): "-i3"}
basis = [("1", UNIT), ("i1", I1), ("i2", I2), ("i3", I3)]
for lname, left in basis:
    row = []
    for rname, right in basis:
        prod = multiply(left, right)
        row.append(names[tuple(prod.coeffs())])
    print(f"  {lname:>2} * [1 i1 i2 i3] = {row}")

print("\n=== conjugation and norm ===")
x = Quaternion(1, 2, 3, 4)
y = Quaternion(4, 3, 2, 1)
print("x =", x)
print("conj(x) =", conjugate(x))
print("x * conj(x) =", multiply(x, conjugate(x)), " (norm^2 =", norm(x) ** 2, ")")
print("norm(x*y) =", norm(multiply(x, y)), "= norm(x)*norm(y) =", norm(x) * norm(y))

print("\n=== 2x2 complex embedding ===")
print("to_complex(i1) =\n", to_complex(I1))
lhs = to_complex(x) @ to_complex(y)
rhs = to_complex(multiply(x, y))
print("homomorphism residual |to_c(x)to_c(y) - to_c(xy)| =",
      np.abs(lhs - rhs).max())
print("det(to_complex(x)) =", np.linalg.det(to_complex(x)).real,
      " vs norm(x)^2 =", norm(x) ** 2)
print("roundtrip:", from_complex(to_complex(x)) == x)
