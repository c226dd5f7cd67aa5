"""How the remainder max_x R^(j)(x) behaves with the order j.

On sparse graphs it shrinks with j at every p with tanh(p) <= 0.5. On
the dense graphs (square with diagonal, K4) the bubble exceeds one near
tanh(p) = 0.5 and the remainder grows with j instead.
"""
import math

import numpy as np

from lacelab import diagrams as dg
from lacelab import expansion as ex
from lacelab.lattice import CATALOG

if __name__ == "__main__":
    grid = (0.1, 0.2, 0.35, 0.5, math.atanh(0.5))
    for g in CATALOG.values():
        print(g.name)
        for p in grid:
            eng = ex.engine(g, p)
            R = [float(np.max(eng.R(j))) for j in (1, 2, 3)]
            trend = "decreasing" if R[0] >= R[1] >= R[2] else "NOT monotone"
            print(f"  p={p:.3f} bubble={dg.bubble_radius(g, p):7.4f}  R1..R3 = "
                  + "  ".join(f"{v:.4e}" for v in R) + f"  {trend}")
