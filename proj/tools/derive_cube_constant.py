"""Mean of 1/|x| over a unit cube centred at the origin, times the cube volume.

Prints the closed form 3 ln(2 + sqrt 3) - pi/2 next to an independent
numerical value (scipy cubature on one octant, with the singularity handled
in spherical-like coordinates by splitting along the diagonal planes).
"""

import math

import mpmath


def closed_form():
    return 3.0 * math.log(2.0 + math.sqrt(3.0)) - math.pi / 2.0


def numeric(dps=30):
    mpmath.mp.dps = dps
    # By symmetry the cube integral is 48 times the integral over the
    # pyramid 0 <= z <= y <= x <= 1/2. In the pyramid write y = x u,
    # z = x u w; the Jacobian x^2 u cancels the 1/r singularity.
    def inner(u, w):
        return u / mpmath.sqrt(1 + u * u + u * u * w * w)

    # int_0^{1/2} x dx = 1/8
    val = mpmath.quad(inner, [0, 1], [0, 1]) / 8
    return 48 * val


if __name__ == "__main__":
    cf = closed_form()
    nv = numeric()
    print(f"closed form K_CUBE = {cf:.17g}")
    print(f"quadrature  K_CUBE = {mpmath.nstr(nv, 20)}")
    print(f"difference         = {float(abs(nv - cf)):.3e}")
