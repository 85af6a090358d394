"""Regenerates the frozen 50-digit reference values used by the Rust tests.

Run with: python3 generate.py > values.txt
Every value is computed straight from the defining integrals/equations with
mpmath and never touches the Rust implementation.
"""
import mpmath as mp

mp.mp.dps = 50


def faddeeva(z):
    # w(z) = exp(-z^2) erfc(-iz), erfc via its defining integral along the ray.
    z = mp.mpc(z)
    return mp.exp(-z * z) * mp.erfc(-1j * z)


def erfc_quad(y):
    # (2/sqrt(pi)) * integral_y^inf exp(-u^2) du along u = y + s
    f = lambda s: mp.exp(-(y + s) ** 2)
    return 2 / mp.sqrt(mp.pi) * mp.quad(f, [0, 1, 5, 20, mp.inf])


def moshinsky_direct(k, x, t):
    k = mp.mpc(k)
    y = mp.exp(-1j * mp.pi / 4) * (x - 2 * k * t) / (2 * mp.sqrt(t))
    return mp.mpf(1) / 2 * mp.exp(-1j * k * k * t) * mp.exp(1j * k * x) * erfc_quad(y)


def pole(lam, a, nu):
    f = lambda k: k * a * mp.cot(k * a) + lam - 1j * k * a
    seed = nu * mp.pi * (1 - mp.mpf(1) / (lam + 1)) - 0.2j
    return mp.findroot(f, mp.mpc(seed) / a)


def coefficient(lam, a, k):
    ka = k * a
    return (2 * mp.pi * mp.sqrt(2 * a) * k) / (
        (ka * ka - mp.pi ** 2) * ((1 + lam - 1j * ka) * mp.cot(ka) - 1j - ka)
    )


def show(name, v):
    v = mp.mpc(v)
    print(f"{name}: re={mp.nstr(v.real, 20)} im={mp.nstr(v.imag, 20)}")


show("e_erfc_1", mp.e * erfc_quad(mp.mpf(1)))
for z in [0.5 + 0.5j, 2 + 1j, -3 + 0.25j, 1e-3 + 5j, 7.5 + 0.01j, 12 + 3j,
          -20 + 1e-6j, 40 + 25j, 0.3 - 0.7j, -2.5 - 1.5j, 4 - 4.5j]:
    show(f"w({z})", faddeeva(z))
show("M(3-0.5i,2,1)", moshinsky_direct(3 - 0.5j, 2, 1))
show("M(3-0.5i,-0.3,1)", moshinsky_direct(3 - 0.5j, -0.3, 1))
show("M(3-0.5i,0.3,1)", moshinsky_direct(3 - 0.5j, 0.3, 1))
k1 = pole(6, 1, 1)
show("k1(lam=6)", k1)
show("c1(lam=6)", coefficient(6, 1, k1))
k3 = pole(6, 1, 3)
show("k3(lam=6)", k3)
show("c3(lam=6)", coefficient(6, 1, k3))
lam, a, t = 6, 1, 1
nplus = 1j * lam / (2 * k1 * a) * (moshinsky_direct(k1, -0.3, t) + moshinsky_direct(k1, 0.3, t))
show("N+(k1,-0.3,1)", nplus)
s = lambda r0: r0 - mp.sin(2 * mp.pi * r0) / (2 * mp.pi)
print("s(0.25) =", mp.nstr(s(mp.mpf(1) / 4), 20))
print("s^-1(1/30) =", mp.nstr(mp.findroot(lambda r: s(r) - mp.mpf(1) / 30, 0.2), 20))
