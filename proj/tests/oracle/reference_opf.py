#!/usr/bin/env python3
"""Independent reference solutions for the OPF test fixtures.

Solves the AC OPF in polar coordinates with scipy's trust-constr and runs a
polar Newton-Raphson power flow. Used once, before the C++ build, to freeze
reference objectives and power-flow voltages into the test sources. Entirely
separate from the C++ implementation (different coordinates, different
solver, different Y-bus code).

Usage:
  python3 reference_opf.py opf  CASE.m [--line-limits]
  python3 reference_opf.py pf   CASE.m
"""

import re
import sys
import numpy as np
from scipy import optimize, sparse


def parse_case(path):
    text = open(path).read()
    text = re.sub(r"%.*", "", text)

    def matrix(name):
        m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S)
        rows = []
        for line in m.group(1).split(";"):
            vals = line.split()
            if vals:
                rows.append([float(v) for v in vals])
        return np.array(rows)

    base = float(re.search(r"mpc\.baseMVA\s*=\s*([\d.eE+-]+)", text).group(1))
    return base, matrix("bus"), matrix("gen"), matrix("branch"), matrix("gencost")


def ybus(base, bus, branch):
    n = bus.shape[0]
    id2i = {int(b[0]): i for i, b in enumerate(bus)}
    Y = np.zeros((n, n), complex)
    for br in branch:
        if br[10] == 0:
            continue
        f, t = id2i[int(br[0])], id2i[int(br[1])]
        ys = 1.0 / complex(br[2], br[3])
        bc = br[4]
        tap = br[8] if br[8] != 0 else 1.0
        shift = np.deg2rad(br[9])
        tcplx = tap * np.exp(1j * shift)
        Y[f, f] += (ys + 1j * bc / 2) / (tap * tap)
        Y[t, t] += ys + 1j * bc / 2
        Y[f, t] += -ys / np.conj(tcplx)
        Y[t, f] += -ys / tcplx
    for i, b in enumerate(bus):
        Y[i, i] += complex(b[4], b[5]) / base
    return Y, id2i


def solve_opf(base, bus, gen, branch, gencost, line_limits=False):
    n = bus.shape[0]
    ng = gen.shape[0]
    Y, id2i = ybus(base, bus, branch)
    G, B = Y.real, Y.imag
    gbus = np.array([id2i[int(g[0])] for g in gen])
    ref = int(np.where(bus[:, 1] == 3)[0][0])
    Pd, Qd = bus[:, 2] / base, bus[:, 3] / base

    # variables: [va(n), vm(n), pg(ng), qg(ng)]
    def split(x):
        return x[:n], x[n:2 * n], x[2 * n:2 * n + ng], x[2 * n + ng:]

    def obj(x):
        pg = x[2 * n:2 * n + ng] * base
        return float(np.sum(gencost[:, 4] * pg ** 2 + gencost[:, 5] * pg + gencost[:, 6]))

    def obj_grad(x):
        g = np.zeros_like(x)
        pg = x[2 * n:2 * n + ng] * base
        g[2 * n:2 * n + ng] = (2 * gencost[:, 4] * pg + gencost[:, 5]) * base
        return g

    def mismatch(x):
        va, vm, pg, qg = split(x)
        V = vm * np.exp(1j * va)
        S = V * np.conj(Y @ V)
        Pg = np.bincount(gbus, pg, n)
        Qg = np.bincount(gbus, qg, n)
        return np.concatenate([Pg - Pd - S.real, Qg - Qd - S.imag])

    cons = [optimize.NonlinearConstraint(mismatch, 0, 0, jac="3-point")]

    if line_limits:
        def flows2(x):
            va, vm, _, _ = split(x)
            V = vm * np.exp(1j * va)
            out = []
            for br in branch:
                if br[10] == 0 or br[5] == 0:
                    continue
                f, t = id2i[int(br[0])], id2i[int(br[1])]
                ys = 1.0 / complex(br[2], br[3])
                bc = br[4]
                tap = br[8] if br[8] != 0 else 1.0
                tc = tap * np.exp(1j * np.deg2rad(br[9]))
                If = (ys + 1j * bc / 2) / (tap * tap) * V[f] - ys / np.conj(tc) * V[t]
                It = (ys + 1j * bc / 2) * V[t] - ys / tc * V[f]
                out.append(abs(V[f] * np.conj(If)) ** 2)
                out.append(abs(V[t] * np.conj(It)) ** 2)
            return np.array(out)

        smax2 = []
        for br in branch:
            if br[10] == 0 or br[5] == 0:
                continue
            smax2 += [(br[5] / base) ** 2] * 2
        cons.append(optimize.NonlinearConstraint(flows2, -np.inf, np.array(smax2), jac="3-point"))

    lb = np.concatenate([-np.pi * np.ones(n), bus[:, 12], gen[:, 9] / base, gen[:, 4] / base])
    ub = np.concatenate([np.pi * np.ones(n), bus[:, 11], gen[:, 8] / base, gen[:, 3] / base])
    lb[ref] = ub[ref] = 0.0

    x0 = np.concatenate([np.zeros(n), np.ones(n), gen[:, 1] / base, np.zeros(ng)])
    x0 = np.clip(x0, lb, ub)

    r = optimize.minimize(obj, x0, jac=obj_grad, bounds=optimize.Bounds(lb, ub),
                          constraints=cons, method="trust-constr",
                          options={"maxiter": 3000, "gtol": 1e-10, "xtol": 1e-12,
                                   "barrier_tol": 1e-10, "verbose": 0})
    mm = np.max(np.abs(mismatch(r.x)))
    va, vm, pg, qg = split(r.x)
    print("status:", r.status, r.message)
    print("objective: %.6f" % r.fun)
    print("max mismatch: %.3e" % mm)
    print("pg (MW):", np.array2string(pg * base, precision=4))
    print("vm:", np.array2string(vm, precision=6))
    return r.fun


def newton_pf(base, bus, gen, branch, tol=1e-10, verbose=True):
    n = bus.shape[0]
    Y, id2i = ybus(base, bus, branch)
    gbus = np.array([id2i[int(g[0])] for g in gen])
    ref = int(np.where(bus[:, 1] == 3)[0][0])
    pv = sorted(set(gbus.tolist()) - {ref})
    pq = sorted(set(range(n)) - set(pv) - {ref})
    Pd, Qd = bus[:, 2] / base, bus[:, 3] / base
    Pg = np.bincount(gbus, gen[:, 1] / base, n)

    vm = np.ones(n)
    va = np.zeros(n)
    for g in gen:
        vm[id2i[int(g[0])]] = g[5]
    Pspec = Pg - Pd
    Qspec = -Qd

    for it in range(40):
        V = vm * np.exp(1j * va)
        S = V * np.conj(Y @ V)
        dP = Pspec - S.real
        dQ = Qspec - S.imag
        f = np.concatenate([dP[pv + pq], dQ[pq]])
        if np.max(np.abs(f)) < tol:
            break
        # numerical Jacobian is fine at this scale
        m = len(f)
        J = np.zeros((m, m))
        h = 1e-7
        for k, idx in enumerate(pv + pq):
            va2 = va.copy(); va2[idx] += h
            V2 = vm * np.exp(1j * va2)
            S2 = V2 * np.conj(Y @ V2)
            J[:, k] = np.concatenate([(S2.real - S.real)[pv + pq], (S2.imag - S.imag)[pq]]) / h
        for k, idx in enumerate(pq):
            vm2 = vm.copy(); vm2[idx] += h
            V2 = vm2 * np.exp(1j * va)
            S2 = V2 * np.conj(Y @ V2)
            J[:, len(pv + pq) + k] = np.concatenate([(S2.real - S.real)[pv + pq], (S2.imag - S.imag)[pq]]) / h
        dx = np.linalg.solve(J, f)
        va[pv + pq] += dx[:len(pv + pq)]
        vm[pq] += dx[len(pv + pq):]

    V = vm * np.exp(1j * va)
    if verbose:
        print("iterations:", it)
        print("max mismatch: %.3e" % np.max(np.abs(f)))
        for i in range(n):
            print("bus %d  e=%.12f  f=%.12f  vm=%.12f  va=%.8f deg"
                  % (int(bus[i, 0]), V[i].real, V[i].imag, vm[i], np.rad2deg(va[i])))
    return V


if __name__ == "__main__":
    mode, path = sys.argv[1], sys.argv[2]
    data = parse_case(path)
    if mode == "opf":
        solve_opf(*data, line_limits="--line-limits" in sys.argv)
    elif mode == "pf":
        newton_pf(*data)
