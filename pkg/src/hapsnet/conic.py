"""Convex cone programs over linear, second-order and exponential cones.

A program maximizes ``c^T x + c0`` subject to

* ``A_eq x = b_eq``
* ``G x <= h``
* ``||A_k x + b_k|| <= c_k^T x + d_k`` for each second-order block
* ``(u, v, w) = A_e x + b_e`` with ``v exp(u / v) <= w`` for each exponential
  block (``t <= log(u)`` is ``(t, 1, u)``)

Programs are assembled with :class:`ConeBuilder` and solved by Clarabel.
Complex beamformers are lifted to reals as interleaved (re, im) pairs, see
:func:`complex_lift`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import clarabel
import numpy as np
import scipy.sparse as sp

DEFAULT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SOCBlock:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    def violation(self, x: np.ndarray) -> float:
        return max(float(np.linalg.norm(self.A @ x + self.b) - (self.c @ x + self.d)), 0.0)


@dataclass(frozen=True, eq=False)
class ExpBlock:
    A: np.ndarray
    b: np.ndarray

    def violation(self, x: np.ndarray) -> float:
        u, v, w = self.A @ x + self.b
        if v > 0 and w > 0:
            # measured on the log scale, ``u <= v log(w / v)``
            return max(float(u - v * np.log(w / v)), 0.0)
        if v > 0:
            return max(float(v * np.exp(min(u / v, 700.0)) - w), 0.0)
        # closure of the cone: v = 0 requires u <= 0 and w >= 0
        return max(-float(v), float(u) if v == 0 else 0.0, -float(w), 0.0)


@dataclass(frozen=True, eq=False)
class ConeProgram:
    c: np.ndarray
    c0: float = 0.0
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    socs: tuple[SOCBlock, ...] = ()
    exps: tuple[ExpBlock, ...] = ()

    def __post_init__(self):
        n = self.n
        if n < 1:
            raise ValueError("a cone program needs at least one variable")
        for M, v, name in ((self.A_eq, self.b_eq, "equality"), (self.G, self.h, "inequality")):
            if (M is None) != (v is None) or (M is not None and (M.shape[1] != n or M.shape[0] != v.shape[0])):
                raise ValueError(f"inconsistent {name} block")
        for s in self.socs:
            if s.A.shape[1] != n or s.c.shape != (n,) or s.A.shape[0] != s.b.shape[0]:
                raise ValueError("inconsistent second-order block")
        for e in self.exps:
            if e.A.shape != (3, n) or e.b.shape != (3,):
                raise ValueError("inconsistent exponential block")

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.c0)

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint violation at `x` (0 when feasible)."""
        worst = 0.0
        if self.A_eq is not None:
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq), initial=0.0)))
        if self.G is not None:
            worst = max(worst, float(np.max(self.G @ x - self.h, initial=0.0)))
        for blk in (*self.socs, *self.exps):
            worst = max(worst, blk.violation(x))
        return worst

    def scaled(self, lam: float) -> "ConeProgram":
        return ConeProgram(lam * self.c, lam * self.c0, self.A_eq, self.b_eq, self.G, self.h, self.socs, self.exps)

    def dump(self, path: str | Path):
        """Text dump: a header line, then one block per line-group."""
        with open(path, "w") as fh:
            n_eq = 0 if self.A_eq is None else self.A_eq.shape[0]
            n_le = 0 if self.G is None else self.G.shape[0]
            fh.write(f"cone-program n={self.n} eq={n_eq} le={n_le} soc={len(self.socs)} exp={len(self.exps)}\n")
            fh.write("objective " + " ".join(map(repr, self.c.tolist())) + f" c0 {float(self.c0)!r}\n")
            for k in range(n_eq):
                fh.write("eq " + " ".join(map(repr, self.A_eq[k].tolist())) + f" rhs {float(self.b_eq[k])!r}\n")
            for k in range(n_le):
                fh.write("le " + " ".join(map(repr, self.G[k].tolist())) + f" rhs {float(self.h[k])!r}\n")
            for s in self.socs:
                fh.write(f"soc rows={s.A.shape[0]} d {float(s.d)!r}\n")
                fh.write("  c " + " ".join(map(repr, s.c.tolist())) + "\n")
                for r in range(s.A.shape[0]):
                    fh.write("  row " + " ".join(map(repr, s.A[r].tolist())) + f" off {float(s.b[r])!r}\n")
            for e in self.exps:
                fh.write("exp\n")
                for r in range(3):
                    fh.write("  row " + " ".join(map(repr, e.A[r].tolist())) + f" off {float(e.b[r])!r}\n")

    @classmethod
    def load(cls, path: str | Path) -> "ConeProgram":
        lines = Path(path).read_text().splitlines()
        head = dict(kv.split("=") for kv in lines[0].split()[1:])
        n, n_eq, n_le = int(head["n"]), int(head["eq"]), int(head["le"])

        def row(line):
            parts = line.split()
            return np.array(list(map(float, parts[1:-2]))), float(parts[-1])

        obj = lines[1].split()
        c, c0 = np.array(list(map(float, obj[1:-2]))), float(obj[-1])
        k = 2
        eq = [row(lines[k + r]) for r in range(n_eq)]
        k += n_eq
        le = [row(lines[k + r]) for r in range(n_le)]
        k += n_le
        socs, exps = [], []
        while k < len(lines):
            parts = lines[k].split()
            if parts[0] == "soc":
                m = int(parts[1].split("=")[1])
                d = float(parts[3])
                sc = np.array(list(map(float, lines[k + 1].split()[1:])))
                rows = [row(lines[k + 2 + r]) for r in range(m)]
                A = np.array([r[0] for r in rows]).reshape(m, n)
                socs.append(SOCBlock(A, np.array([r[1] for r in rows]), sc, d))
                k += 2 + m
            else:
                rows = [row(lines[k + 1 + r]) for r in range(3)]
                exps.append(ExpBlock(np.array([r[0] for r in rows]), np.array([r[1] for r in rows])))
                k += 4
        return cls(c, c0,
                   np.array([r[0] for r in eq]).reshape(n_eq, n) if n_eq else None,
                   np.array([r[1] for r in eq]) if n_eq else None,
                   np.array([r[0] for r in le]).reshape(n_le, n) if n_le else None,
                   np.array([r[1] for r in le]) if n_le else None,
                   tuple(socs), tuple(exps))


def quad_to_soc(A: np.ndarray, b: np.ndarray, t_coef: np.ndarray, t_const: float) -> SOCBlock:
    """Encode ``||A x + b||^2 <= t`` with ``t = t_coef^T x + t_const`` as a second-order cone.

    Uses ``||(2 (A x + b), t - 1)|| <= t + 1``, which has the same solution set.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    t_coef = np.asarray(t_coef, dtype=float)
    return SOCBlock(np.vstack([2.0 * A, t_coef[None, :]]),
                    np.concatenate([2.0 * b, [t_const - 1.0]]),
                    t_coef, float(t_const) + 1.0)


class ConeBuilder:
    """Incremental assembly of a :class:`ConeProgram`."""

    def __init__(self, n: int = 0):
        self.n = n
        self._eq: list[tuple[np.ndarray, float]] = []
        self._le: list[tuple[np.ndarray, float]] = []
        self._soc: list[SOCBlock] = []
        self._exp: list[ExpBlock] = []
        self._c = None
        self._c0 = 0.0

    def add_vars(self, k: int) -> np.ndarray:
        idx = np.arange(self.n, self.n + k)
        self.n += k
        return idx

    def _pad(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape[:-1] + (self.n,))
        out[..., : v.shape[-1]] = v
        return out

    def add_eq(self, a, b: float):
        self._eq.append((np.asarray(a, float), float(b)))

    def add_le(self, g, h: float):
        self._le.append((np.asarray(g, float), float(h)))

    def add_soc(self, block: SOCBlock):
        self._soc.append(block)

    def add_exp(self, A, b):
        self._exp.append(ExpBlock(np.asarray(A, float), np.asarray(b, float)))

    def add_log_epigraph(self, t_index: int, u_coef, u_const: float):
        """``x[t_index] <= log(u_coef^T x + u_const)``."""
        A = np.zeros((3, self.n))
        A[0, t_index] = 1.0
        A[2, : len(u_coef)] = u_coef
        self.add_exp(A, np.array([0.0, 1.0, u_const]))

    def maximize(self, c, c0: float = 0.0):
        self._c = np.asarray(c, float)
        self._c0 = float(c0)

    def build(self) -> ConeProgram:
        n = self.n
        c = np.zeros(n) if self._c is None else self._pad(self._c)
        eq = ([self._pad(a) for a, _ in self._eq], [b for _, b in self._eq])
        le = ([self._pad(g) for g, _ in self._le], [h for _, h in self._le])
        socs = tuple(SOCBlock(self._pad(s.A), s.b, self._pad(s.c), s.d) for s in self._soc)
        exps = tuple(ExpBlock(self._pad(e.A), e.b) for e in self._exp)
        return ConeProgram(
            c, self._c0,
            np.array(eq[0]) if eq[0] else None, np.array(eq[1]) if eq[0] else None,
            np.array(le[0]) if le[0] else None, np.array(le[1]) if le[0] else None,
            socs, exps,
        )


@dataclass
class ConeSolution:
    x: np.ndarray
    objective: float
    status: str
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    solver_status: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


_STATUS = {
    "Solved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}


def solve(program: ConeProgram, tol: float = DEFAULT_TOL, max_iter: int = 200) -> ConeSolution:
    """Solve with Clarabel's interior-point method.

    Status is ``optimal`` only when the primal and dual residuals and the
    duality gap are all within `tol`; an inexact stop reports ``max_iters``
    with the best iterate and its residuals.
    """
    n = program.n
    blocks_A, blocks_b, cones = [], [], []
    if program.A_eq is not None:
        blocks_A.append(program.A_eq)
        blocks_b.append(program.b_eq)
        cones.append(clarabel.ZeroConeT(program.A_eq.shape[0]))
    if program.G is not None:
        blocks_A.append(program.G)
        blocks_b.append(program.h)
        cones.append(clarabel.NonnegativeConeT(program.G.shape[0]))
    for s in program.socs:
        blocks_A.append(-np.vstack([s.c[None, :], s.A]))
        blocks_b.append(np.concatenate([[s.d], s.b]))
        cones.append(clarabel.SecondOrderConeT(s.A.shape[0] + 1))
    for e in program.exps:
        blocks_A.append(-e.A)
        blocks_b.append(e.b)
        cones.append(clarabel.ExponentialConeT())
    if blocks_A:
        A = sp.csc_matrix(np.vstack(blocks_A))
        b = np.concatenate(blocks_b)
    else:
        A = sp.csc_matrix((0, n))
        b = np.zeros(0)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_threads = 1
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_ktratio = min(1e-6, tol * 100)
    solver = clarabel.DefaultSolver(sp.csc_matrix((n, n)), -program.c, A, b, cones, settings)
    sol = solver.solve()

    x = np.asarray(sol.x, dtype=float)
    raw = str(sol.status)
    p, d = -float(sol.obj_val), -float(sol.obj_val_dual)
    gap_abs = abs(p - d)
    gap = min(gap_abs, gap_abs / max(min(abs(p), abs(d)), 1e-300)) if np.isfinite(gap_abs) else np.inf
    residuals = {"primal": float(sol.r_prim), "dual": float(sol.r_dual), "gap": float(gap)}
    status = _STATUS.get(raw, "max_iters")
    if status == "optimal" and not all(v <= tol for v in residuals.values()):
        status = "max_iters"
    if raw == "AlmostSolved" and all(v <= tol for v in residuals.values()):
        status = "optimal"
    objective = program.objective(x) if status in ("optimal", "max_iters") else np.nan
    return ConeSolution(x, objective, status, residuals, int(sol.iterations), raw)


def complex_lift(z: np.ndarray) -> np.ndarray:
    """Interleave real and imaginary parts: ``[re0, im0, re1, im1, ...]``."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def complex_unlift(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[0::2] + 1j * x[1::2]


def inner_real_rows(g: np.ndarray) -> np.ndarray:
    """Rows mapping the lifted ``w`` to ``(Re(g^H w), Im(g^H w))``."""
    g = np.asarray(g, dtype=complex)
    out = np.empty((2, 2 * g.size))
    out[0, 0::2] = g.real
    out[0, 1::2] = g.imag
    out[1, 0::2] = -g.imag
    out[1, 1::2] = g.real
    return out
