"""Solver-agnostic real symmetric-cone programs.

A :class:`ConicProgram` holds named variables (scalars, real symmetric
matrices, complex Hermitian matrices), one linear objective, and a list of
constraints: scalar affine equalities/inequalities and PSD membership of
affine matrix expressions. Complex Hermitian variables are realized
internally as their real 2n x 2n embedding (see :func:`hermitian_embed`), so
every backend only ever sees real symmetric cones.

Two interchangeable interior-point backends solve the same program:
``clarabel`` (default) and cvxopt's ``conelp``. Both are deterministic; when
a backend reports success the solution is re-checked against every
constraint at the requested tolerance and downgraded to ``numerical-failure``
if it does not verify, so there are no silent wrong answers.

Debug dump grammar (``ConicProgram.dump``), one token line per item::

    # conic-program v1
    var <scalar|sym|herm> NAME [DIM]
    minimize | constraint <eq|ineq> | constraint psd DIM
    term const V | term scalar NAME COEFF
    term trace NAME            (followed by DIM matrix rows)
    term matconst | term matscalar NAME       (DIM matrix rows)
    term mattrace NAME         (A rows, then placement C rows)
    term matvar NAME ALPHA

Matrix rows are whitespace-separated ``%.17g`` floats; complex matrices
interleave ``re im`` pairs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

_SQRT2 = math.sqrt(2.0)
DEFAULT_TOL = 1e-8


class ContractViolationError(ValueError):
    """An input violates a documented precondition (e.g. non-Hermitian)."""


class ProgramError(ValueError):
    """A conic program is malformed (unknown variable, bad dimension, ...)."""


def _check_hermitian(h: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ContractViolationError(f"expected a square matrix, got {h.shape}")
    scale = max(1.0, float(np.abs(h).max()) if h.size else 1.0)
    dev = float(np.abs(h - h.conj().T).max()) if h.size else 0.0
    if dev > tol * scale:
        raise ContractViolationError(
            f"matrix is not Hermitian: max deviation {dev:.3e} "
            f"(tolerance {tol:.0e} relative)")
    return h


def hermitian_embed(h: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Real symmetric 2n x 2n embedding [[Re H, -Im H], [Im H, Re H]].

    Positive semidefiniteness is preserved in both directions; each
    eigenvalue of H appears twice in the embedding.
    """
    h = _check_hermitian(h, tol)
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


# ---------------------------------------------------------------------------
# Variables and expressions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarVar:
    name: str


@dataclass(frozen=True)
class SymMatVar:
    name: str
    dim: int


@dataclass(frozen=True)
class HermMatVar:
    name: str
    dim: int


def _sym_coords(d: int) -> list[tuple[int, int]]:
    """Upper-triangle coordinates in column-major order."""
    return [(i, j) for j in range(d) for i in range(j + 1)]


def _strict_coords(d: int) -> list[tuple[int, int]]:
    return [(i, j) for j in range(d) for i in range(j)]


_IDX_CACHE: dict = {}


def _tri_indices(d: int):
    """Cached index arrays for the triangular coordinate orders."""
    if d not in _IDX_CACHE:
        iu = _sym_coords(d)
        su = _strict_coords(d)
        iu_i = np.array([t[0] for t in iu], dtype=int)
        iu_j = np.array([t[1] for t in iu], dtype=int)
        su_i = np.array([t[0] for t in su], dtype=int)
        su_j = np.array([t[1] for t in su], dtype=int)
        _IDX_CACHE[d] = (iu_i, iu_j, iu_i == iu_j, su_i, su_j)
    return _IDX_CACHE[d]


def _var_width(v) -> int:
    if isinstance(v, ScalarVar):
        return 1
    if isinstance(v, SymMatVar):
        return v.dim * (v.dim + 1) // 2
    if isinstance(v, HermMatVar):
        return v.dim * v.dim
    raise ProgramError(f"unknown variable kind {v!r}")


@dataclass
class LinExpr:
    """Scalar affine expression: constant + sum(c*scalar) + sum(Tr(A X))."""

    constant: float = 0.0
    scalar_coeffs: dict = field(default_factory=dict)
    trace_coeffs: dict = field(default_factory=dict)

    def add_scalar(self, name: str, coeff: float) -> "LinExpr":
        self.scalar_coeffs[name] = self.scalar_coeffs.get(name, 0.0) + coeff
        return self

    def add_trace(self, name: str, a: np.ndarray) -> "LinExpr":
        if name in self.trace_coeffs:
            self.trace_coeffs[name] = self.trace_coeffs[name] + a
        else:
            self.trace_coeffs[name] = np.asarray(a)
        return self

    def evaluate(self, values: dict) -> float:
        total = self.constant
        for name, c in self.scalar_coeffs.items():
            total += c * values[name]
        for name, a in self.trace_coeffs.items():
            total += float(np.real(np.trace(np.asarray(a) @ values[name])))
        return total

    def magnitude(self, values: dict) -> float:
        """Sum of absolute term values; scale reference for residual checks."""
        total = abs(self.constant)
        for name, c in self.scalar_coeffs.items():
            total += abs(c * values[name])
        for name, a in self.trace_coeffs.items():
            total += abs(float(np.real(np.trace(np.asarray(a) @ values[name]))))
        return total


@dataclass
class MatExpr:
    """Affine symmetric-matrix expression for PSD constraints.

    value = constant + sum(scalar * C) + sum(Tr(A X) * C) + sum(alpha * X),
    where matrix variables entering via the last term contribute their real
    (embedded, for Hermitian variables) form and must match the block size.
    """

    dim: int
    constant: np.ndarray = None
    scalar_coeffs: dict = field(default_factory=dict)
    trace_terms: list = field(default_factory=list)   # (name, A, C)
    var_terms: list = field(default_factory=list)     # (name, alpha)

    def __post_init__(self):
        if self.constant is None:
            self.constant = np.zeros((self.dim, self.dim))
        self.constant = np.asarray(self.constant, dtype=float)

    def add_scalar(self, name: str, coeff_matrix: np.ndarray) -> "MatExpr":
        cm = np.asarray(coeff_matrix, dtype=float)
        if name in self.scalar_coeffs:
            self.scalar_coeffs[name] = self.scalar_coeffs[name] + cm
        else:
            self.scalar_coeffs[name] = cm
        return self

    def add_trace(self, name: str, a: np.ndarray,
                  placement: np.ndarray) -> "MatExpr":
        self.trace_terms.append((name, np.asarray(a),
                                 np.asarray(placement, dtype=float)))
        return self

    def add_var(self, name: str, alpha: float = 1.0) -> "MatExpr":
        self.var_terms.append((name, float(alpha)))
        return self

    def evaluate(self, values: dict) -> np.ndarray:
        out = self.constant.copy()
        for name, c in self.scalar_coeffs.items():
            out = out + values[name] * c
        for name, a, placement in self.trace_terms:
            out = out + float(np.real(np.trace(a @ values[name]))) * placement
        for name, alpha in self.var_terms:
            v = values[name]
            if np.iscomplexobj(v):
                v = hermitian_embed(v)
            out = out + alpha * v
        return out


@dataclass
class LinearConstraint:
    expr: LinExpr
    sense: str   # 'eq' (expr == 0) or 'ineq' (expr >= 0)


@dataclass
class PsdConstraint:
    expr: MatExpr


@dataclass
class SolveReport:
    status: str                 # optimal | infeasible | unbounded | numerical-failure
    objective_value: float      # finite iff status == 'optimal'
    values: dict
    solve_time: float
    iterations: int
    backend: str
    diagnostics: str = ""


class ConicProgram:
    """Linear objective over scalar/symmetric/Hermitian blocks with linear
    and PSD constraints. Immutable once handed to :func:`solve`."""

    def __init__(self):
        self.variables: dict[str, object] = {}
        self.objective: LinExpr = LinExpr()
        self.constraints: list = []

    # -- variable declaration ------------------------------------------------
    def add_scalar(self, name: str) -> str:
        self._declare(ScalarVar(name))
        return name

    def add_symmetric(self, name: str, dim: int) -> str:
        self._declare(SymMatVar(name, dim))
        return name

    def add_hermitian(self, name: str, dim: int) -> str:
        self._declare(HermMatVar(name, dim))
        return name

    def _declare(self, var):
        if var.name in self.variables:
            raise ProgramError(f"variable {var.name!r} already declared")
        self.variables[var.name] = var

    # -- constraints and objective --------------------------------------------
    def set_objective(self, expr: LinExpr):
        self.objective = expr

    def add_equality(self, expr: LinExpr):
        self.constraints.append(LinearConstraint(expr, "eq"))

    def add_inequality(self, expr: LinExpr):
        """Constrain expr >= 0."""
        self.constraints.append(LinearConstraint(expr, "ineq"))

    def add_psd(self, expr: MatExpr):
        self.constraints.append(PsdConstraint(expr))

    # -- validation ------------------------------------------------------------
    def validate(self):
        for expr in self._linear_exprs():
            for name in expr.scalar_coeffs:
                self._expect_kind(name, ScalarVar)
            for name, a in expr.trace_coeffs.items():
                self._check_trace_coeff(name, a)
        for con in self.constraints:
            if not isinstance(con, PsdConstraint):
                continue
            e = con.expr
            if e.constant.shape != (e.dim, e.dim):
                raise ProgramError("PSD constant has wrong shape")
            _assert_symmetric(e.constant, "PSD constant")
            for name, c in e.scalar_coeffs.items():
                self._expect_kind(name, ScalarVar)
                _assert_symmetric(c, f"coefficient of {name}")
            for name, a, placement in e.trace_terms:
                self._check_trace_coeff(name, a)
                _assert_symmetric(placement, "trace placement")
                if placement.shape != (e.dim, e.dim):
                    raise ProgramError("trace placement has wrong shape")
            for name, _ in e.var_terms:
                var = self._expect_kind(name, (SymMatVar, HermMatVar))
                block = 2 * var.dim if isinstance(var, HermMatVar) else var.dim
                if block != e.dim:
                    raise ProgramError(
                        f"variable {name} block size {block} != PSD dim {e.dim}")

    def _linear_exprs(self):
        yield self.objective
        for con in self.constraints:
            if isinstance(con, LinearConstraint):
                yield con.expr

    def _expect_kind(self, name, kinds):
        if name not in self.variables:
            raise ProgramError(f"constraint references unknown variable {name!r}")
        var = self.variables[name]
        if not isinstance(var, kinds):
            raise ProgramError(f"variable {name!r} has unexpected kind")
        return var

    def _check_trace_coeff(self, name, a):
        var = self._expect_kind(name, (SymMatVar, HermMatVar))
        a = np.asarray(a)
        if a.shape != (var.dim, var.dim):
            raise ProgramError(f"trace coefficient for {name} has wrong shape")
        if isinstance(var, HermMatVar):
            _check_hermitian(a)
        else:
            _assert_symmetric(np.real(a), f"trace coefficient for {name}")

    # -- debug dump -------------------------------------------------------------
    def dump(self, path):
        with open(path, "w") as fh:
            fh.write("# conic-program v1\n")
            for var in self.variables.values():
                if isinstance(var, ScalarVar):
                    fh.write(f"var scalar {var.name}\n")
                elif isinstance(var, SymMatVar):
                    fh.write(f"var sym {var.name} {var.dim}\n")
                else:
                    fh.write(f"var herm {var.name} {var.dim}\n")
            fh.write("minimize\n")
            _dump_linexpr(fh, self.objective)
            for con in self.constraints:
                if isinstance(con, LinearConstraint):
                    fh.write(f"constraint {con.sense}\n")
                    _dump_linexpr(fh, con.expr)
                else:
                    e = con.expr
                    fh.write(f"constraint psd {e.dim}\n")
                    fh.write("term matconst\n")
                    _dump_matrix(fh, e.constant)
                    for name, c in e.scalar_coeffs.items():
                        fh.write(f"term matscalar {name}\n")
                        _dump_matrix(fh, c)
                    for name, a, placement in e.trace_terms:
                        fh.write(f"term mattrace {name}\n")
                        _dump_matrix(fh, a)
                        _dump_matrix(fh, placement)
                    for name, alpha in e.var_terms:
                        fh.write(f"term matvar {name} {'%.17g' % alpha}\n")


def _assert_symmetric(m: np.ndarray, what: str, tol: float = 1e-10):
    m = np.asarray(m)
    scale = max(1.0, float(np.abs(m).max()) if m.size else 1.0)
    if float(np.abs(m - m.T).max()) > tol * scale:
        raise ProgramError(f"{what} is not symmetric")


def _dump_linexpr(fh, expr: LinExpr):
    fh.write(f"term const {'%.17g' % expr.constant}\n")
    for name, c in expr.scalar_coeffs.items():
        fh.write(f"term scalar {name} {'%.17g' % c}\n")
    for name, a in expr.trace_coeffs.items():
        fh.write(f"term trace {name}\n")
        _dump_matrix(fh, a)


def _dump_matrix(fh, m: np.ndarray):
    m = np.asarray(m)
    if np.iscomplexobj(m):
        for row in m:
            fh.write(" ".join(f"{'%.17g' % v.real} {'%.17g' % v.imag}"
                              for v in row) + "\n")
    else:
        for row in m:
            fh.write(" ".join("%.17g" % v for v in row) + "\n")


# ---------------------------------------------------------------------------
# Vectorization shared by both backends
# ---------------------------------------------------------------------------

def _svec(m: np.ndarray) -> np.ndarray:
    """Clarabel PSD-triangle vectorization: upper triangle, column-major,
    off-diagonal entries scaled by sqrt(2)."""
    iu_i, iu_j, diag, _, _ = _tri_indices(m.shape[0])
    return m[iu_i, iu_j] * np.where(diag, 1.0, _SQRT2)


def _fullvec(m: np.ndarray) -> np.ndarray:
    """cvxopt 's' block vectorization: full matrix, column-major."""
    return np.asarray(m, dtype=float).ravel(order="F")


class _Layout:
    """Column layout of the stacked real decision vector."""

    def __init__(self, variables: dict):
        self.offsets: dict[str, int] = {}
        self.vars = variables
        n = 0
        for name, var in variables.items():
            self.offsets[name] = n
            n += _var_width(var)
        self.n = n

    def scalar_col(self, name: str) -> int:
        return self.offsets[name]

    def trace_row(self, name: str, a: np.ndarray) -> np.ndarray:
        """Row r with Tr(A X) = r @ x over the variable's coordinates."""
        var = self.vars[name]
        iu_i, iu_j, diag, su_i, su_j = _tri_indices(var.dim)
        if isinstance(var, SymMatVar):
            a = np.real(np.asarray(a))
            return a[iu_i, iu_j] * np.where(diag, 1.0, 2.0)
        a = np.asarray(a, dtype=complex)
        real_part = a.real[iu_i, iu_j] * np.where(diag, 1.0, 2.0)
        imag_part = 2.0 * a.imag[su_i, su_j]
        return np.concatenate([real_part, imag_part])

    def cone_map(self, name: str, vec) -> np.ndarray:
        """Matrix mapping a matrix variable's coordinates to the cone
        vectorization of its (embedded) value. Cached per (kind, dim, vec)."""
        var = self.vars[name]
        key = (type(var).__name__, var.dim, vec.__name__)
        if key not in _CONE_MAP_CACHE:
            basis = _build_basis(var)
            _CONE_MAP_CACHE[key] = np.column_stack([vec(b) for b in basis])
        return _CONE_MAP_CACHE[key]

    def unpack(self, x: np.ndarray) -> dict:
        values = {}
        for name, var in self.vars.items():
            off = self.offsets[name]
            if isinstance(var, ScalarVar):
                values[name] = float(x[off])
                continue
            iu_i, iu_j, _, su_i, su_j = _tri_indices(var.dim)
            if isinstance(var, SymMatVar):
                m = np.zeros((var.dim, var.dim))
                m[iu_i, iu_j] = x[off:off + iu_i.size]
                m[iu_j, iu_i] = x[off:off + iu_i.size]
                values[name] = m
            else:
                d = var.dim
                half = d * (d + 1) // 2
                r = np.zeros((d, d))
                s = np.zeros((d, d))
                r[iu_i, iu_j] = x[off:off + half]
                r[iu_j, iu_i] = x[off:off + half]
                s[su_i, su_j] = x[off + half:off + d * d]
                s[su_j, su_i] = -x[off + half:off + d * d]
                values[name] = r + 1j * s
        return values


_CONE_MAP_CACHE: dict = {}


def _build_basis(var) -> list[np.ndarray]:
    if isinstance(var, SymMatVar):
        d = var.dim
        out = []
        for i, j in _sym_coords(d):
            b = np.zeros((d, d))
            b[i, j] = b[j, i] = 1.0
            out.append(b)
        return out
    d = var.dim
    out = []
    for i, j in _sym_coords(d):       # real part: symmetric in both blocks
        b = np.zeros((2 * d, 2 * d))
        for (r, c) in ((i, j), (j, i)):
            b[r, c] = 1.0
            b[d + r, d + c] = 1.0
        out.append(b)
    for i, j in _strict_coords(d):    # imag part: [[0, -S], [S, 0]]
        b = np.zeros((2 * d, 2 * d))
        b[i, d + j] = -1.0
        b[j, d + i] = 1.0
        b[d + i, j] = 1.0
        b[d + j, i] = -1.0
        out.append(b)
    return out


def _assemble(prog: ConicProgram, layout: _Layout, vec):
    """Rows (dense) for equalities, inequalities, and PSD blocks.

    Returns (c, eq_F, eq_const, in_F, in_const, psd_blocks) with each PSD
    block as (F, const_vec, dim); constraint value = const + F @ x.
    """
    n = layout.n
    c = np.zeros(n)
    for name, coeff in prog.objective.scalar_coeffs.items():
        c[layout.scalar_col(name)] += coeff
    for name, a in prog.objective.trace_coeffs.items():
        off = layout.offsets[name]
        row = layout.trace_row(name, a)
        c[off:off + row.size] += row

    eq_rows, eq_consts, in_rows, in_consts = [], [], [], []
    psd_blocks = []
    for con in prog.constraints:
        if isinstance(con, LinearConstraint):
            row = np.zeros(n)
            for name, coeff in con.expr.scalar_coeffs.items():
                row[layout.scalar_col(name)] += coeff
            for name, a in con.expr.trace_coeffs.items():
                off = layout.offsets[name]
                tr = layout.trace_row(name, a)
                row[off:off + tr.size] += tr
            if con.sense == "eq":
                eq_rows.append(row)
                eq_consts.append(con.expr.constant)
            else:
                in_rows.append(row)
                in_consts.append(con.expr.constant)
        else:
            e = con.expr
            vdim = vec(np.zeros((e.dim, e.dim))).size
            f = np.zeros((vdim, n))
            for name, cm in e.scalar_coeffs.items():
                f[:, layout.scalar_col(name)] += vec(cm)
            for name, a, placement in e.trace_terms:
                off = layout.offsets[name]
                tr = layout.trace_row(name, a)
                f[:, off:off + tr.size] += np.outer(vec(placement), tr)
            for name, alpha in e.var_terms:
                off = layout.offsets[name]
                cmap = layout.cone_map(name, vec)
                f[:, off:off + cmap.shape[1]] += alpha * cmap
            psd_blocks.append((f, vec(e.constant), e.dim))
    eq_f = np.array(eq_rows).reshape(len(eq_rows), n)
    in_f = np.array(in_rows).reshape(len(in_rows), n)
    return (c, eq_f, np.array(eq_consts), in_f, np.array(in_consts),
            psd_blocks)


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------

def _solve_clarabel(prog, layout, tol):
    import clarabel

    c, eq_f, eq_c, in_f, in_c, psd = _assemble(prog, layout, _svec)
    # equalities: F x = -const (Zero cone); cones: s = const + F x in cone
    a = np.vstack([eq_f, -in_f] + [-blk[0] for blk in psd])
    b = np.concatenate([-eq_c, in_c] + [blk[1] for blk in psd])

    cones = []
    if eq_f.shape[0]:
        cones.append(clarabel.ZeroConeT(eq_f.shape[0]))
    if in_f.shape[0]:
        cones.append(clarabel.NonnegativeConeT(in_f.shape[0]))
    for _, _, dim in psd:
        cones.append(clarabel.PSDTriangleConeT(dim))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_threads = 1
    settings.tol_feas = tol * 0.1
    settings.tol_gap_abs = tol * 0.1
    settings.tol_gap_rel = tol * 0.1
    solver = clarabel.DefaultSolver(
        sparse.csc_matrix((layout.n, layout.n)), c,
        sparse.csc_matrix(a), b, cones, settings)
    sol = solver.solve()
    status_name = str(sol.status)
    mapping = {
        "Solved": "optimal",
        "AlmostSolved": "optimal",     # re-verified against tol below
        "PrimalInfeasible": "infeasible",
        "DualInfeasible": "unbounded",
    }
    status = mapping.get(status_name, "numerical-failure")
    x = np.asarray(sol.x) if status == "optimal" else None
    return status, x, int(sol.iterations), f"clarabel status {status_name}"


def _solve_cvxopt(prog, layout, tol):
    from cvxopt import matrix as cvxmat
    from cvxopt import solvers as cvxsolvers

    c, eq_f, eq_c, in_f, in_c, psd = _assemble(prog, layout, _fullvec)
    g = np.vstack([-in_f] + [-blk[0] for blk in psd]) \
        if (in_f.size or psd) else np.zeros((0, layout.n))
    h = np.concatenate([in_c] + [blk[1] for blk in psd]) \
        if (in_c.size or psd) else np.zeros(0)
    dims = {"l": in_f.shape[0], "q": [], "s": [blk[2] for blk in psd]}
    # below ~1e-8 cvxopt's scaling updates start dividing by zero
    t = max(tol, 1e-8)
    options = {"show_progress": False, "maxiters": 200,
               "abstol": t, "reltol": t, "feastol": t}
    kwargs = {}
    if eq_f.shape[0]:
        kwargs["A"] = cvxmat(eq_f)
        kwargs["b"] = cvxmat(-eq_c)
    try:
        sol = cvxsolvers.conelp(cvxmat(c), cvxmat(g), cvxmat(h), dims,
                                options=options, **kwargs)
    except (ValueError, ArithmeticError, ZeroDivisionError) as exc:
        return "numerical-failure", None, 0, f"cvxopt raised: {exc}"
    mapping = {"optimal": "optimal", "primal infeasible": "infeasible",
               "dual infeasible": "unbounded"}
    status = mapping.get(sol["status"], "numerical-failure")
    x = np.asarray(sol["x"]).ravel() if sol["x"] is not None \
        and status == "optimal" else None
    iters = int(sol.get("iterations", 0))
    return status, x, iters, f"cvxopt status {sol['status']}"


_BACKENDS = {"clarabel": _solve_clarabel, "cvxopt": _solve_cvxopt}
DEFAULT_BACKEND = "clarabel"


def _verify(prog: ConicProgram, values: dict, tol: float) -> str | None:
    """Residual check of every constraint; returns a message on violation."""
    for idx, con in enumerate(prog.constraints):
        if isinstance(con, LinearConstraint):
            val = con.expr.evaluate(values)
            scale = 1.0 + con.expr.magnitude(values)
            if con.sense == "eq" and abs(val) > tol * scale:
                return f"equality {idx} residual {val:.3e} exceeds tolerance"
            if con.sense == "ineq" and val < -tol * scale:
                return f"inequality {idx} violated by {-val:.3e}"
        else:
            m = con.expr.evaluate(values)
            eigmin = float(np.linalg.eigvalsh(m)[0])
            scale = 1.0 + float(np.linalg.norm(m, 2))
            if eigmin < -tol * scale:
                return (f"PSD block {idx} min eigenvalue {eigmin:.3e} "
                        f"below tolerance")
    return None


def solve(prog: ConicProgram, tol: float = DEFAULT_TOL,
          backend: str = None, dump_path=None) -> SolveReport:
    """Solve a validated program; deterministic for identical inputs.

    A reported ``optimal`` guarantees every constraint holds within ``tol``
    (relative); failing that, the report is downgraded to
    ``numerical-failure`` with diagnostics. ``infeasible`` and ``unbounded``
    pass through the backend's certificate.
    """
    prog.validate()
    backend = backend or DEFAULT_BACKEND
    if backend not in _BACKENDS:
        raise ProgramError(f"unknown backend {backend!r}")
    layout = _Layout(prog.variables)
    start = time.perf_counter()
    status, x, iterations, diag = _BACKENDS[backend](prog, layout, tol)
    elapsed = time.perf_counter() - start

    values: dict = {}
    objective = math.nan
    if status == "optimal":
        values = layout.unpack(x)
        bad = _verify(prog, values, tol)
        if bad is None:
            objective = prog.objective.evaluate(values)
        else:
            status = "numerical-failure"
            diag += f"; verification failed: {bad}"
            values = {}
            if dump_path is not None:
                prog.dump(dump_path)
                diag += f"; program dumped to {dump_path}"
    elif dump_path is not None and status == "numerical-failure":
        prog.dump(dump_path)
        diag += f"; program dumped to {dump_path}"

    return SolveReport(status=status, objective_value=objective,
                       values=values, solve_time=elapsed,
                       iterations=iterations, backend=backend,
                       diagnostics=diag)
