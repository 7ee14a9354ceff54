"""
Lippmann-Schwinger solver for scattering solutions, far fields, scattering matrices and a
radial partial-wave oracle.

Scattering solutions solve phi = phi_inc - G_E * (Q phi) with Q = 2iA.grad + i div A + A^2 + V.
The far field is read off the outgoing asymptotics phi ~ phi_inc + f e^{ik|x|} |x|^{-(n-1)/2}.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, linalg, special
from scipy.sparse.linalg import LinearOperator, gmres

from .exceptions import ConvergenceError, DomainError, IndexRangeError, ResonanceError, ShapeMismatchError
from .models import (
    CartesianGrid,
    DensityOnSphere,
    DirectionGrid,
    FarField,
    PartialWaveResult,
    PotentialSpec,
    SampledField,
    ScatteringMatrix,
    ScatteringSolution,
)
from .numkit import (
    SUPPORT_RTOL,
    antipodes,
    check_margin,
    green_kernel,
    harmonic_indices,
    harmonic_matrix,
    radial_wave,
    sphere_rule,
    support_mask,
    wavenumber,
)
from .potentials import apply_Q, perturbation_coefficient, radial_profile

logger = logging.getLogger(__name__)

Method = Literal["auto", "gmres", "dense"]

# Largest grids on which the dense fallback is allowed
DENSE_POINTS = {2: 64, 3: 24}

# Unitarity defect above which S-matrix assembly warns
UNITARITY_WARN = 1e-3

RadialFunction = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


def far_field_constant(n: int, k: float) -> complex:
    """c_n with f(nu, omega) = c_n int e^{-ik nu.y} (Q phi)(y) dy, from the Green kernel asymptotics."""
    return -0.5 * k ** ((n - 3) / 2.0) * (2.0 * np.pi) ** (-(n - 1) / 2.0) * np.exp(-0.25j * np.pi * (n - 3))


def smatrix_constant(n: int, energy: float) -> complex:
    """Prefactor of the amplitude operator in S = I + c F."""
    return 1j * np.exp(0.25j * np.pi * (n - 3)) * energy ** ((n - 1) / 4.0) * (2.0 * np.pi) ** (-(n - 1) / 2.0)


def plane_wave(points: np.ndarray, direction: np.ndarray, k: float) -> Tuple[np.ndarray, np.ndarray]:
    """e^{ik x.omega} and its gradient (components first) at points of shape (..., n)."""
    omega = np.asarray(direction, dtype=float)
    values = np.exp(1j * k * (np.asarray(points) @ omega))
    grad = 1j * k * omega.reshape((-1,) + (1,) * values.ndim) * values
    return values, grad


class LippmannSchwinger:
    """
    Lippmann-Schwinger operator restricted to the support of Q.

    The unknowns are phi on the support and, when a vector potential is present, the gradient
    of phi there. The gradient rows come from differentiating the integral equation with grad G,
    so the unknown itself is never differentiated numerically.
    """

    def __init__(
        self,
        V: SampledField,
        A: Optional[SampledField],
        energy: float,
        method: Method = "auto",
        tol: float = 1e-8,
        restart: int = 60,
        maxiter: int = 50,
        dense_max: int = 3000,
        condition_cap: float = 1e10,
        workers: Optional[int] = None,
        support_rtol: float = SUPPORT_RTOL,
        unitarity_warn: float = UNITARITY_WARN,
    ):
        if V.rank != 0:
            raise ShapeMismatchError(f"V must be scalar, got rank {V.rank}")
        if method not in ("auto", "gmres", "dense"):
            raise DomainError(f"unknown solve method {method!r}")
        check_margin(V, support_rtol)
        if A is not None:
            check_margin(A, support_rtol)
        self.grid = V.grid
        self.energy = float(energy)
        self.k = wavenumber(energy)
        self.kernel = green_kernel(self.grid, self.energy)
        self.tol = tol
        self.restart = restart
        self.maxiter = maxiter
        self.condition_cap = condition_cap
        self.workers = workers or min(8, os.cpu_count() or 1)
        self.support_rtol = support_rtol
        self.unitarity_warn = unitarity_warn

        n = self.grid.dimension
        coefficient = perturbation_coefficient(V, A)
        mask = support_mask(coefficient, n, support_rtol)
        if A is not None:
            mask |= support_mask(A.values, n, support_rtol)
        self.support = np.flatnonzero(mask.ravel())
        self.size = int(self.support.size)
        self.blocks = 1 if A is None else 1 + n
        self.unknowns = self.size * self.blocks
        self._c = coefficient.ravel()[self.support]
        self._a = None if A is None else A.values.reshape(n, -1)[:, self.support].astype(complex)
        self.points = self.grid.coordinates().reshape(-1, n)[self.support]

        small = self.grid.points <= DENSE_POINTS[n]
        if method == "auto":
            method = "dense" if small and self.unknowns <= dense_max else "gmres"
        self.method = method
        self.condition: Optional[float] = None
        self._lu = None
        logger.debug(f"LS operator: {self.size} support points, {self.unknowns} unknowns, method {self.method}")

    @property
    def support_radius(self) -> float:
        return float(np.linalg.norm(self.points, axis=-1).max(initial=0.0))

    def _source(self, X: np.ndarray) -> np.ndarray:
        """Q phi on the full grid for a batch of unknown vectors X of shape (b, unknowns)."""
        n = self.grid.dimension
        w = self._c * X[:, : self.size]
        if self._a is not None:
            g = X[:, self.size :].reshape(X.shape[0], n, self.size)
            w = w + 2j * np.einsum("jk,bjk->bk", self._a, g)
        full = np.zeros((X.shape[0], self.grid.points ** n), dtype=complex)
        full[:, self.support] = w
        return full.reshape((X.shape[0],) + self.grid.shape)

    def _restrict(self, u: np.ndarray, grad: Optional[np.ndarray]) -> np.ndarray:
        b = u.shape[0]
        parts = [u.reshape(b, -1)[:, self.support]]
        if grad is not None:
            g = grad.reshape(b, self.grid.dimension, -1)[:, :, self.support]
            parts.append(g.reshape(b, -1))
        return np.concatenate(parts, axis=1)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Batched matvec (I + restricted G Q) applied to rows of X."""
        w = self._source(X)
        if self.blocks == 1:
            return X + self._restrict(self.kernel.convolve(w), None)
        u, grad = self.kernel.convolve(w, gradient=True)
        return X + self._restrict(u, grad)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x[None, :])[0]

    def rhs(self, incident: np.ndarray, incident_gradient: np.ndarray) -> np.ndarray:
        parts = [incident.ravel()[self.support]]
        if self.blocks > 1:
            parts.append(incident_gradient.reshape(self.grid.dimension, -1)[:, self.support].ravel())
        return np.concatenate(parts)

    def assemble(self, batch: int = 32) -> np.ndarray:
        """Dense system matrix, one batch of unit vectors at a time."""
        m = self.unknowns
        M = np.empty((m, m), dtype=complex)
        for start in range(0, m, batch):
            stop = min(m, start + batch)
            E = np.zeros((stop - start, m), dtype=complex)
            E[np.arange(stop - start), np.arange(start, stop)] = 1.0
            M[:, start:stop] = self.apply(E).T
        return M

    def _factor(self) -> None:
        if self._lu is not None:
            return
        M = self.assemble()
        self.condition = float(np.linalg.cond(M))
        if self.condition > self.condition_cap:
            raise ResonanceError(
                f"Lippmann-Schwinger matrix has condition number {self.condition:.3g} at E={self.energy}; "
                "shift the energy slightly and retry"
            )
        self._lu = linalg.lu_factor(M)
        logger.info(f"Dense LS factorization: {self.unknowns} unknowns, condition {self.condition:.3g}")

    def _gmres(self, b: np.ndarray) -> Tuple[np.ndarray, List[float]]:
        history: List[float] = []
        op = LinearOperator((self.unknowns, self.unknowns), matvec=self.matvec, dtype=complex)
        x, info = gmres(
            op,
            b,
            rtol=self.tol,
            atol=0.0,
            restart=self.restart,
            maxiter=self.maxiter,
            callback=history.append,
            callback_type="pr_norm",
        )
        if info > 0:
            ref = history[-self.restart - 1] if len(history) > self.restart else history[0]
            if history[-1] > 0.99 * ref:
                raise ResonanceError(
                    f"GMRES stagnated at residual {history[-1]:.3g} (E={self.energy}); "
                    "the system is near resonant, shift the energy and retry",
                    history,
                )
            raise ConvergenceError(
                f"GMRES did not reach rtol={self.tol:g} in {len(history)} iterations", history
            )
        if info < 0:
            raise ConvergenceError(f"GMRES rejected its input (info={info})", history)
        return x, history

    def solve_system(self, B: np.ndarray) -> Tuple[np.ndarray, List[List[float]]]:
        """Solve for every column of B; returns the solutions as columns with residual histories."""
        if self.unknowns == 0:
            return np.zeros_like(B), [[] for _ in range(B.shape[1])]
        if self.method == "dense":
            self._factor()
            return linalg.lu_solve(self._lu, B), [[] for _ in range(B.shape[1])]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            results = list(pool.map(self._gmres, [B[:, j] for j in range(B.shape[1])]))
        return np.stack([x for x, _ in results], axis=1), [h for _, h in results]

    def solve(
        self, incidents: Sequence[Tuple[np.ndarray, np.ndarray]], directions: Optional[np.ndarray] = None
    ) -> List[ScatteringSolution]:
        """
        Solve the LS equation for a batch of incident fields.

        Args:
            incidents: Pairs (values, gradient) of incident fields on the full grid
            directions: Optional incident directions recorded on the solutions

        Returns:
            One ScatteringSolution per incident field, in order
        """
        if not incidents:
            return []
        B = np.stack([self.rhs(u, g) for u, g in incidents], axis=1)
        X, histories = self.solve_system(B)
        residuals = np.linalg.norm(self.apply(X.T) - B.T, axis=1) / np.maximum(np.linalg.norm(B, axis=0), 1e-300)
        W = self._source(X.T)
        u, grad = self.kernel.convolve(W, gradient=True)
        out = []
        for j, (inc, inc_grad) in enumerate(incidents):
            out.append(
                ScatteringSolution(
                    energy=self.energy,
                    field=SampledField(self.grid, inc - u[j], "wavefunction"),
                    gradient=SampledField(self.grid, inc_grad - grad[j], "gradient"),
                    source=SampledField(self.grid, W[j], "source"),
                    direction=None if directions is None else np.asarray(directions[j]),
                    residual=float(residuals[j]),
                    iterations=len(histories[j]),
                    residual_history=list(histories[j]),
                    monitor={
                        "method": self.method,
                        "unknowns": self.unknowns,
                        "condition": self.condition,
                    },
                )
            )
        return out

    def solve_plane_waves(self, directions: np.ndarray) -> List[ScatteringSolution]:
        x = self.grid.coordinates()
        incidents = [plane_wave(x, omega, self.k) for omega in np.atleast_2d(directions)]
        return self.solve(incidents, np.atleast_2d(directions))

    def amplitudes(self, nodes: np.ndarray, solutions: Sequence[ScatteringSolution]) -> np.ndarray:
        """Far-field amplitudes: rows are outgoing nodes nu, columns are solutions."""
        n = self.grid.dimension
        if self.size == 0:
            return np.zeros((len(nodes), len(solutions)), dtype=complex)
        phase = np.exp(-1j * self.k * (np.asarray(nodes) @ self.points.T))
        sources = np.stack([s.source.values.ravel()[self.support] for s in solutions], axis=1)
        return far_field_constant(n, self.k) * self.grid.cell_volume * (phase @ sources)


def scattering_solution(
    V: SampledField, A: Optional[SampledField], direction: np.ndarray, energy: float, **options
) -> ScatteringSolution:
    """
    Scattering solution for one incident direction.

    Args:
        V: Sampled electric potential
        A: Sampled vector potential or None
        direction: Unit incident direction omega
        energy: Energy E > 0
        **options: Solver options passed to LippmannSchwinger

    Returns:
        ScatteringSolution with the total field, its gradient and the source Q phi
    """
    ls = LippmannSchwinger(V, A, energy, **options)
    return ls.solve_plane_waves(np.asarray(direction, dtype=float)[None, :])[0]


def default_direction_degree(ls: LippmannSchwinger, degree: int) -> int:
    """Quadrature degree resolving both the harmonic truncation and the far-field bandwidth."""
    return max(2 * degree, int(np.ceil(ls.k * ls.support_radius)) + 4)


def far_field(
    V: SampledField,
    A: Optional[SampledField],
    energy: float,
    dirs: DirectionGrid,
    ls: Optional[LippmannSchwinger] = None,
    **options,
) -> FarField:
    """Scattering amplitude f(nu_q, omega_q') for every pair of nodes of a direction grid."""
    ls = ls or LippmannSchwinger(V, A, energy, **options)
    solutions = ls.solve_plane_waves(dirs.nodes)
    return FarField(energy=float(energy), dirs=dirs, values=ls.amplitudes(dirs.nodes, solutions))


def unitarity_defect(S) -> float:
    """Spectral norm of S^H S - I."""
    M = S.matrix if isinstance(S, ScatteringMatrix) else np.asarray(S)
    return float(np.linalg.norm(M.conj().T @ M - np.eye(M.shape[0]), 2))


def smatrix_from_farfield(ff: FarField, degree: Optional[int] = None, warn_above: float = UNITARITY_WARN) -> ScatteringMatrix:
    """
    Assemble S = I + c F in the harmonic basis from a far field on a quadrature grid.

    Entry (a, b) is (S Y_b, Y_a) with the amplitude operator discretized by the grid's own rule.
    """
    dirs = ff.dirs
    L = dirs.degree // 2 if degree is None else degree
    if 2 * L > dirs.degree:
        raise IndexRangeError(f"direction grid of degree {dirs.degree} cannot resolve harmonics up to {L}")
    n = dirs.dimension
    Y = harmonic_matrix(n, L, dirs.nodes)
    WY = dirs.weights[:, None] * Y
    K = WY.conj().T @ ff.values @ WY
    matrix = np.eye(Y.shape[1], dtype=complex) + smatrix_constant(n, ff.energy) * K
    defect = unitarity_defect(matrix)
    if defect > warn_above:
        logger.warning(f"S-matrix at E={ff.energy} has unitarity defect {defect:.3e}")
    return ScatteringMatrix(ff.energy, n, L, matrix, "farfield", "harmonic", defect)


def scattering_matrix(
    V: SampledField,
    A: Optional[SampledField],
    energy: float,
    degree: int,
    dirs: Optional[DirectionGrid] = None,
    ls: Optional[LippmannSchwinger] = None,
    **options,
) -> ScatteringMatrix:
    """S(E) through the far-field path, choosing a direction grid when none is given."""
    ls = ls or LippmannSchwinger(V, A, energy, **options)
    dirs = dirs or sphere_rule(V.grid.dimension, default_direction_degree(ls, degree))
    return smatrix_from_farfield(far_field(V, A, energy, dirs, ls=ls), degree, warn_above=ls.unitarity_warn)


def trace_values(energy: float, phi: SampledField, nodes: np.ndarray) -> np.ndarray:
    """(T0(E) phi)(omega) at nodes by grid quadrature."""
    n = phi.grid.dimension
    k = wavenumber(energy)
    mask = support_mask(phi.values, n).ravel()
    x = phi.grid.coordinates().reshape(-1, n)[mask]
    values = phi.values.ravel()[mask]
    const = 2 ** -0.5 * energy ** ((n - 2) / 4.0) * (2.0 * np.pi) ** (-n / 2.0) * phi.grid.cell_volume
    if x.shape[0] == 0:
        return np.zeros(len(nodes), dtype=complex)
    return const * (np.exp(-1j * k * (np.asarray(nodes) @ x.T)) @ values)


def trace_T0(energy: float, phi: SampledField, degree: int, dirs: Optional[DirectionGrid] = None) -> DensityOnSphere:
    """Harmonic coefficients of the trace T0(E) phi up to degree."""
    n = phi.grid.dimension
    if dirs is None:
        mask = support_mask(phi.values, n)
        radius = float(phi.grid.radius()[mask].max(initial=0.0))
        dirs = sphere_rule(n, max(2 * degree, int(np.ceil(wavenumber(energy) * radius)) + 8))
    values = trace_values(energy, phi, dirs.nodes)
    Y = harmonic_matrix(n, degree, dirs.nodes)
    return DensityOnSphere(n, degree, Y.conj().T @ (dirs.weights * values))


def _irregular(n: int, l: int, z: np.ndarray, derivative: bool = False) -> np.ndarray:
    if n == 3:
        return special.spherical_yn(l, z, derivative=derivative)
    return special.yvp(l, z) if derivative else special.yv(l, z)


def _well(spec: PotentialSpec) -> Optional[Tuple[float, float]]:
    """(value, radius) when V is a single centered well or zero, without a cutoff; else None."""
    live = [p for p in spec.electric if p.family != "zero"]
    if not live:
        return 0.0, np.inf
    if spec.cutoff is not None or len(live) != 1 or live[0].family != "well":
        return None
    p = live[0].params
    return float(p.get("value", -1.0)) * float(p.get("scale", 1.0)), float(p.get("radius", 1.0))


class RadialSolution:
    """
    Solution of the radial equation regular at the origin, on [0, r_max].

    R'' = -((n-1)/r) R' + (V - E + l(l+n-2)/r^2) R. A single well is solved in closed form; any
    other radial potential is integrated with DOP853, split at breakpoints and renormalized on
    geometric segments so that high orders neither overflow nor underflow.
    """

    def __init__(
        self,
        spec: PotentialSpec,
        l: int,
        energy: float,
        r_max: float,
        method: Literal["auto", "ode", "analytic"] = "auto",
        rtol: float = 1e-11,
    ):
        self.n = spec.dimension
        self.l = l
        self.energy = energy
        self.k = wavenumber(energy)
        self.r_max = float(r_max)
        self._V, breaks, _ = radial_profile(spec)
        well = _well(spec)
        if method == "analytic" and well is None:
            raise DomainError("closed-form radial solutions exist only for a single well")
        self._well = well if method != "ode" else None
        if self._well is None:
            self._integrate(breaks, rtol)
        values, _ = self._raw(np.linspace(0.0, self.r_max, 257))
        self._peak = float(np.abs(values).max())

    def _interior(self, r: np.ndarray, value: float) -> Tuple[np.ndarray, np.ndarray]:
        n, l = self.n, self.l
        kappa2 = self.energy - value
        if kappa2 > 0:
            kappa = np.sqrt(kappa2)
            return radial_wave(n, l, "regular", kappa * r).real, kappa * radial_wave(n, l, "regular", kappa * r, True).real
        if kappa2 < 0:
            q = np.sqrt(-kappa2)
            if n == 3:
                return special.spherical_in(l, q * r), q * special.spherical_in(l, q * r, derivative=True)
            return special.iv(l, q * r), q * special.ivp(l, q * r)
        return r ** l, l * r ** max(l - 1, 0) if l > 0 else np.zeros_like(r)

    def _raw_well(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        value, a = self._well
        inside = r < a
        R = np.empty_like(r)
        dR = np.empty_like(r)
        R[inside], dR[inside] = self._interior(r[inside], value)
        out = ~inside
        if out.any():
            Ra, dRa = self._interior(np.array([a]), value)
            ka = self.k * a
            M = np.array(
                [
                    [radial_wave(self.n, self.l, "regular", ka).real, _irregular(self.n, self.l, ka)],
                    [
                        self.k * radial_wave(self.n, self.l, "regular", ka, True).real,
                        self.k * _irregular(self.n, self.l, ka, True),
                    ],
                ]
            )
            alpha, beta = np.linalg.solve(M, np.array([Ra[0], dRa[0]]))
            z = self.k * r[out]
            R[out] = alpha * radial_wave(self.n, self.l, "regular", z).real + beta * _irregular(self.n, self.l, z)
            dR[out] = self.k * (
                alpha * radial_wave(self.n, self.l, "regular", z, True).real + beta * _irregular(self.n, self.l, z, True)
            )
        return R, dR

    def _integrate(self, breaks: List[float], rtol: float) -> None:
        n, l, E = self.n, self.l, self.energy
        self.r0 = self.r_max * 10.0 ** (-min(6.0, 200.0 / (l + 1)))
        edges = {self.r0, self.r_max}
        r = self.r0
        while r * 2.0 < self.r_max:
            r *= 2.0
            edges.add(r)
        edges.update(b for b in breaks if self.r0 < b < self.r_max)
        edges = sorted(edges)

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            v = float(self._V(np.asarray(t)))
            return np.array([y[1], -(n - 1) / t * y[1] + (v - E + l * (l + n - 2) / t ** 2) * y[0]])

        v0 = float(self._V(np.asarray(self.r0)))
        y = np.array([1.0, l / self.r0 + (v0 - E) * self.r0 / (2 * l + n)])
        self._segments = []
        log_scale = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            sol = integrate.solve_ivp(rhs, (a, b), y, method="DOP853", rtol=rtol, atol=rtol * 1e-3, dense_output=True)
            if not sol.success:
                raise ConvergenceError(f"radial integration failed on [{a:.3g}, {b:.3g}]: {sol.message}")
            self._segments.append((a, b, sol.sol, log_scale))
            end = sol.y[:, -1]
            s = abs(end[0]) + abs(end[1]) * b
            log_scale += np.log(s)
            y = end / s
        self._log_end = log_scale

    def _raw(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self._well is not None:
            return self._raw_well(r)
        R = np.zeros_like(r)
        dR = np.zeros_like(r)
        for a, b, dense, ls in self._segments:
            sel = (r >= a) & (r <= b)
            if sel.any():
                y = dense(r[sel]) * np.exp(ls - self._log_end)
                R[sel], dR[sel] = y[0], y[1]
        head = r < self.r0
        if head.any():
            a, _, dense, ls = self._segments[0]
            R0, dR0 = dense(a) * np.exp(ls - self._log_end)
            R[head] = R0 * (r[head] / self.r0) ** self.l
            dR[head] = dR0 * (r[head] / self.r0) ** max(self.l - 1, 0) if self.l > 0 else dR0 * r[head] / self.r0
        return R, dR

    def __call__(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """R and R' scaled so that max |R| on [0, r_max] is 1."""
        R, dR = self._raw(r)
        return R / self._peak, dR / self._peak

    def boundary(self) -> Tuple[float, float]:
        R, dR = self(np.array([self.r_max]))
        return float(R[0]), float(dR[0])

    def log_derivative(self) -> float:
        R, dR = self.boundary()
        return dR / R


def _phase_factor(n: int, l: int, k: float, a: float, R: float, dR: float) -> complex:
    ka = k * a
    j, dj = radial_wave(n, l, "regular", ka).real, radial_wave(n, l, "regular", ka, True).real
    y, dy = _irregular(n, l, ka), _irregular(n, l, ka, True)
    N = k * dj * R - dR * j
    D = k * dy * R - dR * y
    return complex(D + 1j * N) / complex(D - 1j * N)


def _total_radial(n: int, l: int, k: float, a: float, t: complex, solution: Optional[RadialSolution]) -> RadialFunction:
    ka = k * a
    h_a = radial_wave(n, l, "outgoing", ka)
    dh_a = radial_wave(n, l, "outgoing", ka, True)
    j_a = radial_wave(n, l, "regular", ka)
    dj_a = radial_wave(n, l, "regular", ka, True)
    scale = 0j
    if solution is not None:
        Ra, dRa = solution.boundary()
        if abs(Ra) * k >= abs(dRa):
            scale = (j_a + t * h_a) / Ra
        else:
            scale = k * (dj_a + t * dh_a) / dRa

    def radial(r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        u = np.zeros(r.shape, dtype=complex)
        du = np.zeros(r.shape, dtype=complex)
        inside = r < a
        if inside.any():
            R, dR = solution(r[inside])
            u[inside], du[inside] = scale * R, scale * dR
        out = ~inside
        if out.any():
            z = k * r[out]
            j, dj = radial_wave(n, l, "regular", z), radial_wave(n, l, "regular", z, True)
            if t == 0:
                u[out], du[out] = j, k * dj
            else:
                u[out] = j + t * radial_wave(n, l, "outgoing", z)
                du[out] = k * (dj + t * radial_wave(n, l, "outgoing", z, True))
        return u, du

    return radial


def partialwave_far_field(n: int, k: float, factors: np.ndarray, dirs: DirectionGrid) -> np.ndarray:
    """Partial-wave sum of f(nu_q, omega_q') from the factors e^{2i delta_l}."""
    c = np.clip(dirs.nodes @ dirs.nodes.T, -1.0, 1.0)
    out = np.zeros(c.shape, dtype=complex)
    if n == 3:
        for l, s in enumerate(factors):
            out += (2 * l + 1) * (s - 1.0) / (2j * k) * special.eval_legendre(l, c)
        return out
    t = 0.5 * (factors - 1.0)
    series = t[0] + 2.0 * sum(t[m] * special.eval_chebyt(m, c) for m in range(1, len(t)))
    return np.sqrt(2.0 / (np.pi * k)) * np.exp(-0.25j * np.pi) * series


def partialwave_oracle(
    spec: PotentialSpec,
    energy: float,
    l_max: int,
    dirs: Optional[DirectionGrid] = None,
    method: Literal["auto", "ode", "analytic"] = "auto",
) -> PartialWaveResult:
    """
    Phase shifts, far field and S-matrix of a compactly supported radial potential.

    The radial equation is solved per order and matched to regular and outgoing waves at the
    support radius a: tan(delta_l) = (k j'(ka) - beta j(ka)) / (k y'(ka) - beta y(ka)) with
    beta the interior log-derivative.
    """
    n = spec.dimension
    k = wavenumber(energy)
    _, _, a = radial_profile(spec)
    factors = np.ones(l_max + 1, dtype=complex)
    radial: List[RadialFunction] = []
    for l in range(l_max + 1):
        solution = None
        if a > 0:
            solution = RadialSolution(spec, l, energy, a, method)
            factors[l] = _phase_factor(n, l, k, a, *solution.boundary())
        radial.append(_total_radial(n, l, k, a, 0.5 * (factors[l] - 1.0), solution))
    phases = 0.5 * np.angle(factors)
    if abs(phases[-1]) > 1e-12:
        logger.warning(f"Partial-wave sum for {spec.name} not converged: |delta_{l_max}| = {abs(phases[-1]):.2e}")

    dirs = dirs or sphere_rule(n, max(2 * l_max, 2))
    labels = harmonic_indices(n, l_max)
    matrix = np.diag([factors[l] for l, _ in labels])
    S = ScatteringMatrix(energy, n, l_max, matrix, "oracle", "harmonic", unitarity_defect(matrix))
    ff = FarField(energy, dirs, partialwave_far_field(n, k, factors, dirs))
    return PartialWaveResult(energy, n, a, l_max, phases, S, ff, radial)


def _legendre_table(l_max: int, c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    P = np.zeros((l_max + 1,) + c.shape)
    dP = np.zeros_like(P)
    P[0] = 1.0
    if l_max >= 1:
        P[1] = c
        dP[1] = 1.0
    for l in range(1, l_max):
        P[l + 1] = ((2 * l + 1) * c * P[l] - l * P[l - 1]) / (l + 1)
        dP[l + 1] = dP[l - 1] + (2 * l + 1) * P[l]
    return P, dP


def oracle_field(
    result: PartialWaveResult, points: np.ndarray, direction: np.ndarray, gradient: bool = False
):
    """
    Total field of the partial-wave oracle for incidence along direction, at arbitrary points.

    Returns values, or (values, gradient) with gradient components on the last axis.
    """
    n = result.dimension
    x = np.asarray(points, dtype=float)
    omega = np.asarray(direction, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    unit = x / safe[..., None]
    c = np.clip(unit @ omega, -1.0, 1.0)
    L = result.l_max
    if n == 3:
        angular, dangular = _legendre_table(L, c)
        weight = np.array([(2 * l + 1) * 1j ** l for l in range(L + 1)])
    else:
        angular = np.stack([special.eval_chebyt(m, c) for m in range(L + 1)])
        dangular = np.stack([m * special.eval_chebyu(m - 1, c) if m else np.zeros_like(c) for m in range(L + 1)])
        weight = np.array([(1.0 if m == 0 else 2.0) * 1j ** m for m in range(L + 1)])

    values = np.zeros(r.shape, dtype=complex)
    grad = np.zeros(x.shape, dtype=complex)
    flat = r.ravel()
    for l in range(L + 1):
        u, du = (v.reshape(r.shape) for v in result.radial[l](flat))
        values += weight[l] * u * angular[l]
        if gradient:
            tangential = (omega - c[..., None] * unit) / safe[..., None]
            grad += weight[l] * (
                (du * angular[l])[..., None] * unit + (u * dangular[l])[..., None] * tangential
            )
    if not gradient:
        return values
    origin = r == 0
    if origin.any() and L >= 1:
        _, du1 = result.radial[1](np.zeros(1))
        grad[origin] = weight[1] * du1[0] * omega
    return values, grad


def born_far_field(V: SampledField, energy: float, dirs: DirectionGrid) -> FarField:
    """First Born amplitude c_n int e^{-ik(nu - omega).y} V(y) dy."""
    n = V.grid.dimension
    k = wavenumber(energy)
    mask = support_mask(V.values, n).ravel()
    x = V.grid.coordinates().reshape(-1, n)[mask]
    v = V.values.ravel()[mask]
    out_phase = np.exp(-1j * k * (dirs.nodes @ x.T))
    in_phase = np.exp(1j * k * (dirs.nodes @ x.T))
    values = far_field_constant(n, k) * V.grid.cell_volume * ((out_phase * v) @ in_phase.T)
    return FarField(float(energy), dirs, values)


def optical_theorem_defect(
    V: SampledField,
    A: Optional[SampledField],
    direction: np.ndarray,
    energy: float,
    dirs: DirectionGrid,
    **options,
) -> float:
    """Relative defect of int |f(nu, omega)|^2 dnu = (4 pi / k) Im f(omega, omega)."""
    if V.grid.dimension != 3:
        raise DomainError("the optical theorem check is implemented for n = 3")
    ls = LippmannSchwinger(V, A, energy, **options)
    omega = np.asarray(direction, dtype=float)
    solution = ls.solve_plane_waves(omega[None, :])
    f = ls.amplitudes(dirs.nodes, solution)[:, 0]
    forward = ls.amplitudes(omega[None, :], solution)[0, 0]
    sigma = float(np.sum(dirs.weights * np.abs(f) ** 2))
    expected = 4.0 * np.pi / ls.k * forward.imag
    return abs(sigma - expected) / max(abs(expected), 1e-300)


def reciprocity_defect(ff: FarField) -> float:
    """Relative max-norm of f(nu, omega) - f(-omega, -nu)."""
    anti = antipodes(ff.dirs)
    swapped = ff.values[np.ix_(anti, anti)].T
    scale = max(float(np.abs(ff.values).max()), 1e-300)
    return float(np.abs(ff.values - swapped).max() / scale)


def equation_residual(
    solution: ScatteringSolution,
    V: SampledField,
    A: Optional[SampledField],
    mask: Optional[np.ndarray] = None,
) -> float:
    """
    Relative max-norm of (i grad + A)^2 phi + V phi - E phi for a free incident field.

    The free part of the operator acts in Fourier space on the scattered part -G*(Q phi); Q phi is
    recomputed pointwise from the returned field and gradient.
    """
    kernel = green_kernel(V.grid, float(solution.energy))
    Q = apply_Q(V, A, solution.field, solution.gradient).values
    residual = Q - kernel.apply_operator(solution.source.values)
    if mask is None:
        mask = np.ones(V.grid.shape, dtype=bool)
    scale = max(float(np.abs(solution.field.values[mask]).max()), 1e-300)
    return float(np.abs(residual[mask]).max() / scale)
