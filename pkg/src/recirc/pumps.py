"""Pump boundary data: injector/collector profiles, schedules, combined trace.

Each pump pair carries a scalar profile on its injector segment and one on
its collector segment, both nonnegative, supported on their segment, and
normalized so the boundary integral equals the segment measure. The pump
trace is

    psi = [ phi_inj / mu(T) - phi_col / mu(C) ] n,

whose net boundary flux vanishes; the time-dependent boundary velocity is
phi_g(t) = sum_k g_k(t) psi_k with volumetric rates g_k.

Profiles exist in two coupled representations: an exact arc-length closure
(used for reporting and boundary-quadrature checks of the construction) and
nodal values on the P2 boundary trace (used for strong imposition). The
nodal values vanish at segment endpoints and are rescaled so the *discrete*
trace integral equals the segment measure; without that rescaling the
interpolated trace has a spurious net flux at segment junctions and the
discrete Stokes lift is inconsistent.
"""

import numpy as np

from .errors import CompatibilityError

PROFILE_KINDS = ("flat", "mollified")

_EDGE_SHAPE_INTEGRALS = np.array([1 / 6, 1 / 6, 2 / 3])  # v0, v1, midpoint


class PumpProfile:
    """Scalar boundary profile on one tagged segment.

    Attributes
    ----------
    tag, kind, width : segment tag, "flat" or "mollified", ramp width [m]
    mu : segment measure [m]
    side, normal : side name and outward unit normal of the segment
    sdofs, values : boundary scalar DOFs of the segment and nodal values
    arcs : arc-length coordinate of each DOF from the segment start
    """

    def __init__(self, tag, kind, width, mu, side, normal, sdofs, arcs, values, closure):
        self.tag = tag
        self.kind = kind
        self.width = width
        self.mu = mu
        self.side = side
        self.normal = normal
        self.sdofs = sdofs
        self.arcs = arcs
        self.values = values
        self._closure = closure

    def eval(self, s):
        """Exact profile value at arc-length s (vectorized); 0 outside [0, mu]."""
        s = np.asarray(s, dtype=float)
        inside = (s >= 0) & (s <= self.mu)
        return np.where(inside, self._closure(np.clip(s, 0.0, self.mu)), 0.0)

    def scalar_field(self, n_scalar):
        """Nodal values scattered into a full scalar-DOF vector."""
        out = np.zeros(n_scalar)
        out[self.sdofs] = self.values
        return out


def _mollified_closure(mu, delta):
    scale = mu / (mu - delta)

    def closure(s):
        s = np.asarray(s, dtype=float)
        up = 0.5 * (1 - np.cos(np.pi * s / delta))
        down = 0.5 * (1 - np.cos(np.pi * (mu - s) / delta))
        val = np.ones_like(s)
        val = np.where(s < delta, up, val)
        val = np.where(s > mu - delta, down, val)
        return scale * val

    return closure


def build_profile(space, tag, kind="flat", width=None):
    """Build a pump profile on the segment carrying `tag`.

    For the mollified kind the profile ramps with raised cosines of width
    `width` at both segment ends (0 < width < mu/2) and is rescaled so its
    exact integral equals the segment measure; the flat kind is the
    indicator of the segment.
    """
    mesh = space.mesh
    edges = mesh.edges_of_tag(tag)
    if not edges:
        raise ValueError(f"no boundary edges carry tag {tag!r}")
    mu = sum(b.length for b in edges)
    if mu <= 0:
        raise ValueError(f"segment {tag!r} has zero measure")
    sides = {b.side for b in edges}
    if len(sides) > 1:
        raise ValueError(f"segment {tag!r} spans several sides {sides}")
    side = edges[0].side
    normal = edges[0].normal

    if kind == "flat":
        closure = lambda s: np.ones_like(np.asarray(s, dtype=float))
    elif kind == "mollified":
        if width is None or not (0 < width < mu / 2):
            raise ValueError(
                f"mollified profile needs 0 < width < mu/2 = {mu / 2}, got {width}"
            )
        closure = _mollified_closure(mu, width)
    else:
        raise ValueError(f"unknown profile kind {kind!r}, expected one of {PROFILE_KINDS}")

    start = min(b.span[0] for b in edges)
    axis = 0 if side in ("bottom", "top") else 1
    sdofs = space.tagged_scalar_dofs(tag)
    arcs = space.dof_coords[sdofs, axis] - start
    values = np.asarray(closure(arcs), dtype=float)
    end_node = (arcs < 1e-12) | (arcs > mu - 1e-12)
    values[end_node] = 0.0

    # rescale so the discrete trace integral matches mu exactly
    disc = _discrete_integral(space, tag, sdofs, values)
    if disc <= 0:
        raise ValueError(f"profile on {tag!r} has nonpositive discrete integral")
    values *= mu / disc

    return PumpProfile(tag, kind, width, mu, side, normal, sdofs, arcs, values, closure)


def _discrete_integral(space, tag, sdofs, values):
    lookup = {d: v for d, v in zip(sdofs, values)}
    total = 0.0
    for b, dofs in zip(space.mesh.boundary, space.bnd_edge_dofs):
        if b.tag != tag:
            continue
        nodal = np.array([lookup.get(d, 0.0) for d in dofs])
        total += b.length * float(_EDGE_SHAPE_INTEGRALS @ nodal)
    return total


def build_psi(injector, collector, space):
    """Combined trace field of one pump pair as a velocity coefficient vector.

    psi . n equals phi/mu(T) on the injector and -phi~/mu(C) on the
    collector, zero elsewhere; its net discrete boundary flux vanishes.
    """
    if injector.tag == collector.tag:
        raise ValueError("injector and collector must live on distinct segments")
    ns = space.n_scalar
    psi = np.zeros(space.n_velocity)
    for profile, sign in ((injector, 1.0), (collector, -1.0)):
        coef = sign / profile.mu
        for comp in range(2):
            psi[comp * ns + profile.sdofs] += coef * profile.values * profile.normal[comp]
    net = float(space.flux_vector @ psi)
    if abs(net) > 1e-10:
        raise CompatibilityError(
            f"pump trace has net flux {net:.3e}; profiles are not normalized"
        )
    return psi


class Schedule:
    """Piecewise-linear volumetric flow rate g(t) >= 0 with g(0) = 0."""

    def __init__(self, samples):
        samples = [(float(t), float(g)) for t, g in samples]
        if len(samples) < 2:
            raise ValueError("schedule needs at least two samples")
        ts = np.array([t for t, _ in samples])
        gs = np.array([g for _, g in samples])
        if ts[0] != 0.0:
            raise ValueError("schedule must start at t = 0")
        if gs[0] != 0.0:
            raise ValueError("g(0) must be 0 (pump compatibility condition)")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("schedule times must be strictly increasing")
        if np.any(gs < 0):
            raise ValueError("volumetric flow rates must be nonnegative")
        self.ts = ts
        self.gs = gs
        self.T = float(ts[-1])

    def eval(self, t):
        """(g(t), dg/dt(t)); the derivative takes the left limit at knots.

        Times within 1e-9 of a knot snap to it, so a time step landing on a
        knot sees the same one-sided derivative regardless of how its time
        accumulated in floating point.
        """
        if not (0.0 <= t <= self.T + 1e-12):
            raise ValueError(f"t = {t} outside the schedule horizon [0, {self.T}]")
        t = min(float(t), self.T)
        near = int(np.argmin(np.abs(self.ts - t)))
        if abs(self.ts[near] - t) <= 1e-9 * max(1.0, self.T):
            t = float(self.ts[near])
        g = float(np.interp(t, self.ts, self.gs))
        idx = int(np.searchsorted(self.ts, t, side="left"))
        idx = max(idx, 1)
        slope = (self.gs[idx] - self.gs[idx - 1]) / (self.ts[idx] - self.ts[idx - 1])
        return g, float(slope)


class Pump:
    """One collector-injector pair: profiles, trace field, schedule."""

    def __init__(self, injector, collector, psi, schedule):
        self.injector = injector
        self.collector = collector
        self.psi = psi
        self.schedule = schedule


class PumpSet:
    """All pump pairs of a configuration; evaluates the boundary field phi_g."""

    def __init__(self, pumps):
        self.pumps = list(pumps)

    def __len__(self):
        return len(self.pumps)

    def rates(self, t):
        """Arrays (g_k(t), dg_k/dt(t)) over pumps."""
        pairs = [p.schedule.eval(t) for p in self.pumps]
        return np.array([g for g, _ in pairs]), np.array([d for _, d in pairs])

    def phi_g(self, t, space):
        """Boundary velocity field at time t (velocity coefficient vector)."""
        g, _ = self.rates(t)
        out = np.zeros(space.n_velocity)
        for gk, p in zip(g, self.pumps):
            if gk != 0.0:
                out += gk * p.psi
        return out

    def net_flux(self, t, space):
        """Discrete net boundary flux of phi_g(t) (compatibility check)."""
        return float(space.flux_vector @ self.phi_g(t, space))
