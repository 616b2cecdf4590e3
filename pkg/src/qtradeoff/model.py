"""Parametrized pure-state families and the built-in example models."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, InvalidArgumentError, ParseError

FD_STEP = 1e-5


@dataclass(frozen=True)
class PureStateModel:
    """A map ``x -> |psi_x>`` from n real parameters to unit vectors in C^d.

    ``amplitude(x)`` returns the state. ``jacobian(x)``, when given, returns
    the n derivative vectors as an ``(n, d)`` array; otherwise central finite
    differences with step ``fd_step`` are used.
    """

    d: int
    n: int
    amplitude: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    labels: tuple = ()
    units: tuple = ()
    name: str = "model"
    fd_step: float = FD_STEP
    domain: Optional[Callable[[np.ndarray], Optional[str]]] = None
    reference_point: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise InvalidArgumentError(f"need d >= 1 and n >= 1, got d={self.d}, n={self.n}")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"x{j + 1}" for j in range(self.n)))
        if not self.units:
            object.__setattr__(self, "units", ("1",) * self.n)

    @property
    def derivative_mode(self):
        return "analytic" if self.jacobian is not None else "finite-difference"

    def check_point(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.n,):
            raise DomainError(f"{self.name}: expected {self.n} parameters, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise DomainError(f"{self.name}: non-finite parameter value")
        if self.domain is not None:
            msg = self.domain(x)
            if msg:
                raise DomainError(f"{self.name}: {msg}")
        return x

    def state(self, x):
        x = self.check_point(x)
        return np.asarray(self.amplitude(x), dtype=complex)


@dataclass(frozen=True)
class AncillaSpec:
    dim: int = 1
    state: Optional[np.ndarray] = None

    def vector(self):
        if self.state is None:
            xi = np.zeros(self.dim, dtype=complex)
            xi[0] = 1.0
            return xi
        xi = np.asarray(self.state, dtype=complex)
        if xi.shape != (self.dim,):
            raise InvalidArgumentError("ancilla state has the wrong dimension")
        if abs(np.linalg.norm(xi) - 1) > 1e-10:
            raise InvalidArgumentError("ancilla state must be normalized")
        return xi


def _finite_difference(model, x, h):
    cols = []
    for j in range(model.n):
        e = np.zeros(model.n)
        e[j] = h
        cols.append((model.state(x + e) - model.state(x - e)) / (2 * h))
    return np.array(cols)


def _phase_reference(psi):
    idx = np.flatnonzero(np.abs(psi) > 1e-12 * np.max(np.abs(psi)))[0]
    a = psi[idx]
    return np.conj(a) / abs(a)


def evaluate_with_derivatives(model: PureStateModel, x, mode=None):
    """Return ``(psi, dpsi)`` at ``x`` with ``dpsi`` of shape ``(n, d)``.

    The global phase is fixed so the first nonzero amplitude is real and
    positive, and each derivative has its ``Re<psi|d_j psi>`` component
    removed so the normalization identity holds exactly.
    """
    x = model.check_point(x)
    psi = model.state(x)
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-10:
        raise DomainError(f"{model.name}: state norm {nrm:.12f} is not 1")
    mode = mode or model.derivative_mode
    if mode == "analytic":
        if model.jacobian is None:
            raise InvalidArgumentError(f"{model.name} has no analytic derivatives")
        dpsi = np.asarray(model.jacobian(x), dtype=complex).reshape(model.n, model.d)
    elif mode == "finite-difference":
        dpsi = _finite_difference(model, x, model.fd_step)
    else:
        raise InvalidArgumentError(f"unknown derivative mode {mode!r}")
    ph = _phase_reference(psi)
    psi = psi * ph
    dpsi = dpsi * ph
    overlap = (psi.conj() @ dpsi.T).real
    dpsi = dpsi - overlap[:, None] * psi[None, :]
    return psi, dpsi


def augment(model: PureStateModel, anc: AncillaSpec) -> PureStateModel:
    """Tensor the model with a fixed ancilla state; derivatives act on the system only."""
    xi = anc.vector()
    if anc.dim == 1:
        return model

    def amplitude(x):
        return np.kron(model.amplitude(x), xi)

    jac = None
    if model.jacobian is not None:
        def jac(x):
            return np.array([np.kron(v, xi) for v in np.asarray(model.jacobian(x))])

    return PureStateModel(
        d=model.d * anc.dim, n=model.n, amplitude=amplitude, jacobian=jac,
        labels=model.labels, units=model.units, name=f"{model.name}+ancilla{anc.dim}",
        fd_step=model.fd_step, domain=model.domain, reference_point=model.reference_point,
        meta=dict(model.meta, ancilla_dim=anc.dim),
    )


# -- built-in families -------------------------------------------------------

def qubit_bloch():
    """``cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>`` over ``(theta, phi)``."""

    def amplitude(x):
        th, ph = x
        return np.array([np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2)])

    def jacobian(x):
        th, ph = x
        return np.array([
            [-0.5 * np.sin(th / 2), 0.5 * np.exp(1j * ph) * np.cos(th / 2)],
            [0.0, 1j * np.exp(1j * ph) * np.sin(th / 2)],
        ])

    return PureStateModel(
        d=2, n=2, amplitude=amplitude, jacobian=jacobian, labels=("theta", "phi"),
        units=("rad", "rad"), name="qubit_bloch", reference_point=np.array([np.pi / 2, 0.0]),
    )


def multiphase(d=3, n=None):
    """``sum_k sqrt(p_k) exp(i phi_k)|k>`` with ``p_0 = 1 - sum p_k`` and ``phi_0 = 0``.

    Parameters are ordered ``phi_1..phi_{d-1}, p_1..p_{d-1}``; with ``n`` below
    ``2d - 2`` only the leading ``n`` are free and the rest sit at
    ``phi = 0``, ``p = 1/d``.
    """
    d = int(d)
    full = 2 * d - 2
    n = full if n is None else int(n)
    if d < 2 or not 1 <= n <= full:
        raise InvalidArgumentError(f"multiphase needs d >= 2 and 1 <= n <= {full}")
    base = np.concatenate([np.zeros(d - 1), np.full(d - 1, 1.0 / d)])

    def unpack(x):
        full_x = base.copy()
        full_x[:n] = x
        return full_x[: d - 1], full_x[d - 1:]

    def domain(x):
        _, p = unpack(x)
        if np.any(p <= 0) or p.sum() >= 1:
            return "populations must be positive with sum below 1"
        return None

    def amplitude(x):
        phi, p = unpack(x)
        amps = np.empty(d, dtype=complex)
        amps[0] = np.sqrt(1 - p.sum())
        amps[1:] = np.sqrt(p) * np.exp(1j * phi)
        return amps

    def jacobian(x):
        phi, p = unpack(x)
        p0 = 1 - p.sum()
        rows = np.zeros((full, d), dtype=complex)
        for k in range(d - 1):
            rows[k, k + 1] = 1j * np.sqrt(p[k]) * np.exp(1j * phi[k])
            rows[d - 1 + k, k + 1] = np.exp(1j * phi[k]) / (2 * np.sqrt(p[k]))
            rows[d - 1 + k, 0] = -1 / (2 * np.sqrt(p0))
        return rows[:n]

    labels = tuple(f"phi{k}" for k in range(1, d)) + tuple(f"p{k}" for k in range(1, d))
    units = ("rad",) * (d - 1) + ("1",) * (d - 1)
    ref = base.copy()
    ref[: d - 1] = 0.3
    return PureStateModel(
        d=d, n=n, amplitude=amplitude, jacobian=jacobian, labels=labels[:n], units=units[:n],
        name="multiphase", domain=domain, reference_point=ref[:n], meta={"d": d, "n": n},
    )


def explicit(psi, dpsi):
    """Model echoing user-supplied ``|psi>`` and ``|d_j psi>`` at ``x = 0``.

    Away from the origin the family is ``normalize(psi + sum_j x_j dpsi_j)``,
    which is enough for local likelihood fits.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    dpsi = np.atleast_2d(np.asarray(dpsi, dtype=complex))
    if dpsi.shape[1] != psi.size:
        raise ParseError("derivative vectors must have the state's dimension")
    nrm = np.linalg.norm(psi)
    if nrm == 0 or not np.isfinite(nrm):
        raise ParseError("state vector must be finite and nonzero")
    psi = psi / nrm
    dpsi = dpsi / nrm
    n, d = dpsi.shape

    def amplitude(x):
        v = psi + x @ dpsi
        return v / np.linalg.norm(v)

    def jacobian(x):
        v = psi + x @ dpsi
        nv = np.linalg.norm(v)
        u = v / nv
        re = (u.conj() @ dpsi.T).real
        return (dpsi - re[:, None] * u[None, :]) / nv

    return PureStateModel(
        d=d, n=n, amplitude=amplitude, jacobian=jacobian, name="explicit",
        reference_point=np.zeros(n), meta={"psi": psi, "dpsi": dpsi},
    )


def random_model(d, n, rng):
    """Explicit model with Gaussian random state and derivatives (test fodder)."""
    psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    dpsi = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    return explicit(psi / np.linalg.norm(psi), dpsi)


def _pairs_to_complex(rows, what):
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: expected a list of [re, im] pairs") from exc
    if arr.ndim < 2 or arr.shape[-1] != 2:
        raise ParseError(f"{what}: expected a list of [re, im] pairs")
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{what}: non-finite entry")
    return arr[..., 0] + 1j * arr[..., 1]


def explicit_from_dict(doc):
    try:
        d = int(doc["d"])
        n = int(doc["n"])
        psi = _pairs_to_complex(doc["psi"], "psi")
        dpsi = np.array([_pairs_to_complex(r, f"dpsi[{j}]") for j, r in enumerate(doc["dpsi"])])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed model document: {exc}") from exc
    if psi.shape != (d,) or dpsi.shape != (n, d):
        raise ParseError(f"shape mismatch: psi {psi.shape}, dpsi {dpsi.shape}, declared d={d}, n={n}")
    return explicit(psi, dpsi)


def load_model_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return explicit_from_dict(doc)


def model_to_dict(psi, dpsi):
    """Serialize raw vectors in the explicit-model file format."""
    psi = np.asarray(psi, dtype=complex)
    dpsi = np.atleast_2d(np.asarray(dpsi, dtype=complex))
    return {
        "d": int(psi.size),
        "n": int(dpsi.shape[0]),
        "psi": [[float(z.real), float(z.imag)] for z in psi],
        "dpsi": [[[float(z.real), float(z.imag)] for z in row] for row in dpsi],
    }


BUILTINS = ("qubit_bloch", "multiphase", "explicit", "radar_biphoton")


def builtin(name, params: Optional[dict] = None) -> PureStateModel:
    params = dict(params or {})
    if name == "qubit_bloch":
        return qubit_bloch()
    if name == "multiphase":
        return multiphase(int(params.get("d", 3)), params.get("n"))
    if name == "explicit":
        if "psi" not in params or "dpsi" not in params:
            raise ParseError("explicit model needs 'psi' and 'dpsi'")
        if isinstance(params["psi"], (list, tuple)) and params["psi"] and isinstance(
            params["psi"][0], (list, tuple)
        ):
            doc = {"d": len(params["psi"]), "n": len(params["dpsi"]), **params}
            return explicit_from_dict(doc)
        return explicit(params["psi"], params["dpsi"])
    if name == "radar_biphoton":
        from . import radar

        scene_keys = {f for f in radar.RadarScene.__dataclass_fields__}
        scene = radar.RadarScene(**{k: float(v) for k, v in params.items() if k in scene_keys})
        grid = radar.TimeGrid(
            n_points=int(params.get("grid_n", radar.TimeGrid.n_points)),
            half_width=float(params.get("grid_w", radar.TimeGrid.half_width)),
        )
        return radar.biphoton_model(scene, grid)
    raise InvalidArgumentError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTINS)}")
