"""Finite spectral representations of operator pairs (A, B).

A model stores the first N eigenvalues of A and the coupling matrix
``coupling[j, k] = <B phi_j, phi_k>`` of the multiplication operator B in the
orthonormal eigenbasis. Indices are 0-based in code; "mode 1" (the ground
state) is ``coupling[0]``.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import HypothesisViolation, ParseError
from .quadrature import adaptive_gauss

KINDS = ("dirichlet-heat", "neumann-heat", "variable-coefficient", "radial-ball-3d", "custom")

GAP_TOL = 1e-10
SYMMETRY_TOL = 1e-10
DISPERSION_RTOL = 1e-10
# couplings below this are indistinguishable from quadrature noise
ZERO_COUPLING = 1e-14

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class QuadratureConfig:
    nodes: int = 20
    tol: float = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Truncated spectral data of one operator pair.

    ``shift`` is the amount already subtracted from the eigenvalues (see
    :func:`groundctl.simulate.shift_spectrum`); the original spectrum is
    ``eigenvalues + shift``. The dispersion hypothesis refers to the original
    spectrum.
    """

    kind: str
    eigenvalues: np.ndarray
    coupling: np.ndarray
    gap_alpha: float
    dispersion_q: float
    dispersion_b: float
    label: str = ""
    shift: float = 0.0
    weight: tuple = field(default=())

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float)
        cpl = np.array(self.coupling, dtype=float)
        if cpl.shape != (lam.size, lam.size):
            raise ParseError(
                f"coupling has shape {cpl.shape}, expected {(lam.size, lam.size)}"
            )
        lam.setflags(write=False)
        cpl.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "coupling", cpl)

    @property
    def n_modes(self):
        return self.eigenvalues.size

    @property
    def ground_coupling(self):
        """Row ``<B phi_1, phi_k>``, k = 1..N (also the vector B phi_1)."""
        return self.coupling[0]

    @property
    def b_matrix(self):
        """Matrix M with (B x)_k = sum_j M[k, j] x_j."""
        return self.coupling.T

    @property
    def original_eigenvalues(self):
        return self.eigenvalues + self.shift

    @property
    def operator_norm_b(self):
        """Spectral norm of the truncated coupling, floored at 1.

        This is a lower bound for the norm of B on the full space.
        """
        return max(1.0, float(np.linalg.norm(self.coupling, 2)))

    def to_dict(self):
        return {
            "kind": self.kind,
            "label": self.label,
            "n_modes": self.n_modes,
            "eigenvalues": self.eigenvalues.tolist(),
            "coupling": self.coupling.tolist(),
            "alpha": self.gap_alpha,
            "q": self.dispersion_q,
            "b": self.dispersion_b,
            "shift": self.shift,
        }


# -- eigenfunctions of the built-in problems ---------------------------------

def _poly(coeffs):
    coeffs = tuple(float(c) for c in coeffs)

    def mu(x):
        return np.polynomial.polynomial.polyval(x, coeffs)

    return mu


def eigenpairs(kind, n_modes):
    """Return ``(eigenvalues, phi, weight)`` for a built-in kind.

    ``phi(k, x)`` evaluates the k-th (1-based) normalized eigenfunction and
    ``weight(x)`` is the density of the inner product on [0, 1].
    """
    k = np.arange(1, n_modes + 1, dtype=float)
    one = lambda x: np.ones_like(x)
    if kind == "dirichlet-heat":
        lam = (k * np.pi) ** 2

        def phi(j, x):
            return math.sqrt(2.0) * np.sin(j * np.pi * x)

        return lam, phi, one
    if kind == "neumann-heat":
        # mode 1 is the constant, mode k is sqrt(2) cos((k-1) pi x)
        lam = ((k - 1) * np.pi) ** 2

        def phi(j, x):
            if j == 1:
                return np.ones_like(x)
            return math.sqrt(2.0) * np.cos((j - 1) * np.pi * x)

        return lam, phi, one
    if kind == "variable-coefficient":
        lam = 0.25 + (k * np.pi / _LN2) ** 2
        c = math.sqrt(2.0 / _LN2)

        def phi(j, x):
            return c * np.sin(j * np.pi * np.log1p(x) / _LN2) / np.sqrt(1.0 + x)

        return lam, phi, one
    if kind == "radial-ball-3d":
        lam = (k * np.pi) ** 2
        c = 1.0 / math.sqrt(2.0 * np.pi)

        def phi(j, r):
            r = np.asarray(r, dtype=float)
            safe = np.where(r == 0.0, 1.0, r)
            return np.where(r == 0.0, c * j * np.pi, c * np.sin(j * np.pi * safe) / safe)

        return lam, phi, lambda r: 4.0 * np.pi * np.asarray(r) ** 2
    raise ValueError(f"no built-in eigenfunctions for kind {kind!r}")


_DEFAULTS = {
    # kind: (mu coefficients, alpha, q, b)
    "dirichlet-heat": ((0.0, 0.0, 1.0), math.pi, 1.5, (2 * math.pi**2 - 3) / (6 * math.pi**2)),
    "neumann-heat": ((0.0, 0.0, 1.0), math.pi, 1.0, 2 * math.sqrt(2.0)),
    # b: the odd-k values of lambda_k^{3/2}|<x phi_1, phi_k>| decrease to ~25.9
    "variable-coefficient": ((0.0, 1.0), math.pi / _LN2, 1.5, 20.0),
    "radial-ball-3d": ((0.0, 0.0, 1.0), math.pi, 1.5, (2 * math.pi**2 - 3) / (6 * math.pi**2)),
}


def coupling_matrix(kind, n_modes, mu_coeffs, quadrature_cfg=None):
    cfg = quadrature_cfg or QuadratureConfig()
    if kind == "radial-ball-3d":
        # <mu phi_j, phi_k>_{L^2_r(B^3)} = 2 int_0^1 mu sin(j pi r) sin(k pi r) dr
        kind = "dirichlet-heat"
    _, phi, weight = eigenpairs(kind, n_modes)
    mu = _poly(mu_coeffs)
    out = np.empty((n_modes, n_modes))
    for j in range(1, n_modes + 1):
        for k in range(j, n_modes + 1):
            val = adaptive_gauss(
                lambda x: weight(x) * mu(x) * phi(j, x) * phi(k, x),
                0.0, 1.0, tol=cfg.tol, nodes=cfg.nodes,
            )
            out[j - 1, k - 1] = out[k - 1, j - 1] = val
    return out


def gram_of_eigenfunctions(kind, n_modes, quadrature_cfg=None):
    """Quadrature of <phi_j, phi_k> in the model's own inner product."""
    cfg = quadrature_cfg or QuadratureConfig()
    _, phi, weight = eigenpairs(kind, n_modes)
    out = np.empty((n_modes, n_modes))
    for j in range(1, n_modes + 1):
        for k in range(j, n_modes + 1):
            out[j - 1, k - 1] = out[k - 1, j - 1] = adaptive_gauss(
                lambda x: weight(x) * phi(j, x) * phi(k, x), 0.0, 1.0,
                tol=cfg.tol, nodes=cfg.nodes,
            )
    return out


def build_model(kind, n_modes, quadrature_cfg=None, mu=None, dispersion_b=None):
    """Build and validate a built-in spectral model.

    Parameters
    ----------
    kind : str
        One of the built-in kinds (not ``"custom"``).
    n_modes : int
        Truncation level N >= 2.
    quadrature_cfg : QuadratureConfig, optional
    mu : sequence of float, optional
        Polynomial coefficients (lowest degree first) of the multiplier
        defining B. Defaults to x**2 (x for ``variable-coefficient``).
    dispersion_b : float, optional
        Override of the declared dispersion constant.

    Raises
    ------
    QuadratureFailure, HypothesisViolation
    """
    if kind == "custom":
        raise ValueError("custom models are loaded with load_custom_spectral")
    if kind not in _DEFAULTS:
        raise ValueError(f"unknown model kind {kind!r}")
    if n_modes < 2:
        raise ValueError("n_modes must be at least 2")
    mu_default, alpha, q, b = _DEFAULTS[kind]
    mu_coeffs = tuple(mu) if mu is not None else mu_default
    lam, _, _ = eigenpairs(kind, n_modes)
    model = SpectralModel(
        kind=kind,
        eigenvalues=lam,
        coupling=coupling_matrix(kind, n_modes, mu_coeffs, quadrature_cfg),
        gap_alpha=alpha,
        dispersion_q=q,
        dispersion_b=b if dispersion_b is None else float(dispersion_b),
        label=kind,
        weight=mu_coeffs,
    )
    validate_model(model)
    return model


# -- hypotheses ----------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisReport:
    min_gap: float
    min_gap_shifted: float
    gap_alpha: float
    gap_ok: bool
    dispersion_q: float
    dispersion_b: float
    min_dispersion: float
    argmin_dispersion: int
    dispersion_ok: bool
    coupling_11: float
    ground_row_nonzero: bool
    symmetry_defect: float
    symmetric: bool
    ascending: bool

    @property
    def ok(self):
        return (self.ascending and self.gap_ok and self.symmetric
                and self.ground_row_nonzero and self.dispersion_ok)

    def to_dict(self):
        out = dict(self.__dict__)
        out["ok"] = self.ok
        return out


def _min_gap(values):
    r = np.sqrt(np.maximum(values, 0.0))
    return float(np.min(np.diff(r))) if r.size > 1 else math.inf


def verify_spectral_hypotheses(model):
    """Measure gap, dispersion and coupling properties of ``model``.

    The gap is reported for the stored spectrum and for the spectrum shifted
    so that its first eigenvalue is 0; the pass/fail decision uses the shifted
    one, which is the spectrum the control law runs on. Shifting never
    decreases gaps of square roots.
    """
    lam = model.eigenvalues
    orig = model.original_eigenvalues
    row = model.ground_coupling
    ascending = bool(np.all(np.diff(lam) > 0) and lam[0] >= 0)
    min_gap = _min_gap(lam)
    min_gap_shifted = _min_gap(lam - lam[0])
    if lam.size > 1:
        disp = orig[1:] ** model.dispersion_q * np.abs(row[1:])
        i = int(np.argmin(disp))
        min_disp, argmin = float(disp[i]), i + 2
    else:
        min_disp, argmin = math.inf, 0
    defect = float(np.max(np.abs(model.coupling - model.coupling.T)))
    return HypothesisReport(
        min_gap=min_gap,
        min_gap_shifted=min_gap_shifted,
        gap_alpha=model.gap_alpha,
        gap_ok=min_gap_shifted >= model.gap_alpha - GAP_TOL,
        dispersion_q=model.dispersion_q,
        dispersion_b=model.dispersion_b,
        min_dispersion=min_disp,
        argmin_dispersion=argmin,
        dispersion_ok=min_disp >= model.dispersion_b * (1 - DISPERSION_RTOL),
        coupling_11=float(row[0]),
        ground_row_nonzero=bool(np.all(np.abs(row) > ZERO_COUPLING)),
        symmetry_defect=defect,
        symmetric=defect <= SYMMETRY_TOL,
        ascending=ascending,
    )


def validate_model(model):
    """Raise :class:`HypothesisViolation` naming the first failed invariant."""
    rep = verify_spectral_hypotheses(model)
    if not rep.ascending:
        raise HypothesisViolation("ascending", "eigenvalues must be strictly ascending with lambda_1 >= 0")
    if not rep.gap_ok:
        raise HypothesisViolation(
            "gap", f"min sqrt-gap {rep.min_gap_shifted:.6g} < alpha {model.gap_alpha:.6g}"
        )
    if not rep.symmetric:
        raise HypothesisViolation("symmetry", f"coupling asymmetry {rep.symmetry_defect:.3g}")
    if not rep.ground_row_nonzero:
        k = int(np.argmin(np.abs(model.ground_coupling))) + 1
        raise HypothesisViolation("ground-coupling", f"<B phi_1, phi_{k}> vanishes")
    if not rep.dispersion_ok:
        raise HypothesisViolation(
            "dispersion",
            f"lambda_{rep.argmin_dispersion}^q |<B phi_1, phi_k>| = {rep.min_dispersion:.6g}"
            f" < b = {model.dispersion_b:.6g}",
        )
    return rep


def load_custom_spectral(path, validate=True):
    """Read a custom model from a JSON document.

    Expected keys: ``eigenvalues``, ``coupling`` (row-major N x N), ``alpha``,
    ``q``, ``b`` and ``label``.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return custom_model_from_dict(doc, validate=validate)


def custom_model_from_dict(doc, validate=True):
    if not isinstance(doc, dict):
        raise ParseError("custom spectral file must hold a JSON object")
    missing = [k for k in ("eigenvalues", "coupling", "alpha", "q", "b") if k not in doc]
    if missing:
        raise ParseError(f"missing fields: {', '.join(missing)}")
    try:
        lam = np.asarray(doc["eigenvalues"], dtype=float)
        cpl = np.asarray(doc["coupling"], dtype=float)
        alpha, q, b = float(doc["alpha"]), float(doc["q"]), float(doc["b"])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"non-numeric field: {exc}") from exc
    if lam.ndim != 1 or lam.size < 1:
        raise ParseError("eigenvalues must be a non-empty list")
    if cpl.shape != (lam.size, lam.size):
        raise ParseError(f"coupling must be {lam.size}x{lam.size}, got shape {cpl.shape}")
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(cpl))):
        raise ParseError("non-finite entries")
    if min(alpha, q, b) <= 0:
        raise ParseError("alpha, q and b must be positive")
    model = SpectralModel(
        kind="custom", eigenvalues=lam, coupling=cpl, gap_alpha=alpha,
        dispersion_q=q, dispersion_b=b, label=str(doc.get("label", "custom")),
    )
    if validate:
        validate_model(model)
    return model
