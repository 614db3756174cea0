"""Spectral density models on the frequency interval [-1/2, 1/2].

A model supplies the density S(omega) for parameters theta, one-sided
omega-derivatives up to a declared order (used by the high-lag expansion of
Fourier coefficients), partial derivatives with respect to theta, and the
list of "rough points": interior frequencies where S is continuous but not
smooth.  The interval endpoints +-1/2 are always treated as expansion
boundaries and need not be listed.

Built-in models:

``white``     S(w) = t1                                   (t1 > 0)
``ar1``       S(w) = t1 / (1 - 2 t2 cos(2 pi w) + t2^2)   (t1 > 0, 0 < t2 < 1)
``expdecay``  S(w) = t1 exp(-t2 |w|)                      (t1 > 0, t2 > 0)

Custom models register analytic derivative closures; a finite-difference
fallback exists but is flagged as reduced accuracy and caps the usable
expansion order at 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    CapabilityError,
    FrequencyDomainError,
    ParameterDomainError,
    UsageError,
)

LEFT = "left"
RIGHT = "right"
TWO_SIDED = "two_sided"

_OMEGA_TOL = 1e-12


@dataclass(frozen=True)
class SpectralModel:
    """A parametric spectral density and its derivative suppliers.

    Evaluation callables receive ``(theta, omega)`` with ``omega`` a numpy
    array and must be numpy-vectorized.  The derivative callable receives an
    extra ``(order, sign)`` pair where ``sign`` is -1 (left), +1 (right) or
    0 (two-sided).  Instances are immutable and safe to share across threads.
    """

    name: str
    param_count: int
    rough_points: tuple[float, ...]
    symmetric: bool
    max_deriv_order: int
    value_fn: Callable
    deriv_fn: Callable
    theta_grad_fn: Optional[Callable] = None
    partial_builders: Optional[tuple] = None
    theta_box: Optional[Callable] = None
    box_text: str = ""
    nonnegative: bool = True
    reduced_accuracy: bool = False

    # -- parameter handling -------------------------------------------------

    def as_theta(self, theta) -> np.ndarray:
        """Validate and return theta as a float array (the ParamVector contract)."""
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        if th.ndim != 1 or th.size != self.param_count:
            raise ParameterDomainError(
                f"model '{self.name}' takes {self.param_count} parameters, got {th.size}"
            )
        if not np.all(np.isfinite(th)):
            raise ParameterDomainError(f"non-finite parameter in {th}")
        if self.theta_box is not None and not self.theta_box(th):
            raise ParameterDomainError(
                f"theta={th.tolist()} outside validity box of '{self.name}'"
                + (f" ({self.box_text})" if self.box_text else "")
            )
        return th

    # -- evaluation ---------------------------------------------------------

    def sdf(self, theta, omega):
        """S_theta(omega); omega may be scalar or array, in [-1/2, 1/2]."""
        th = self.as_theta(theta)
        om, scalar = _check_omega(omega)
        out = np.asarray(self.value_fn(th, om), dtype=float)
        return float(out[()]) if scalar else out

    def sdf_deriv(self, theta, omega, order, side=TWO_SIDED):
        """Order-``order`` omega-derivative, one- or two-sided.

        ``side`` must be ``left`` or ``right`` at rough points and at the
        endpoints; requesting ``two_sided`` there is a usage error.
        """
        th = self.as_theta(theta)
        om, scalar = _check_omega(omega)
        if order < 0 or int(order) != order:
            raise UsageError(f"derivative order must be a nonnegative integer, got {order}")
        if order > self.max_deriv_order:
            raise CapabilityError(
                f"model '{self.name}' supplies omega-derivatives up to order "
                f"{self.max_deriv_order}, got request for {order}"
            )
        if side not in (LEFT, RIGHT, TWO_SIDED):
            raise UsageError(f"side must be left/right/two_sided, got {side!r}")
        sign = {LEFT: -1, RIGHT: +1, TWO_SIDED: 0}[side]
        if sign == 0 and order >= 1:
            bad = [x for x in self.rough_points if np.any(np.abs(om - x) <= _OMEGA_TOL)]
            if bad or np.any(np.abs(np.abs(om) - 0.5) <= _OMEGA_TOL):
                raise UsageError(
                    "two-sided derivative requested at a rough point or endpoint; "
                    "pass side='left' or side='right'"
                )
        out = np.asarray(self.deriv_fn(th, om, int(order), sign), dtype=float)
        return float(out[()]) if scalar else out

    def sdf_theta_grad(self, theta, omega):
        """Gradient of S with respect to theta: shape (p,) + shape(omega)."""
        th = self.as_theta(theta)
        om, scalar = _check_omega(omega)
        if self.theta_grad_fn is not None:
            g = np.asarray(self.theta_grad_fn(th, om), dtype=float)
        else:
            g = np.stack([self.partial(j).value_fn(th, om) for j in range(self.param_count)])
        return g[:, ()] if scalar and g.ndim > 1 else g

    def partial(self, j) -> "SpectralModel":
        """The derivative channel dS/dtheta_j as a (signed) model.

        The returned object shares this model's rough points and validity box
        and supports the same one-sided omega-derivatives, so its Fourier
        coefficients can be computed by the same quadrature/expansion paths.
        """
        if not 0 <= j < self.param_count:
            raise UsageError(f"parameter index {j} out of range")
        if self.partial_builders is None:
            raise CapabilityError(
                f"model '{self.name}' does not supply theta-partial channels"
            )
        return self.partial_builders[j](self)

    def without_roughness(self) -> "SpectralModel":
        """Copy of the model with an empty rough-point list.

        Used to reproduce the behavior of expanding naively across kinks.
        """
        return replace(self, rough_points=())


def _check_omega(omega):
    om = np.asarray(omega, dtype=float)
    scalar = om.ndim == 0
    if np.any(np.abs(om) > 0.5 + _OMEGA_TOL):
        raise FrequencyDomainError("omega outside [-1/2, 1/2]")
    return np.clip(om, -0.5, 0.5), scalar


def _structural_checks(model: SpectralModel, probe_thetas=()):
    rp = model.rough_points
    if any(not -0.5 < x < 0.5 for x in rp):
        raise ValueError("rough points must lie strictly inside (-1/2, 1/2)")
    if list(rp) != sorted(set(rp)):
        raise ValueError("rough points must be strictly increasing without duplicates")
    if model.symmetric:
        pts = set(rp)
        for x in rp:
            if x != 0.0 and -x not in pts:
                raise ValueError("symmetric model must have mirrored rough points")
    if model.nonnegative:
        grid = np.linspace(-0.5, 0.5, 1000)
        for th in probe_thetas:
            s = model.sdf(th, grid)
            if not np.all(np.isfinite(s)) or np.any(s < 0):
                raise ValueError(
                    f"model '{model.name}' is negative or non-finite on the check grid"
                )


# -- module-level operation wrappers (the public verbs) ----------------------


def eval_sdf(model: SpectralModel, theta, omega):
    """Evaluate S_theta(omega)."""
    return model.sdf(theta, omega)


def eval_sdf_deriv(model: SpectralModel, theta, omega, order, side=TWO_SIDED):
    """Evaluate the one- or two-sided omega-derivative of given order."""
    return model.sdf_deriv(theta, omega, order, side)


def eval_sdf_grad_theta(model: SpectralModel, theta, omega):
    """Evaluate [dS/dtheta_1, ..., dS/dtheta_p] at omega."""
    return model.sdf_theta_grad(theta, omega)


# -- white noise --------------------------------------------------------------


def _white_value(th, om):
    return np.full_like(om, th[0])


def _white_deriv(th, om, order, sign):
    return np.full_like(om, th[0]) if order == 0 else np.zeros_like(om)


def _white_partial(parent):
    return SpectralModel(
        name="white.d0",
        param_count=parent.param_count,
        rough_points=(),
        symmetric=True,
        max_deriv_order=parent.max_deriv_order,
        value_fn=lambda th, om: np.ones_like(om),
        deriv_fn=lambda th, om, order, sign: (
            np.ones_like(om) if order == 0 else np.zeros_like(om)
        ),
        theta_box=parent.theta_box,
        nonnegative=False,
    )


def _make_white():
    return SpectralModel(
        name="white",
        param_count=1,
        rough_points=(),
        symmetric=True,
        max_deriv_order=64,
        value_fn=_white_value,
        deriv_fn=_white_deriv,
        theta_grad_fn=lambda th, om: np.ones((1,) + om.shape),
        partial_builders=(_white_partial,),
        theta_box=lambda th: th[0] > 0,
        box_text="sigma^2 > 0",
    )


# -- ar1: S(w) = t1 / (1 - 2 t2 cos(2 pi w) + t2^2) ---------------------------

_TWO_PI = 2.0 * math.pi


def _ar1_denom_derivs(th, om, m):
    """Derivatives d^(0..m) of d(w) = 1 - 2 t2 cos(2 pi w) + t2^2."""
    t2 = th[1]
    d = np.empty((m + 1,) + om.shape)
    d[0] = 1.0 - 2.0 * t2 * np.cos(_TWO_PI * om) + t2 * t2
    for i in range(1, m + 1):
        d[i] = -2.0 * t2 * _TWO_PI**i * np.cos(_TWO_PI * om + i * math.pi / 2.0)
    return d


def _reciprocal_derivs(d):
    """Derivatives of 1/d from derivatives of d (differentiate d * (1/d) = 1)."""
    m = d.shape[0] - 1
    inv = np.empty_like(d)
    inv[0] = 1.0 / d[0]
    for j in range(1, m + 1):
        acc = np.zeros_like(d[0])
        for i in range(1, j + 1):
            acc += math.comb(j, i) * d[i] * inv[j - i]
        inv[j] = -inv[0] * acc
    return inv


def _ar1_value(th, om):
    return th[0] / (1.0 - 2.0 * th[1] * np.cos(_TWO_PI * om) + th[1] ** 2)


def _ar1_deriv(th, om, order, sign):
    inv = _reciprocal_derivs(_ar1_denom_derivs(th, om, order))
    return th[0] * inv[order]


def _ar1_dt2_deriv(th, om, order, sign):
    # d/dt2 S = N(w) * (1/d)^2 with N = 2 t1 (cos(2 pi w) - t2)
    t1, t2 = th
    inv = _reciprocal_derivs(_ar1_denom_derivs(th, om, order))
    g = np.empty_like(inv)  # derivatives of (1/d)^2 by Leibniz
    for j in range(order + 1):
        acc = np.zeros_like(inv[0])
        for i in range(j + 1):
            acc += math.comb(j, i) * inv[i] * inv[j - i]
        g[j] = acc
    out = np.zeros_like(inv[0])
    for i in range(order + 1):
        if i == 0:
            n_i = 2.0 * t1 * (np.cos(_TWO_PI * om) - t2)
        else:
            n_i = 2.0 * t1 * _TWO_PI**i * np.cos(_TWO_PI * om + i * math.pi / 2.0)
        out += math.comb(order, i) * n_i * g[order - i]
    return out


def _ar1_partial0(parent):
    return SpectralModel(
        name="ar1.d0",
        param_count=2,
        rough_points=(),
        symmetric=True,
        max_deriv_order=parent.max_deriv_order,
        value_fn=lambda th, om: _ar1_value((1.0, th[1]), om),
        deriv_fn=lambda th, om, order, sign: _ar1_deriv((1.0, th[1]), om, order, sign),
        theta_box=parent.theta_box,
        nonnegative=False,
    )


def _ar1_partial1(parent):
    return SpectralModel(
        name="ar1.d1",
        param_count=2,
        rough_points=(),
        symmetric=True,
        max_deriv_order=parent.max_deriv_order,
        value_fn=lambda th, om: _ar1_dt2_deriv(th, om, 0, 0),
        deriv_fn=_ar1_dt2_deriv,
        theta_box=parent.theta_box,
        nonnegative=False,
    )


def _make_ar1():
    return SpectralModel(
        name="ar1",
        param_count=2,
        rough_points=(),
        symmetric=True,
        max_deriv_order=12,
        value_fn=_ar1_value,
        deriv_fn=_ar1_deriv,
        theta_grad_fn=lambda th, om: np.stack(
            [_ar1_value((1.0, th[1]), om), _ar1_dt2_deriv(th, om, 0, 0)]
        ),
        partial_builders=(_ar1_partial0, _ar1_partial1),
        theta_box=lambda th: th[0] > 0 and 0 < th[1] < 1,
        box_text="t1 > 0, 0 < t2 < 1",
    )


# -- expdecay: S(w) = t1 exp(-t2 |w|) -----------------------------------------


def _expdecay_branch(om, sign):
    """+1 where the right branch (w >= 0) applies, -1 for the left branch."""
    b = np.sign(om)
    if sign != 0:
        b = np.where(om == 0.0, float(sign), b)
    else:
        b = np.where(om == 0.0, 1.0, b)  # value/0th derivative: branches agree
    return b


def _expdecay_value(th, om):
    return th[0] * np.exp(-th[1] * np.abs(om))


def _expdecay_deriv(th, om, order, sign):
    t1, t2 = th
    b = _expdecay_branch(om, sign)
    # on the branch b: S = t1 exp(-t2 b w), derivative (-b t2)^order
    return t1 * (-b * t2) ** order * np.exp(-t2 * np.abs(om))


def _expdecay_dt2_deriv(th, om, order, sign):
    # dS/dt2 = -t1 |w| exp(-t2 |w|) = -t1 b w exp(-t2 b w) on branch b
    t1, t2 = th
    b = _expdecay_branch(om, sign)
    a = -b * t2
    e = np.exp(-t2 * np.abs(om))
    # (w e^{a w})^(j) = (w a^j + j a^{j-1}) e^{a w}
    lead = om * a**order
    if order >= 1:
        lead = lead + order * a ** (order - 1)
    return -t1 * b * lead * e


def _expdecay_partial0(parent):
    return SpectralModel(
        name="expdecay.d0",
        param_count=2,
        rough_points=(0.0,),
        symmetric=True,
        max_deriv_order=parent.max_deriv_order,
        value_fn=lambda th, om: np.exp(-th[1] * np.abs(om)),
        deriv_fn=lambda th, om, order, sign: _expdecay_deriv((1.0, th[1]), om, order, sign),
        theta_box=parent.theta_box,
        nonnegative=False,
    )


def _expdecay_partial1(parent):
    return SpectralModel(
        name="expdecay.d1",
        param_count=2,
        rough_points=(0.0,),
        symmetric=True,
        max_deriv_order=parent.max_deriv_order,
        value_fn=lambda th, om: _expdecay_dt2_deriv(th, om, 0, 0),
        deriv_fn=_expdecay_dt2_deriv,
        theta_box=parent.theta_box,
        nonnegative=False,
    )


def _make_expdecay():
    return SpectralModel(
        name="expdecay",
        param_count=2,
        rough_points=(0.0,),
        symmetric=True,
        max_deriv_order=64,
        value_fn=_expdecay_value,
        deriv_fn=_expdecay_deriv,
        theta_grad_fn=lambda th, om: np.stack(
            [np.exp(-th[1] * np.abs(om)), _expdecay_dt2_deriv(th, om, 0, 0)]
        ),
        partial_builders=(_expdecay_partial0, _expdecay_partial1),
        theta_box=lambda th: th[0] > 0 and th[1] > 0,
        box_text="t1 > 0, t2 > 0",
    )


# -- custom model registration -----------------------------------------------


def _fd_deriv_from_value(value_fn):
    """One-sided finite-difference fallback, usable to order 3 only."""

    def deriv(th, om, order, sign):
        if order == 0:
            return value_fn(th, om)
        if order > 3:
            raise CapabilityError(
                "finite-difference derivative fallback supports order <= 3"
            )
        h = 1e-4 if order == 1 else (3e-4 if order == 2 else 1e-3)
        s = 1.0 if sign >= 0 else -1.0
        # one-sided stencils of consistency order 4/3/2 for orders 1/2/3
        coeff = {
            1: ([-25.0 / 12, 4.0, -3.0, 4.0 / 3, -1.0 / 4], 1.0),
            2: ([35.0 / 12, -26.0 / 3, 19.0 / 2, -14.0 / 3, 11.0 / 12], 2.0),
            3: ([-5.0 / 2, 9.0, -12.0, 7.0, -3.0 / 2], 3.0),
        }[order]
        c, pw = coeff
        acc = np.zeros_like(np.asarray(om, dtype=float))
        for i, ci in enumerate(c):
            x = np.clip(om + s * i * h, -0.5, 0.5)
            acc = acc + ci * value_fn(th, x)
        return acc * (s**order) / h**pw

    return deriv


def make_model(
    name,
    param_count,
    value_fn,
    deriv_fn=None,
    theta_grad_fn=None,
    partial_value_fns: Optional[Sequence[Callable]] = None,
    partial_deriv_fns: Optional[Sequence[Callable]] = None,
    rough_points=(),
    symmetric=True,
    max_deriv_order=None,
    theta_box=None,
    check_theta=None,
) -> SpectralModel:
    """Build a custom model from numpy-vectorized closures.

    Without an analytic ``deriv_fn`` a one-sided finite-difference fallback is
    installed; the model is then flagged ``reduced_accuracy`` and expansion
    orders are capped at 3.
    """
    reduced = deriv_fn is None
    if reduced:
        deriv_fn = _fd_deriv_from_value(value_fn)
        if max_deriv_order is None:
            max_deriv_order = 3
    elif max_deriv_order is None:
        max_deriv_order = 5

    partial_builders = None
    if partial_value_fns is not None:
        dfs = partial_deriv_fns or [None] * len(partial_value_fns)

        def build(j):
            vj, dj = partial_value_fns[j], dfs[j]

            def builder(parent):
                return SpectralModel(
                    name=f"{name}.d{j}",
                    param_count=param_count,
                    rough_points=tuple(rough_points),
                    symmetric=symmetric,
                    max_deriv_order=parent.max_deriv_order if dj else 3,
                    value_fn=vj,
                    deriv_fn=dj or _fd_deriv_from_value(vj),
                    theta_box=theta_box,
                    nonnegative=False,
                    reduced_accuracy=dj is None,
                )

            return builder

        partial_builders = tuple(build(j) for j in range(len(partial_value_fns)))

    model = SpectralModel(
        name=name,
        param_count=param_count,
        rough_points=tuple(sorted(rough_points)),
        symmetric=symmetric,
        max_deriv_order=max_deriv_order,
        value_fn=value_fn,
        deriv_fn=deriv_fn,
        theta_grad_fn=theta_grad_fn,
        partial_builders=partial_builders,
        theta_box=theta_box,
        reduced_accuracy=reduced,
    )
    _structural_checks(model, (check_theta,) if check_theta is not None else ())
    return model


_REGISTRY: dict[str, SpectralModel] = {}


def register_model(model: SpectralModel, probe_thetas=()):
    """Register a model for lookup by name (e.g. from CLI configs)."""
    _structural_checks(model, probe_thetas)
    _REGISTRY[model.name] = model
    return model


def get_model(name: str) -> SpectralModel:
    """Look up a registered model by name."""
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise UsageError(f"unknown model '{name}' (known: {known})") from None


register_model(_make_white(), probe_thetas=[(1.0,), (2.0,)])
register_model(_make_ar1(), probe_thetas=[(1.0, 0.9), (1.0, 0.5)])
register_model(_make_expdecay(), probe_thetas=[(10.0, 10.0), (5.0, 35.0)])
